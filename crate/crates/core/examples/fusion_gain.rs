//! Early fusion of text and image features on a corpus where the two
//! modalities carry different codes: text signals loss, images signal
//! aggression and substance use.

use std::time::Instant;

use codefusion::corpus::Code;
use codefusion::pipeline::experiment::{run_experiment, DataSource, ExperimentConfig};
use codefusion::pipeline::spec::{Fusion, ModelSpec, CNN_CHAR, CNN_WORD, GLOBAL, LINGUISTIC};
use codefusion::pipeline::Modality;
use codefusion::synth::SynthConfig;
use codefusion::textcnn::{Level, TextCnnConfig};

fn small_cnn(level: Level) -> TextCnnConfig {
    TextCnnConfig {
        emb_dim: 16,
        filter_widths: vec![1, 2, 3],
        maps_per_width: 8,
        hidden_dim: 16,
        max_epochs: 6,
        max_len: if level == Level::Word { 32 } else { 96 },
        ..TextCnnConfig::new(level)
    }
}

fn main() -> codefusion::Result<()> {
    let text: Vec<String> = [LINGUISTIC, CNN_CHAR, CNN_WORD].map(String::from).to_vec();
    let visual: Vec<String> = [GLOBAL, "counts@0.1", "counts@0.5"]
        .map(String::from)
        .to_vec();
    let both: Vec<String> = text.iter().chain(&visual).cloned().collect();
    let cfg = ExperimentConfig {
        data: DataSource::Synthetic(SynthConfig {
            n_users: 110,
            global_dim: 64,
            text_codes: [false, true, false],
            image_codes: [true, false, true],
            text_signal_strength: 0.9,
            image_signal_strength: 0.9,
            seed: 3,
            ..Default::default()
        }),
        seed: 1,
        cnn_word: small_cnn(Level::Word),
        cnn_char: small_cnn(Level::Char),
        roster: Some(vec![
            ModelSpec::fused("all textual", Modality::Text, &text, Fusion::Early),
            ModelSpec::fused("all visual", Modality::Image, &visual, Fusion::Early),
            ModelSpec::fused(
                "all textual + visual",
                Modality::Multimodal,
                &both,
                Fusion::Early,
            ),
        ]),
        analyses: false,
        ..Default::default()
    };
    let start = Instant::now();
    let out = run_experiment(&cfg)?;
    println!("{}", out.report.to_table().to_markdown());
    for m in &out.report.models {
        let aps: Vec<String> = Code::ALL
            .iter()
            .map(|c| format!("{} {:.3}", c, m.codes[c.index()].ap.unwrap_or(f64::NAN)))
            .collect();
        println!(
            "{:<22} mAP {:.3}  [{}]",
            m.spec.name,
            m.map.unwrap_or(f64::NAN),
            aps.join(", ")
        );
    }
    println!(
        "{} tweets, {:.1}s",
        out.corpus.n_tweets,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
