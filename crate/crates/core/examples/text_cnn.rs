//! Train a word-level text CNN on one code of a synthetic corpus and use its
//! hidden layer as a feature extractor.

use codefusion::corpus::{Code, TweetRecord};
use codefusion::learn::average_precision;
use codefusion::pipeline::data::Dataset;
use codefusion::synth::{generate, SynthConfig};
use codefusion::textcnn::{train_textcnn, Level, TextCnnConfig};

fn main() -> codefusion::Result<()> {
    let corpus = generate(&SynthConfig {
        n_users: 40,
        global_dim: 4,
        text_signal_strength: 0.9,
        seed: 2,
        ..Default::default()
    })?;
    let data = Dataset::from_synth(&corpus, 5, 2)?;
    let code = Code::Loss;
    let (train_idx, test_idx) = (data.train_indices(0), data.test_indices(0));
    let train: Vec<&TweetRecord> = train_idx.iter().map(|&i| &data.tweets[i]).collect();
    let cfg = TextCnnConfig {
        emb_dim: 16,
        filter_widths: vec![1, 2, 3],
        maps_per_width: 8,
        hidden_dim: 16,
        max_len: 32,
        max_epochs: 15,
        ..TextCnnConfig::new(Level::Word)
    };
    let model = train_textcnn(&train, &data.code_labels(code, &train_idx), &cfg, None)?;
    println!(
        "stopped at epoch {} (best {})",
        model.meta.stopped_epoch, model.meta.best_epoch
    );

    let scores: Vec<f64> = test_idx
        .iter()
        .map(|&i| model.predict_prob(&data.tweets[i].text))
        .collect::<codefusion::Result<_>>()?;
    let ap = average_precision(&scores, &data.code_labels(code, &test_idx));
    println!("held-out AP for {code}: {:.3}", ap.unwrap_or(f64::NAN));

    let features = model.extract_features(&data.tweets[test_idx[0]].text)?;
    println!("hidden features ({}): {:.3?}", features.len(), features);
    Ok(())
}
