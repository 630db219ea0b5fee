//! Generate a synthetic corpus, summarize it and write it as JSONL files.
//!
//! cargo run --example synthetic_corpus -- /tmp/corpus

use codefusion::corpus::{Code, LabelRule};
use codefusion::pipeline::data::Dataset;
use codefusion::synth::{generate, SynthConfig};

fn main() -> codefusion::Result<()> {
    let cfg = SynthConfig {
        n_users: 30,
        global_dim: 16,
        seed: 11,
        ..Default::default()
    };
    let corpus = generate(&cfg)?;
    let labels = Dataset::labels_from(&corpus.tweets, &corpus.annotations, LabelRule::AnyPositive)?;
    println!(
        "{} tweets, {} annotations, {} ground-truth boxes",
        corpus.tweets.len(),
        corpus.annotations.len(),
        corpus.gt_boxes.len()
    );
    for code in Code::ALL {
        let n = labels.iter().filter(|l| l[code.index()]).count();
        println!(
            "  {:<14} {:>4} positives ({:.2})",
            code.name(),
            n,
            n as f64 / labels.len() as f64
        );
    }
    for t in corpus.tweets.iter().take(5) {
        println!("  [{}] {}", t.user_id, t.text);
    }
    if let Some(dir) = std::env::args().nth(1) {
        std::fs::create_dir_all(&dir).map_err(|e| codefusion::Error::io(&dir, e))?;
        corpus.write(dir.as_ref())?;
        println!("written to {dir}");
    }
    Ok(())
}
