//! The whole experiment from a JSON configuration: features, every roster
//! model on every code and fold, and the analysis tables.
//!
//! cargo run --release --example full_experiment -- examples/configs/small.json out/

use std::path::PathBuf;

use codefusion::pipeline::experiment::{run_experiment, ExperimentConfig};

fn main() -> codefusion::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args.next().map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/configs/small.json")
    });
    let cfg = ExperimentConfig::load(&config)?;
    let out = run_experiment(&cfg)?;
    for (_, table) in out.tables() {
        println!("{}", table.to_markdown());
    }
    if let Some(dir) = args.next() {
        out.write(dir.as_ref())?;
        println!("report written to {dir}");
    }
    Ok(())
}
