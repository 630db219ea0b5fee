//! Fit everything for each fold twice, with the fold's test tweets present
//! and deleted, and compare hashes of all fitted state.

use codefusion::pipeline::experiment::{leakage_audit, DataSource, ExperimentConfig, Resources};
use codefusion::pipeline::spec::default_roster;
use codefusion::synth::SynthConfig;

fn main() -> codefusion::Result<()> {
    let cfg = ExperimentConfig {
        data: DataSource::Synthetic(SynthConfig {
            n_users: 25,
            tweets_per_user_max: 8,
            global_dim: 8,
            seed: 6,
            ..Default::default()
        }),
        // skip the CNNs to keep the example quick
        roster: Some(
            default_roster(&[0.1, 0.5])
                .into_iter()
                .filter(|s| !s.features.iter().any(|f| f.starts_with("cnn")))
                .collect(),
        ),
        ..Default::default()
    };
    let DataSource::Synthetic(s) = &cfg.data else {
        unreachable!()
    };
    let data = codefusion::pipeline::data::Dataset::from_synth(
        &codefusion::synth::generate(s)?,
        cfg.k,
        cfg.seed,
    )?;
    for r in leakage_audit(&data, &cfg, &Resources::load(&cfg)?)? {
        println!(
            "fold {}: {} components, {} ({}…)",
            r.fold,
            r.components,
            if r.passed() { "identical" } else { "MISMATCH" },
            &r.with_test[..12]
        );
    }
    Ok(())
}
