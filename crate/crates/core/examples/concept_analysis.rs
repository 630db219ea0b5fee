//! Which local concepts drive each code: linear-SVM coefficients on concept
//! counts, and the AP lost when one concept is removed.

use codefusion::corpus::{Code, Concept};
use codefusion::features::{FeatureStore, Scope};
use codefusion::learn::{LinearSvmConfig, RbfSvmConfig};
use codefusion::pipeline::analysis::{ablation_table, sensitivity_table};
use codefusion::pipeline::data::{image_tables, Dataset};
use codefusion::pipeline::spec::GT_CONCEPTS;
use codefusion::synth::{generate, SynthConfig};

fn main() -> codefusion::Result<()> {
    let corpus = generate(&SynthConfig {
        n_users: 80,
        global_dim: 4,
        concept_links: vec![
            (Code::Aggression, Concept::Handgun),
            (Code::Aggression, Concept::HandGesture),
            (Code::SubstanceUse, Concept::Joint),
        ],
        image_signal_strength: 0.8,
        seed: 9,
        ..Default::default()
    })?;
    let data = Dataset::from_synth(&corpus, 5, 9)?;
    let mut store = FeatureStore::new();
    for t in image_tables(&data, &[0.5])? {
        store.insert(Scope::GLOBAL, t);
    }
    let sens = sensitivity_table(
        &data,
        &store,
        &["counts@0.5", GT_CONCEPTS],
        &LinearSvmConfig::default(),
    )?;
    println!("{}", sens.to_table().to_markdown());
    let abl = ablation_table(&data, &store, &RbfSvmConfig::default(), 9)?;
    println!("{}", abl.to_table().to_markdown());
    Ok(())
}
