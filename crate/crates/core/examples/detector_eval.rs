//! Score simulated concept detections against ground-truth boxes and print
//! the per-source AP table.

use codefusion::pipeline::data::Dataset;
use codefusion::pipeline::experiment::detector_evaluation;
use codefusion::synth::{generate, DetectorSim, SynthConfig};

fn main() -> codefusion::Result<()> {
    for recall in [0.6, 0.9] {
        let corpus = generate(&SynthConfig {
            n_users: 120,
            global_dim: 4,
            concept_background: [0.15; 9],
            detector: DetectorSim {
                recall,
                ..Default::default()
            },
            seed: 4,
            ..Default::default()
        })?;
        let data = Dataset::from_synth(&corpus, 5, 4)?;
        let report = detector_evaluation(&data, 0.5)?.expect("corpus has boxes");
        println!(
            "detector recall {recall}, {} boxes, {} detections",
            data.gt_boxes.len(),
            data.detections.len()
        );
        println!("{}", report.to_table().to_markdown());
    }
    Ok(())
}
