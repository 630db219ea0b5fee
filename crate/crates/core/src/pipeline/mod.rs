//! Cross-validated experiments: folds, feature preparation, model roster,
//! significance testing and report tables.

pub mod analysis;
pub mod baseline;
pub mod data;
pub mod experiment;
pub mod folds;
pub mod model;
pub mod report;
pub mod spec;
pub mod stats;

pub use analysis::{ablation_table, sensitivity_table, AblationReport, SensitivityReport};
pub use baseline::{run_baseline, BaselineKind};
pub use data::{Dataset, FittedState, LinguisticConfig};
pub use experiment::{
    leakage_audit, run_experiment, DataSource, ExperimentConfig, ExperimentOutput, Inputs,
    Resources,
};
pub use folds::{make_folds, user_loads, FoldAssignment, UserLoad};
pub use model::{
    run_model, run_model_fold, BlockScaling, FoldResult, LearnSettings, TrainedCodeModel,
};
pub use report::{EvalReport, ModelResult};
pub use spec::{default_roster, Fusion, Modality, ModelSpec};
pub use stats::{significance_marks, SignificanceRule};
