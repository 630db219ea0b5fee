use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use rayon::prelude::*;

use codefusion::features::{FeatureStore, Scope};
use codefusion::pipeline::analysis::{ablation_table, sensitivity_table};
use codefusion::pipeline::data::{
    cnn_table, image_tables, linguistic_table, train_cnn_task, CnnTask, Dataset,
};
use codefusion::pipeline::experiment::{
    detector_evaluation, leakage_audit, run_experiment, sensitivity_spaces, DataSource,
    ExperimentConfig, ExperimentOutput, Inputs, Resources, REPORT_FILE,
};
use codefusion::synth::generate;
use codefusion::textcnn::{Level, TextCnnModel};
use codefusion::util::write_text;
use codefusion::{Error, Result};

#[derive(Parser)]
#[command(
    name = "codefusion",
    version,
    about = "Multimodal detection of psychosocial codes in social media posts"
)]
struct Cli {
    /// Experiment configuration (JSON). Defaults apply to missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Word,
    Char,
    Both,
}

impl LevelArg {
    fn levels(self) -> Vec<Level> {
        match self {
            LevelArg::Word => vec![Level::Word],
            LevelArg::Char => vec![Level::Char],
            LevelArg::Both => vec![Level::Char, Level::Word],
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus (tweets, annotations, image records, ledger).
    GenSynthetic,
    /// Write the user-grouped fold assignment.
    Split,
    /// Write linguistic features, one vocabulary per fold.
    FeaturizeText,
    /// Train text CNNs per (level, code, fold) and save checkpoints.
    TrainCnn {
        #[arg(long, value_enum, default_value = "both")]
        level: LevelArg,
    },
    /// Extract hidden-layer features from saved CNN checkpoints.
    ExtractCnn {
        /// Checkpoint directory (default: <out>/cnn).
        #[arg(long)]
        checkpoints: Option<PathBuf>,
    },
    /// Write global, detection-count and ground-truth concept features.
    FeaturizeImage,
    /// Evaluate the concept detections against ground-truth boxes.
    EvalDetector,
    /// Run every model of the roster on every code and fold, and the analyses.
    RunExperiment {
        /// Also run the leakage audit and write audit.json.
        #[arg(long)]
        audit: bool,
    },
    /// Concept sensitivity table.
    Sensitivity,
    /// Concept ablation table.
    Ablation,
    /// Re-render the tables of an existing report.json.
    Report {
        /// Report to render (default: <out>/report.json).
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn dataset(cfg: &ExperimentConfig) -> Result<(Inputs, Dataset)> {
    let inputs = Inputs::load(&cfg.data)?;
    let data = inputs.dataset(cfg.label_rule, cfg.k, cfg.seed)?;
    Ok((inputs, data))
}

fn image_store(data: &Dataset, cfg: &ExperimentConfig) -> Result<FeatureStore> {
    let mut store = FeatureStore::new();
    for t in image_tables(data, &cfg.thresholds)? {
        store.insert(Scope::GLOBAL, t);
    }
    Ok(store)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let out = &cli.out;
    mkdir(out)?;
    match &cli.command {
        Command::GenSynthetic => {
            let DataSource::Synthetic(mut s) = cfg.data.clone() else {
                return Err(Error::invalid(
                    "gen-synthetic needs a synthetic data source",
                ));
            };
            if let Some(seed) = cli.seed {
                s.seed = seed;
            }
            let corpus = generate(&s)?;
            corpus.write(out)?;
            info!(
                "{} tweets written to {}",
                corpus.tweets.len(),
                out.display()
            );
        }
        Command::Split => {
            let (_, data) = dataset(&cfg)?;
            let json = serde_json::to_string_pretty(&data.folds).expect("folds serialize");
            write_text(&out.join("folds.json"), &json)?;
        }
        Command::FeaturizeText => {
            let (_, data) = dataset(&cfg)?;
            let res = Resources::load(&cfg)?;
            let tables: Vec<_> = (0..data.k())
                .into_par_iter()
                .map(|f| {
                    (
                        f,
                        linguistic_table(&data, f, &res.dal, &res.phrasebook, &cfg.linguistic).0,
                    )
                })
                .collect();
            let mut store = FeatureStore::new();
            for (f, t) in tables {
                store.insert(Scope::fold(f), t);
            }
            store.save(&out.join("features_linguistic.jsonl"))?;
        }
        Command::TrainCnn { level } => {
            let (_, data) = dataset(&cfg)?;
            let res = Resources::load(&cfg)?;
            let dir = out.join("cnn");
            mkdir(&dir)?;
            CnnTask::all(&level.levels(), data.k())
                .par_iter()
                .map(|&task| {
                    let (config, emb) = match task.level {
                        Level::Word => (&cfg.cnn_word, res.word_embeddings.as_ref()),
                        Level::Char => (&cfg.cnn_char, res.char_embeddings.as_ref()),
                    };
                    let model = train_cnn_task(&data, task, config, cfg.seed, emb)?;
                    info!(
                        "{}: stopped at epoch {}",
                        task.key(),
                        model.meta.stopped_epoch
                    );
                    model.save(&dir.join(task.file_name()))
                })
                .collect::<Result<Vec<()>>>()?;
        }
        Command::ExtractCnn { checkpoints } => {
            let (_, data) = dataset(&cfg)?;
            let dir = checkpoints.clone().unwrap_or_else(|| out.join("cnn"));
            let mut store = FeatureStore::new();
            let mut found = 0;
            for task in CnnTask::all(&[Level::Char, Level::Word], data.k()) {
                let path = dir.join(task.file_name());
                if !path.exists() {
                    continue;
                }
                let model = TextCnnModel::load(&path)?;
                store.insert(
                    Scope::code_fold(task.code, task.fold),
                    cnn_table(&data, &model)?,
                );
                found += 1;
            }
            if found == 0 {
                return Err(Error::invalid(format!(
                    "no CNN checkpoints in {}",
                    dir.display()
                )));
            }
            store.save(&out.join("features_cnn.jsonl"))?;
        }
        Command::FeaturizeImage => {
            let (_, data) = dataset(&cfg)?;
            image_store(&data, &cfg)?.save(&out.join("features_image.jsonl"))?;
        }
        Command::EvalDetector => {
            let (_, data) = dataset(&cfg)?;
            let report = detector_evaluation(&data, cfg.iou_threshold)?.ok_or_else(|| {
                Error::invalid("detector evaluation needs detections and ground-truth boxes")
            })?;
            report.to_table().save(out, "table5_detection")?;
        }
        Command::RunExperiment { audit } => {
            let output = run_experiment(&cfg)?;
            output.write(out)?;
            if *audit {
                let (_, data) = dataset(&cfg)?;
                let records = leakage_audit(&data, &cfg, &Resources::load(&cfg)?)?;
                let json = serde_json::to_string_pretty(&records).expect("audit serializes");
                write_text(&out.join("audit.json"), &json)?;
                if let Some(r) = records.iter().find(|r| !r.passed()) {
                    return Err(Error::Training(format!(
                        "leakage audit failed on fold {}: {}",
                        r.fold,
                        r.mismatched.join(", ")
                    )));
                }
            }
            print!("{}", output.report.to_table().to_markdown());
        }
        Command::Sensitivity => {
            let (_, data) = dataset(&cfg)?;
            let store = image_store(&data, &cfg)?;
            let spaces = sensitivity_spaces(&store, &cfg.thresholds);
            let refs: Vec<&str> = spaces.iter().map(String::as_str).collect();
            let t = sensitivity_table(&data, &store, &refs, &cfg.sensitivity_svm)?.to_table();
            t.save(out, "table3_sensitivity")?;
            print!("{}", t.to_markdown());
        }
        Command::Ablation => {
            let (_, data) = dataset(&cfg)?;
            if data.gt_boxes.is_empty() {
                return Err(Error::invalid("ablation needs ground-truth boxes"));
            }
            let store = image_store(&data, &cfg)?;
            let t = ablation_table(&data, &store, &cfg.learn.rbf, cfg.seed)?.to_table();
            t.save(out, "table4_ablation")?;
            print!("{}", t.to_markdown());
        }
        Command::Report { input } => {
            let path = input.clone().unwrap_or_else(|| out.join(REPORT_FILE));
            let output = ExperimentOutput::load(&path)?;
            output.write_tables(out)?;
            for (_, t) in output.tables() {
                println!("{}", t.to_markdown());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_training_failure() { 3 } else { 2 })
        }
    }
}
