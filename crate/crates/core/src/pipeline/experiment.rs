//! End-to-end experiment: inputs, feature construction, the model roster on
//! every (model, code, fold), analyses, the leakage audit and report files.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};

use super::analysis::{ablation_table, sensitivity_table, AblationReport, SensitivityReport};
use super::data::{
    cnn_hash, cnn_table, fold_key, image_tables, linguistic_table, train_cnn_task, vocab_hash,
    CnnTask, Dataset, FittedState, LinguisticConfig,
};
use super::folds::{make_folds, user_loads};
use super::model::{run_model_fold, FoldResult, LearnSettings};
use super::report::{EvalReport, ModelResult};
use super::spec::{
    counts_space, default_roster, ModelSpec, CNN_CHAR, CNN_WORD, GT_CONCEPTS, LINGUISTIC,
};
use super::stats::SignificanceRule;
use crate::corpus::{
    corpus_stats, derive_labels_for, load_corpus, Code, CodeAnnotation, CorpusStats, LabelRule,
    Source, TweetRecord,
};
use crate::deteval::{detection_report, DetectionReport, DEFAULT_IOU_THRESHOLD};
use crate::error::{Error, Result};
use crate::features::{FeatureStore, Scope};
use crate::imfeat::{
    load_boxes, load_detections, load_global, ConceptBox, ConceptDetection, GlobalFeatures,
};
use crate::learn::LinearSvmConfig;
use crate::lingfeat::{toy_dal, toy_phrasebook, Dal, Phrasebook};
use crate::synth::{
    generate, SynthConfig, ANNOTATIONS_FILE, DETECTIONS_FILE, GLOBAL_FILE, GT_BOXES_FILE,
    TWEETS_FILE,
};
use crate::table::Table;
use crate::textcnn::{Embeddings, Level, TextCnnConfig};
use crate::util::{derive_seed, write_text};

pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// Generate a corpus in memory.
    Synthetic(SynthConfig),
    /// A directory in the generator's file layout. Only tweets and
    /// annotations are required.
    Dir { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub seed: u64,
    pub k: usize,
    pub label_rule: LabelRule,
    pub thresholds: Vec<f64>,
    pub linguistic: LinguisticConfig,
    /// CSV `word,pleasantness,activation,imagery`; the bundled toy DAL when absent.
    pub dal: Option<PathBuf>,
    /// CSV `token,expansion`; the bundled toy phrasebook when absent.
    pub phrasebook: Option<PathBuf>,
    pub word_embeddings: Option<PathBuf>,
    pub char_embeddings: Option<PathBuf>,
    /// Partial objects are completed from the word-level defaults.
    #[serde(deserialize_with = "word_cnn")]
    pub cnn_word: TextCnnConfig,
    /// Partial objects are completed from the character-level defaults.
    #[serde(deserialize_with = "char_cnn")]
    pub cnn_char: TextCnnConfig,
    pub learn: LearnSettings,
    pub significance: SignificanceRule,
    /// The default roster when absent.
    pub roster: Option<Vec<ModelSpec>>,
    pub sensitivity_svm: LinearSvmConfig,
    pub iou_threshold: f64,
    /// Precomputed feature blocks; spaces found here are not rebuilt.
    pub feature_files: Vec<PathBuf>,
    /// Sensitivity, ablation and detector evaluation.
    pub analyses: bool,
}

fn cnn_with_defaults<'de, D: Deserializer<'de>>(
    level: Level,
    d: D,
) -> std::result::Result<TextCnnConfig, D::Error> {
    let patch = serde_json::Value::deserialize(d)?;
    let mut base = serde_json::to_value(TextCnnConfig::new(level)).expect("config serializes");
    match (&mut base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => b.extend(p),
        _ => return Err(D::Error::custom("CNN settings must be an object")),
    }
    serde_json::from_value(base).map_err(D::Error::custom)
}

fn word_cnn<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<TextCnnConfig, D::Error> {
    cnn_with_defaults(Level::Word, d)
}

fn char_cnn<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<TextCnnConfig, D::Error> {
    cnn_with_defaults(Level::Char, d)
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataSource::Synthetic(SynthConfig::default()),
            seed: 0,
            k: 5,
            label_rule: LabelRule::AnyPositive,
            thresholds: vec![0.1, 0.5],
            linguistic: LinguisticConfig::default(),
            dal: None,
            phrasebook: None,
            word_embeddings: None,
            char_embeddings: None,
            cnn_word: TextCnnConfig::new(Level::Word),
            cnn_char: TextCnnConfig::new(Level::Char),
            learn: LearnSettings::default(),
            significance: SignificanceRule::PairedT,
            roster: None,
            sensitivity_svm: LinearSvmConfig::default(),
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            feature_files: Vec::new(),
            analyses: true,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn roster(&self) -> Vec<ModelSpec> {
        self.roster
            .clone()
            .unwrap_or_else(|| default_roster(&self.thresholds))
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::invalid("k must be at least 2"));
        }
        for &t in &self.thresholds {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::invalid(format!("threshold {t} not in [0, 1]")));
            }
        }
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return Err(Error::invalid("iou_threshold must be in (0, 1]"));
        }
        if self.cnn_word.level != Level::Word || self.cnn_char.level != Level::Char {
            return Err(Error::invalid(
                "cnn_word / cnn_char must have level word / char",
            ));
        }
        self.cnn_word.validate()?;
        self.cnn_char.validate()?;
        if let DataSource::Synthetic(s) = &self.data {
            s.validate()?;
        }
        for spec in self.roster() {
            spec.validate()?;
        }
        Ok(())
    }
}

/// Raw experiment inputs.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub tweets: Vec<TweetRecord>,
    pub annotations: Vec<CodeAnnotation>,
    pub global: Option<GlobalFeatures>,
    pub detections: Vec<ConceptDetection>,
    pub gt_boxes: Vec<ConceptBox>,
}

impl Inputs {
    pub fn load(source: &DataSource) -> Result<Self> {
        match source {
            DataSource::Synthetic(cfg) => {
                let c = generate(cfg)?;
                let global = if c.global_features.is_empty() {
                    None
                } else {
                    Some(GlobalFeatures::from_records(c.global_features)?)
                };
                Ok(Self {
                    tweets: c.tweets,
                    annotations: c.annotations,
                    global,
                    detections: c.detections,
                    gt_boxes: c.gt_boxes,
                })
            }
            DataSource::Dir { path } => Self::load_dir(path),
        }
    }

    pub fn load_dir(dir: &Path) -> Result<Self> {
        let (tweets, annotations) =
            load_corpus(&dir.join(TWEETS_FILE), &dir.join(ANNOTATIONS_FILE))?;
        let optional = |name: &str| {
            let p = dir.join(name);
            p.exists().then_some(p)
        };
        Ok(Self {
            tweets,
            annotations,
            global: optional(GLOBAL_FILE).map(|p| load_global(&p)).transpose()?,
            detections: optional(DETECTIONS_FILE)
                .map(|p| load_detections(&p))
                .transpose()?
                .unwrap_or_default(),
            gt_boxes: optional(GT_BOXES_FILE)
                .map(|p| load_boxes(&p))
                .transpose()?
                .unwrap_or_default(),
        })
    }

    /// Labels under `rule`, user folds balanced on them, and the image records.
    pub fn dataset(&self, rule: LabelRule, k: usize, seed: u64) -> Result<Dataset> {
        let labels = Dataset::labels_from(&self.tweets, &self.annotations, rule)?;
        let folds = make_folds(
            &user_loads(&self.tweets, &labels),
            k,
            derive_seed(seed, &["folds"]),
        )?;
        Dataset::new(
            self.tweets.clone(),
            labels,
            folds,
            self.global.clone(),
            self.detections.clone(),
            self.gt_boxes.clone(),
        )
    }

    pub fn corpus_stats(&self) -> Result<CorpusStats> {
        let ids: Vec<&str> = self.tweets.iter().map(|t| t.tweet_id.as_str()).collect();
        let any = derive_labels_for(&ids, &self.annotations, LabelRule::AnyPositive)?;
        let maj = derive_labels_for(&ids, &self.annotations, LabelRule::Majority)?;
        let stats = corpus_stats(&self.tweets, &any, &maj);
        Ok(if self.gt_boxes.is_empty() {
            stats
        } else {
            stats.with_concepts(&self.tweets, &self.gt_boxes)
        })
    }
}

/// Lexicons and embeddings shared by all folds.
#[derive(Debug, Clone)]
pub struct Resources {
    pub dal: Dal,
    pub phrasebook: Phrasebook,
    pub word_embeddings: Option<Embeddings>,
    pub char_embeddings: Option<Embeddings>,
}

impl Resources {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let dal = match &cfg.dal {
            Some(p) => Dal::load(p)?,
            None => toy_dal(),
        };
        let phrasebook = match &cfg.phrasebook {
            Some(p) => Phrasebook::load(p)?,
            None => toy_phrasebook(),
        };
        phrasebook.warn_unresolved(&dal);
        Ok(Self {
            dal,
            phrasebook,
            word_embeddings: Embeddings::load_or_warn(cfg.word_embeddings.as_deref()),
            char_embeddings: Embeddings::load_or_warn(cfg.char_embeddings.as_deref()),
        })
    }
}

/// Feature spaces the roster reads.
pub fn needed_spaces(roster: &[ModelSpec]) -> BTreeSet<String> {
    roster
        .iter()
        .flat_map(|s| s.features.iter().cloned())
        .collect()
}

/// Fills `store` with every needed space not already present, fitting
/// fold-dependent featurizers only for `folds`.
pub fn build_features(
    data: &Dataset,
    cfg: &ExperimentConfig,
    res: &Resources,
    needed: &BTreeSet<String>,
    folds: &[usize],
    store: &mut FeatureStore,
) -> Result<FittedState> {
    let mut state = FittedState::default();
    let mut image_spaces = Vec::new();
    for t in image_tables(data, &cfg.thresholds)? {
        if !store.contains_space(&t.space) {
            image_spaces.push(t.space.clone());
            store.insert(Scope::GLOBAL, t);
        }
    }
    if !image_spaces.is_empty() {
        info!("image features: {}", image_spaces.join(", "));
    }

    if needed.contains(LINGUISTIC) && !store.contains_space(LINGUISTIC) {
        let tables: Vec<_> = folds
            .par_iter()
            .map(|&f| {
                (
                    f,
                    linguistic_table(data, f, &res.dal, &res.phrasebook, &cfg.linguistic),
                )
            })
            .collect();
        for (f, (table, vocab)) in tables {
            state.insert(fold_key(&["vocab"], f), vocab_hash(&vocab));
            store.insert(Scope::fold(f), table);
        }
        info!("linguistic features for {} folds", folds.len());
    }

    let mut levels = Vec::new();
    for (space, level) in [(CNN_CHAR, Level::Char), (CNN_WORD, Level::Word)] {
        if needed.contains(space) && !store.contains_space(space) {
            levels.push(level);
        }
    }
    let tasks: Vec<CnnTask> = CnnTask::all(&levels, data.k())
        .into_iter()
        .filter(|t| folds.contains(&t.fold))
        .collect();
    if !tasks.is_empty() {
        info!("training {} text CNNs", tasks.len());
    }
    let trained: Vec<_> = tasks
        .par_iter()
        .map(|&task| {
            let (config, emb) = match task.level {
                Level::Word => (&cfg.cnn_word, res.word_embeddings.as_ref()),
                Level::Char => (&cfg.cnn_char, res.char_embeddings.as_ref()),
            };
            let model = train_cnn_task(data, task, config, cfg.seed, emb)?;
            let table = cnn_table(data, &model)?;
            Ok((task, cnn_hash(&model), table))
        })
        .collect::<Result<_>>()?;
    for (task, hash, table) in trained {
        state.insert(task.key(), hash);
        store.insert(Scope::code_fold(task.code, task.fold), table);
    }
    Ok(state)
}

/// Every (model, code, fold) for the given folds, in roster order.
pub fn run_roster(
    data: &Dataset,
    store: &FeatureStore,
    roster: &[ModelSpec],
    settings: &LearnSettings,
    seed: u64,
    folds: &[usize],
) -> Result<(Vec<(usize, Code, FoldResult)>, FittedState)> {
    let mut tasks = Vec::new();
    for (m, _) in roster.iter().enumerate() {
        for code in Code::ALL {
            for &f in folds {
                tasks.push((m, code, f));
            }
        }
    }
    let results: Vec<(usize, Code, FoldResult)> = tasks
        .par_iter()
        .map(|&(m, code, f)| {
            Ok((
                m,
                code,
                run_model_fold(&roster[m], code, f, data, store, settings, seed)?,
            ))
        })
        .collect::<Result<_>>()?;
    let mut state = FittedState::default();
    for (m, code, r) in &results {
        let spec = &roster[*m];
        state.insert(
            fold_key(
                &["model", &spec.name, spec.fusion.name(), code.name()],
                r.fold,
            ),
            r.model.fingerprint(),
        );
    }
    Ok((results, state))
}

/// Fitted state for `fold` with the test fold present and with it deleted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub fold: usize,
    pub with_test: String,
    pub without_test: String,
    pub components: usize,
    /// Components whose hash changed.
    pub mismatched: Vec<String>,
}

impl AuditRecord {
    pub fn passed(&self) -> bool {
        self.with_test == self.without_test && self.mismatched.is_empty()
    }
}

fn fold_state(
    data: &Dataset,
    cfg: &ExperimentConfig,
    res: &Resources,
    roster: &[ModelSpec],
    fold: usize,
) -> Result<FittedState> {
    let mut store = FeatureStore::new();
    let mut state = build_features(data, cfg, res, &needed_spaces(roster), &[fold], &mut store)?;
    let (_, models) = run_roster(data, &store, roster, &cfg.learn, cfg.seed, &[fold])?;
    state.merge(models);
    Ok(state)
}

/// Hashes every fitted component of each fold (vocabulary, CNNs, selections,
/// standardizers, SVMs, calibrators) with and without that fold's test
/// tweets in the data.
pub fn leakage_audit(
    data: &Dataset,
    cfg: &ExperimentConfig,
    res: &Resources,
) -> Result<Vec<AuditRecord>> {
    let roster = cfg.roster();
    (0..data.k())
        .map(|fold| {
            let a = fold_state(data, cfg, res, &roster, fold)?;
            let b = fold_state(&data.without_fold(fold), cfg, res, &roster, fold)?;
            let mut keys: BTreeSet<&String> = a.entries.keys().collect();
            keys.extend(b.entries.keys());
            let mismatched = keys
                .into_iter()
                .filter(|k| a.entries.get(*k) != b.entries.get(*k))
                .cloned()
                .collect();
            Ok(AuditRecord {
                fold,
                with_test: a.fold_hash(fold),
                without_test: b.fold_hash(fold),
                components: a.entries.len(),
                mismatched,
            })
        })
        .collect()
}

/// Everything `run-experiment` reports; serialized as `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub corpus: CorpusStats,
    pub results: Vec<ModelResult>,
    pub report: EvalReport,
    pub sensitivity: Option<SensitivityReport>,
    pub ablation: Option<AblationReport>,
    pub detection: Option<DetectionReport>,
    pub fitted_state: FittedState,
}

pub fn corpus_table(stats: &CorpusStats) -> Table {
    let rows = stats.table_rows();
    let mut t = Table::new(
        "Corpus statistics: concept instances and code positives, any-positive (majority)",
        rows[0].clone(),
    );
    for r in &rows[1..] {
        t.push(r.clone());
    }
    t
}

/// Image id to fold and to source, for the detector evaluation.
pub fn image_maps(data: &Dataset) -> (HashMap<String, usize>, HashMap<String, Source>) {
    let mut fold = HashMap::new();
    let mut source = HashMap::new();
    for (t, &f) in data.tweets.iter().zip(&data.tweet_fold) {
        if let Some(img) = &t.image_id {
            fold.insert(img.clone(), f);
            source.insert(img.clone(), t.source);
        }
    }
    (fold, source)
}

pub fn detector_evaluation(data: &Dataset, iou_threshold: f64) -> Result<Option<DetectionReport>> {
    if data.detections.is_empty() || data.gt_boxes.is_empty() {
        return Ok(None);
    }
    let (fold, source) = image_maps(data);
    detection_report(
        &data.detections,
        &data.gt_boxes,
        &fold,
        &source,
        data.k(),
        iou_threshold,
    )
    .map(Some)
}

/// Concept spaces available for the sensitivity table, in column order.
pub fn sensitivity_spaces(store: &FeatureStore, thresholds: &[f64]) -> Vec<String> {
    let mut spaces: Vec<String> = thresholds.iter().map(|&t| counts_space(t)).collect();
    spaces.push(GT_CONCEPTS.to_string());
    spaces.retain(|s| store.contains_space(s));
    spaces
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let inputs = Inputs::load(&cfg.data)?;
    let data = inputs.dataset(cfg.label_rule, cfg.k, cfg.seed)?;
    let res = Resources::load(cfg)?;
    let roster = cfg.roster();
    info!(
        "{} tweets, {} users, {} models",
        data.len(),
        data.folds.user_fold.len(),
        roster.len()
    );

    let paths: Vec<&Path> = cfg.feature_files.iter().map(PathBuf::as_path).collect();
    let mut store = FeatureStore::load(&paths)?;
    let all_folds: Vec<usize> = (0..data.k()).collect();
    let mut state = build_features(
        &data,
        cfg,
        &res,
        &needed_spaces(&roster),
        &all_folds,
        &mut store,
    )?;

    let (fold_results, model_state) =
        run_roster(&data, &store, &roster, &cfg.learn, cfg.seed, &all_folds)?;
    state.merge(model_state);
    let mut results: Vec<ModelResult> = roster
        .iter()
        .map(|spec| ModelResult {
            spec: spec.clone(),
            folds: [Vec::new(), Vec::new(), Vec::new()],
        })
        .collect();
    for (m, code, r) in fold_results {
        results[m].folds[code.index()].push(r.metrics);
    }
    let report = EvalReport::build(&results, cfg.significance)?;

    let (mut sensitivity, mut ablation, mut detection) = (None, None, None);
    if cfg.analyses {
        let spaces = sensitivity_spaces(&store, &cfg.thresholds);
        let space_refs: Vec<&str> = spaces.iter().map(String::as_str).collect();
        if !data.detections.is_empty() || !data.gt_boxes.is_empty() {
            sensitivity = Some(sensitivity_table(
                &data,
                &store,
                &space_refs,
                &cfg.sensitivity_svm,
            )?);
        }
        if data.gt_boxes.is_empty() {
            warn!("no ground-truth boxes: skipping ablation");
        } else {
            ablation = Some(ablation_table(&data, &store, &cfg.learn.rbf, cfg.seed)?);
        }
        detection = detector_evaluation(&data, cfg.iou_threshold)?;
    }
    Ok(ExperimentOutput {
        config: cfg.clone(),
        corpus: inputs.corpus_stats()?,
        results,
        report,
        sensitivity,
        ablation,
        detection,
        fitted_state: state,
    })
}

impl ExperimentOutput {
    pub fn tables(&self) -> Vec<(&'static str, Table)> {
        let mut out = vec![
            ("table1_corpus", corpus_table(&self.corpus)),
            ("table2_codes", self.report.to_table()),
        ];
        if let Some(s) = &self.sensitivity {
            out.push(("table3_sensitivity", s.to_table()));
        }
        if let Some(a) = &self.ablation {
            out.push(("table4_ablation", a.to_table()));
        }
        if let Some(d) = &self.detection {
            out.push(("table5_detection", d.to_table()));
        }
        out
    }

    /// Writes `report.json` and every table as CSV and markdown.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = serde_json::to_string_pretty(self).expect("report serializes");
        write_text(&dir.join(REPORT_FILE), &json)?;
        self.write_tables(dir)
    }

    pub fn write_tables(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (stem, t) in self.tables() {
            t.save(dir, stem)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn small_config() -> ExperimentConfig {
        let mut cnn_word = TextCnnConfig::new(Level::Word);
        let mut cnn_char = TextCnnConfig::new(Level::Char);
        for c in [&mut cnn_word, &mut cnn_char] {
            c.emb_dim = 8;
            c.filter_widths = vec![1, 2];
            c.maps_per_width = 4;
            c.hidden_dim = 6;
            c.max_epochs = 2;
            c.max_len = 24;
        }
        ExperimentConfig {
            data: DataSource::Synthetic(SynthConfig {
                n_users: 20,
                tweets_per_user_max: 6,
                global_dim: 10,
                seed: 7,
                ..Default::default()
            }),
            cnn_word,
            cnn_char,
            ..Default::default()
        }
    }

    #[test]
    fn config_round_trips_and_fills_defaults() {
        let cfg = small_config();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
        let partial: ExperimentConfig =
            serde_json::from_str(r#"{"seed": 9, "data": {"kind": "dir", "path": "x"}}"#).unwrap();
        assert_eq!(partial.seed, 9);
        assert_eq!(partial.k, 5);
        assert_eq!(partial.roster().len(), 15);
        let partial: ExperimentConfig =
            serde_json::from_str(r#"{"cnn_char": {"max_epochs": 3}}"#).unwrap();
        assert_eq!(partial.cnn_char.max_epochs, 3);
        assert_eq!(partial.cnn_char.max_len, 280);
        assert_eq!(partial.cnn_char.level, Level::Char);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = ExperimentConfig {
            thresholds: vec![1.5],
            ..small_config()
        };
        assert!(matches!(cfg.validate(), Err(Error::Invalid(_))));
        let cfg = ExperimentConfig {
            k: 1,
            ..small_config()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn experiment_without_cnns_produces_all_tables() {
        let roster: Vec<ModelSpec> = default_roster(&[0.1, 0.5])
            .into_iter()
            .filter(|s| !s.features.iter().any(|f| f.starts_with("cnn")))
            .collect();
        let cfg = ExperimentConfig {
            roster: Some(roster),
            ..small_config()
        };
        let out = run_experiment(&cfg).unwrap();
        let names: Vec<&str> = out.tables().iter().map(|(n, _)| *n).collect();
        assert_eq!(
            names,
            [
                "table1_corpus",
                "table2_codes",
                "table3_sensitivity",
                "table4_ablation",
                "table5_detection"
            ]
        );
        assert_eq!(out.report.models.len(), 9);
        let dir = tempfile::tempdir().unwrap();
        out.write(dir.path()).unwrap();
        let back = ExperimentOutput::load(&dir.path().join(REPORT_FILE)).unwrap();
        assert_eq!(back.report, out.report);
    }
}
