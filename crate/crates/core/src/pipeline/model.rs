//! Training and evaluating one roster model for one code on every fold.

use serde::{Deserialize, Serialize};

use super::baseline::{run_baseline, BaselineKind};
use super::data::{dense_rows, sparse_rows, Dataset};
use super::spec::{Fusion, ModelSpec, LINGUISTIC};
use crate::corpus::Code;
use crate::error::{Error, Result};
use crate::features::FeatureStore;
use crate::learn::{
    anova_f_select_sparse, classification_metrics, fit_standardizer, train_calibrated_linear,
    train_calibrated_rbf, train_linear_svm, LinearSvmConfig, LinearSvmModel, Metrics, Platt,
    RbfSvmConfig, RbfSvmModel, Standardizer,
};
use crate::util::{derive_seed, StateHasher};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnSettings {
    /// Linear SVM C for linguistic features, ordered aggression, loss, substance use.
    pub linear_c: [f64; 3],
    /// Columns kept by the ANOVA F-test on linguistic features.
    pub k_select: usize,
    pub rbf: RbfSvmConfig,
    pub linear: LinearSvmConfig,
}

impl Default for LearnSettings {
    fn default() -> Self {
        Self {
            linear_c: [0.01, 0.03, 0.003],
            k_select: 1300,
            rbf: RbfSvmConfig::default(),
            linear: LinearSvmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Classifier {
    Linear {
        model: LinearSvmModel,
        platt: Option<Platt>,
    },
    Rbf(RbfSvmModel),
}

/// Kernel-model input scaling. Each feature space is standardized on its
/// own, keeps the columns that vary on the training rows, and is weighted by
/// 1/sqrt(kept columns) so that every space adds the same expected amount to
/// a squared distance. With a single space the weight cancels against the
/// default kernel width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockScaling {
    pub standardizers: Vec<Standardizer>,
    pub kept: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
}

impl BlockScaling {
    fn fit(parts: &[&[Vec<f64>]]) -> Result<Self> {
        let mut standardizers = Vec::with_capacity(parts.len());
        let mut kept = Vec::with_capacity(parts.len());
        let mut weights = Vec::with_capacity(parts.len());
        for x in parts {
            let s = fit_standardizer(x)?;
            let k: Vec<usize> = (0..s.sd.len()).filter(|&j| s.sd[j] > 0.0).collect();
            weights.push(if k.is_empty() {
                0.0
            } else {
                1.0 / (k.len() as f64).sqrt()
            });
            kept.push(k);
            standardizers.push(s);
        }
        Ok(Self {
            standardizers,
            kept,
            weights,
        })
    }

    /// Maps one row per space to the scaled, concatenated kernel input.
    pub fn apply(&self, parts: &[&[f64]]) -> Vec<f64> {
        let mut out = Vec::new();
        for (i, part) in parts.iter().enumerate() {
            let z = self.standardizers[i].apply_row(part);
            out.extend(self.kept[i].iter().map(|&j| z[j] * self.weights[i]));
        }
        out
    }

    fn fingerprint(&self, h: &mut StateHasher) {
        for ((s, k), w) in self.standardizers.iter().zip(&self.kept).zip(&self.weights) {
            s.fingerprint(h);
            h.indices(k);
            h.floats(&[*w]);
        }
    }
}

/// One classifier with its input preparation: per-space column selection,
/// then, for kernel models, per-space scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedBlock {
    pub spaces: Vec<String>,
    pub selections: Vec<Option<Vec<usize>>>,
    pub scaling: Option<BlockScaling>,
    pub classifier: Classifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrainedCodeModel {
    Baseline {
        kind: BaselineKind,
        prior: f64,
    },
    Single(FittedBlock),
    Late {
        members: Vec<FittedBlock>,
        meta: FittedBlock,
    },
}

impl FittedBlock {
    fn fingerprint(&self, h: &mut StateHasher) {
        for (s, sel) in self.spaces.iter().zip(&self.selections) {
            h.text(s);
            if let Some(sel) = sel {
                h.indices(sel);
            }
        }
        if let Some(s) = &self.scaling {
            s.fingerprint(h);
        }
        match &self.classifier {
            Classifier::Linear { model, platt } => {
                model.fingerprint(h);
                if let Some(p) = platt {
                    h.floats(&[p.a, p.b]);
                }
            }
            Classifier::Rbf(m) => m.fingerprint(h),
        }
    }
}

impl TrainedCodeModel {
    pub fn fingerprint(&self) -> String {
        let mut h = StateHasher::new();
        match self {
            TrainedCodeModel::Baseline { prior, .. } => {
                h.floats(&[*prior]);
            }
            TrainedCodeModel::Single(b) => b.fingerprint(&mut h),
            TrainedCodeModel::Late { members, meta } => {
                for m in members {
                    m.fingerprint(&mut h);
                }
                meta.fingerprint(&mut h);
            }
        }
        h.finish_hex()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub metrics: Metrics,
    pub n_test: usize,
    pub model: TrainedCodeModel,
}

/// Train/test matrices of one feature space for one fold.
struct Block {
    space: String,
    selection: Option<Vec<usize>>,
    train: Vec<Vec<f64>>,
    test: Vec<Vec<f64>>,
}

fn prepare_block(
    space: &str,
    code: Code,
    fold: usize,
    data: &Dataset,
    store: &FeatureStore,
    train_idx: &[usize],
    test_idx: &[usize],
    y: &[bool],
    k_select: usize,
) -> Result<Block> {
    let table = store.get(space, code, fold)?;
    if space == LINGUISTIC {
        let tr = sparse_rows(data, table, train_idx)?;
        let selection = anova_f_select_sparse(&tr, y, k_select)?;
        let te = sparse_rows(data, table, test_idx)?;
        Ok(Block {
            space: space.into(),
            train: tr.iter().map(|r| r.select(&selection)).collect(),
            test: te.iter().map(|r| r.select(&selection)).collect(),
            selection: Some(selection),
        })
    } else {
        Ok(Block {
            space: space.into(),
            selection: None,
            train: dense_rows(data, table, train_idx)?,
            test: dense_rows(data, table, test_idx)?,
        })
    }
}

/// Test-fold outputs of a fitted block: continuous scores, hard predictions
/// and calibrated probabilities.
struct Outputs {
    scores: Vec<f64>,
    preds: Vec<bool>,
    probs: Vec<f64>,
    /// Out-of-fold calibrated probabilities on the training rows.
    train_probs: Vec<f64>,
}

fn fit_linear(
    blocks: Vec<Block>,
    y: &[bool],
    cfg: &LinearSvmConfig,
    calibrate: bool,
    seed: u64,
) -> Result<(FittedBlock, Outputs)> {
    let (spaces, selections, train, test) = concat(blocks);
    let (model, platt, train_probs) = if calibrate {
        let c = train_calibrated_linear(&train, y, cfg, seed)?;
        (c.model, Some(c.platt), c.oof_probs)
    } else {
        (train_linear_svm(&train, y, cfg)?, None, Vec::new())
    };
    let scores = model.decisions(&test);
    let preds = scores.iter().map(|&s| s > 0.0).collect();
    let probs = match platt {
        Some(p) => scores.iter().map(|&s| p.prob(s)).collect(),
        None => Vec::new(),
    };
    let fitted = FittedBlock {
        spaces,
        selections,
        scaling: None,
        classifier: Classifier::Linear { model, platt },
    };
    Ok((
        fitted,
        Outputs {
            scores,
            preds,
            probs,
            train_probs,
        },
    ))
}

fn fit_rbf(
    blocks: Vec<Block>,
    y: &[bool],
    cfg: &RbfSvmConfig,
    seed: u64,
) -> Result<(FittedBlock, Outputs)> {
    // Columns constant on the training rows carry no information; dropping
    // them makes models that differ only by such columns identical.
    let scaling = BlockScaling::fit(
        &blocks
            .iter()
            .map(|b| b.train.as_slice())
            .collect::<Vec<_>>(),
    )?;
    let prep = |rows: &dyn Fn(&Block) -> &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        let n = blocks.first().map_or(0, |b| rows(b).len());
        (0..n)
            .map(|i| {
                let parts: Vec<&[f64]> = blocks.iter().map(|b| rows(b)[i].as_slice()).collect();
                scaling.apply(&parts)
            })
            .collect()
    };
    let train = prep(&|b| &b.train);
    let test = prep(&|b| &b.test);
    let spaces = blocks.iter().map(|b| b.space.clone()).collect();
    let selections = blocks.into_iter().map(|b| b.selection).collect();
    let cal = train_calibrated_rbf(&train, y, cfg, seed)?;
    let scores = cal.model.decisions(&test);
    let platt = cal.model.calibration.expect("calibrated");
    let probs: Vec<f64> = scores.iter().map(|&s| platt.prob(s)).collect();
    let preds = probs.iter().map(|&p| p > 0.5).collect();
    let fitted = FittedBlock {
        spaces,
        selections,
        scaling: Some(scaling),
        classifier: Classifier::Rbf(cal.model),
    };
    Ok((
        fitted,
        Outputs {
            scores,
            preds,
            probs,
            train_probs: cal.oof_probs,
        },
    ))
}

/// Standardizes, fits a calibrated RBF SVM and returns test scores and
/// predictions.
pub(crate) fn rbf_scores(
    train: Vec<Vec<f64>>,
    test: Vec<Vec<f64>>,
    y: &[bool],
    cfg: &RbfSvmConfig,
    seed: u64,
) -> Result<(Vec<f64>, Vec<bool>)> {
    let block = Block {
        space: String::new(),
        selection: None,
        train,
        test,
    };
    let (_, o) = fit_rbf(vec![block], y, cfg, seed)?;
    Ok((o.scores, o.preds))
}

type Concat = (
    Vec<String>,
    Vec<Option<Vec<usize>>>,
    Vec<Vec<f64>>,
    Vec<Vec<f64>>,
);

fn concat(blocks: Vec<Block>) -> Concat {
    let n_train = blocks.first().map_or(0, |b| b.train.len());
    let n_test = blocks.first().map_or(0, |b| b.test.len());
    let mut train = vec![Vec::new(); n_train];
    let mut test = vec![Vec::new(); n_test];
    let mut spaces = Vec::new();
    let mut selections = Vec::new();
    for b in blocks {
        for (row, part) in train.iter_mut().zip(b.train) {
            row.extend(part);
        }
        for (row, part) in test.iter_mut().zip(b.test) {
            row.extend(part);
        }
        spaces.push(b.space);
        selections.push(b.selection);
    }
    (spaces, selections, train, test)
}

fn fit_member(
    block: Block,
    code: Code,
    y: &[bool],
    settings: &LearnSettings,
    calibrate: bool,
    seed: u64,
) -> Result<(FittedBlock, Outputs)> {
    if block.space == LINGUISTIC {
        let cfg = LinearSvmConfig {
            c: settings.linear_c[code.index()],
            ..settings.linear
        };
        fit_linear(vec![block], y, &cfg, calibrate, seed)
    } else {
        fit_rbf(vec![block], y, &settings.rbf, seed)
    }
}

/// Keyed on what is actually fit, so a one-block early fusion draws the same
/// randomness as the corresponding single-feature model.
fn seed_for(master: u64, spec: &ModelSpec, code: Code, fold: usize) -> u64 {
    let fusion = if spec.features.len() > 1 {
        spec.fusion.name()
    } else {
        "-"
    };
    let what = match spec.baseline {
        Some(BaselineKind::Random) => "random".to_string(),
        Some(BaselineKind::Positive) => "positive".to_string(),
        None => spec.features.join("+"),
    };
    derive_seed(
        master,
        &["model", &what, fusion, code.name(), &fold.to_string()],
    )
}

/// Fits `spec` for `code` on the training part of `fold` and evaluates it on
/// the test part.
pub fn run_model_fold(
    spec: &ModelSpec,
    code: Code,
    fold: usize,
    data: &Dataset,
    store: &FeatureStore,
    settings: &LearnSettings,
    master_seed: u64,
) -> Result<FoldResult> {
    spec.validate()?;
    let train_idx = data.train_indices(fold);
    let test_idx = data.test_indices(fold);
    let y = data.code_labels(code, &train_idx);
    let y_test = data.code_labels(code, &test_idx);
    let seed = seed_for(master_seed, spec, code, fold);
    let wrap = |e: Error| match e {
        Error::MissingFeature(_) | Error::Dimension(_) => e,
        other => Error::Training(format!("{} / {} / fold {fold}: {other}", spec.name, code)),
    };

    if let Some(kind) = spec.baseline {
        let (scores, preds) = run_baseline(kind, &y, test_idx.len(), seed);
        let prior = y.iter().filter(|&&l| l).count() as f64 / y.len().max(1) as f64;
        return Ok(FoldResult {
            fold,
            metrics: classification_metrics(&scores, &preds, &y_test),
            n_test: test_idx.len(),
            model: TrainedCodeModel::Baseline { kind, prior },
        });
    }

    let blocks: Vec<Block> = spec
        .features
        .iter()
        .map(|s| {
            prepare_block(
                s,
                code,
                fold,
                data,
                store,
                &train_idx,
                &test_idx,
                &y,
                settings.k_select,
            )
        })
        .collect::<Result<_>>()?;

    let (model, out) = match (spec.fusion, blocks.len()) {
        (Fusion::None | Fusion::Early, 1) => {
            let block = blocks.into_iter().next().expect("one block");
            let (f, o) = fit_member(block, code, &y, settings, false, seed).map_err(wrap)?;
            (TrainedCodeModel::Single(f), o)
        }
        (Fusion::Early, _) => {
            let (f, o) = fit_rbf(blocks, &y, &settings.rbf, seed).map_err(wrap)?;
            (TrainedCodeModel::Single(f), o)
        }
        (Fusion::Late, _) => {
            let mut members = Vec::new();
            let mut meta_train = vec![Vec::new(); train_idx.len()];
            let mut meta_test = vec![Vec::new(); test_idx.len()];
            for block in blocks {
                let member_seed = derive_seed(seed, &[&block.space]);
                let (f, o) =
                    fit_member(block, code, &y, settings, true, member_seed).map_err(wrap)?;
                for (row, p) in meta_train.iter_mut().zip(&o.train_probs) {
                    row.push(*p);
                }
                for (row, p) in meta_test.iter_mut().zip(&o.probs) {
                    row.push(*p);
                }
                members.push(f);
            }
            let meta_block = Block {
                space: "late_fusion_probs".into(),
                selection: None,
                train: meta_train,
                test: meta_test,
            };
            let (meta, o) = fit_rbf(
                vec![meta_block],
                &y,
                &settings.rbf,
                derive_seed(seed, &["meta"]),
            )
            .map_err(wrap)?;
            (TrainedCodeModel::Late { members, meta }, o)
        }
        (Fusion::None, _) => {
            return Err(Error::invalid(format!(
                "model {} needs a fusion mode",
                spec.name
            )))
        }
    };
    Ok(FoldResult {
        fold,
        metrics: classification_metrics(&out.scores, &out.preds, &y_test),
        n_test: test_idx.len(),
        model,
    })
}

/// All folds of one (model, code) pair, in fold order.
pub fn run_model(
    spec: &ModelSpec,
    code: Code,
    data: &Dataset,
    store: &FeatureStore,
    settings: &LearnSettings,
    master_seed: u64,
) -> Result<Vec<FoldResult>> {
    (0..data.k())
        .map(|f| run_model_fold(spec, code, f, data, store, settings, master_seed))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Scope;
    use crate::pipeline::data::{image_tables, linguistic_table, LinguisticConfig};
    use crate::pipeline::spec::{default_roster, Modality, GLOBAL};
    use crate::synth::{generate, SynthConfig};

    fn setup() -> (Dataset, FeatureStore) {
        let corpus = generate(&SynthConfig {
            n_users: 25,
            tweets_per_user_max: 8,
            global_dim: 12,
            seed: 4,
            text_signal_strength: 0.8,
            image_signal_strength: 0.9,
            ..Default::default()
        })
        .unwrap();
        let data = Dataset::from_synth(&corpus, 5, 0).unwrap();
        let mut store = FeatureStore::new();
        for t in image_tables(&data, &[0.1, 0.5]).unwrap() {
            store.insert(Scope::GLOBAL, t);
        }
        let dal = crate::lingfeat::toy_dal();
        let pb = crate::lingfeat::toy_phrasebook();
        for f in 0..5 {
            let (t, _) = linguistic_table(&data, f, &dal, &pb, &LinguisticConfig::default());
            store.insert(Scope::fold(f), t);
        }
        (data, store)
    }

    #[test]
    fn single_block_early_fusion_equals_single_model() {
        let (data, store) = setup();
        let s = LearnSettings::default();
        for space in [GLOBAL, LINGUISTIC] {
            let single = ModelSpec::single("m", Modality::Image, space);
            let early = ModelSpec::fused("m", Modality::Image, &[space.to_string()], Fusion::Early);
            let a = run_model(&single, Code::Aggression, &data, &store, &s, 1).unwrap();
            let b = run_model(&early, Code::Aggression, &data, &store, &s, 1).unwrap();
            let ma: Vec<&Metrics> = a.iter().map(|r| &r.metrics).collect();
            let mb: Vec<&Metrics> = b.iter().map(|r| &r.metrics).collect();
            assert_eq!(ma, mb);
        }
    }

    #[test]
    fn missing_block_is_named() {
        let (data, store) = setup();
        let spec = ModelSpec::single("m", Modality::Text, "cnn_word");
        let err = run_model(
            &spec,
            Code::Loss,
            &data,
            &store,
            &LearnSettings::default(),
            1,
        )
        .unwrap_err();
        assert!(err.to_string().contains("cnn_word"), "{err}");
    }

    #[test]
    fn every_non_cnn_roster_entry_runs() {
        let (data, store) = setup();
        let s = LearnSettings::default();
        for spec in default_roster(&[0.1, 0.5]) {
            if spec.features.iter().any(|f| f.starts_with("cnn")) {
                continue;
            }
            let r = run_model(&spec, Code::SubstanceUse, &data, &store, &s, 3).unwrap();
            assert_eq!(r.len(), 5);
            for fr in &r {
                assert!((0.0..=1.0).contains(&fr.metrics.f1));
            }
        }
        let late = ModelSpec::fused(
            "late",
            Modality::Multimodal,
            &[LINGUISTIC.into(), GLOBAL.into(), "counts@0.1".into()],
            Fusion::Late,
        );
        let r = run_model_fold(&late, Code::Aggression, 0, &data, &store, &s, 3).unwrap();
        match &r.model {
            TrainedCodeModel::Late { members, meta } => {
                assert_eq!(members.len(), 3);
                assert!(matches!(
                    members[0].classifier,
                    Classifier::Linear { platt: Some(_), .. }
                ));
                assert_eq!(
                    meta.scaling.as_ref().unwrap().standardizers[0].mean.len(),
                    3
                );
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn linguistic_selection_is_capped_at_k() {
        let (data, store) = setup();
        let s = LearnSettings {
            k_select: 7,
            ..Default::default()
        };
        let spec = ModelSpec::single("ling", Modality::Text, LINGUISTIC);
        let r = run_model_fold(&spec, Code::Loss, 1, &data, &store, &s, 0).unwrap();
        match r.model {
            TrainedCodeModel::Single(b) => {
                assert_eq!(b.selections[0].as_ref().unwrap().len(), 7);
                assert!(matches!(
                    b.classifier,
                    Classifier::Linear { platt: None, .. }
                ));
            }
            other => panic!("{other:?}"),
        }
    }
}
