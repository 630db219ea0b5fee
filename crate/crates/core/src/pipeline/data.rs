//! The experiment dataset (tweets, labels, folds, image records) and the
//! fold-aware featurizers that populate a [`FeatureStore`].

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::folds::{make_folds, user_loads, FoldAssignment};
use super::spec::{counts_space, GLOBAL, GT_CONCEPTS, LINGUISTIC};
use crate::corpus::{derive_labels_for, Code, CodeAnnotation, LabelRule, TweetRecord};
use crate::error::{Error, Result};
use crate::features::{FeatureTable, Row, SparseVec};
use crate::imfeat::{
    by_image, concept_counts, gt_concept_counts, ConceptBox, ConceptDetection, GlobalFeatures,
};
use crate::lingfeat::{build_vocab, Dal, LinguisticFeaturizer, NgramVocab, Phrasebook};
use crate::synth::SynthCorpus;
use crate::textcnn::{train_textcnn, Embeddings, Level, TextCnnConfig, TextCnnModel};
use crate::util::{derive_seed, StateHasher};

#[derive(Debug, Clone)]
pub struct Dataset {
    pub tweets: Vec<TweetRecord>,
    /// Per tweet, ordered aggression, loss, substance use.
    pub labels: Vec<[bool; 3]>,
    pub folds: FoldAssignment,
    pub tweet_fold: Vec<usize>,
    pub global: Option<GlobalFeatures>,
    pub detections: Vec<ConceptDetection>,
    pub gt_boxes: Vec<ConceptBox>,
}

impl Dataset {
    pub fn new(
        tweets: Vec<TweetRecord>,
        labels: Vec<[bool; 3]>,
        folds: FoldAssignment,
        global: Option<GlobalFeatures>,
        detections: Vec<ConceptDetection>,
        gt_boxes: Vec<ConceptBox>,
    ) -> Result<Self> {
        if tweets.len() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} tweets but {} label rows",
                tweets.len(),
                labels.len()
            )));
        }
        folds.validate()?;
        let tweet_fold = folds.tweet_folds(&tweets)?;
        Ok(Self {
            tweets,
            labels,
            folds,
            tweet_fold,
            global,
            detections,
            gt_boxes,
        })
    }

    /// Labels from annotations under `rule`, aligned with `tweets`.
    pub fn labels_from(
        tweets: &[TweetRecord],
        annotations: &[CodeAnnotation],
        rule: LabelRule,
    ) -> Result<Vec<[bool; 3]>> {
        let ids: Vec<&str> = tweets.iter().map(|t| t.tweet_id.as_str()).collect();
        Ok(derive_labels_for(&ids, annotations, rule)?
            .into_iter()
            .map(|l| l.labels)
            .collect())
    }

    /// Any-positive labels and balanced user folds for a generated corpus.
    pub fn from_synth(corpus: &SynthCorpus, k: usize, seed: u64) -> Result<Self> {
        let labels =
            Self::labels_from(&corpus.tweets, &corpus.annotations, LabelRule::AnyPositive)?;
        let folds = make_folds(&user_loads(&corpus.tweets, &labels), k, seed)?;
        let global = if corpus.global_features.is_empty() {
            None
        } else {
            Some(GlobalFeatures::from_records(
                corpus.global_features.clone(),
            )?)
        };
        Self::new(
            corpus.tweets.clone(),
            labels,
            folds,
            global,
            corpus.detections.clone(),
            corpus.gt_boxes.clone(),
        )
    }

    pub fn k(&self) -> usize {
        self.folds.k
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.tweet_fold[i] != fold)
            .collect()
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.tweet_fold[i] == fold)
            .collect()
    }

    pub fn code_labels(&self, code: Code, idx: &[usize]) -> Vec<bool> {
        idx.iter().map(|&i| self.labels[i][code.index()]).collect()
    }

    /// The same dataset with every tweet of `fold` (and its image records)
    /// removed. The fold assignment is kept, so training sets are unchanged.
    pub fn without_fold(&self, fold: usize) -> Self {
        let keep: Vec<usize> = self.train_indices(fold);
        let images: HashSet<&str> = keep
            .iter()
            .filter_map(|&i| self.tweets[i].image_id.as_deref())
            .collect();
        let global = self
            .global
            .as_ref()
            .map(|g| g.retain(|id| images.contains(id)));
        Self {
            tweets: keep.iter().map(|&i| self.tweets[i].clone()).collect(),
            labels: keep.iter().map(|&i| self.labels[i]).collect(),
            folds: self.folds.clone(),
            tweet_fold: keep.iter().map(|&i| self.tweet_fold[i]).collect(),
            global,
            detections: self
                .detections
                .iter()
                .filter(|d| images.contains(d.image_id.as_str()))
                .cloned()
                .collect(),
            gt_boxes: self
                .gt_boxes
                .iter()
                .filter(|b| images.contains(b.image_id.as_str()))
                .cloned()
                .collect(),
        }
    }
}

/// Fitted-state fingerprints keyed by component, e.g. `vocab/fold2`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FittedState {
    pub entries: BTreeMap<String, String>,
}

impl FittedState {
    pub fn insert(&mut self, key: String, hash: String) {
        self.entries.insert(key, hash);
    }

    pub fn merge(&mut self, other: FittedState) {
        self.entries.extend(other.entries);
    }

    /// Combined hash of every entry belonging to `fold`.
    pub fn fold_hash(&self, fold: usize) -> String {
        let tag = format!("fold{fold}");
        let mut h = StateHasher::new();
        for (k, v) in &self.entries {
            if k.split('/').any(|p| p == tag) {
                h.text(k).text(v);
            }
        }
        h.finish_hex()
    }
}

pub fn fold_key(parts: &[&str], fold: usize) -> String {
    let mut s = parts.join("/");
    s.push_str(&format!("/fold{fold}"));
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinguisticConfig {
    pub min_df: usize,
    pub binary_ngrams: bool,
}

impl Default for LinguisticConfig {
    fn default() -> Self {
        Self {
            min_df: 1,
            binary_ngrams: false,
        }
    }
}

/// Linguistic features for every tweet with the vocabulary fit on the
/// training part of `fold`.
pub fn linguistic_table(
    data: &Dataset,
    fold: usize,
    dal: &Dal,
    phrasebook: &Phrasebook,
    cfg: &LinguisticConfig,
) -> (FeatureTable, NgramVocab) {
    let train: Vec<&TweetRecord> = data
        .train_indices(fold)
        .into_iter()
        .map(|i| &data.tweets[i])
        .collect();
    let vocab = build_vocab(&train, cfg.min_df);
    let featurizer = LinguisticFeaturizer {
        vocab,
        dal: dal.clone(),
        phrasebook: phrasebook.clone(),
        binary_ngrams: cfg.binary_ngrams,
    };
    let mut table = FeatureTable::new(LINGUISTIC, featurizer.dim());
    for t in &data.tweets {
        table
            .insert(t.tweet_id.clone(), Row::Sparse(featurizer.featurize(t)))
            .expect("featurizer emits its own dimension");
    }
    (table, featurizer.vocab)
}

pub fn vocab_hash(vocab: &NgramVocab) -> String {
    let mut h = StateHasher::new();
    vocab.fingerprint(&mut h);
    h.finish_hex()
}

/// One CNN per (level, code, fold), trained on the fold's training tweets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CnnTask {
    pub level: Level,
    pub code: Code,
    pub fold: usize,
}

impl CnnTask {
    pub fn all(levels: &[Level], k: usize) -> Vec<CnnTask> {
        let mut out = Vec::new();
        for &level in levels {
            for code in Code::ALL {
                for fold in 0..k {
                    out.push(CnnTask { level, code, fold });
                }
            }
        }
        out
    }

    pub fn key(&self) -> String {
        fold_key(&[self.level.space(), self.code.name()], self.fold)
    }

    pub fn file_name(&self) -> String {
        format!(
            "{}_{}_fold{}.ckpt",
            self.level.space(),
            self.code.name(),
            self.fold
        )
    }
}

pub fn train_cnn_task(
    data: &Dataset,
    task: CnnTask,
    config: &TextCnnConfig,
    master_seed: u64,
    embeddings: Option<&Embeddings>,
) -> Result<TextCnnModel> {
    let idx = data.train_indices(task.fold);
    let tweets: Vec<&TweetRecord> = idx.iter().map(|&i| &data.tweets[i]).collect();
    let labels = data.code_labels(task.code, &idx);
    let cfg = TextCnnConfig {
        level: task.level,
        seed: derive_seed(
            master_seed,
            &[
                "cnn",
                task.level.space(),
                task.code.name(),
                &task.fold.to_string(),
            ],
        ),
        ..config.clone()
    };
    let mut model = train_textcnn(&tweets, &labels, &cfg, embeddings)
        .map_err(|e| Error::Training(format!("{}: {e}", task.key())))?;
    model.meta.code = Some(task.code);
    model.meta.fold = Some(task.fold);
    Ok(model)
}

pub fn cnn_hash(model: &TextCnnModel) -> String {
    let mut h = StateHasher::new();
    model.fingerprint(&mut h);
    h.finish_hex()
}

/// Hidden-layer features of every tweet under a trained CNN.
pub fn cnn_table(data: &Dataset, model: &TextCnnModel) -> Result<FeatureTable> {
    let mut table = FeatureTable::new(model.config.level.space(), model.config.hidden_dim);
    for t in &data.tweets {
        table.insert(
            t.tweet_id.clone(),
            Row::Dense(model.extract_features(&t.text)?),
        )?;
    }
    Ok(table)
}

/// Fold-independent image tables: global vectors (when available),
/// thresholded detection counts and ground-truth concept counts.
pub fn image_tables(data: &Dataset, thresholds: &[f64]) -> Result<Vec<FeatureTable>> {
    for &t in thresholds {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::invalid(format!("threshold {t} not in [0, 1]")));
        }
    }
    let dets: HashMap<&str, Vec<&ConceptDetection>> =
        by_image(&data.detections, |d| d.image_id.as_str());
    let boxes: HashMap<&str, Vec<&ConceptBox>> = by_image(&data.gt_boxes, |b| b.image_id.as_str());
    let mut out = Vec::new();
    if let Some(g) = &data.global {
        let mut table = FeatureTable::new(GLOBAL, g.dim());
        for t in &data.tweets {
            table.insert(
                t.tweet_id.clone(),
                Row::Dense(g.lookup(t.image_id.as_deref())),
            )?;
        }
        out.push(table);
    }
    let none = Vec::new();
    for &th in thresholds {
        let mut table = FeatureTable::new(counts_space(th), crate::corpus::N_CONCEPTS);
        for t in &data.tweets {
            let d = t
                .image_id
                .as_deref()
                .and_then(|i| dets.get(i))
                .unwrap_or(&none);
            table.insert(
                t.tweet_id.clone(),
                Row::Dense(concept_counts(d.iter().copied(), th).to_vec()),
            )?;
        }
        out.push(table);
    }
    let none_b = Vec::new();
    let mut gt = FeatureTable::new(GT_CONCEPTS, crate::corpus::N_CONCEPTS);
    for t in &data.tweets {
        let b = t
            .image_id
            .as_deref()
            .and_then(|i| boxes.get(i))
            .unwrap_or(&none_b);
        gt.insert(
            t.tweet_id.clone(),
            Row::Dense(gt_concept_counts(b.iter().copied()).to_vec()),
        )?;
    }
    out.push(gt);
    Ok(out)
}

/// Rows of `table` for the given tweet indices, densified.
pub fn dense_rows(data: &Dataset, table: &FeatureTable, idx: &[usize]) -> Result<Vec<Vec<f64>>> {
    idx.iter()
        .map(|&i| Ok(table.row(&data.tweets[i].tweet_id)?.to_dense()))
        .collect()
}

pub fn sparse_rows(data: &Dataset, table: &FeatureTable, idx: &[usize]) -> Result<Vec<SparseVec>> {
    idx.iter()
        .map(|&i| Ok(table.row(&data.tweets[i].tweet_id)?.to_sparse()))
        .collect()
}
