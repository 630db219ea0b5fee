//! Word- and character-level CNN binary classifiers. After training, the
//! post-ReLU hidden layer of the MLP serves as a text feature vector.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use serde_json::json;
use unicode_segmentation::UnicodeSegmentation;

use crate::checkpoint::Checkpoint;
use crate::corpus::{Code, TweetRecord};
use crate::error::{Error, Result};
use crate::nn::{
    conv1d_maxpool_backward, conv1d_maxpool_masked, dense, dense_backward, dropout, relu,
    relu_backward, softmax, softmax_xent, ConvCache, Mode, NadamState, Param, Tensor,
};
use crate::util::{rng_from_seed, Rng, StateHasher};

pub const PAD: usize = 0;
pub const UNK: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Word,
    Char,
}

impl Level {
    pub fn space(self) -> &'static str {
        match self {
            Level::Word => "cnn_word",
            Level::Char => "cnn_char",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextCnnConfig {
    pub level: Level,
    pub emb_dim: usize,
    pub filter_widths: Vec<usize>,
    pub maps_per_width: usize,
    pub hidden_dim: usize,
    pub dropout: f64,
    pub lr: f64,
    pub max_len: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Fraction of training tweets (whole users) held out for early stopping.
    pub holdout_fraction: f64,
    /// Units seen fewer times than this in training map to UNK.
    pub min_count: usize,
    pub seed: u64,
}

impl TextCnnConfig {
    pub fn new(level: Level) -> Self {
        let (emb_dim, max_len) = match level {
            Level::Word => (300, 64),
            Level::Char => (100, 280),
        };
        Self {
            level,
            emb_dim,
            filter_widths: vec![1, 2, 3, 4, 5],
            maps_per_width: 100,
            hidden_dim: 100,
            dropout: 0.5,
            lr: 0.002,
            max_len,
            batch_size: 32,
            max_epochs: 50,
            patience: 5,
            holdout_fraction: 0.1,
            min_count: 1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.emb_dim,
            self.maps_per_width,
            self.hidden_dim,
            self.max_len,
            self.batch_size,
        ];
        if dims.contains(&0) || self.filter_widths.is_empty() || self.filter_widths.contains(&0) {
            return Err(Error::invalid("text CNN dimensions must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!(
                "dropout {} not in [0, 1)",
                self.dropout
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::invalid("holdout_fraction must be in [0, 1)"));
        }
        Ok(())
    }

    pub fn conv_dim(&self) -> usize {
        self.filter_widths.len() * self.maps_per_width
    }

    fn max_width(&self) -> usize {
        self.filter_widths.iter().copied().max().unwrap_or(1)
    }
}

/// Splits text into model units: tokenizer surfaces or grapheme clusters.
pub fn text_units(text: &str, level: Level) -> Vec<String> {
    match level {
        Level::Word => crate::lingfeat::tokenize(text)
            .into_iter()
            .map(|t| t.surface)
            .collect(),
        Level::Char => text.graphemes(true).map(str::to_string).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextVocab {
    pub level: Level,
    /// Index `i + 2` holds `units[i]`; 0 is padding and 1 unknown.
    pub units: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl TextVocab {
    pub fn build<'a>(
        texts: impl IntoIterator<Item = &'a str>,
        level: Level,
        min_count: usize,
    ) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for t in texts {
            for u in text_units(t, level) {
                *counts.entry(u).or_default() += 1;
            }
        }
        let units = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count.max(1))
            .map(|(u, _)| u)
            .collect();
        Self::from_units(level, units)
    }

    pub fn from_units(level: Level, units: Vec<String>) -> Self {
        let index = units
            .iter()
            .enumerate()
            .map(|(i, u)| (u.clone(), i + 2))
            .collect();
        Self {
            level,
            units,
            index,
        }
    }

    /// Table size including padding and unknown.
    pub fn len(&self) -> usize {
        self.units.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn id(&self, unit: &str) -> usize {
        self.index.get(unit).copied().unwrap_or(UNK)
    }

    /// Unit ids truncated to `max_len`, without padding.
    pub fn encode(&self, text: &str, max_len: usize) -> Vec<usize> {
        text_units(text, self.level)
            .iter()
            .take(max_len)
            .map(|u| self.id(u))
            .collect()
    }
}

/// Pretrained word vectors in text format: `token v1 ... vd` per line.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Embeddings {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<f64>>,
}

impl Embeddings {
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut out = Embeddings::default();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let mut parts = line.split_whitespace();
            let Some(token) = parts.next() else { continue };
            let malformed = |message: String| Error::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let v: Vec<f64> = parts
                .map(|p| p.parse::<f64>().map_err(|e| malformed(e.to_string())))
                .collect::<Result<_>>()?;
            if out.dim == 0 {
                out.dim = v.len();
            }
            if v.len() != out.dim || v.iter().any(|x| !x.is_finite()) {
                return Err(malformed(format!("expected {} finite values", out.dim)));
            }
            out.vectors.insert(token.to_string(), v);
        }
        Ok(out)
    }

    /// Loads the file if given; a missing or unreadable file only warns.
    pub fn load_or_warn(path: Option<&Path>) -> Option<Self> {
        let path = path?;
        match Self::load(path) {
            Ok(e) => Some(e),
            Err(e) => {
                log::warn!("word embeddings unavailable ({e}); using random initialization");
                None
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainMeta {
    pub code: Option<Code>,
    pub fold: Option<usize>,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
    pub best_val_loss: Option<f64>,
    pub n_train: usize,
    pub n_holdout: usize,
    pub pretrained_hits: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextCnnModel {
    pub config: TextCnnConfig,
    pub vocab: TextVocab,
    pub embedding: Param,
    pub conv_w: Vec<Param>,
    pub conv_b: Vec<Param>,
    pub hidden_w: Param,
    pub hidden_b: Param,
    pub out_w: Param,
    pub out_b: Param,
    pub meta: TrainMeta,
}

/// Everything the backward pass needs from one forward pass.
struct Trace {
    ids: Vec<usize>,
    seq_len: usize,
    input: Vec<f64>,
    emb_mask: Vec<f64>,
    caches: Vec<ConvCache>,
    concat_mask: Vec<f64>,
    concat: Vec<f64>,
    hidden: Vec<f64>,
    logits: Vec<f64>,
}

fn glorot(name: &str, shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut Rng) -> Param {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Param::new(name, Tensor::uniform(shape, bound, rng))
}

impl TextCnnModel {
    /// Randomly initialized model. Word-level rows covered by `pretrained`
    /// are copied from it.
    pub fn init(
        config: TextCnnConfig,
        vocab: TextVocab,
        pretrained: Option<&Embeddings>,
        rng: &mut Rng,
    ) -> Result<Self> {
        config.validate()?;
        let (e, m, h) = (config.emb_dim, config.maps_per_width, config.hidden_dim);
        let mut embedding = Param::new("embedding", Tensor::uniform(&[vocab.len(), e], 0.25, rng));
        embedding.value.data[PAD * e..(PAD + 1) * e].fill(0.0);
        let mut hits = 0;
        if let (Level::Word, Some(pre)) = (config.level, pretrained) {
            if pre.dim != e {
                return Err(Error::Dimension(format!(
                    "pretrained embeddings have dimension {}, model uses {e}",
                    pre.dim
                )));
            }
            for (i, u) in vocab.units.iter().enumerate() {
                if let Some(v) = pre.vectors.get(u) {
                    let row = i + 2;
                    embedding.value.data[row * e..(row + 1) * e].copy_from_slice(v);
                    hits += 1;
                }
            }
        }
        let mut conv_w = Vec::new();
        let mut conv_b = Vec::new();
        for &w in &config.filter_widths {
            conv_w.push(glorot(&format!("conv{w}.w"), &[w, e, m], w * e, m, rng));
            conv_b.push(Param::new(format!("conv{w}.b"), Tensor::zeros(&[m])));
        }
        let c = config.conv_dim();
        Ok(Self {
            hidden_w: glorot("hidden.w", &[h, c], c, h, rng),
            hidden_b: Param::new("hidden.b", Tensor::zeros(&[h])),
            out_w: glorot("out.w", &[2, h], h, 2, rng),
            out_b: Param::new("out.b", Tensor::zeros(&[2])),
            meta: TrainMeta {
                pretrained_hits: hits,
                ..Default::default()
            },
            config,
            vocab,
            embedding,
            conv_w,
            conv_b,
        })
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut v = vec![&self.embedding];
        v.extend(
            self.conv_w
                .iter()
                .zip(&self.conv_b)
                .flat_map(|(w, b)| [w, b]),
        );
        v.extend([&self.hidden_w, &self.hidden_b, &self.out_w, &self.out_b]);
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = vec![&mut self.embedding];
        v.extend(
            self.conv_w
                .iter_mut()
                .zip(self.conv_b.iter_mut())
                .flat_map(|(w, b)| [w, b]),
        );
        v.extend([
            &mut self.hidden_w,
            &mut self.hidden_b,
            &mut self.out_w,
            &mut self.out_b,
        ]);
        v
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        self.vocab.encode(text, self.config.max_len)
    }

    /// Hidden activations and the trace needed for backprop. The output
    /// layer is applied separately so feature extraction never touches it.
    fn forward_hidden(&self, ids: &[usize], mode: Mode, rng: &mut Rng) -> Result<Trace> {
        let e = self.config.emb_dim;
        let seq_len = ids.len().max(self.config.max_width());
        let mut raw = vec![0.0; seq_len * e];
        for (t, &id) in ids.iter().enumerate() {
            raw[t * e..(t + 1) * e]
                .copy_from_slice(&self.embedding.value.data[id * e..(id + 1) * e]);
        }
        let (input, emb_mask) = dropout(&raw, self.config.dropout, mode, rng);
        let mut pooled = Vec::with_capacity(self.config.conv_dim());
        let mut caches = Vec::with_capacity(self.conv_w.len());
        for (w, b) in self.conv_w.iter().zip(&self.conv_b) {
            let (out, cache) =
                conv1d_maxpool_masked(&input, seq_len, ids.len(), &w.value, &b.value.data)?;
            pooled.extend(out);
            caches.push(cache);
        }
        let (concat, concat_mask) = dropout(&pooled, self.config.dropout, mode, rng);
        let hidden = relu(&dense(
            &concat,
            &self.hidden_w.value,
            &self.hidden_b.value.data,
        )?);
        Ok(Trace {
            ids: ids.to_vec(),
            seq_len,
            input,
            emb_mask,
            caches,
            concat_mask,
            concat,
            hidden,
            logits: Vec::new(),
        })
    }

    fn forward(&self, ids: &[usize], mode: Mode, rng: &mut Rng) -> Result<Trace> {
        let mut tr = self.forward_hidden(ids, mode, rng)?;
        tr.logits = dense(&tr.hidden, &self.out_w.value, &self.out_b.value.data)?;
        Ok(tr)
    }

    /// Accumulates `scale · d loss / d θ` into every parameter gradient.
    fn backward(&mut self, tr: &Trace, dlogits: &[f64], scale: f64) {
        let dl: Vec<f64> = dlogits.iter().map(|g| g * scale).collect();
        let h = self.config.hidden_dim;
        let mut dhidden = vec![0.0; h];
        dense_backward(
            &tr.hidden,
            &self.out_w.value,
            &dl,
            Some(&mut dhidden),
            &mut self.out_w.grad,
            &mut self.out_b.grad,
        );
        let dpre = relu_backward(&tr.hidden, &dhidden);
        let mut dconcat = vec![0.0; tr.concat.len()];
        dense_backward(
            &tr.concat,
            &self.hidden_w.value,
            &dpre,
            Some(&mut dconcat),
            &mut self.hidden_w.grad,
            &mut self.hidden_b.grad,
        );
        let m = self.config.maps_per_width;
        let e = self.config.emb_dim;
        let mut dinput = vec![0.0; tr.seq_len * e];
        for (k, cache) in tr.caches.iter().enumerate() {
            let g: Vec<f64> = (0..m)
                .map(|j| dconcat[k * m + j] * tr.concat_mask[k * m + j])
                .collect();
            let (w, b) = (&mut self.conv_w[k], &mut self.conv_b[k]);
            conv1d_maxpool_backward(
                &tr.input,
                &w.value,
                cache,
                &g,
                Some(&mut dinput),
                &mut w.grad,
                &mut b.grad,
            );
        }
        for (t, &id) in tr.ids.iter().enumerate() {
            if id == PAD {
                continue;
            }
            let row = &mut self.embedding.grad[id * e..(id + 1) * e];
            for j in 0..e {
                row[j] += dinput[t * e + j] * tr.emb_mask[t * e + j];
            }
        }
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Mean cross-entropy over `batch` (ids, label) with gradients
    /// accumulated into the parameters. Dropout masks come from `rng`.
    pub fn batch_loss_and_grad(
        &mut self,
        batch: &[(Vec<usize>, usize)],
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<f64> {
        let scale = 1.0 / batch.len().max(1) as f64;
        let mut loss = 0.0;
        for (ids, label) in batch {
            let tr = self.forward(ids, mode, rng)?;
            let (l, dl) = softmax_xent(&tr.logits, *label)?;
            loss += l * scale;
            self.backward(&tr, &dl, scale);
        }
        Ok(loss)
    }

    /// Mean cross-entropy with dropout disabled.
    pub fn eval_loss(&self, batch: &[(Vec<usize>, usize)]) -> Result<f64> {
        let mut rng = rng_from_seed(0);
        let mut loss = 0.0;
        for (ids, label) in batch {
            let tr = self.forward(ids, Mode::Eval, &mut rng)?;
            loss += softmax_xent(&tr.logits, *label)?.0;
        }
        Ok(loss / batch.len().max(1) as f64)
    }

    pub fn class_probs(&self, text: &str) -> Result<[f64; 2]> {
        let tr = self.forward(&self.encode(text), Mode::Eval, &mut rng_from_seed(0))?;
        let p = softmax(&tr.logits);
        Ok([p[0], p[1]])
    }

    pub fn positive_logit_margin(&self, text: &str) -> Result<f64> {
        let tr = self.forward(&self.encode(text), Mode::Eval, &mut rng_from_seed(0))?;
        Ok(tr.logits[1] - tr.logits[0])
    }

    pub fn predict_prob(&self, text: &str) -> Result<f64> {
        Ok(self.class_probs(text)?[1])
    }

    /// Post-ReLU hidden activations with dropout disabled.
    pub fn extract_features(&self, text: &str) -> Result<Vec<f64>> {
        Ok(self
            .forward_hidden(&self.encode(text), Mode::Eval, &mut rng_from_seed(0))?
            .hidden)
    }

    pub fn fingerprint(&self, h: &mut StateHasher) {
        for u in &self.vocab.units {
            h.text(u);
        }
        for p in self.params() {
            h.text(&p.name).floats(&p.value.data);
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(json!({
            "kind": "textcnn",
            "config": self.config,
            "vocab": self.vocab,
            "train": self.meta,
        }));
        for p in self.params() {
            ck.push(&p.name, &p.value.shape, &p.value.data);
        }
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let field = |k: &str| {
            ck.meta
                .get(k)
                .cloned()
                .ok_or_else(|| Error::invalid(format!("checkpoint missing {k}")))
        };
        let bad = |e: serde_json::Error| Error::invalid(format!("checkpoint header: {e}"));
        let config: TextCnnConfig = serde_json::from_value(field("config")?).map_err(bad)?;
        let vocab: TextVocab = serde_json::from_value(field("vocab")?).map_err(bad)?;
        let meta: TrainMeta = serde_json::from_value(field("train")?).map_err(bad)?;
        let vocab = TextVocab::from_units(vocab.level, vocab.units);
        let mut model = Self::init(config, vocab, None, &mut rng_from_seed(0))?;
        model.meta = meta;
        for p in model.params_mut() {
            let (entry, data) = ck.get(&p.name)?;
            if entry.shape != p.value.shape {
                return Err(Error::Dimension(format!(
                    "tensor {} has shape {:?}, expected {:?}",
                    p.name, entry.shape, p.value.shape
                )));
            }
            p.value.data.copy_from_slice(data);
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

/// Whole users taken in seeded random order until they cover at least
/// `fraction` of the tweets. Returns per-tweet holdout flags.
pub fn user_holdout(users: &[&str], fraction: f64, rng: &mut Rng) -> Vec<bool> {
    let distinct: BTreeSet<&str> = users.iter().copied().collect();
    let mut order: Vec<&str> = distinct.into_iter().collect();
    if order.len() < 2 || fraction <= 0.0 {
        return vec![false; users.len()];
    }
    order.shuffle(rng);
    let target = (fraction * users.len() as f64).ceil() as usize;
    let mut chosen = BTreeSet::new();
    let mut covered = 0;
    for u in &order[..order.len() - 1] {
        if covered >= target {
            break;
        }
        chosen.insert(*u);
        covered += users.iter().filter(|x| *x == u).count();
    }
    users.iter().map(|u| chosen.contains(u)).collect()
}

/// Trains one binary CNN with early stopping on a user-grouped holdout and
/// restores the best-validation parameters.
pub fn train_textcnn(
    tweets: &[&TweetRecord],
    labels: &[bool],
    config: &TextCnnConfig,
    pretrained: Option<&Embeddings>,
) -> Result<TextCnnModel> {
    config.validate()?;
    if tweets.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} tweets but {} labels",
            tweets.len(),
            labels.len()
        )));
    }
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(Error::invalid("text CNN training needs both classes"));
    }
    let mut rng = rng_from_seed(config.seed);
    let users: Vec<&str> = tweets.iter().map(|t| t.user_id.as_str()).collect();
    let mut holdout = user_holdout(&users, config.holdout_fraction, &mut rng);
    let train_labels: Vec<bool> = labels
        .iter()
        .zip(&holdout)
        .filter(|(_, h)| !**h)
        .map(|(l, _)| *l)
        .collect();
    if train_labels.iter().all(|&l| l) || train_labels.iter().all(|&l| !l) {
        log::warn!("early-stopping holdout left a single class; training without holdout");
        holdout.fill(false);
    }
    let train_texts = tweets
        .iter()
        .zip(&holdout)
        .filter(|(_, h)| !**h)
        .map(|(t, _)| t.text.as_str());
    let vocab = TextVocab::build(train_texts, config.level, config.min_count);
    let mut model = TextCnnModel::init(config.clone(), vocab, pretrained, &mut rng)?;
    if config.level == Level::Word && pretrained.is_none() {
        log::debug!("word CNN without pretrained embeddings");
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for ((t, &l), &h) in tweets.iter().zip(labels).zip(&holdout) {
        let ex = (model.encode(&t.text), usize::from(l));
        if h {
            val.push(ex);
        } else {
            train.push(ex);
        }
    }
    model.meta.n_train = train.len();
    model.meta.n_holdout = val.len();

    let mut opt = NadamState::new(&model.params(), config.lr);
    let mut best: Option<(f64, Vec<Param>)> = None;
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(Vec<usize>, usize)> = chunk.iter().map(|&i| train[i].clone()).collect();
            model.zero_grad();
            model.batch_loss_and_grad(&batch, Mode::Train, &mut rng)?;
            opt.step(&mut model.params_mut())
                .map_err(|e| Error::Training(format!("epoch {epoch}: {e}")))?;
            let e = config.emb_dim;
            model.embedding.value.data[PAD * e..(PAD + 1) * e].fill(0.0);
        }
        model.meta.stopped_epoch = epoch;
        if val.is_empty() {
            continue;
        }
        let loss = model.eval_loss(&val)?;
        if !loss.is_finite() {
            return Err(Error::Training(format!(
                "validation loss is {loss} at epoch {epoch}"
            )));
        }
        if best.as_ref().is_none_or(|(b, _)| loss < *b) {
            best = Some((loss, model.params().into_iter().cloned().collect()));
            model.meta.best_epoch = epoch;
            model.meta.best_val_loss = Some(loss);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }
    if let Some((_, params)) = best {
        for (p, b) in model.params_mut().into_iter().zip(params) {
            *p = b;
        }
        for p in model.params_mut() {
            p.zero_grad();
        }
    } else {
        model.meta.best_epoch = model.meta.stopped_epoch;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Source;
    use crate::learn::average_precision;
    use crate::nn::max_relative_error;

    pub(crate) fn tiny(level: Level) -> TextCnnConfig {
        TextCnnConfig {
            emb_dim: 6,
            filter_widths: vec![1, 2, 3],
            maps_per_width: 4,
            hidden_dim: 5,
            max_epochs: 40,
            batch_size: 8,
            lr: 0.01,
            seed: 3,
            ..TextCnnConfig::new(level)
        }
    }

    fn tweet(id: usize, user: usize, text: &str) -> TweetRecord {
        TweetRecord {
            tweet_id: format!("t{id}"),
            user_id: format!("u{user}"),
            text: text.into(),
            image_id: None,
            pos_tags: None,
            source: Source::Twitter,
        }
    }

    /// Signal words appear only in positives.
    fn separable(n: usize, seed: u64) -> (Vec<TweetRecord>, Vec<bool>) {
        use rand::seq::IndexedRandom;
        use rand::Rng as _;
        let mut rng = rng_from_seed(seed);
        let neutral = ["we", "go", "the", "day", "night", "lol", "home", "real"];
        let signal = ["rip", "miss", "free"];
        let mut tweets = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let pos = rng.random_bool(0.4);
            let mut words: Vec<&str> = (0..rng.random_range(3..8))
                .map(|_| *neutral.choose(&mut rng).unwrap())
                .collect();
            if pos {
                let k = rng.random_range(0..words.len());
                words[k] = signal.choose(&mut rng).unwrap();
            }
            tweets.push(tweet(i, i % 20, &words.join(" ")));
            labels.push(pos);
        }
        (tweets, labels)
    }

    #[test]
    fn vocab_reserves_pad_and_unk() {
        let v = TextVocab::build(["a b", "b c"], Level::Word, 1);
        assert_eq!(v.len(), 5);
        assert_eq!(v.id("a"), 2);
        assert_eq!(v.id("zzz"), UNK);
        assert_eq!(v.encode("a zzz c", 64), vec![2, UNK, 4]);
    }

    #[test]
    fn char_level_consumes_max_len_positions() {
        let text = "x".repeat(1000);
        let v = TextVocab::build([text.as_str()], Level::Char, 1);
        assert_eq!(v.encode(&text, 280).len(), 280);
    }

    #[test]
    fn empty_text_gives_a_defined_vector() {
        let cfg = tiny(Level::Word);
        let m = TextCnnModel::init(
            cfg,
            TextVocab::build(["a"], Level::Word, 1),
            None,
            &mut rng_from_seed(1),
        )
        .unwrap();
        let f = m.extract_features("").unwrap();
        assert_eq!(f.len(), 5);
        assert!(f.iter().all(|x| x.is_finite()));
        assert_eq!(f, m.extract_features("").unwrap());
    }

    #[test]
    fn probabilities_sum_to_one_and_follow_the_logit() {
        let cfg = tiny(Level::Char);
        let m = TextCnnModel::init(
            cfg,
            TextVocab::build(["abc", "xyz"], Level::Char, 1),
            None,
            &mut rng_from_seed(2),
        )
        .unwrap();
        let mut pairs = Vec::new();
        for text in ["abc", "zz", "a", "cxy", ""] {
            let p = m.class_probs(text).unwrap();
            assert!((p[0] + p[1] - 1.0).abs() < 1e-6);
            pairs.push((m.positive_logit_margin(text).unwrap(), p[1]));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(pairs.windows(2).all(|w| w[0].1 <= w[1].1));
    }

    #[test]
    fn features_ignore_the_output_layer() {
        let cfg = tiny(Level::Word);
        let mut m = TextCnnModel::init(
            cfg,
            TextVocab::build(["a b c"], Level::Word, 1),
            None,
            &mut rng_from_seed(4),
        )
        .unwrap();
        let before = m.extract_features("a b").unwrap();
        m.out_w.value.data.fill(f64::NAN);
        m.out_b.value.data.fill(f64::NAN);
        assert_eq!(m.extract_features("a b").unwrap(), before);
    }

    #[test]
    fn gradient_matches_finite_differences_on_a_batch() {
        for (seed, level) in [(5, Level::Word), (6, Level::Char)] {
            let cfg = TextCnnConfig {
                dropout: 0.3,
                ..tiny(level)
            };
            let vocab = TextVocab::build(["go home now", "rip bro"], level, 1);
            let mut m = TextCnnModel::init(cfg, vocab, None, &mut rng_from_seed(seed)).unwrap();
            let batch: Vec<(Vec<usize>, usize)> = ["go home", "rip bro now", "x", "home go rip"]
                .iter()
                .enumerate()
                .map(|(i, t)| (m.encode(t), i % 2))
                .collect();
            m.zero_grad();
            m.batch_loss_and_grad(&batch, Mode::Train, &mut rng_from_seed(99))
                .unwrap();
            let n_params = m.params().len();
            for pi in 0..n_params {
                let x = m.params()[pi].value.data.clone();
                let analytic = m.params()[pi].grad.clone();
                let mut probe = m.clone();
                let err = max_relative_error(
                    |v| {
                        probe.params_mut()[pi].value.data.copy_from_slice(v);
                        probe
                            .batch_loss_and_grad(&batch, Mode::Train, &mut rng_from_seed(99))
                            .unwrap()
                    },
                    &x,
                    &analytic,
                    1e-6,
                    1e-7,
                );
                assert!(err < 1e-4, "{:?} {}: {err}", level, m.params()[pi].name);
            }
        }
    }

    #[test]
    fn holdout_is_user_grouped_and_near_ten_percent() {
        let users: Vec<String> = (0..200).map(|i| format!("u{}", i % 37)).collect();
        let refs: Vec<&str> = users.iter().map(String::as_str).collect();
        let h = user_holdout(&refs, 0.1, &mut rng_from_seed(1));
        let n = h.iter().filter(|&&x| x).count();
        assert!((20..40).contains(&n), "{n}");
        for (u, &flag) in refs.iter().zip(&h) {
            assert!(refs.iter().zip(&h).all(|(v, &g)| v != u || g == flag));
        }
    }

    #[test]
    fn separable_vocab_is_learned_and_features_probe_well() {
        let (tweets, labels) = separable(300, 8);
        let refs: Vec<&TweetRecord> = tweets.iter().collect();
        let cfg = TextCnnConfig {
            max_epochs: 15,
            ..tiny(Level::Word)
        };
        let m = train_textcnn(&refs, &labels, &cfg, None).unwrap();
        assert!(m.meta.n_holdout > 0 && m.meta.best_epoch >= 1);

        let (test, test_labels) = separable(100, 9);
        let probs: Vec<f64> = test
            .iter()
            .map(|t| m.predict_prob(&t.text).unwrap())
            .collect();
        let acc = probs
            .iter()
            .zip(&test_labels)
            .filter(|(p, &l)| (**p > 0.5) == l)
            .count() as f64
            / 100.0;
        assert!(acc >= 0.95, "accuracy {acc}");
        let mean_of = |want: bool| {
            let v: Vec<f64> = probs
                .iter()
                .zip(&test_labels)
                .filter(|(_, &l)| l == want)
                .map(|(p, _)| *p)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!(mean_of(true) - mean_of(false) > 0.3);

        // a linear probe on the extracted features ranks as well as the CNN
        let feats: Vec<Vec<f64>> = tweets
            .iter()
            .map(|t| m.extract_features(&t.text).unwrap())
            .collect();
        let probe = crate::learn::train_linear_svm(
            &feats,
            &labels,
            &crate::learn::LinearSvmConfig::with_c(1.0),
        )
        .unwrap();
        let probe_scores: Vec<f64> = test
            .iter()
            .map(|t| probe.decision(&m.extract_features(&t.text).unwrap()))
            .collect();
        let cnn_ap = average_precision(&probs, &test_labels).unwrap();
        let probe_ap = average_precision(&probe_scores, &test_labels).unwrap();
        assert!(
            probe_ap >= cnn_ap - 0.05,
            "probe {probe_ap} vs cnn {cnn_ap}"
        );
    }

    #[test]
    fn training_is_deterministic_and_checkpoints_round_trip() {
        let (tweets, labels) = separable(80, 10);
        let refs: Vec<&TweetRecord> = tweets.iter().collect();
        let cfg = TextCnnConfig {
            max_epochs: 3,
            ..tiny(Level::Char)
        };
        let a = train_textcnn(&refs, &labels, &cfg, None).unwrap();
        let b = train_textcnn(&refs, &labels, &cfg, None).unwrap();
        assert_eq!(a.to_checkpoint().to_bytes(), b.to_checkpoint().to_bytes());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        a.save(&path).unwrap();
        let c = TextCnnModel::load(&path).unwrap();
        assert_eq!(
            c.extract_features("rip bro").unwrap(),
            a.extract_features("rip bro").unwrap()
        );
        assert_eq!(c.meta, a.meta);
    }

    #[test]
    fn single_class_is_rejected() {
        let tweets = [tweet(0, 0, "a"), tweet(1, 1, "b")];
        let refs: Vec<&TweetRecord> = tweets.iter().collect();
        assert!(train_textcnn(&refs, &[true, true], &tiny(Level::Word), None).is_err());
    }

    #[test]
    fn pretrained_rows_are_copied() {
        let mut pre = Embeddings {
            dim: 6,
            ..Default::default()
        };
        pre.vectors.insert("rip".into(), vec![0.5; 6]);
        let vocab = TextVocab::build(["rip bro"], Level::Word, 1);
        let m = TextCnnModel::init(
            tiny(Level::Word),
            vocab.clone(),
            Some(&pre),
            &mut rng_from_seed(1),
        )
        .unwrap();
        let row = vocab.id("rip");
        assert_eq!(&m.embedding.value.data[row * 6..row * 6 + 6], &[0.5; 6]);
        assert_eq!(m.meta.pretrained_hits, 1);
        assert!(Embeddings::load_or_warn(Some(Path::new("/nonexistent/emb.txt"))).is_none());
    }
}
