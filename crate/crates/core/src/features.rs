//! Feature vectors shared across featurizers and learners, plus the
//! `FeatureBlock` JSONL record.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Code;
use crate::error::{Error, Result};
use crate::util::{read_jsonl, write_jsonl};

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVec {
    pub dim: usize,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseVec {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from an index → value map, dropping explicit zeros.
    pub fn from_map(dim: usize, entries: &BTreeMap<usize, f64>) -> Self {
        let mut v = Self::zeros(dim);
        for (&i, &x) in entries {
            if x != 0.0 {
                v.indices.push(i);
                v.values.push(x);
            }
        }
        v
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (&i, &x) in self.indices.iter().zip(&self.values) {
            out[i] = x;
        }
        out
    }

    pub fn get(&self, index: usize) -> f64 {
        match self.indices.binary_search(&index) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    /// Dense projection onto `columns`, in the given order.
    pub fn select(&self, columns: &[usize]) -> Vec<f64> {
        columns.iter().map(|&c| self.get(c)).collect()
    }
}

/// One row of a feature space.
#[derive(Debug, Clone, PartialEq)]
pub enum Row {
    Dense(Vec<f64>),
    Sparse(SparseVec),
}

impl Row {
    pub fn dim(&self) -> usize {
        match self {
            Row::Dense(v) => v.len(),
            Row::Sparse(s) => s.dim,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        match self {
            Row::Dense(v) => v.clone(),
            Row::Sparse(s) => s.to_dense(),
        }
    }

    pub fn to_sparse(&self) -> SparseVec {
        match self {
            Row::Sparse(s) => s.clone(),
            Row::Dense(v) => {
                let mut s = SparseVec::zeros(v.len());
                for (i, &x) in v.iter().enumerate() {
                    if x != 0.0 {
                        s.indices.push(i);
                        s.values.push(x);
                    }
                }
                s
            }
        }
    }
}

/// Where a feature table is valid: everywhere, or only for one (code, fold)
/// because it was fit on that fold's training data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Scope {
    pub code: Option<Code>,
    pub fold: Option<usize>,
}

impl Scope {
    pub const GLOBAL: Scope = Scope {
        code: None,
        fold: None,
    };

    pub fn fold(fold: usize) -> Self {
        Scope {
            code: None,
            fold: Some(fold),
        }
    }

    pub fn code_fold(code: Code, fold: usize) -> Self {
        Scope {
            code: Some(code),
            fold: Some(fold),
        }
    }
}

/// All rows of one feature space (within one scope), keyed by tweet id.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub space: String,
    pub dim: usize,
    pub rows: HashMap<String, Row>,
}

impl FeatureTable {
    pub fn new(space: impl Into<String>, dim: usize) -> Self {
        Self {
            space: space.into(),
            dim,
            rows: HashMap::new(),
        }
    }

    pub fn insert(&mut self, tweet_id: impl Into<String>, row: Row) -> Result<()> {
        if row.dim() != self.dim {
            return Err(Error::Dimension(format!(
                "space {} expects dim {}, got {}",
                self.space,
                self.dim,
                row.dim()
            )));
        }
        self.rows.insert(tweet_id.into(), row);
        Ok(())
    }

    pub fn row(&self, tweet_id: &str) -> Result<&Row> {
        self.rows.get(tweet_id).ok_or_else(|| {
            Error::MissingFeature(format!("{} has no row for tweet {}", self.space, tweet_id))
        })
    }
}

/// Serialized form of one feature row: `FeatureBlock` JSONL record.
///
/// Dense rows carry `values` only; sparse rows carry `indices` and `values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBlock {
    pub tweet_id: String,
    pub space: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<Code>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold: Option<usize>,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indices: Option<Vec<usize>>,
    pub values: Vec<f64>,
}

impl FeatureBlock {
    pub fn from_row(tweet_id: &str, space: &str, scope: Scope, row: &Row) -> Self {
        let (indices, values) = match row {
            Row::Dense(v) => (None, v.clone()),
            Row::Sparse(s) => (Some(s.indices.clone()), s.values.clone()),
        };
        Self {
            tweet_id: tweet_id.to_string(),
            space: space.to_string(),
            code: scope.code,
            fold: scope.fold,
            dim: row.dim(),
            indices,
            values,
        }
    }

    pub fn scope(&self) -> Scope {
        Scope {
            code: self.code,
            fold: self.fold,
        }
    }

    pub fn to_row(&self) -> Result<Row> {
        match &self.indices {
            None => {
                if self.values.len() != self.dim {
                    return Err(Error::Dimension(format!(
                        "dense block for {} has {} values but dim {}",
                        self.tweet_id,
                        self.values.len(),
                        self.dim
                    )));
                }
                Ok(Row::Dense(self.values.clone()))
            }
            Some(idx) => {
                let ordered = idx.windows(2).all(|w| w[0] < w[1]);
                if idx.len() != self.values.len()
                    || !ordered
                    || idx.last().is_some_and(|&i| i >= self.dim)
                {
                    return Err(Error::invalid(format!(
                        "sparse block for {} has inconsistent indices",
                        self.tweet_id
                    )));
                }
                Ok(Row::Sparse(SparseVec {
                    dim: self.dim,
                    indices: idx.clone(),
                    values: self.values.clone(),
                }))
            }
        }
    }
}

/// Feature tables for every (space, scope) the experiment needs.
#[derive(Debug, Clone, Default)]
pub struct FeatureStore {
    tables: BTreeMap<(String, Scope), FeatureTable>,
}

impl FeatureStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, scope: Scope, table: FeatureTable) {
        self.tables.insert((table.space.clone(), scope), table);
    }

    /// Looks up `space` for (code, fold), falling back to fold-wide and then global tables.
    pub fn get(&self, space: &str, code: Code, fold: usize) -> Result<&FeatureTable> {
        let candidates = [
            Scope::code_fold(code, fold),
            Scope::fold(fold),
            Scope::GLOBAL,
        ];
        candidates
            .iter()
            .find_map(|s| self.tables.get(&(space.to_string(), *s)))
            .ok_or_else(|| Error::MissingFeature(space.to_string()))
    }

    pub fn contains_space(&self, space: &str) -> bool {
        self.tables.keys().any(|(s, _)| s == space)
    }

    pub fn tables(&self) -> impl Iterator<Item = (&Scope, &FeatureTable)> {
        self.tables.iter().map(|((_, scope), t)| (scope, t))
    }

    pub fn to_blocks(&self) -> Vec<FeatureBlock> {
        let mut out = Vec::new();
        for (scope, table) in self.tables() {
            let mut ids: Vec<&String> = table.rows.keys().collect();
            ids.sort();
            for id in ids {
                out.push(FeatureBlock::from_row(
                    id,
                    &table.space,
                    *scope,
                    &table.rows[id],
                ));
            }
        }
        out
    }

    pub fn add_blocks(&mut self, blocks: &[FeatureBlock]) -> Result<()> {
        for b in blocks {
            let key = (b.space.clone(), b.scope());
            let table = self
                .tables
                .entry(key)
                .or_insert_with(|| FeatureTable::new(b.space.clone(), b.dim));
            table.insert(b.tweet_id.clone(), b.to_row()?)?;
        }
        Ok(())
    }

    pub fn load(paths: &[&Path]) -> Result<Self> {
        let mut store = Self::new();
        for p in paths {
            let blocks: Vec<FeatureBlock> = read_jsonl(p)?;
            store.add_blocks(&blocks)?;
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_jsonl(path, &self.to_blocks())
    }
}
