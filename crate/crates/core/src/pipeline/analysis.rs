//! Concept sensitivity (linear coefficients) and concept ablation on the
//! ground-truth concept model.

use serde::{Deserialize, Serialize};

use super::data::{dense_rows, Dataset};
use super::model::rbf_scores;
use super::spec::GT_CONCEPTS;
use super::stats::one_sample_significant;
use crate::corpus::{Code, Concept, N_CONCEPTS};
use crate::error::{Error, Result};
use crate::features::FeatureStore;
use crate::learn::{
    classification_metrics, train_linear_svm, LinearSvmConfig, Metrics, RbfSvmConfig,
};
use crate::table::{fmt2, fmt_opt, Table};
use crate::util::{derive_seed, mean};

/// Column label of a concept feature space: the threshold for detection
/// counts, `GT` for annotations.
pub fn variant_label(space: &str) -> String {
    if space == GT_CONCEPTS {
        "GT".into()
    } else {
        space.strip_prefix("counts@").unwrap_or(space).to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityColumn {
    pub code: Code,
    pub space: String,
    /// Mean linear SVM weight per concept over folds.
    pub coef: [f64; N_CONCEPTS],
    pub f1: f64,
    pub ap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    /// Code-major, then in the order of the requested spaces.
    pub columns: Vec<SensitivityColumn>,
}

fn check_concept_space(store: &FeatureStore, space: &str, code: Code) -> Result<()> {
    let t = store.get(space, code, 0)?;
    if t.dim != N_CONCEPTS {
        return Err(Error::Dimension(format!(
            "{space} has {} columns, expected {N_CONCEPTS}",
            t.dim
        )));
    }
    Ok(())
}

/// Per code and concept space: a linear squared-hinge SVM per fold on the raw
/// concept counts, with coefficients averaged over folds.
pub fn sensitivity_table(
    data: &Dataset,
    store: &FeatureStore,
    spaces: &[&str],
    cfg: &LinearSvmConfig,
) -> Result<SensitivityReport> {
    let mut columns = Vec::new();
    for code in Code::ALL {
        for &space in spaces {
            check_concept_space(store, space, code)?;
            let mut coef = [0.0; N_CONCEPTS];
            let mut folds = Vec::new();
            for fold in 0..data.k() {
                let table = store.get(space, code, fold)?;
                let (tr, te) = (data.train_indices(fold), data.test_indices(fold));
                let model = train_linear_svm(
                    &dense_rows(data, table, &tr)?,
                    &data.code_labels(code, &tr),
                    cfg,
                )
                .map_err(|e| {
                    Error::Training(format!("sensitivity {space} / {code} / fold {fold}: {e}"))
                })?;
                for (c, w) in coef.iter_mut().zip(&model.weights) {
                    *c += w / data.k() as f64;
                }
                let scores = model.decisions(&dense_rows(data, table, &te)?);
                let preds: Vec<bool> = scores.iter().map(|&s| s > 0.0).collect();
                folds.push(classification_metrics(
                    &scores,
                    &preds,
                    &data.code_labels(code, &te),
                ));
            }
            let aps: Vec<f64> = folds.iter().filter_map(|m| m.ap).collect();
            columns.push(SensitivityColumn {
                code,
                space: space.to_string(),
                coef,
                f1: mean(&folds.iter().map(|m| m.f1).collect::<Vec<_>>()),
                ap: (!aps.is_empty()).then(|| mean(&aps)),
            });
        }
    }
    Ok(SensitivityReport { columns })
}

impl SensitivityReport {
    pub fn column(&self, code: Code, space: &str) -> Option<&SensitivityColumn> {
        self.columns
            .iter()
            .find(|c| c.code == code && c.space == space)
    }

    pub fn to_table(&self) -> Table {
        let mut header = vec!["concept".to_string()];
        header.extend(
            self.columns
                .iter()
                .map(|c| format!("{} {}", c.code.name(), variant_label(&c.space))),
        );
        let mut t = Table::new(
            "Concept sensitivity: mean linear SVM coefficients over folds",
            header,
        );
        for k in Concept::ALL {
            let mut row = vec![k.name().to_string()];
            row.extend(self.columns.iter().map(|c| fmt2(c.coef[k.index()])));
            t.push(row);
        }
        let mut f1 = vec!["F1".to_string()];
        f1.extend(self.columns.iter().map(|c| fmt2(c.f1)));
        t.push(f1);
        let mut ap = vec!["AP".to_string()];
        ap.extend(self.columns.iter().map(|c| fmt_opt(c.ap)));
        t.push(ap);
        t
    }
}

/// Per-fold metrics of the ground-truth concept model restricted to `keep`
/// columns. The seed depends only on (code, fold), so reduced and full
/// models share their calibration splits.
pub fn concept_subset_metrics(
    data: &Dataset,
    store: &FeatureStore,
    code: Code,
    keep: &[usize],
    cfg: &RbfSvmConfig,
    master_seed: u64,
) -> Result<Vec<Metrics>> {
    let mut out = Vec::new();
    for fold in 0..data.k() {
        let table = store.get(GT_CONCEPTS, code, fold)?;
        let (tr, te) = (data.train_indices(fold), data.test_indices(fold));
        let pick = |rows: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            rows.into_iter()
                .map(|r| keep.iter().map(|&k| r[k]).collect())
                .collect()
        };
        let y = data.code_labels(code, &tr);
        let seed = derive_seed(master_seed, &["ablation", code.name(), &fold.to_string()]);
        let (scores, preds) = rbf_scores(
            pick(dense_rows(data, table, &tr)?),
            pick(dense_rows(data, table, &te)?),
            &y,
            cfg,
            seed,
        )
        .map_err(|e| Error::Training(format!("ablation {code} / fold {fold}: {e}")))?;
        out.push(classification_metrics(
            &scores,
            &preds,
            &data.code_labels(code, &te),
        ));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    /// reduced − full, per fold.
    pub delta_f1: Vec<f64>,
    /// reduced − full, over folds where both APs are defined.
    pub delta_ap: Vec<f64>,
    pub f1_significant: bool,
    pub ap_significant: bool,
}

impl AblationCell {
    pub fn mean_f1(&self) -> f64 {
        mean(&self.delta_f1)
    }

    pub fn mean_ap(&self) -> f64 {
        mean(&self.delta_ap)
    }

    /// Significantly below zero, the highlighted case.
    pub fn f1_drop(&self) -> bool {
        self.f1_significant && self.mean_f1() < 0.0
    }

    pub fn ap_drop(&self) -> bool {
        self.ap_significant && self.mean_ap() < 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    /// Per code, the full 9-concept model's fold metrics.
    pub full: Vec<Vec<Metrics>>,
    /// Per code, one cell per concept.
    pub cells: Vec<Vec<AblationCell>>,
}

/// Retrains the ground-truth concept model without each concept in turn.
pub fn ablation_table(
    data: &Dataset,
    store: &FeatureStore,
    cfg: &RbfSvmConfig,
    master_seed: u64,
) -> Result<AblationReport> {
    let all: Vec<usize> = (0..N_CONCEPTS).collect();
    let mut full_all = Vec::new();
    let mut cells = Vec::new();
    for code in Code::ALL {
        check_concept_space(store, GT_CONCEPTS, code)?;
        let full = concept_subset_metrics(data, store, code, &all, cfg, master_seed)?;
        let mut row = Vec::new();
        for k in 0..N_CONCEPTS {
            let keep: Vec<usize> = all.iter().copied().filter(|&c| c != k).collect();
            let reduced = concept_subset_metrics(data, store, code, &keep, cfg, master_seed)?;
            let delta_f1: Vec<f64> = reduced
                .iter()
                .zip(&full)
                .map(|(r, f)| r.f1 - f.f1)
                .collect();
            let delta_ap: Vec<f64> = reduced
                .iter()
                .zip(&full)
                .filter_map(|(r, f)| Some(r.ap? - f.ap?))
                .collect();
            row.push(AblationCell {
                f1_significant: one_sample_significant(&delta_f1),
                ap_significant: one_sample_significant(&delta_ap),
                delta_f1,
                delta_ap,
            });
        }
        full_all.push(full);
        cells.push(row);
    }
    Ok(AblationReport {
        full: full_all,
        cells,
    })
}

impl AblationReport {
    pub fn cell(&self, code: Code, concept: Concept) -> &AblationCell {
        &self.cells[code.index()][concept.index()]
    }

    /// Codes shown in the table: aggression and substance use always, loss
    /// only when one of its differences is significantly below zero.
    pub fn shown_codes(&self) -> Vec<Code> {
        Code::ALL
            .into_iter()
            .filter(|&c| {
                c != Code::Loss
                    || self.cells[c.index()]
                        .iter()
                        .any(|x| x.f1_drop() || x.ap_drop())
            })
            .collect()
    }

    pub fn to_table(&self) -> Table {
        let codes = self.shown_codes();
        let mut header = vec!["removed concept".to_string()];
        for c in &codes {
            header.push(format!("{} F1", c.name()));
            header.push(format!("{} AP", c.name()));
        }
        let mut t = Table::new(
            "Concept ablation: reduced minus full ground-truth concept model; bold = significantly below 0",
            header,
        );
        let cell = |v: f64, bold: bool| {
            if bold {
                format!("**{}**", fmt2(v))
            } else {
                fmt2(v)
            }
        };
        for k in Concept::ALL {
            let mut row = vec![k.name().to_string()];
            for &c in &codes {
                let x = self.cell(c, k);
                row.push(cell(x.mean_f1(), x.f1_drop()));
                row.push(cell(x.mean_ap(), x.ap_drop()));
            }
            t.push(row);
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Source, TweetRecord};
    use crate::features::{FeatureTable, Row, Scope};
    use crate::pipeline::folds::{make_folds, user_loads};

    /// Tweets whose concept counts are given directly, two tweets per user.
    fn dataset(rows: &[([f64; N_CONCEPTS], [bool; 3])]) -> (Dataset, FeatureStore) {
        let tweets: Vec<TweetRecord> = (0..rows.len())
            .map(|i| TweetRecord {
                tweet_id: format!("t{i:04}"),
                user_id: format!("u{:03}", i / 2),
                text: "x".into(),
                image_id: None,
                pos_tags: None,
                source: Source::Twitter,
            })
            .collect();
        let labels: Vec<[bool; 3]> = rows.iter().map(|r| r.1).collect();
        let folds = make_folds(&user_loads(&tweets, &labels), 5, 0).unwrap();
        let mut table = FeatureTable::new(GT_CONCEPTS, N_CONCEPTS);
        for (t, r) in tweets.iter().zip(rows) {
            table
                .insert(t.tweet_id.clone(), Row::Dense(r.0.to_vec()))
                .unwrap();
        }
        let mut store = FeatureStore::new();
        store.insert(Scope::GLOBAL, table);
        let data = Dataset::new(tweets, labels, folds, None, vec![], vec![]).unwrap();
        (data, store)
    }

    /// Concept 0 (handgun) marks aggression, concept 2 (joint) substance use,
    /// concept 4 (person) is noise, concept 8 (money) never occurs.
    fn planted(n: usize) -> Vec<([f64; N_CONCEPTS], [bool; 3])> {
        let mut rng = crate::util::rng_from_seed(11);
        use rand::Rng;
        (0..n)
            .map(|_| {
                let agg = rng.random::<f64>() < 0.3;
                let sub = rng.random::<f64>() < 0.3;
                let mut x = [0.0; N_CONCEPTS];
                x[0] = f64::from(u8::from(agg && rng.random::<f64>() < 0.8));
                x[2] = f64::from(u8::from(sub && rng.random::<f64>() < 0.8));
                x[4] = f64::from(u8::from(rng.random::<f64>() < 0.5));
                (
                    [x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7], x[8]],
                    [agg, false, sub],
                )
            })
            .collect()
    }

    fn fix_loss(rows: &mut [([f64; N_CONCEPTS], [bool; 3])]) {
        for (i, r) in rows.iter_mut().enumerate() {
            r.1[1] = i % 4 == 0;
        }
    }

    #[test]
    fn planted_concept_has_largest_coefficient_and_absent_is_zero() {
        let mut rows = planted(300);
        fix_loss(&mut rows);
        let (data, store) = dataset(&rows);
        let rep =
            sensitivity_table(&data, &store, &[GT_CONCEPTS], &LinearSvmConfig::default()).unwrap();
        let agg = rep.column(Code::Aggression, GT_CONCEPTS).unwrap();
        let best = (0..N_CONCEPTS)
            .max_by(|&a, &b| agg.coef[a].total_cmp(&agg.coef[b]))
            .unwrap();
        assert_eq!(best, Concept::Handgun.index());
        let sub = rep.column(Code::SubstanceUse, GT_CONCEPTS).unwrap();
        let best = (0..N_CONCEPTS)
            .max_by(|&a, &b| sub.coef[a].total_cmp(&sub.coef[b]))
            .unwrap();
        assert_eq!(best, Concept::Joint.index());
        for c in &rep.columns {
            assert!(c.coef[Concept::Money.index()].abs() < 1e-6);
        }
        assert_eq!(rep.to_table().rows.len(), N_CONCEPTS + 2);
    }

    #[test]
    fn coefficients_do_not_depend_on_tweet_order() {
        let mut rows = planted(200);
        fix_loss(&mut rows);
        let (data, store) = dataset(&rows);
        let a =
            sensitivity_table(&data, &store, &[GT_CONCEPTS], &LinearSvmConfig::default()).unwrap();
        // Same tweets, reversed, with the same user-to-fold map.
        let mut rev = data.clone();
        rev.tweets.reverse();
        rev.labels.reverse();
        rev.tweet_fold.reverse();
        let b =
            sensitivity_table(&rev, &store, &[GT_CONCEPTS], &LinearSvmConfig::default()).unwrap();
        for (x, y) in a.columns.iter().zip(&b.columns) {
            for k in 0..N_CONCEPTS {
                assert!(
                    (x.coef[k] - y.coef[k]).abs() < 1e-6,
                    "{} vs {}",
                    x.coef[k],
                    y.coef[k]
                );
            }
        }
    }

    #[test]
    fn ablation_flags_planted_concept_and_zero_column() {
        let mut rows = planted(300);
        fix_loss(&mut rows);
        let (data, store) = dataset(&rows);
        let rep = ablation_table(&data, &store, &RbfSvmConfig::default(), 5).unwrap();
        let joint = rep.cell(Code::SubstanceUse, Concept::Joint);
        assert!(joint.ap_drop(), "{joint:?}");
        let money = rep.cell(Code::SubstanceUse, Concept::Money);
        assert!(money.delta_ap.iter().all(|&d| d == 0.0), "{money:?}");
        assert!(!money.ap_significant);
        assert!(!rep.shown_codes().contains(&Code::Loss));
        assert!(rep.to_table().to_markdown().contains("**"));
    }

    #[test]
    fn ablation_deltas_are_not_additive() {
        // Two redundant copies of the signal: dropping either alone costs
        // nothing, dropping both costs a lot.
        let mut rows = planted(300);
        fix_loss(&mut rows);
        for r in rows.iter_mut() {
            r.0[3] = r.0[2];
        }
        let (data, store) = dataset(&rows);
        let cfg = RbfSvmConfig::default();
        let ap = |keep: &[usize]| -> f64 {
            let m =
                concept_subset_metrics(&data, &store, Code::SubstanceUse, keep, &cfg, 5).unwrap();
            mean(&m.iter().map(|x| x.ap.unwrap()).collect::<Vec<_>>())
        };
        let all: Vec<usize> = (0..N_CONCEPTS).collect();
        let without = |drop: &[usize]| -> Vec<usize> {
            all.iter().copied().filter(|c| !drop.contains(c)).collect()
        };
        let full = ap(&all);
        let single_sum = (ap(&without(&[2])) - full) + (ap(&without(&[3])) - full);
        let joint_drop = ap(&without(&[2, 3])) - full;
        assert!(single_sum.abs() < 0.05, "{single_sum}");
        assert!(joint_drop < -0.2, "{joint_drop}");
    }
}
