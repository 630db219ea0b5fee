//! Fold aggregation, significance marking and the code-detection results table.

use serde::{Deserialize, Serialize};

use super::spec::ModelSpec;
use super::stats::{ci_half_width, significance_marks, SignificanceRule};
use crate::corpus::Code;
use crate::error::{Error, Result};
use crate::learn::Metrics;
use crate::table::{fmt2, Table};
use crate::util::mean;

pub const BEST_MARK: &str = "*";
pub const NOT_WORSE_MARK: &str = "†";

/// Fold means of one (model, code) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeSummary {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Mean over folds with at least one positive test tweet.
    pub ap: Option<f64>,
    /// Per-fold AP, present only when every fold has one.
    pub ap_folds: Option<Vec<f64>>,
    pub ap_ci: Option<f64>,
    pub best: bool,
    pub not_worse: bool,
}

impl CodeSummary {
    pub fn from_folds(folds: &[Metrics]) -> Self {
        let col = |f: fn(&Metrics) -> f64| mean(&folds.iter().map(f).collect::<Vec<_>>());
        let defined: Vec<f64> = folds.iter().filter_map(|m| m.ap).collect();
        let ap_folds = (defined.len() == folds.len() && !folds.is_empty()).then(|| defined.clone());
        Self {
            precision: col(|m| m.precision),
            recall: col(|m| m.recall),
            f1: col(|m| m.f1),
            ap: (!defined.is_empty()).then(|| mean(&defined)),
            ap_ci: ap_folds.as_deref().map(ci_half_width),
            ap_folds,
            best: false,
            not_worse: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub spec: ModelSpec,
    pub codes: [CodeSummary; 3],
    /// Mean of the three per-code AP means.
    pub map: Option<f64>,
    /// Per-fold mean of the three code APs.
    pub map_folds: Option<Vec<f64>>,
    pub map_ci: Option<f64>,
    pub map_best: bool,
    pub map_not_worse: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rule: SignificanceRule,
    pub models: Vec<ModelSummary>,
}

/// Raw per-fold metrics of one model, ordered aggression, loss, substance use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub spec: ModelSpec,
    pub folds: [Vec<Metrics>; 3],
}

impl EvalReport {
    /// Aggregates folds and marks, per code and for mAP, the best model and
    /// every model not significantly worse. Out-of-competition models are
    /// summarized but take no part in the marking.
    pub fn build(results: &[ModelResult], rule: SignificanceRule) -> Result<Self> {
        let mut models = Vec::with_capacity(results.len());
        for r in results {
            let n = r.folds[0].len();
            if r.folds.iter().any(|f| f.len() != n) {
                return Err(Error::Dimension(format!(
                    "model {}: codes have different fold counts",
                    r.spec.name
                )));
            }
            let codes = [0, 1, 2].map(|c| CodeSummary::from_folds(&r.folds[c]));
            let map = match (codes[0].ap, codes[1].ap, codes[2].ap) {
                (Some(a), Some(b), Some(c)) => Some((a + b + c) / 3.0),
                _ => None,
            };
            let map_folds = match (&codes[0].ap_folds, &codes[1].ap_folds, &codes[2].ap_folds) {
                (Some(a), Some(b), Some(c)) => Some(
                    (0..n)
                        .map(|i| (a[i] + b[i] + c[i]) / 3.0)
                        .collect::<Vec<_>>(),
                ),
                _ => None,
            };
            models.push(ModelSummary {
                spec: r.spec.clone(),
                codes,
                map,
                map_ci: map_folds.as_deref().map(ci_half_width),
                map_folds,
                map_best: false,
                map_not_worse: false,
            });
        }
        let competing = |m: &ModelSummary| !m.spec.out_of_competition;
        for c in 0..3 {
            let values: Vec<Option<&[f64]>> = models
                .iter()
                .map(|m| m.codes[c].ap_folds.as_deref().filter(|_| competing(m)))
                .collect();
            let (best, flags) = significance_marks(&values, rule)?;
            for (m, f) in models.iter_mut().zip(flags) {
                m.codes[c].not_worse = f;
            }
            if let Some(b) = best {
                models[b].codes[c].best = true;
            }
        }
        let values: Vec<Option<&[f64]>> = models
            .iter()
            .map(|m| m.map_folds.as_deref().filter(|_| competing(m)))
            .collect();
        let (best, flags) = significance_marks(&values, rule)?;
        for (m, f) in models.iter_mut().zip(flags) {
            m.map_not_worse = f;
        }
        if let Some(b) = best {
            models[b].map_best = true;
        }
        Ok(Self { rule, models })
    }

    pub fn model(&self, name: &str, fusion: super::spec::Fusion) -> Option<&ModelSummary> {
        self.models
            .iter()
            .find(|m| m.spec.name == name && m.spec.fusion == fusion)
    }

    /// Rows per model: P, R, F1, AP for each code, then mAP. AP cells carry
    /// the significance markers.
    pub fn to_table(&self) -> Table {
        let rule = match self.rule {
            SignificanceRule::PairedT => "paired t-test",
            SignificanceRule::CiOverlap => "95% CI overlap",
        };
        let mut header: Vec<String> = ["modality", "features", "fusion"]
            .map(String::from)
            .to_vec();
        for code in Code::ALL {
            for m in ["P", "R", "F1", "AP"] {
                header.push(format!("{} {m}", code.name()));
            }
        }
        header.push("mAP".into());
        let mut t = Table::new(
            format!(
                "Code detection, 5-fold means. {BEST_MARK} highest AP; {NOT_WORSE_MARK} not significantly worse than the highest ({rule}, 95%)"
            ),
            header,
        );
        for m in &self.models {
            let mut name = m.spec.name.clone();
            if m.spec.out_of_competition {
                name.push_str(" (out of competition)");
            }
            let mut row = vec![
                m.spec.modality.name().to_string(),
                name,
                m.spec.fusion.name().to_string(),
            ];
            for c in &m.codes {
                row.push(fmt2(c.precision));
                row.push(fmt2(c.recall));
                row.push(fmt2(c.f1));
                row.push(marked(c.ap, c.not_worse, c.best));
            }
            row.push(marked(m.map, m.map_not_worse, m.map_best));
            t.push(row);
        }
        t
    }
}

fn marked(v: Option<f64>, not_worse: bool, best: bool) -> String {
    let Some(v) = v else { return "-".into() };
    let mut s = fmt2(v);
    if not_worse {
        s.push_str(NOT_WORSE_MARK);
    }
    if best {
        s.push_str(BEST_MARK);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::spec::{Modality, GT_CONCEPTS};
    use proptest::prelude::*;

    fn m(ap: f64) -> Metrics {
        Metrics {
            precision: 0.5,
            recall: 0.5,
            f1: 0.5,
            ap: Some(ap),
        }
    }

    fn result(name: &str, aps: [[f64; 5]; 3]) -> ModelResult {
        ModelResult {
            spec: ModelSpec::single(name, Modality::Text, "x"),
            folds: aps.map(|a| a.iter().map(|&v| m(v)).collect()),
        }
    }

    #[test]
    fn best_and_not_worse_marks() {
        let strong = [0.8, 0.82, 0.79, 0.81, 0.8];
        let close = [0.79, 0.83, 0.78, 0.8, 0.8];
        let weak = [0.3, 0.31, 0.29, 0.3, 0.3];
        let r = EvalReport::build(
            &[
                result("a", [strong, weak, weak]),
                result("b", [close, weak, strong]),
                result("c", [weak, strong, weak]),
            ],
            SignificanceRule::PairedT,
        )
        .unwrap();
        let a = &r.models[0].codes[0];
        assert!(a.best && a.not_worse);
        assert!(r.models[1].codes[0].not_worse && !r.models[1].codes[0].best);
        assert!(!r.models[2].codes[0].not_worse);
        let t = r.to_table().to_markdown();
        assert!(t.contains("0.80†*"), "{t}");
    }

    #[test]
    fn out_of_competition_model_is_never_marked() {
        let mut gt = result("gt", [[0.99; 5]; 3]);
        gt.spec = ModelSpec::single("gt", Modality::Image, GT_CONCEPTS);
        let r = EvalReport::build(&[result("a", [[0.5; 5]; 3]), gt], SignificanceRule::PairedT)
            .unwrap();
        assert!(r.models[0].codes[0].best && r.models[0].map_best);
        assert!(!r.models[1].codes.iter().any(|c| c.best || c.not_worse));
        assert!(r.to_table().to_markdown().contains("(out of competition)"));
    }

    #[test]
    fn missing_fold_ap_disables_marking_but_keeps_mean() {
        let mut r = result("a", [[0.5; 5]; 3]);
        r.folds[1][2].ap = None;
        let rep = EvalReport::build(&[r], SignificanceRule::PairedT).unwrap();
        assert_eq!(rep.models[0].codes[1].ap, Some(0.5));
        assert!(rep.models[0].codes[1].ap_folds.is_none());
        assert!(rep.models[0].map_folds.is_none());
        assert_eq!(rep.models[0].map, Some(0.5));
    }

    proptest! {
        #[test]
        fn map_is_mean_of_code_means(aps in proptest::collection::vec(0.0f64..1.0, 15)) {
            let a: [[f64; 5]; 3] = [0, 1, 2].map(|c| std::array::from_fn(|f| aps[c * 5 + f]));
            let rep = EvalReport::build(&[result("a", a)], SignificanceRule::PairedT).unwrap();
            let s = &rep.models[0];
            let want = (s.codes[0].ap.unwrap() + s.codes[1].ap.unwrap() + s.codes[2].ap.unwrap()) / 3.0;
            prop_assert!((s.map.unwrap() - want).abs() <= 1e-12);
            prop_assert!((mean(s.map_folds.as_ref().unwrap()) - want).abs() <= 1e-12);
        }
    }
}
