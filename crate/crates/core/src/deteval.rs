//! Detection evaluation: IoU, greedy score-ordered matching, per-concept AP
//! and the per-source fold report.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Concept, Source};
use crate::error::{Error, Result};
use crate::imfeat::{BBox, ConceptBox, ConceptDetection};
use crate::learn::ranked_average_precision;
use crate::table::{fmt2, Table};
use crate::util::{mean, sample_sd};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

pub fn iou(a: &BBox, b: &BBox) -> Result<f64> {
    if !a.is_valid() || !b.is_valid() {
        return Err(Error::invalid("IoU of a degenerate box"));
    }
    let iw = ((a.x + a.w).min(b.x + b.w) - a.x.max(b.x)).max(0.0);
    let ih = ((a.y + a.h).min(b.y + b.h) - a.y.max(b.y)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    Ok((inter / union).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub concept: Concept,
    /// Detections of the concept by descending score (ties keep input order),
    /// each flagged true positive or not.
    pub ranked: Vec<(ConceptDetection, bool)>,
    pub n_ground_truth: usize,
}

/// Greedy matching: in descending score order, a detection is a true positive
/// when its best-overlapping still-unmatched ground-truth box of the same
/// concept on the same image reaches `iou_threshold`; that box is then used up.
pub fn match_detections(
    detections: &[ConceptDetection],
    gt_boxes: &[ConceptBox],
    concept: Concept,
    iou_threshold: f64,
) -> Result<MatchResult> {
    let mut gts_by_image: HashMap<&str, Vec<(usize, &BBox)>> = HashMap::new();
    let mut n_ground_truth = 0;
    for (i, g) in gt_boxes.iter().enumerate() {
        if g.concept == concept {
            gts_by_image
                .entry(g.image_id.as_str())
                .or_default()
                .push((i, &g.bbox));
            n_ground_truth += 1;
        }
    }
    let mut dets: Vec<&ConceptDetection> =
        detections.iter().filter(|d| d.concept == concept).collect();
    dets.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut matched = vec![false; gt_boxes.len()];
    let mut ranked = Vec::with_capacity(dets.len());
    for d in dets {
        let mut best: Option<(usize, f64)> = None;
        if let Some(cands) = gts_by_image.get(d.image_id.as_str()) {
            for &(gi, gb) in cands {
                if matched[gi] {
                    continue;
                }
                let o = iou(&d.bbox, gb)?;
                if best.is_none_or(|(_, bo)| o > bo) {
                    best = Some((gi, o));
                }
            }
        }
        let tp = match best {
            Some((gi, o)) if o >= iou_threshold => {
                matched[gi] = true;
                true
            }
            _ => false,
        };
        ranked.push((d.clone(), tp));
    }
    Ok(MatchResult {
        concept,
        ranked,
        n_ground_truth,
    })
}

/// Rank-accumulated AP; `None` when the concept has no ground truth.
pub fn detection_ap(m: &MatchResult) -> Option<f64> {
    let flags: Vec<bool> = m.ranked.iter().map(|(_, tp)| *tp).collect();
    ranked_average_precision(&flags, m.n_ground_truth)
}

/// Image subsets reported as columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subset {
    Complete,
    Only(Source),
}

impl Subset {
    pub const COLUMNS: [Subset; 3] = [
        Subset::Complete,
        Subset::Only(Source::Twitter),
        Subset::Only(Source::Tumblr),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subset::Complete => "complete",
            Subset::Only(s) => s.name(),
        }
    }

    fn admits(self, source: Source) -> bool {
        match self {
            Subset::Complete => true,
            Subset::Only(s) => s == source,
        }
    }
}

/// Mean and sample SD over the folds where the value is defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub mean: f64,
    pub sd: f64,
    pub n_folds: usize,
}

impl FoldSummary {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        Some(Self {
            mean: mean(values),
            sd: sample_sd(values),
            n_folds: values.len(),
        })
    }

    pub fn render(&self) -> String {
        format!("{} ± {}", fmt2(self.mean), fmt2(self.sd))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    /// `[concept][column]`; absent when the concept has no ground truth in the subset.
    pub concept_ap: Vec<[Option<FoldSummary>; 3]>,
    pub map: [Option<FoldSummary>; 3],
    /// Raw per-fold AP: `[column][fold][concept]`.
    pub per_fold: Vec<Vec<Vec<Option<f64>>>>,
}

impl DetectionReport {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(
            "Local concept detection AP (mean ± SD over folds)",
            vec![
                "concept".into(),
                "complete".into(),
                "twitter".into(),
                "tumblr".into(),
            ],
        );
        let cell = |c: &Option<FoldSummary>| c.map_or_else(|| "-".to_string(), |s| s.render());
        for (concept, row) in Concept::ALL.iter().zip(&self.concept_ap) {
            let mut r = vec![concept.name().to_string()];
            r.extend(row.iter().map(cell));
            t.push(r);
        }
        let mut r = vec!["mAP".to_string()];
        r.extend(self.map.iter().map(cell));
        t.push(r);
        t
    }
}

/// Evaluates each fold separately and summarizes per concept, column and mAP.
///
/// `image_fold` and `image_source` map every evaluated image to its fold and
/// source; detections and boxes on other images are ignored.
pub fn detection_report(
    detections: &[ConceptDetection],
    gt_boxes: &[ConceptBox],
    image_fold: &HashMap<String, usize>,
    image_source: &HashMap<String, Source>,
    n_folds: usize,
    iou_threshold: f64,
) -> Result<DetectionReport> {
    let mut concept_ap = vec![[None; 3]; Concept::ALL.len()];
    let mut map = [None; 3];
    let mut per_fold = Vec::new();
    for (col, subset) in Subset::COLUMNS.iter().enumerate() {
        let keep = |image: &str, fold: usize| {
            image_fold.get(image) == Some(&fold)
                && image_source.get(image).is_some_and(|&s| subset.admits(s))
        };
        let mut fold_rows = Vec::with_capacity(n_folds);
        for fold in 0..n_folds {
            let dets: Vec<ConceptDetection> = detections
                .iter()
                .filter(|d| keep(&d.image_id, fold))
                .cloned()
                .collect();
            let gts: Vec<ConceptBox> = gt_boxes
                .iter()
                .filter(|g| keep(&g.image_id, fold))
                .cloned()
                .collect();
            let mut row = Vec::with_capacity(Concept::ALL.len());
            for concept in Concept::ALL {
                let m = match_detections(&dets, &gts, concept, iou_threshold)?;
                row.push(detection_ap(&m));
            }
            fold_rows.push(row);
        }
        for (ci, cell) in concept_ap.iter_mut().enumerate() {
            let vals: Vec<f64> = fold_rows.iter().filter_map(|r| r[ci]).collect();
            cell[col] = FoldSummary::from_values(&vals);
        }
        let fold_maps: Vec<f64> = fold_rows
            .iter()
            .filter_map(|r| {
                let defined: Vec<f64> = r.iter().flatten().copied().collect();
                (!defined.is_empty()).then(|| mean(&defined))
            })
            .collect();
        map[col] = FoldSummary::from_values(&fold_maps);
        per_fold.push(fold_rows);
    }
    Ok(DetectionReport {
        concept_ap,
        map,
        per_fold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x: f64, y: f64, w: f64, h: f64) -> BBox {
        BBox::new(x, y, w, h)
    }

    fn det(img: &str, score: f64, bbox: BBox) -> ConceptDetection {
        ConceptDetection {
            image_id: img.into(),
            concept: Concept::Handgun,
            score,
            bbox,
        }
    }

    fn gt(img: &str, bbox: BBox) -> ConceptBox {
        ConceptBox {
            image_id: img.into(),
            concept: Concept::Handgun,
            bbox,
        }
    }

    #[test]
    fn iou_cases() {
        assert_eq!(
            iou(&b(0.0, 0.0, 2.0, 2.0), &b(0.0, 0.0, 2.0, 2.0)).unwrap(),
            1.0
        );
        assert_eq!(
            iou(&b(0.0, 0.0, 1.0, 1.0), &b(5.0, 5.0, 1.0, 1.0)).unwrap(),
            0.0
        );
        let v = iou(&b(0.0, 0.0, 2.0, 2.0), &b(1.0, 1.0, 2.0, 2.0)).unwrap();
        assert!((v - 1.0 / 7.0).abs() < 1e-15);
        assert!(iou(&b(0.0, 0.0, 0.0, 2.0), &b(0.0, 0.0, 1.0, 1.0)).is_err());
    }

    #[test]
    fn no_detections_keeps_gt_count() {
        let m = match_detections(
            &[],
            &[gt("i", b(0.0, 0.0, 1.0, 1.0))],
            Concept::Handgun,
            0.5,
        )
        .unwrap();
        assert!(m.ranked.is_empty());
        assert_eq!(m.n_ground_truth, 1);
        assert_eq!(detection_ap(&m), Some(0.0));
    }

    #[test]
    fn exact_detection_is_single_tp() {
        let bx = b(1.0, 1.0, 4.0, 4.0);
        let m =
            match_detections(&[det("i", 0.7, bx)], &[gt("i", bx)], Concept::Handgun, 0.5).unwrap();
        assert_eq!(m.ranked.len(), 1);
        assert!(m.ranked[0].1);
        assert_eq!(detection_ap(&m), Some(1.0));
    }

    #[test]
    fn duplicate_detection_is_fp() {
        let bx = b(0.0, 0.0, 10.0, 10.0);
        let dets = [det("i", 0.8, b(0.5, 0.0, 10.0, 10.0)), det("i", 0.9, bx)];
        let m = match_detections(&dets, &[gt("i", bx)], Concept::Handgun, 0.5).unwrap();
        let flags: Vec<(f64, bool)> = m.ranked.iter().map(|(d, t)| (d.score, *t)).collect();
        assert_eq!(flags, vec![(0.9, true), (0.8, false)]);
    }

    #[test]
    fn other_image_or_concept_never_matches() {
        let bx = b(0.0, 0.0, 10.0, 10.0);
        let mut other = det("i", 0.9, bx);
        other.concept = Concept::Money;
        let dets = [det("j", 0.9, bx), other];
        let m = match_detections(&dets, &[gt("i", bx)], Concept::Handgun, 0.5).unwrap();
        assert_eq!(m.ranked.len(), 1);
        assert!(!m.ranked[0].1);
    }

    #[test]
    fn ap_hand_trace() {
        // TP, FP, TP with two ground-truth boxes
        let m = MatchResult {
            concept: Concept::Handgun,
            ranked: vec![
                (det("i", 0.9, b(0.0, 0.0, 1.0, 1.0)), true),
                (det("i", 0.8, b(0.0, 0.0, 1.0, 1.0)), false),
                (det("i", 0.7, b(0.0, 0.0, 1.0, 1.0)), true),
            ],
            n_ground_truth: 2,
        };
        assert!((detection_ap(&m).unwrap() - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-12);
        let none = MatchResult {
            n_ground_truth: 0,
            ..m
        };
        assert_eq!(detection_ap(&none), None);
    }

    #[test]
    fn complete_map_is_not_mean_of_source_maps() {
        // Twitter image: one of two handguns detected. Tumblr image: handgun missed,
        // money detected perfectly.
        let bx = b(0.0, 0.0, 5.0, 5.0);
        let mut dets = vec![det("tw", 0.9, bx)];
        let mut money = det("tu", 0.8, bx);
        money.concept = Concept::Money;
        dets.push(money);
        let mut gts = vec![
            gt("tw", bx),
            gt("tw", b(40.0, 40.0, 5.0, 5.0)),
            gt("tu", b(20.0, 20.0, 5.0, 5.0)),
        ];
        let mut money_gt = gt("tu", bx);
        money_gt.concept = Concept::Money;
        gts.push(money_gt);
        let folds: HashMap<String, usize> = [("tw".to_string(), 0), ("tu".to_string(), 0)].into();
        let sources: HashMap<String, Source> = [
            ("tw".to_string(), Source::Twitter),
            ("tu".to_string(), Source::Tumblr),
        ]
        .into();
        let r = detection_report(&dets, &gts, &folds, &sources, 1, 0.5).unwrap();
        let complete = r.map[0].unwrap().mean;
        let twitter = r.map[1].unwrap().mean;
        let tumblr = r.map[2].unwrap().mean;
        // complete: handgun 1/3, money 1 -> 2/3; twitter 0.5; tumblr (0 + 1)/2
        assert!((complete - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!((twitter, tumblr), (0.5, 0.5));
        assert!((complete - (twitter + tumblr) / 2.0).abs() > 0.1);
        let table = r.to_table();
        assert_eq!(table.header, ["concept", "complete", "twitter", "tumblr"]);
        assert_eq!(table.rows.last().unwrap()[0], "mAP");
    }
}
