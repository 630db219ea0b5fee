//! Image features from precomputed inputs: global CNN vectors and local
//! concept detections / ground-truth boxes turned into per-concept counts.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Concept, N_CONCEPTS};
use crate::error::{Error, Result};
use crate::util::read_jsonl;

/// Axis-aligned box `(x, y, w, h)` in pixels; serialized as a 4-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl From<[f64; 4]> for BBox {
    fn from([x, y, w, h]: [f64; 4]) -> Self {
        Self { x, y, w, h }
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn is_valid(&self) -> bool {
        self.w > 0.0 && self.h > 0.0 && self.x.is_finite() && self.y.is_finite()
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalFeature {
    pub image_id: String,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptDetection {
    pub image_id: String,
    pub concept: Concept,
    pub score: f64,
    #[serde(rename = "box")]
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptBox {
    pub image_id: String,
    pub concept: Concept,
    #[serde(rename = "box")]
    pub bbox: BBox,
}

/// Global image vectors keyed by image id, all of one dimension.
#[derive(Debug, Clone, Default)]
pub struct GlobalFeatures {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl GlobalFeatures {
    pub fn from_records(records: Vec<GlobalFeature>) -> Result<Self> {
        let mut out = Self::default();
        for (i, r) in records.into_iter().enumerate() {
            if i == 0 {
                out.dim = r.vector.len();
            } else if r.vector.len() != out.dim {
                return Err(Error::Dimension(format!(
                    "global feature for {} has dim {}, expected {}",
                    r.image_id,
                    r.vector.len(),
                    out.dim
                )));
            }
            if r.vector.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("global feature {}", r.image_id)));
            }
            if out.vectors.insert(r.image_id.clone(), r.vector).is_some() {
                return Err(Error::Duplicate {
                    what: "global features",
                    key: r.image_id,
                });
            }
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Copy keeping only the images accepted by `keep`.
    pub fn retain(&self, keep: impl Fn(&str) -> bool) -> Self {
        Self {
            dim: self.dim,
            vectors: self
                .vectors
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    /// Vector for an image; tweets without an image (or with an unknown one)
    /// get zeros, the latter with a warning.
    pub fn lookup(&self, image_id: Option<&str>) -> Vec<f64> {
        match image_id {
            None => vec![0.0; self.dim],
            Some(id) => match self.vectors.get(id) {
                Some(v) => v.clone(),
                None => {
                    log::warn!("no global feature for image {id}; using zeros");
                    vec![0.0; self.dim]
                }
            },
        }
    }
}

pub fn load_global(path: &Path) -> Result<GlobalFeatures> {
    GlobalFeatures::from_records(read_jsonl(path)?)
}

pub fn validate_detections(dets: &[ConceptDetection]) -> Result<()> {
    for d in dets {
        if !d.bbox.is_valid() {
            return Err(Error::invalid(format!(
                "degenerate box on image {}",
                d.image_id
            )));
        }
        if !(0.0..=1.0).contains(&d.score) {
            return Err(Error::invalid(format!(
                "detection score {} outside [0, 1] on image {}",
                d.score, d.image_id
            )));
        }
    }
    Ok(())
}

pub fn validate_boxes(boxes: &[ConceptBox]) -> Result<()> {
    match boxes.iter().find(|b| !b.bbox.is_valid()) {
        Some(b) => Err(Error::invalid(format!(
            "degenerate box on image {}",
            b.image_id
        ))),
        None => Ok(()),
    }
}

pub fn load_detections(path: &Path) -> Result<Vec<ConceptDetection>> {
    let dets = read_jsonl(path)?;
    validate_detections(&dets)?;
    Ok(dets)
}

pub fn load_boxes(path: &Path) -> Result<Vec<ConceptBox>> {
    let boxes = read_jsonl(path)?;
    validate_boxes(&boxes)?;
    Ok(boxes)
}

/// Number of detections per concept whose score is strictly above `threshold`.
pub fn concept_counts<'a>(
    detections: impl IntoIterator<Item = &'a ConceptDetection>,
    threshold: f64,
) -> [f64; N_CONCEPTS] {
    let mut out = [0.0; N_CONCEPTS];
    for d in detections {
        if d.score > threshold {
            out[d.concept.index()] += 1.0;
        }
    }
    out
}

pub fn gt_concept_counts<'a>(boxes: impl IntoIterator<Item = &'a ConceptBox>) -> [f64; N_CONCEPTS] {
    let mut out = [0.0; N_CONCEPTS];
    for b in boxes {
        out[b.concept.index()] += 1.0;
    }
    out
}

/// Groups records by image id.
pub fn by_image<T, F>(records: &[T], key: F) -> HashMap<&str, Vec<&T>>
where
    F: Fn(&T) -> &str,
{
    let mut map: HashMap<&str, Vec<&T>> = HashMap::new();
    for r in records {
        map.entry(key(r)).or_default().push(r);
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn det(concept: Concept, score: f64) -> ConceptDetection {
        ConceptDetection {
            image_id: "img".into(),
            concept,
            score,
            bbox: BBox::new(0.0, 0.0, 10.0, 10.0),
        }
    }

    #[test]
    fn counts_strictly_above_threshold() {
        let dets = [
            det(Concept::Handgun, 0.6),
            det(Concept::Handgun, 0.3),
            det(Concept::Person, 0.9),
        ];
        let c = concept_counts(&dets, 0.5);
        let mut expected = [0.0; 9];
        expected[Concept::Handgun.index()] = 1.0;
        expected[Concept::Person.index()] = 1.0;
        assert_eq!(c, expected);
        assert_eq!(concept_counts(&[det(Concept::Money, 0.5)], 0.5), [0.0; 9]);
        assert_eq!(concept_counts(&dets, 1.0), [0.0; 9]);
        assert_eq!(concept_counts(&[], 0.1), [0.0; 9]);
    }

    #[test]
    fn gt_counts_hand_case() {
        let b = |c| ConceptBox {
            image_id: "i".into(),
            concept: c,
            bbox: BBox::new(1.0, 1.0, 2.0, 2.0),
        };
        assert_eq!(gt_concept_counts(&[]), [0.0; 9]);
        let c = gt_concept_counts(&[b(Concept::Person), b(Concept::Person), b(Concept::Tattoo)]);
        assert_eq!(c[Concept::Person.index()], 2.0);
        assert_eq!(c[Concept::Tattoo.index()], 1.0);
        assert_eq!(c.iter().sum::<f64>(), 3.0);
    }

    fn concept_strategy() -> impl Strategy<Value = Concept> {
        (0usize..9).prop_map(|i| Concept::ALL[i])
    }

    proptest! {
        #[test]
        fn counts_match_filter_and_tally(
            raw in proptest::collection::vec((concept_strategy(), 0.0f64..=1.0), 0..30),
            threshold in 0.0f64..=1.0,
        ) {
            let dets: Vec<_> = raw.iter().map(|&(c, s)| det(c, s)).collect();
            let counts = concept_counts(&dets, threshold);
            for c in Concept::ALL {
                let tally = raw.iter().filter(|(k, s)| *k == c && *s > threshold).count();
                prop_assert_eq!(counts[c.index()], tally as f64);
            }
        }

        #[test]
        fn counts_non_increasing_in_threshold(
            raw in proptest::collection::vec((concept_strategy(), 0.0f64..=1.0), 0..30),
            a in 0.0f64..=1.0,
            b in 0.0f64..=1.0,
        ) {
            let dets: Vec<_> = raw.iter().map(|&(c, s)| det(c, s)).collect();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (cl, ch) = (concept_counts(&dets, lo), concept_counts(&dets, hi));
            prop_assert!(cl.iter().zip(&ch).all(|(l, h)| l >= h));
        }

        #[test]
        fn perfect_detector_reproduces_gt_counts(
            concepts in proptest::collection::vec(concept_strategy(), 0..20),
            threshold in 0.0f64..0.999,
        ) {
            let boxes: Vec<_> = concepts.iter().map(|&c| ConceptBox {
                image_id: "i".into(), concept: c, bbox: BBox::new(0.0, 0.0, 3.0, 4.0),
            }).collect();
            let dets: Vec<_> = boxes.iter().map(|b| ConceptDetection {
                image_id: b.image_id.clone(), concept: b.concept, score: 1.0, bbox: b.bbox,
            }).collect();
            prop_assert_eq!(gt_concept_counts(&boxes), concept_counts(&dets, threshold));
        }
    }

    #[test]
    fn global_lookup_and_dimension_checks() {
        let rec = |id: &str, d: usize| GlobalFeature {
            image_id: id.into(),
            vector: vec![0.5; d],
        };
        let g = GlobalFeatures::from_records(vec![rec("a", 8), rec("b", 8)]).unwrap();
        assert_eq!(g.dim(), 8);
        assert_eq!(g.lookup(Some("a")), vec![0.5; 8]);
        assert_eq!(g.lookup(None), vec![0.0; 8]);
        assert_eq!(g.lookup(Some("missing")), vec![0.0; 8]);
        assert!(GlobalFeatures::from_records(vec![rec("a", 8), rec("b", 9)]).is_err());
    }

    #[test]
    fn box_serializes_as_array() {
        let d = det(Concept::LongGun, 0.25);
        let json = serde_json::to_string(&d).unwrap();
        assert!(json.contains("\"box\":[0.0,0.0,10.0,10.0]"), "{json}");
        assert!(json.contains("\"concept\":\"long_gun\""));
        let back: ConceptDetection = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn invalid_detections_rejected() {
        let mut d = det(Concept::Joint, 0.5);
        d.bbox.w = 0.0;
        assert!(validate_detections(&[d]).is_err());
        assert!(validate_detections(&[det(Concept::Joint, 1.5)]).is_err());
    }
}
