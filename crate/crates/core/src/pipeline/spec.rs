//! Model roster: which feature spaces feed which classifier and how they fuse.

use serde::{Deserialize, Serialize};

use super::baseline::BaselineKind;
use crate::error::{Error, Result};

pub const LINGUISTIC: &str = "linguistic";
pub const CNN_CHAR: &str = "cnn_char";
pub const CNN_WORD: &str = "cnn_word";
pub const GLOBAL: &str = "global";
pub const GT_CONCEPTS: &str = "gt_concepts";

pub fn counts_space(threshold: f64) -> String {
    format!("counts@{threshold}")
}

pub const TEXT_SPACES: [&str; 3] = [LINGUISTIC, CNN_CHAR, CNN_WORD];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Text,
    Image,
    Multimodal,
    Baseline,
}

impl Modality {
    pub fn name(self) -> &'static str {
        match self {
            Modality::Text => "text",
            Modality::Image => "image",
            Modality::Multimodal => "image+text",
            Modality::Baseline => "-",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fusion {
    None,
    Early,
    Late,
}

impl Fusion {
    pub fn name(self) -> &'static str {
        match self {
            Fusion::None => "-",
            Fusion::Early => "early",
            Fusion::Late => "late",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub modality: Modality,
    pub features: Vec<String>,
    pub fusion: Fusion,
    #[serde(default)]
    pub out_of_competition: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineKind>,
}

impl ModelSpec {
    pub fn single(name: &str, modality: Modality, space: &str) -> Self {
        Self {
            name: name.into(),
            modality,
            features: vec![space.into()],
            fusion: Fusion::None,
            out_of_competition: space == GT_CONCEPTS,
            baseline: None,
        }
    }

    pub fn fused(name: &str, modality: Modality, spaces: &[String], fusion: Fusion) -> Self {
        Self {
            name: name.into(),
            modality,
            features: spaces.to_vec(),
            fusion,
            out_of_competition: false,
            baseline: None,
        }
    }

    pub fn baseline(name: &str, kind: BaselineKind) -> Self {
        Self {
            name: name.into(),
            modality: Modality::Baseline,
            features: Vec::new(),
            fusion: Fusion::None,
            out_of_competition: false,
            baseline: Some(kind),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::invalid(format!("model {}: {m}", self.name)));
        if self.baseline.is_some() {
            return if self.features.is_empty() {
                Ok(())
            } else {
                fail("baselines take no features")
            };
        }
        if self.features.is_empty() {
            return fail("no feature spaces");
        }
        let has_gt = self.features.iter().any(|f| f == GT_CONCEPTS);
        if has_gt && (self.features.len() > 1 || self.fusion != Fusion::None) {
            return fail("ground-truth concept features may not be fused");
        }
        if has_gt != self.out_of_competition {
            return fail("exactly the ground-truth concept model is out of competition");
        }
        if self.fusion == Fusion::Late && self.features.len() < 2 {
            return fail("late fusion needs at least two feature spaces");
        }
        if self.fusion == Fusion::None && self.features.len() > 1 {
            return fail("several feature spaces need a fusion mode");
        }
        Ok(())
    }
}

/// The full comparison: baselines, every single-feature model, early and late
/// fusion per modality and across modalities, and the out-of-competition
/// ground-truth concept model.
pub fn default_roster(thresholds: &[f64]) -> Vec<ModelSpec> {
    let text: Vec<String> = TEXT_SPACES.iter().map(|s| s.to_string()).collect();
    let mut visual = vec![GLOBAL.to_string()];
    visual.extend(thresholds.iter().map(|&t| counts_space(t)));
    let both: Vec<String> = text.iter().chain(&visual).cloned().collect();

    let mut r = vec![
        ModelSpec::baseline("random baseline", BaselineKind::Random),
        ModelSpec::baseline("positive baseline", BaselineKind::Positive),
        ModelSpec::single("linguistic features", Modality::Text, LINGUISTIC),
        ModelSpec::single("CNN-char", Modality::Text, CNN_CHAR),
        ModelSpec::single("CNN-word", Modality::Text, CNN_WORD),
        ModelSpec::fused("all textual", Modality::Text, &text, Fusion::Early),
        ModelSpec::fused("all textual", Modality::Text, &text, Fusion::Late),
        ModelSpec::single("inception global", Modality::Image, GLOBAL),
    ];
    for &t in thresholds {
        r.push(ModelSpec::single(
            &format!("local concepts ({t})"),
            Modality::Image,
            &counts_space(t),
        ));
    }
    r.extend([
        ModelSpec::fused("all visual", Modality::Image, &visual, Fusion::Early),
        ModelSpec::fused("all visual", Modality::Image, &visual, Fusion::Late),
        ModelSpec::fused(
            "all textual + visual",
            Modality::Multimodal,
            &both,
            Fusion::Early,
        ),
        ModelSpec::fused(
            "all textual + visual",
            Modality::Multimodal,
            &both,
            Fusion::Late,
        ),
        ModelSpec::single("local concepts (GT)", Modality::Image, GT_CONCEPTS),
    ]);
    r
}
