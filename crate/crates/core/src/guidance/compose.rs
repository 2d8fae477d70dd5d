use serde::{Deserialize, Serialize};

use super::GuidanceError;

/// Which objective a frame's objects are trained under: objects with a
/// pseudo-label use the detector's own losses plus feature guidance; objects
/// with only a 2D box use feature guidance plus the projected-box loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    PseudoLabel,
    WeakOnly,
}

/// Named loss terms; absent terms are `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossTerms {
    pub seg_p: Option<f64>,
    pub seg_i: Option<f64>,
    pub kl: Option<f64>,
    #[serde(rename = "box")]
    pub box_: Option<f64>,
    pub l2_feat: Option<f64>,
    /// Region-proposal loss of the external detector, taken as an opaque value.
    pub external_rpn: Option<f64>,
    pub external_rcnn: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub seg_p: f64,
    pub seg_i: f64,
    pub kl: f64,
    #[serde(rename = "box")]
    pub box_: f64,
    pub l2_feat: f64,
    pub external_rpn: f64,
    pub external_rcnn: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            seg_p: 1.0,
            seg_i: 1.0,
            kl: 1.0,
            box_: 1.0,
            l2_feat: 1.0,
            external_rpn: 1.0,
            external_rcnn: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub mode: LossMode,
    /// `(name, value, weight)` of every summed term, in summation order.
    pub terms: Vec<(String, f64, f64)>,
    pub total: f64,
}

impl LossBreakdown {
    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.0 == name).map(|t| t.1)
    }
}

/// Weighted sum of exactly the terms required by `mode`.
pub fn compose_losses(
    terms: &LossTerms,
    mode: LossMode,
    weights: &LossWeights,
) -> Result<LossBreakdown, GuidanceError> {
    let required: &[(&'static str, Option<f64>, f64)] = match mode {
        LossMode::PseudoLabel => &[
            ("external_rpn", terms.external_rpn, weights.external_rpn),
            ("external_rcnn", terms.external_rcnn, weights.external_rcnn),
            ("seg_p", terms.seg_p, weights.seg_p),
            ("kl", terms.kl, weights.kl),
        ],
        LossMode::WeakOnly => &[
            ("seg_p", terms.seg_p, weights.seg_p),
            ("kl", terms.kl, weights.kl),
            ("box", terms.box_, weights.box_),
        ],
    };
    let mut out = Vec::with_capacity(required.len());
    let mut total = 0.0;
    for &(name, value, weight) in required {
        let v = value.ok_or(GuidanceError::MissingTerm(name))?;
        total += weight * v;
        out.push((name.to_string(), v, weight));
    }
    Ok(LossBreakdown {
        mode,
        terms: out,
        total,
    })
}
