use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ap40, Difficulty, DifficultyRule, EvalError, IouKind};
use crate::kitti_io::FrameLabelSet;

/// AP and the 40 interpolated precisions; `ap` is absent when the bucket
/// holds no ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    pub ap: Option<f64>,
    pub curve: Vec<f64>,
}

/// `{bucket: {iou_kind: {thresh: {ap, curve}}}}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EvalReport(pub BTreeMap<String, BTreeMap<String, BTreeMap<String, MetricEntry>>>);

fn thresh_key(t: f64) -> String {
    format!("{t:.2}")
}

impl EvalReport {
    pub fn get(&self, bucket: Difficulty, kind: IouKind, thresh: f64) -> Option<&MetricEntry> {
        self.0
            .get(&bucket.to_string())?
            .get(kind.name())?
            .get(&thresh_key(thresh))
    }

    /// One row per `(kind, thresh)` with Easy / Mod. / Hard AP columns in
    /// percent; absent values are left empty.
    pub fn to_csv(&self) -> String {
        let mut rows: BTreeMap<(String, String), [Option<f64>; 3]> = BTreeMap::new();
        for (bi, b) in Difficulty::ALL.iter().enumerate() {
            let Some(kinds) = self.0.get(&b.to_string()) else {
                continue;
            };
            for (kind, threshes) in kinds {
                for (t, entry) in threshes {
                    rows.entry((kind.clone(), t.clone())).or_default()[bi] = entry.ap;
                }
            }
        }
        let mut out = String::from("iou_kind,iou_thresh");
        for b in Difficulty::ALL {
            out.push(',');
            out.push_str(b.short_name());
        }
        out.push('\n');
        for ((kind, t), aps) in rows {
            let _ = write!(out, "{kind},{t}");
            for ap in aps {
                match ap {
                    Some(v) => {
                        let _ = write!(out, ",{:.2}", 100.0 * v);
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// AP for every bucket, IoU kind and threshold.
pub fn evaluate(
    dets: &[FrameLabelSet],
    gts: &[FrameLabelSet],
    kinds: &[IouKind],
    thresholds: &[f64],
    rule: &DifficultyRule,
) -> Result<EvalReport, EvalError> {
    let mut report = EvalReport::default();
    for bucket in Difficulty::ALL {
        let per_kind = report.0.entry(bucket.to_string()).or_default();
        for &kind in kinds {
            let per_thresh = per_kind.entry(kind.name().to_string()).or_default();
            for &t in thresholds {
                let entry = match ap40(dets, gts, kind, t, bucket, rule) {
                    Ok(c) => MetricEntry {
                        ap: Some(c.ap),
                        curve: c.precision,
                    },
                    Err(EvalError::NoGroundTruth(_)) => MetricEntry {
                        ap: None,
                        curve: Vec::new(),
                    },
                    Err(e) => return Err(e),
                };
                per_thresh.insert(thresh_key(t), entry);
            }
        }
    }
    Ok(report)
}
