use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::IouKind;
use crate::kitti_io::{FrameLabelSet, LabeledObject};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallRow {
    pub kind: IouKind,
    pub thresh: f64,
    pub matched: usize,
    pub total: usize,
    /// `matched / total`, 0 when there is no ground truth.
    pub recall: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecallTable {
    pub rows: Vec<RecallRow>,
}

impl RecallTable {
    pub fn get(&self, kind: IouKind, thresh: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.kind == kind && r.thresh == thresh)
            .map(|r| r.recall)
    }
}

/// One-to-one pairs with positive overlap, taken greedily by descending
/// overlap (lower indices first on ties). Sorted by descending overlap.
pub fn greedy_pairs(
    labels: &[&LabeledObject],
    gts: &[&LabeledObject],
    kind: IouKind,
) -> Vec<(usize, usize, f64)> {
    let mut cand = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        for (j, g) in gts.iter().enumerate() {
            if let Some(iou) = kind.overlap(l, g) {
                if iou > 0.0 {
                    cand.push((i, j, iou));
                }
            }
        }
    }
    cand.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut used_l = vec![false; labels.len()];
    let mut used_g = vec![false; gts.len()];
    cand.into_iter()
        .filter(|&(i, j, _)| {
            let free = !used_l[i] && !used_g[j];
            if free {
                used_l[i] = true;
                used_g[j] = true;
            }
            free
        })
        .collect()
}

fn usable(o: &LabeledObject, kind: IouKind) -> bool {
    !o.is_dont_care() && (kind == IouKind::TwoD || o.box3d.is_some())
}

/// Fraction of ground-truth objects matched by a label at each threshold.
/// Frames are joined by id; labels without a 3D box cannot match in BEV/3D.
pub fn recall_table(
    labels: &[FrameLabelSet],
    gts: &[FrameLabelSet],
    kinds: &[IouKind],
    thresholds: &[f64],
) -> RecallTable {
    let by_id: BTreeMap<&str, &FrameLabelSet> =
        labels.iter().map(|f| (f.frame_id.as_str(), f)).collect();
    let mut rows = Vec::new();
    for &kind in kinds {
        let mut matched = vec![0usize; thresholds.len()];
        let mut total = 0;
        for g in gts {
            let gt_objs: Vec<&LabeledObject> = g.objects.iter().filter(|o| usable(o, kind)).collect();
            total += gt_objs.len();
            let Some(l) = by_id.get(g.frame_id.as_str()) else {
                continue;
            };
            let lab: Vec<&LabeledObject> = l.objects.iter().filter(|o| usable(o, kind)).collect();
            for (_, _, iou) in greedy_pairs(&lab, &gt_objs, kind) {
                for (k, &t) in thresholds.iter().enumerate() {
                    if iou >= t {
                        matched[k] += 1;
                    }
                }
            }
        }
        for (k, &thresh) in thresholds.iter().enumerate() {
            rows.push(RecallRow {
                kind,
                thresh,
                matched: matched[k],
                total,
                recall: if total == 0 {
                    0.0
                } else {
                    matched[k] as f64 / total as f64
                },
            });
        }
    }
    RecallTable { rows }
}
