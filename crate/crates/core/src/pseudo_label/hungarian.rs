use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub pred: usize,
    pub gt: usize,
    pub iou: f64,
    /// `(sigma_p + sigma_i) / 2`, filled in by the filter.
    pub fused: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// Sorted by prediction index.
    pub pairs: Vec<MatchedPair>,
    pub unmatched_preds: Vec<usize>,
    pub unmatched_gts: Vec<usize>,
}

impl MatchResult {
    pub fn total_iou(&self) -> f64 {
        self.pairs.iter().map(|p| p.iou).sum()
    }
}

/// Maximum-total-IoU one-to-one assignment between rows (predictions) and
/// columns (annotations) of `iou`, i.e. minimum cost on `-iou`. Pairs whose
/// IoU does not exceed `floor` are discarded after the assignment.
pub fn hungarian_match(iou: &[Vec<f64>], floor: f64) -> MatchResult {
    let rows = iou.len();
    let cols = iou.first().map_or(0, Vec::len);
    let mut assigned: Vec<Option<usize>> = vec![None; rows];
    if rows > 0 && cols > 0 {
        if rows <= cols {
            let a = assign(rows, cols, |i, j| -iou[i][j]);
            for (i, j) in a.into_iter().enumerate() {
                assigned[i] = Some(j);
            }
        } else {
            let a = assign(cols, rows, |j, i| -iou[i][j]);
            for (j, i) in a.into_iter().enumerate() {
                assigned[i] = Some(j);
            }
        }
    }
    let mut result = MatchResult::default();
    let mut gt_used = vec![false; cols];
    for (i, slot) in assigned.into_iter().enumerate() {
        match slot {
            Some(j) if iou[i][j] > floor => {
                gt_used[j] = true;
                result.pairs.push(MatchedPair {
                    pred: i,
                    gt: j,
                    iou: iou[i][j],
                    fused: None,
                });
            }
            _ => result.unmatched_preds.push(i),
        }
    }
    result.unmatched_gts = (0..cols).filter(|&j| !gt_used[j]).collect();
    result
}

/// Shortest augmenting path assignment for an `n x m` cost with `n <= m`;
/// returns the column of every row.
fn assign(n: usize, m: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    // 1-based potentials; column 0 is the virtual start.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut row_of = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if row_of[j] != 0 {
            out[row_of[j] - 1] = j - 1;
        }
    }
    out
}
