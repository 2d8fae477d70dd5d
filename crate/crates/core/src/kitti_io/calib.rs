use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::FormatError;

const ORTHONORMAL_TOL: f64 = 1e-6;

/// How strictly [`parse_calibration`] treats rotation blocks that are not
/// orthonormal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    #[default]
    Strict,
    /// Log a warning and keep the matrices.
    Lenient,
}

/// Camera projection, rectification and LiDAR-to-camera transforms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// `P2`: rectified camera coordinates to pixels.
    pub cam_projection: [[f64; 4]; 3],
    /// `R0_rect`.
    pub rectification: [[f64; 3]; 3],
    /// `Tr_velo_to_cam`.
    pub lidar_to_cam: [[f64; 4]; 3],
}

impl Calibration {
    pub fn identity() -> Self {
        Self {
            cam_projection: [
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
            ],
            rectification: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            lidar_to_cam: [
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
            ],
        }
    }

    /// Representative values of the benchmark's left color camera setup.
    pub fn kitti_like() -> Self {
        Self {
            cam_projection: [
                [721.5377, 0.0, 609.5593, 44.85728],
                [0.0, 721.5377, 172.854, 0.2163791],
                [0.0, 0.0, 1.0, 0.002745884],
            ],
            rectification: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            // LiDAR x forward, y left, z up -> camera x right, y down, z forward.
            lidar_to_cam: [
                [0.0, -1.0, 0.0, 0.0],
                [0.0, 0.0, -1.0, -0.08],
                [1.0, 0.0, 0.0, -0.27],
            ],
        }
    }

    pub fn focal_lengths(&self) -> (f64, f64) {
        (self.cam_projection[0][0], self.cam_projection[1][1])
    }

    /// LiDAR point to the rectified camera frame: `R0 * (Tr * [p; 1])`.
    pub fn lidar_to_rect(&self, p: [f64; 3]) -> [f64; 3] {
        let t = &self.lidar_to_cam;
        let cam = [0, 1, 2].map(|r| t[r][0] * p[0] + t[r][1] * p[1] + t[r][2] * p[2] + t[r][3]);
        let r0 = &self.rectification;
        [0, 1, 2].map(|r| r0[r][0] * cam[0] + r0[r][1] * cam[1] + r0[r][2] * cam[2])
    }

    /// Inverse of [`Calibration::lidar_to_rect`], assuming orthonormal rotations.
    pub fn rect_to_lidar(&self, p: [f64; 3]) -> [f64; 3] {
        let r0 = &self.rectification;
        let cam = [0, 1, 2].map(|c| r0[0][c] * p[0] + r0[1][c] * p[1] + r0[2][c] * p[2]);
        let t = &self.lidar_to_cam;
        let d = [0, 1, 2].map(|r| cam[r] - t[r][3]);
        [0, 1, 2].map(|c| t[0][c] * d[0] + t[1][c] * d[1] + t[2][c] * d[2])
    }

    /// Project a rectified camera point. Returns `(u, v, depth)` where depth is
    /// the homogeneous scale; `u, v` are meaningless when depth is not positive.
    pub fn project(&self, p: [f64; 3]) -> (f64, f64, f64) {
        let m = &self.cam_projection;
        let h = [0, 1, 2].map(|r| m[r][0] * p[0] + m[r][1] * p[1] + m[r][2] * p[2] + m[r][3]);
        (h[0] / h[2], h[1] / h[2], h[2])
    }

    /// Position of the LiDAR origin in the rectified camera frame.
    pub fn sensor_origin(&self) -> [f64; 3] {
        self.lidar_to_rect([0.0; 3])
    }

    /// Check the stated invariants, returning the first violation.
    pub fn validate(&self) -> Result<(), FormatError> {
        let (fx, fy) = self.focal_lengths();
        if fx == 0.0 || fy == 0.0 {
            return Err(FormatError::BadMatrixShape {
                key: "P2".into(),
                detail: "zero focal length".into(),
            });
        }
        let tr = &self.lidar_to_cam;
        let tr_rot = [0, 1, 2].map(|r| [tr[r][0], tr[r][1], tr[r][2]]);
        for (key, m) in [("R0_rect", self.rectification), ("Tr_velo_to_cam", tr_rot)] {
            let err = orthonormality_error(&m);
            if err > ORTHONORMAL_TOL {
                return Err(FormatError::NonOrthonormalRotation {
                    key: key.into(),
                    error: err,
                });
            }
        }
        Ok(())
    }
}

/// Largest entry of `|R^T R - I|`.
fn orthonormality_error(m: &[[f64; 3]; 3]) -> f64 {
    let mut worst = 0f64;
    for i in 0..3 {
        for j in 0..3 {
            let dot: f64 = (0..3).map(|k| m[k][i] * m[k][j]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).abs());
        }
    }
    worst
}

/// Parse a calib file with `KEY: v1 v2 ...` lines. Only `P2`, `R0_rect` and
/// `Tr_velo_to_cam` are required; other keys are ignored.
pub fn parse_calibration(text: &str, strictness: Strictness) -> Result<Calibration, FormatError> {
    let mut entries: HashMap<&str, &str> = HashMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some((key, rest)) = line.split_once(':') {
            entries.insert(key.trim(), rest);
        }
    }
    let values = |key: &str, expected: usize| -> Result<Vec<f64>, FormatError> {
        let raw = entries
            .get(key)
            .ok_or_else(|| FormatError::MissingKey(key.to_string()))?;
        let parsed = raw
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| FormatError::UnparsableNumber(tok.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if parsed.len() != expected {
            return Err(FormatError::BadMatrixShape {
                key: key.to_string(),
                detail: format!("expected {expected} values, found {}", parsed.len()),
            });
        }
        if parsed.iter().any(|v| !v.is_finite()) {
            return Err(FormatError::NonFiniteValue { index: 0 });
        }
        Ok(parsed)
    };
    let p2 = values("P2", 12)?;
    let r0 = values("R0_rect", 9)?;
    let tr = values("Tr_velo_to_cam", 12)?;
    let calib = Calibration {
        cam_projection: [0, 1, 2].map(|r| [0, 1, 2, 3].map(|c| p2[r * 4 + c])),
        rectification: [0, 1, 2].map(|r| [0, 1, 2].map(|c| r0[r * 3 + c])),
        lidar_to_cam: [0, 1, 2].map(|r| [0, 1, 2, 3].map(|c| tr[r * 4 + c])),
    };
    match calib.validate() {
        Ok(()) => Ok(calib),
        Err(e @ FormatError::NonOrthonormalRotation { .. }) if strictness == Strictness::Lenient => {
            log::warn!("{e}");
            Ok(calib)
        }
        Err(e) => Err(e),
    }
}

/// Emit a calib file readable by [`parse_calibration`]. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_calibration(calib: &Calibration) -> String {
    fn line(out: &mut String, key: &str, values: impl IntoIterator<Item = f64>) {
        let _ = write!(out, "{key}:");
        for v in values {
            let _ = write!(out, " {v:e}");
        }
        out.push('\n');
    }
    let mut out = String::new();
    line(&mut out, "P2", calib.cam_projection.iter().flatten().copied());
    line(&mut out, "R0_rect", calib.rectification.iter().flatten().copied());
    line(&mut out, "Tr_velo_to_cam", calib.lidar_to_cam.iter().flatten().copied());
    out
}
