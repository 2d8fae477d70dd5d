use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Wrap an angle into `(-pi, pi]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Axis-aligned image-plane box in pixels, optionally scored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box2D {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl Box2D {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self {
            x1,
            y1,
            x2,
            y2,
            score: None,
        }
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = Some(score);
        self
    }

    pub fn width(&self) -> f64 {
        (self.x2 - self.x1).max(0.0)
    }

    pub fn height(&self) -> f64 {
        (self.y2 - self.y1).max(0.0)
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn is_valid(&self) -> bool {
        [self.x1, self.y1, self.x2, self.y2]
            .iter()
            .all(|v| v.is_finite())
            && self.x1 <= self.x2
            && self.y1 <= self.y2
            && self.score.is_none_or(|s| (0.0..=1.0).contains(&s))
    }

    /// Grow the box by `margin` pixels on every side.
    pub fn expanded(&self, margin: f64) -> Self {
        Self {
            x1: self.x1 - margin,
            y1: self.y1 - margin,
            x2: self.x2 + margin,
            y2: self.y2 + margin,
            score: self.score,
        }
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= self.x1 && u <= self.x2 && v >= self.y1 && v <= self.y2
    }

    pub fn clipped(&self, extent: ImageExtent) -> Self {
        let w = extent.width as f64;
        let h = extent.height as f64;
        Self {
            x1: self.x1.clamp(0.0, w),
            y1: self.y1.clamp(0.0, h),
            x2: self.x2.clamp(0.0, w),
            y2: self.y2.clamp(0.0, h),
            score: self.score,
        }
    }
}

/// Image size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageExtent {
    pub height: u32,
    pub width: u32,
}

impl ImageExtent {
    pub fn new(height: u32, width: u32) -> Self {
        Self { height, width }
    }

    /// The left color camera resolution of the benchmark.
    pub fn kitti() -> Self {
        Self::new(375, 1242)
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64
    }

    pub fn pixel_count(&self) -> usize {
        self.height as usize * self.width as usize
    }
}

/// Box dimensions in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dims {
    pub h: f64,
    pub w: f64,
    pub l: f64,
}

/// Oriented 3D box in the rectified camera frame.
///
/// `location` is the bottom-face center (camera `y` points down, so the top
/// face sits at `y - h`). `yaw` rotates about the camera `y` axis; at yaw 0 the
/// length axis is aligned with camera `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub location: [f64; 3],
    pub dims: Dims,
    pub yaw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

/// Parameter order used by gradients: `x, y, z, h, w, l, yaw`.
pub const BOX3D_PARAM_NAMES: [&str; 7] = ["x", "y", "z", "h", "w", "l", "yaw"];

impl Box3D {
    pub fn new(location: [f64; 3], h: f64, w: f64, l: f64, yaw: f64) -> Self {
        Self {
            location,
            dims: Dims { h, w, l },
            yaw: normalize_angle(yaw),
            score: None,
        }
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = Some(score);
        self
    }

    pub fn is_valid(&self) -> bool {
        let Dims { h, w, l } = self.dims;
        self.location.iter().all(|v| v.is_finite())
            && h > 0.0
            && w > 0.0
            && l > 0.0
            && self.yaw.is_finite()
            && self.score.is_none_or(|s| (0.0..=1.0).contains(&s))
    }

    pub fn params(&self) -> [f64; 7] {
        let [x, y, z] = self.location;
        let Dims { h, w, l } = self.dims;
        [x, y, z, h, w, l, self.yaw]
    }

    /// Rebuild from [`Box3D::params`]. The yaw is taken verbatim (not wrapped)
    /// so that finite-difference probes stay continuous.
    pub fn from_params(p: [f64; 7]) -> Self {
        Self {
            location: [p[0], p[1], p[2]],
            dims: Dims {
                h: p[3],
                w: p[4],
                l: p[5],
            },
            yaw: p[6],
            score: None,
        }
    }

    pub fn volume(&self) -> f64 {
        self.dims.h * self.dims.w * self.dims.l
    }

    /// Center of the BEV footprint as `(x, z)`.
    pub fn bev_center(&self) -> [f64; 2] {
        [self.location[0], self.location[2]]
    }

    /// Vertical extent `[top, bottom]` in camera `y`.
    pub fn y_extent(&self) -> [f64; 2] {
        [self.location[1] - self.dims.h, self.location[1]]
    }

    /// Observation angle as written into label files.
    pub fn alpha(&self) -> f64 {
        normalize_angle(self.yaw - self.location[0].atan2(self.location[2]))
    }
}
