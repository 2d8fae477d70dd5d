//! Box geometry: corners, projection, projected boxes, IoU/GIoU with
//! gradients, and rotated BEV / 3D overlap.
//!
//! All 3D quantities live in the rectified camera frame (x right, y down,
//! z forward).

mod aabb;
mod bev;
mod corners;
mod gradcheck;
mod overlap2d;

use thiserror::Error;

pub use aabb::{giou_gradient, projected_aabb, GiouGradient, TIE_TOLERANCE};
pub use bev::{
    bev_contains, bev_intersection_area, bev_iou, bev_polygon, clip_convex, convex_contains,
    convex_hull, iou_3d, polygon_area, vertical_overlap,
};
pub use corners::{
    corners_3d, project_corners, project_points, CornerSet2D, CornerSet3D, ProjectedPoint,
    DEPTH_EPSILON,
};
pub use gradcheck::{check_giou_gradients, GradientCheckConfig, GradientTrial};
pub use overlap2d::{giou_2d, iou_2d, OverlapReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("every corner of the box is behind the camera")]
    AllCornersBehindCamera,
    #[error("both boxes have zero area")]
    DegenerateHull,
}
