//! Deterministic building blocks for weakly supervised 3D object detection
//! from 2D boxes.
//!
//! * [`kitti_io`]: benchmark file formats and a synthetic scene generator.
//! * [`geometry3d`]: box corners, projection, IoU/GIoU (with gradients), BEV
//!   and 3D overlap.
//! * [`frustum_labeler`]: initial 3D labels from 2D boxes and point clouds.
//! * [`guidance`]: objectness maps, focal / KL / L2 losses, the 2D-3D GIoU
//!   loss and loss composition, plus a toy classifier that trains on them.
//! * [`pseudo_label`]: Hungarian matching, NMS, the pseudo-label filter and
//!   the multi-round self-training driver.
//! * [`eval`]: AP at 40 recall positions, difficulty buckets, recall tables.
//! * [`render`]: SVG plots of curves, recall trajectories and BEV scenes.
//!
//! The guide in `book/` walks through each piece; its snippets are compiled
//! as doctests of this crate.

pub mod eval;
pub mod frustum_labeler;
pub mod geometry3d;
pub mod guidance;
pub mod kitti_io;
pub mod pseudo_label;
pub mod render;
mod rng;

pub use kitti_io::{Box2D, Box3D, Calibration, FrameLabelSet, ImageExtent, PointCloud};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/frustum.md")]
    mod frustum {}
    #[doc = include_str!("../../../book/src/guidance.md")]
    mod guidance {}
    #[doc = include_str!("../../../book/src/pseudo_labels.md")]
    mod pseudo_labels {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
