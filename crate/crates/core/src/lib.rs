//! Closed-form machinery for weakly supervised monocular 3D detection.
//!
//! - [`geometry`]: pinhole projection and the virtual-camera normalization.
//! - [`pseudolabel`]: 3D boxes from 2D detections, depth and yaw estimates.
//! - [`kernels`]: loss and gating kernels with analytic gradients, plus the
//!   finite-difference checker.
//! - [`eval3d`]: rotated IoU, KITTI AP|R40 and the height histogram.
//! - [`dataio`]: KITTI labels and calibration, depth rasters, detection files.
//! - [`config`]: the TOML run configuration.
//!
//! All operations are pure functions over immutable values and can be called
//! from any number of threads.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dataio;
pub mod eval3d;
pub mod geometry;
pub mod kernels;
pub mod pseudolabel;

pub use config::PipelineConfig;
pub use geometry::{CamPoint3, CameraIntrinsics, VirtualCameraSpec};
pub use pseudolabel::{Box3D, Detection2D};
