//! Numerical toolkit for self-supervised underwater monocular depth.
//!
//! The crate bundles everything needed to evaluate the photometric training
//! signal of an underwater depth network without the network itself:
//!
//! - [`image`]: image/depth buffers, PNG and PFM I/O, BT.601 YUV conversion.
//! - [`geometry`]: pinhole camera, rigid poses and the reprojection warp.
//! - [`photoloss`]: L1 + SSIM reprojection loss, local variation weighting,
//!   the underwater light attenuation prior and its correlation loss.
//! - [`uwsim`]: underwater image formation and a synthetic plane-scene
//!   renderer with exact depth and pose, used as a verification oracle.
//! - [`homaug`]: homomorphic Butterworth augmentation.
//! - [`metrics`]: AbsRel/SqRel/RMSE/RMSElog/δ metrics and background error.
//! - [`experiments`]: manifests and the batch commands behind the `uwdepth`
//!   binary (synth, loss, frame-gap, alpha-sweep, ulap-corr, augment, metrics).
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod geometry;
pub mod homaug;
pub mod image;
pub mod metrics;
pub mod photoloss;
pub mod uwsim;

pub use error::{Error, Result};
pub use geometry::{CameraIntrinsics, PixelGrid, PointGrid, RigidPose};
pub use image::{DepthMap, ImageBuffer, YuvImage};
pub use photoloss::{LossConfig, LossMap, ScalarMap};
pub use uwsim::WaterProperties;
