//! Validation of camera calibrations from 2D-3D correspondences.
//!
//! Reprojection residuals are scaled by a per-point noise model (detector
//! noise plus projected scanner noise, regressed robustly from the residuals
//! themselves) and the scaled values are tested against the standard normal.
//! A correct projection model leaves nothing but noise, so the test accepts;
//! an incorrect one leaves structure that shows up as a departure from N(0, 1).

// `!(x > 0.0)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fit;
pub mod geometry;
pub mod gof;
pub mod hull;
pub mod io;
pub mod noise;
pub mod pipeline;
pub mod report;
pub mod sim;

pub use error::{Error, ParseErrorKind, Result};
pub use fit::{fit_model, flag_inliers, FitConfig};
pub use geometry::{residuals, CameraModel, Correspondence, DistortionOrder, ResidualSet};
pub use gof::{TestKind, TestReport};
pub use io::CorrespondenceRecord;
pub use noise::{fit_noise, lidar_scales, standardize, IrlsConfig, LidarGeometry, LidarScales, NoiseFit, PanAxis};
pub use pipeline::{validate_set, ValidateConfig, ValidationRecord, Warning};
pub use sim::{gen_sets, SimConfig, SimSet};
