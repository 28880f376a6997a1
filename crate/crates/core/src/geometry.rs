//! Pinhole camera with polynomial radial distortion.
//!
//! A world point `X` maps to pixels as
//!
//! ```text
//! Xc = R X + t
//! y  = (Xc.x / Xc.z, Xc.y / Xc.z)
//! y' = y (1 + θ1 r² + θ2 r⁴ + θ3 r⁶),   r² = |y|²
//! x  = (f_x y'.x + c_x, f_y y'.y + c_y)
//! ```
//!
//! The principal point doubles as the distortion center.

use nalgebra::{Matrix3, Rotation3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orthonormality tolerance for [`CameraModel::validate`].
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Number of radial coefficients in use: `D(1,0)` or `D(3,0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum DistortionOrder {
    One,
    Three,
}

impl DistortionOrder {
    pub fn terms(self) -> usize {
        match self {
            DistortionOrder::One => 1,
            DistortionOrder::Three => 3,
        }
    }
}

impl TryFrom<u8> for DistortionOrder {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, Self::Error> {
        match v {
            1 => Ok(DistortionOrder::One),
            3 => Ok(DistortionOrder::Three),
            other => Err(format!("distortion order must be 1 or 3, got {other}")),
        }
    }
}

impl From<DistortionOrder> for u8 {
    fn from(o: DistortionOrder) -> u8 {
        o.terms() as u8
    }
}

impl std::fmt::Display for DistortionOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "D({},0)", self.terms())
    }
}

/// Intrinsics, radial distortion and pose of one camera.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub theta: [f64; 3],
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub order: DistortionOrder,
}

impl CameraModel {
    /// Square-pixel camera with the principal point at `(cx, cy)`, identity pose
    /// and no distortion.
    pub fn pinhole(f: f64, cx: f64, cy: f64) -> Self {
        CameraModel {
            fx: f,
            fy: f,
            cx,
            cy,
            theta: [0.0; 3],
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            order: DistortionOrder::One,
        }
    }

    pub fn with_distortion(mut self, order: DistortionOrder, theta: [f64; 3]) -> Self {
        self.order = order;
        self.theta = theta;
        if order == DistortionOrder::One {
            self.theta[1] = 0.0;
            self.theta[2] = 0.0;
        }
        self
    }

    pub fn with_pose(mut self, rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        self.rotation = rotation;
        self.translation = translation;
        self
    }

    /// Checks the type invariants: positive focal lengths, a proper rotation,
    /// finite parameters and zero trailing coefficients for `D(1,0)`.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let scalars = [self.fx, self.fy, self.cx, self.cy];
        if scalars.iter().chain(self.theta.iter()).any(|v| !v.is_finite())
            || self.rotation.iter().any(|v| !v.is_finite())
            || self.translation.iter().any(|v| !v.is_finite())
        {
            return Err("non-finite parameter".into());
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(format!(
                "focal lengths must be positive, got ({}, {})",
                self.fx, self.fy
            ));
        }
        let err = rotation_error(&self.rotation);
        if err > ROTATION_TOLERANCE {
            return Err(format!("rotation is not orthonormal (|RᵀR − I| = {err:e})"));
        }
        if self.order == DistortionOrder::One && (self.theta[1] != 0.0 || self.theta[2] != 0.0) {
            return Err("D(1,0) model with non-zero θ2/θ3".into());
        }
        Ok(())
    }

    /// Coefficients with the terms above `order` zeroed.
    pub fn active_theta(&self) -> [f64; 3] {
        match self.order {
            DistortionOrder::One => [self.theta[0], 0.0, 0.0],
            DistortionOrder::Three => self.theta,
        }
    }

    /// True when every active distortion coefficient is exactly zero.
    pub fn has_zero_distortion(&self) -> bool {
        self.active_theta().iter().all(|&v| v == 0.0)
    }

    /// Camera center in world coordinates, `-Rᵀ t`.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn to_camera(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * x + self.translation
    }

    /// Projects a world point to pixels.
    pub fn project(&self, x: &Vector3<f64>) -> Result<Vector2<f64>> {
        let xc = self.to_camera(x);
        if xc.z <= 0.0 || !xc.z.is_finite() {
            return Err(Error::NonPositiveDepth { index: 0, depth: xc.z });
        }
        let y = Vector2::new(xc.x / xc.z, xc.y / xc.z);
        let yd = distort(&y, &self.theta, self.order);
        Ok(Vector2::new(self.fx * yd.x + self.cx, self.fy * yd.y + self.cy))
    }

    /// Pixel to pinhole-normalized coordinates, ignoring distortion.
    pub fn normalize_pixel(&self, p: &Vector2<f64>) -> Vector2<f64> {
        Vector2::new((p.x - self.cx) / self.fx, (p.y - self.cy) / self.fy)
    }
}

/// `‖RᵀR − I‖_F + |det R − 1|`.
pub fn rotation_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).norm() + (r.determinant() - 1.0).abs()
}

/// Rotation matrix from an axis-angle vector.
pub fn rotation_from_axis_angle(w: &Vector3<f64>) -> Matrix3<f64> {
    Rotation3::new(*w).into_inner()
}

/// Axis-angle vector of a rotation matrix. The input is re-orthonormalized first.
pub fn axis_angle_from_rotation(r: &Matrix3<f64>) -> Vector3<f64> {
    Rotation3::from_matrix(r).scaled_axis()
}

/// Radial distortion factor `1 + θ1 r² + θ2 r⁴ + θ3 r⁶` for the active terms.
pub fn distortion_factor(r2: f64, theta: &[f64; 3], order: DistortionOrder) -> f64 {
    match order {
        DistortionOrder::One => 1.0 + theta[0] * r2,
        DistortionOrder::Three => 1.0 + r2 * (theta[0] + r2 * (theta[1] + r2 * theta[2])),
    }
}

/// Applies radial distortion to a pinhole-normalized point.
pub fn distort(y: &Vector2<f64>, theta: &[f64; 3], order: DistortionOrder) -> Vector2<f64> {
    y * distortion_factor(y.norm_squared(), theta, order)
}

/// Point-to-pixel correspondence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub x2d: Vector2<f64>,
    pub x3d: Vector3<f64>,
    pub inlier: bool,
}

impl Correspondence {
    pub fn new(x2d: Vector2<f64>, x3d: Vector3<f64>) -> Self {
        Correspondence { x2d, x3d, inlier: true }
    }

    pub fn is_finite(&self) -> bool {
        self.x2d.iter().chain(self.x3d.iter()).all(|v| v.is_finite())
    }
}

/// Reprojection residuals `x2d − proj(X3d)` over the inlier correspondences.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSet {
    pub eps: Vec<Vector2<f64>>,
    /// Position of each residual in the input correspondence list.
    pub indices: Vec<usize>,
}

impl ResidualSet {
    pub fn count(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }

    /// Root mean square over all 2K residual components.
    pub fn rms(&self) -> f64 {
        if self.eps.is_empty() {
            return 0.0;
        }
        let ss: f64 = self.eps.iter().map(|e| e.norm_squared()).sum();
        (ss / (2 * self.eps.len()) as f64).sqrt()
    }
}

/// Residuals of the inlier correspondences under `model`, in input order.
pub fn residuals(model: &CameraModel, corrs: &[Correspondence]) -> Result<ResidualSet> {
    let mut eps = Vec::with_capacity(corrs.len());
    let mut indices = Vec::with_capacity(corrs.len());
    for (i, c) in corrs.iter().enumerate().filter(|(_, c)| c.inlier) {
        if !c.is_finite() {
            return Err(Error::NonFinite { index: i });
        }
        let p = model.project(&c.x3d).map_err(|e| with_index(e, i))?;
        eps.push(c.x2d - p);
        indices.push(i);
    }
    if eps.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(ResidualSet { eps, indices })
}

pub(crate) fn with_index(e: Error, index: usize) -> Error {
    match e {
        Error::NonPositiveDepth { depth, .. } => Error::NonPositiveDepth { index, depth },
        other => other,
    }
}
