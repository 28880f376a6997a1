//! Per-correspondence noise prediction.
//!
//! Each residual component is modelled as detector noise plus projected lidar
//! noise,
//!
//! ```text
//! E[ε_x²] = σ_d² + a_x² σ_l²
//! E[ε_y²] = σ_d² + a_y² σ_l²
//! ```
//!
//! where `a_x`, `a_y` are the image displacements caused by a unit angular step
//! of the scanner in pan and tilt. The two variances are regressed from the
//! squared residuals with iteratively reweighted least squares, and the
//! residuals are then divided by their predicted standard deviations.

use std::f64::consts::SQRT_2;

use nalgebra::{Matrix3, Unit, UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraModel, ResidualSet};

/// Image-space noise scalings of one correspondence, in pixels per radian of
/// scanner pan (`a_x`) and tilt (`a_y`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarScales {
    pub a_x: f64,
    pub a_y: f64,
}

impl LidarScales {
    pub fn new(a_x: f64, a_y: f64) -> Self {
        LidarScales { a_x, a_y }
    }

    pub fn is_valid(&self) -> bool {
        self.a_x.is_finite() && self.a_y.is_finite() && self.a_x >= 0.0 && self.a_y >= 0.0
    }
}

/// Vertical (pan) axis of the scanner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PanAxis {
    /// The camera's image-vertical direction expressed in world coordinates.
    /// Matches a scanner mounted roughly co-axially with the camera.
    Camera,
    /// A fixed world direction.
    World(Vector3<f64>),
}

/// Scanner placement and angular step used to derive [`LidarScales`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarGeometry {
    pub origin: Vector3<f64>,
    pub pan_axis: PanAxis,
    /// Angular step in radians.
    pub delta: f64,
}

pub const DEFAULT_LIDAR_DELTA: f64 = 1e-3;

impl Default for LidarGeometry {
    fn default() -> Self {
        LidarGeometry {
            origin: Vector3::zeros(),
            pan_axis: PanAxis::Camera,
            delta: DEFAULT_LIDAR_DELTA,
        }
    }
}

impl LidarGeometry {
    fn up(&self, model: &CameraModel) -> Vector3<f64> {
        match self.pan_axis {
            PanAxis::Camera => model.rotation.transpose() * Vector3::y(),
            PanAxis::World(v) => v,
        }
    }

    /// Pan and tilt neighbours of `x`, rotated by `delta` about the origin.
    pub fn neighbours(&self, model: &CameraModel, x: &Vector3<f64>) -> Result<(Vector3<f64>, Vector3<f64>)> {
        let up = Unit::try_new(self.up(model), 1e-12)
            .ok_or_else(|| Error::ConfigInvalid("lidar pan axis has zero length".into()))?;
        let ray = x - self.origin;
        let tilt_axis = match Unit::try_new(up.cross(&ray), 1e-12 * (1.0 + ray.norm())) {
            Some(a) => a,
            // ray along the pan axis: any horizontal direction will do
            None => Unit::new_normalize(up.cross(&any_orthogonal(&up))),
        };
        let pan = UnitQuaternion::from_axis_angle(&up, self.delta);
        let tilt = UnitQuaternion::from_axis_angle(&tilt_axis, self.delta);
        Ok((self.origin + pan * ray, self.origin + tilt * ray))
    }
}

fn any_orthogonal(v: &Vector3<f64>) -> Vector3<f64> {
    let pick = if v.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    v.cross(&pick)
}

/// `a_x = ‖proj(X) − proj(X^P)‖ / δ`, `a_y = ‖proj(X) − proj(X^T)‖ / δ` where
/// `X^P`, `X^T` are the pan and tilt neighbours of `X`.
pub fn lidar_scales(model: &CameraModel, x: &Vector3<f64>, geometry: &LidarGeometry) -> Result<LidarScales> {
    if !(geometry.delta > 0.0 && geometry.delta.is_finite()) {
        return Err(Error::ConfigInvalid(format!(
            "lidar angular step must be positive, got {}",
            geometry.delta
        )));
    }
    let (xp, xt) = geometry.neighbours(model, x)?;
    let p0 = model.project(x)?;
    let pp = model.project(&xp)?;
    let pt = model.project(&xt)?;
    Ok(LidarScales {
        a_x: (p0 - pp).norm() / geometry.delta,
        a_y: (p0 - pt).norm() / geometry.delta,
    })
}

/// [`lidar_scales`] for every inlier of a residual set, aligned with it.
pub fn lidar_scales_for(
    model: &CameraModel,
    points: &[Vector3<f64>],
    residuals: &ResidualSet,
    geometry: &LidarGeometry,
) -> Result<Vec<LidarScales>> {
    residuals
        .indices
        .iter()
        .map(|&i| lidar_scales(model, &points[i], geometry).map_err(|e| crate::geometry::with_index(e, i)))
        .collect()
}

/// Reweighting used after the first IRLS pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Huber weights on the standardized regression residuals.
    Huber,
    /// All weights fixed at one: plain least squares.
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IrlsConfig {
    pub max_iter: usize,
    /// Relative parameter change that ends the iteration.
    pub tol: f64,
    /// Scale of the Gaussian density that sets the first-pass weights, in px.
    pub initial_sigma: f64,
    pub huber_delta: f64,
    pub weighting: Weighting,
    /// Lower bound for σ_d², px².
    pub variance_floor: f64,
}

impl Default for IrlsConfig {
    fn default() -> Self {
        IrlsConfig {
            max_iter: 100,
            tol: 1e-8,
            initial_sigma: 5.0,
            huber_delta: 1.345,
            weighting: Weighting::Huber,
            variance_floor: 1e-12,
        }
    }
}

impl IrlsConfig {
    /// Unweighted least squares in a single pass.
    pub fn least_squares() -> Self {
        IrlsConfig {
            max_iter: 1,
            weighting: Weighting::Unit,
            ..IrlsConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iter >= 1
            && self.tol > 0.0
            && self.initial_sigma > 0.0
            && self.huber_delta > 0.0
            && self.variance_floor > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::ConfigInvalid(format!("invalid IRLS configuration {self:?}")))
        }
    }
}

/// Regressed noise variances and the per-point standard deviations they imply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseFit {
    pub sigma_d2: f64,
    pub sigma_l2: f64,
    /// `(σ_{k,x}, σ_{k,y})` per inlier.
    pub per_point_sigma: Vec<[f64; 2]>,
    pub iterations: usize,
    pub converged: bool,
    /// The two regressors were collinear; σ_l² was fixed at zero.
    pub degenerate: bool,
}

impl NoiseFit {
    pub fn from_variances(sigma_d2: f64, sigma_l2: f64, scales: &[LidarScales]) -> Self {
        NoiseFit {
            sigma_d2,
            sigma_l2,
            per_point_sigma: per_point_sigma(sigma_d2, sigma_l2, scales),
            iterations: 0,
            converged: true,
            degenerate: false,
        }
    }

    /// Mean predicted standard deviation over all components.
    pub fn mean_sigma(&self) -> f64 {
        if self.per_point_sigma.is_empty() {
            return 0.0;
        }
        let s: f64 = self.per_point_sigma.iter().map(|p| p[0] + p[1]).sum();
        s / (2 * self.per_point_sigma.len()) as f64
    }
}

fn per_point_sigma(sigma_d2: f64, sigma_l2: f64, scales: &[LidarScales]) -> Vec<[f64; 2]> {
    scales
        .iter()
        .map(|s| {
            [
                (sigma_d2 + s.a_x * s.a_x * sigma_l2).sqrt(),
                (sigma_d2 + s.a_y * s.a_y * sigma_l2).sqrt(),
            ]
        })
        .collect()
}

fn huber_weight(v: f64, delta: f64) -> f64 {
    let a = v.abs();
    if a <= delta {
        1.0
    } else {
        delta / a
    }
}

/// Multiplier that makes the Huber-weighted variance regression consistent for
/// Gaussian residuals.
///
/// At the fixed point the weighted equations balance `E[ψ((s²u² − 1)/√2)] = 0`
/// for `u ~ N(0, 1)`, where `s² = σ²/σ̂²`. Because ψ clips the long right tail
/// of `u²`, `s² > 1`; the returned value is that `s²`.
pub fn huber_consistency(delta: f64) -> f64 {
    let mean_psi = |s2: f64| -> f64 {
        // E over u ≥ 0 (integrand is even), Simpson on [0, 12]
        let n = 6000;
        let h = 12.0 / n as f64;
        let f = |u: f64| {
            let v = (s2 * u * u - 1.0) / SQRT_2;
            v.clamp(-delta, delta) * (-0.5 * u * u).exp()
        };
        let mut acc = f(0.0) + f(12.0);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(i as f64 * h);
        }
        acc * h / 3.0
    };
    // mean_psi increases with s2
    let (mut lo, mut hi) = (0.2, 5.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mean_psi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

struct Regression<'a> {
    /// Squared residual components, x then y per point.
    y: Vec<f64>,
    /// Second regressor `a²`, divided by `col_scale`.
    x: Vec<f64>,
    col_scale: f64,
    floor: f64,
    eps: &'a [Vector2<f64>],
}

impl Regression<'_> {
    /// Weighted 2×2 solve with non-negativity clamping. Returns
    /// `(σ_d², σ_l² · col_scale, degenerate)`.
    fn solve(&self, w: &[f64]) -> (f64, f64, bool) {
        let (mut s0, mut s1, mut s11, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for ((&wi, &xi), &yi) in w.iter().zip(&self.x).zip(&self.y) {
            s0 += wi;
            s1 += wi * xi;
            s11 += wi * xi * xi;
            t0 += wi * yi;
            t1 += wi * xi * yi;
        }
        if s0 <= 0.0 {
            return (self.floor, 0.0, true);
        }
        let det = s0 * s11 - s1 * s1;
        if !(det > 1e-12 * s0 * s11) {
            return ((t0 / s0).max(self.floor), 0.0, true);
        }
        let mut b0 = (s11 * t0 - s1 * t1) / det;
        let mut b1 = (s0 * t1 - s1 * t0) / det;
        if b1 < 0.0 {
            b1 = 0.0;
            b0 = t0 / s0;
        }
        if b0 < self.floor {
            b0 = self.floor;
            b1 = if s11 > 0.0 {
                ((t1 - b0 * s1) / s11).max(0.0)
            } else {
                0.0
            };
        }
        (b0, b1, false)
    }
}

/// Robust regression of `(σ_d², σ_l²)` from squared residual components.
///
/// The first pass weights each correspondence by the Gaussian density of its
/// residual norm at `cfg.initial_sigma`, normalized to one at zero. Later
/// passes weight each row by `1/σ̂⁴`, the inverse variance of a squared
/// Gaussian residual, times the Huber weight of `(ε² − σ̂²) / (√2 σ̂²)`, the regression residual
/// divided by its standard deviation under the model. Negative components are
/// clamped (σ_l² at zero, σ_d² at the floor) and the other re-solved. The
/// result is scaled by [`huber_consistency`] so Gaussian residuals give
/// unbiased variances.
pub fn fit_noise(eps: &ResidualSet, scales: &[LidarScales], cfg: &IrlsConfig) -> Result<NoiseFit> {
    cfg.validate()?;
    let k = eps.count();
    if k < 2 {
        return Err(Error::InsufficientData {
            required: 2,
            available: k,
        });
    }
    if scales.len() != k {
        return Err(Error::Alignment {
            what: "lidar scales",
            expected: k,
            got: scales.len(),
        });
    }
    if let Some(i) = scales.iter().position(|s| !s.is_valid()) {
        return Err(Error::NonFinite { index: i });
    }
    if let Some(i) = eps.eps.iter().position(|e| !(e.x.is_finite() && e.y.is_finite())) {
        return Err(Error::NonFinite { index: i });
    }

    let raw_x: Vec<f64> = scales.iter().flat_map(|s| [s.a_x * s.a_x, s.a_y * s.a_y]).collect();
    let col_scale = raw_x.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let reg = Regression {
        y: eps.eps.iter().flat_map(|e| [e.x * e.x, e.y * e.y]).collect(),
        x: raw_x.iter().map(|v| v / col_scale).collect(),
        col_scale,
        floor: cfg.variance_floor,
        eps: &eps.eps,
    };

    let mut w: Vec<f64> = match cfg.weighting {
        Weighting::Unit => vec![1.0; 2 * k],
        Weighting::Huber => {
            let two_var = 2.0 * cfg.initial_sigma * cfg.initial_sigma;
            reg.eps
                .iter()
                .flat_map(|e| {
                    let wi = (-e.norm_squared() / two_var).exp();
                    [wi, wi]
                })
                .collect()
        }
    };

    let mut beta = (f64::NAN, f64::NAN);
    let mut converged = false;
    let mut degenerate = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let (b0, b1, deg) = reg.solve(&w);
        degenerate = deg;
        let change = ((b0 - beta.0).powi(2) + (b1 - beta.1).powi(2)).sqrt();
        let size = (b0 * b0 + b1 * b1).sqrt();
        beta = (b0, b1);
        if change <= cfg.tol * size.max(cfg.variance_floor) {
            converged = true;
            break;
        }
        if cfg.weighting == Weighting::Unit {
            continue;
        }
        // Var(ε²) = 2σ⁴, so rows are also weighted by 1/σ̂⁴ (normalized to the largest σ̂²)
        let vmax = reg.x.iter().map(|&xi| b0 + xi * b1).fold(cfg.variance_floor, f64::max);
        for ((wi, &xi), &yi) in w.iter_mut().zip(&reg.x).zip(&reg.y) {
            let var = (b0 + xi * b1).max(cfg.variance_floor);
            let precision = (vmax / var).powi(2);
            *wi = precision * huber_weight((yi - var) / (SQRT_2 * var), cfg.huber_delta);
        }
    }

    let correction = match cfg.weighting {
        Weighting::Huber => huber_consistency(cfg.huber_delta),
        Weighting::Unit => 1.0,
    };
    let sigma_d2 = if beta.0 <= cfg.variance_floor {
        cfg.variance_floor
    } else {
        (beta.0 * correction).max(cfg.variance_floor)
    };
    let sigma_l2 = (beta.1 * correction / reg.col_scale).max(0.0);
    Ok(NoiseFit {
        sigma_d2,
        sigma_l2,
        per_point_sigma: per_point_sigma(sigma_d2, sigma_l2, scales),
        iterations,
        converged,
        degenerate,
    })
}

/// Residual components divided by their predicted standard deviations,
/// interleaved `x0, y0, x1, y1, …`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedResiduals {
    pub values: Vec<f64>,
}

impl StandardizedResiduals {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn standardize(eps: &ResidualSet, fit: &NoiseFit) -> Result<StandardizedResiduals> {
    if fit.per_point_sigma.len() != eps.count() {
        return Err(Error::Alignment {
            what: "per-point sigma",
            expected: eps.count(),
            got: fit.per_point_sigma.len(),
        });
    }
    let values = eps
        .eps
        .iter()
        .zip(&fit.per_point_sigma)
        .flat_map(|(e, s)| [e.x / s[0], e.y / s[1]])
        .collect();
    Ok(StandardizedResiduals { values })
}

/// Rotation by `angle` about `axis` (unit length not required).
pub(crate) fn axis_rotation(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    UnitQuaternion::from_axis_angle(&Unit::new_normalize(*axis), angle)
        .to_rotation_matrix()
        .into_inner()
}
