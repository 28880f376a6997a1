//! Model acquisition: damped least-squares refinement on reprojection error,
//! inlier flagging, and model file I/O.

mod init;
pub mod lm;

use nalgebra::{DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraModel, Correspondence, DistortionOrder};

pub use crate::io::{load_model, save_model};
pub use lm::{jacobian, jacobian_fd};

/// Smallest number of inliers `fit_model` accepts.
pub const MIN_FIT_POINTS: usize = 6;

/// Residual norm, px, treated as zero by [`flag_inliers`].
pub const INLIER_ZERO_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub order: DistortionOrder,
    pub max_iter: usize,
    /// Stop once the largest residual/Jacobian-column cosine falls below this.
    pub tol: f64,
    /// Inlier cut in units of the robust residual scale.
    pub inlier_threshold: f64,
    /// Image width and height; the principal point is fixed at the center.
    /// Ignored when an initial model is supplied.
    pub image_size: [f64; 2],
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            order: DistortionOrder::Three,
            max_iter: 200,
            tol: 1e-10,
            inlier_threshold: 3.0,
            image_size: [1600.0, 1600.0],
        }
    }
}

impl FitConfig {
    pub fn with_order(order: DistortionOrder) -> Self {
        FitConfig {
            order,
            ..FitConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::ConfigInvalid(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::ConfigInvalid("max_iter must be positive".into()));
        }
        if !(self.inlier_threshold > 0.0) {
            return Err(Error::ConfigInvalid(format!(
                "inlier threshold must be positive, got {}",
                self.inlier_threshold
            )));
        }
        if !(self.image_size[0] > 0.0 && self.image_size[1] > 0.0) {
            return Err(Error::ConfigInvalid(format!(
                "image size must be positive, got {:?}",
                self.image_size
            )));
        }
        Ok(())
    }
}

/// Refined model with optimizer diagnostics.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: CameraModel,
    /// RMS of residual components over the inliers, px.
    pub rms: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Cost `½‖r‖²` after each accepted step of the final refinement.
    pub cost_trace: Vec<f64>,
}

/// Fits `(f, θ, R, t)` to the inlier correspondences. See [`fit_model_report`].
pub fn fit_model(corrs: &[Correspondence], cfg: &FitConfig, init: Option<&CameraModel>) -> Result<CameraModel> {
    fit_model_report(corrs, cfg, init).map(|r| r.model)
}

/// Levenberg-Marquardt fit with fixed principal point and a single focal
/// length. Without `init`, several focal lengths are tried, each with a linear
/// pose estimate and zero distortion, and the lowest-cost result is kept.
pub fn fit_model_report(corrs: &[Correspondence], cfg: &FitConfig, init: Option<&CameraModel>) -> Result<FitReport> {
    cfg.validate()?;
    let inliers: Vec<&Correspondence> = corrs.iter().filter(|c| c.inlier).collect();
    if inliers.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData {
            required: MIN_FIT_POINTS,
            available: inliers.len(),
        });
    }
    if let Some(i) = corrs.iter().position(|c| !c.is_finite()) {
        return Err(Error::NonFinite { index: i });
    }
    let settings = lm::LmSettings {
        max_iter: cfg.max_iter,
        tol: cfg.tol,
        lambda0: 1e-3,
    };
    let all: Vec<usize> = (0..lm::n_params(cfg.order)).collect();

    let best = if let Some(m) = init {
        m.validate().map_err(Error::ConfigInvalid)?;
        let start = m.clone().with_distortion(cfg.order, m.theta);
        let out = lm::minimize(lm::pack(&start), &start, &inliers, &all, settings)?;
        (out, start)
    } else {
        let [w, h] = cfg.image_size;
        let c = Vector2::new(0.5 * w, 0.5 * h);
        let template = CameraModel::pinhole(1.0, c.x, c.y).with_distortion(cfg.order, [0.0; 3]);
        let pose_free: Vec<usize> = std::iter::once(0).chain(1 + cfg.order.terms()..all.len()).collect();
        let diag = w.hypot(h);
        let mut best: Option<lm::LmOutcome> = None;
        for frac in [1.0, 0.71, 0.5, 0.35, 0.25] {
            let f0 = frac * diag;
            let Some((r, t)) = init::linear_pose(&inliers, f0, c) else {
                continue;
            };
            let start = CameraModel {
                fx: f0,
                fy: f0,
                ..template.clone()
            }
            .with_pose(r, t);
            let Ok(coarse) = lm::minimize(lm::pack(&start), &template, &inliers, &pose_free, settings) else {
                continue;
            };
            let Ok(fine) = lm::minimize(coarse.params, &template, &inliers, &all, settings) else {
                continue;
            };
            if !(fine.params[0] > 0.0) {
                continue;
            }
            if best.as_ref().is_none_or(|b| fine.cost < b.cost) {
                best = Some(fine);
            }
        }
        let out = best.ok_or(Error::NonConvergence {
            iterations: cfg.max_iter,
            gradient_norm: f64::INFINITY,
        })?;
        (out, template)
    };
    let (out, template) = best;
    if !out.converged {
        return Err(Error::NonConvergence {
            iterations: out.iterations,
            gradient_norm: out.gradient_norm,
        });
    }
    let model = lm::unpack(&out.params, &template);
    if model.fx <= 0.0 {
        return Err(Error::NonConvergence {
            iterations: out.iterations,
            gradient_norm: out.gradient_norm,
        });
    }
    let rms = (2.0 * out.cost / (2 * inliers.len()) as f64).sqrt();
    Ok(FitReport {
        model,
        rms,
        iterations: out.iterations,
        gradient_norm: out.gradient_norm,
        cost_trace: out.cost_trace,
    })
}

/// Robust residual scale: `1.4826 · median |e|` over all residual components,
/// taken about zero since reprojection residuals of a fitted model are
/// zero-mean.
pub fn robust_scale(components: &[f64]) -> f64 {
    if components.is_empty() {
        return 0.0;
    }
    let mut a: Vec<f64> = components.iter().map(|v| v.abs()).collect();
    a.sort_by(f64::total_cmp);
    let n = a.len();
    let med = if n % 2 == 1 {
        a[n / 2]
    } else {
        0.5 * (a[n / 2 - 1] + a[n / 2])
    };
    1.4826 * med
}

/// Marks each correspondence inlier iff its residual norm is at most
/// `threshold` robust scales (plus a numerical-zero floor). Points behind the
/// camera become outliers.
pub fn flag_inliers(model: &CameraModel, corrs: &[Correspondence], threshold: f64) -> Vec<Correspondence> {
    let eps: Vec<Option<Vector2<f64>>> = corrs
        .iter()
        .map(|c| {
            model
                .project(&c.x3d)
                .ok()
                .map(|p| c.x2d - p)
                .filter(|e| e.x.is_finite() && e.y.is_finite())
        })
        .collect();
    let comps: Vec<f64> = eps.iter().flatten().flat_map(|e| [e.x, e.y]).collect();
    let cut = threshold * robust_scale(&comps) + INLIER_ZERO_FLOOR;
    corrs
        .iter()
        .zip(&eps)
        .map(|(c, e)| Correspondence {
            inlier: e.is_some_and(|e| e.norm() <= cut),
            ..*c
        })
        .collect()
}

/// Parameter vector of a model, in the optimizer's layout.
pub fn parameters(model: &CameraModel) -> DVector<f64> {
    lm::pack(model)
}
