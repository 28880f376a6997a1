//! Levenberg-Marquardt refinement of focal length, distortion and pose.
//!
//! Parameter vector: `[f, θ1..θm, ω (axis-angle), t]` with `m` the number of
//! active distortion terms. The principal point is held fixed and `fx = fy = f`.

use nalgebra::{DMatrix, DVector, Matrix2x3, Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{
    axis_angle_from_rotation, rotation_from_axis_angle, CameraModel, Correspondence, DistortionOrder,
};

/// Packs a model into the optimizer's parameter vector.
pub fn pack(model: &CameraModel) -> DVector<f64> {
    let m = model.order.terms();
    let mut p = DVector::zeros(7 + m);
    p[0] = 0.5 * (model.fx + model.fy);
    for i in 0..m {
        p[1 + i] = model.theta[i];
    }
    p.fixed_rows_mut::<3>(1 + m)
        .copy_from(&axis_angle_from_rotation(&model.rotation));
    p.fixed_rows_mut::<3>(4 + m).copy_from(&model.translation);
    p
}

/// Inverse of [`pack`]; `template` supplies the principal point and order.
pub fn unpack(p: &DVector<f64>, template: &CameraModel) -> CameraModel {
    let m = template.order.terms();
    let mut theta = [0.0; 3];
    theta[..m].copy_from_slice(&p.as_slice()[1..1 + m]);
    let omega: Vector3<f64> = p.fixed_rows::<3>(1 + m).into();
    let t: Vector3<f64> = p.fixed_rows::<3>(4 + m).into();
    CameraModel {
        fx: p[0],
        fy: p[0],
        theta,
        rotation: rotation_from_axis_angle(&omega),
        translation: t,
        ..template.clone()
    }
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// `∂(R(ω) v)/∂ω` for the exponential-map rotation.
pub fn d_rotate_d_omega(omega: &Vector3<f64>, v: &Vector3<f64>) -> Matrix3<f64> {
    let n2 = omega.norm_squared();
    if n2 < 1e-20 {
        return -skew(v);
    }
    let r = rotation_from_axis_angle(omega);
    let w = skew(omega);
    -r * skew(v) * (omega * omega.transpose() + (r.transpose() - Matrix3::identity()) * w) / n2
}

/// Residuals `x2d − proj(X)` stacked as `[x0, y0, x1, y1, …]`, and the
/// Jacobian of the projection (not of the residual) when `jac` is given.
pub(crate) fn evaluate(
    p: &DVector<f64>,
    template: &CameraModel,
    corrs: &[&Correspondence],
    mut jac: Option<&mut DMatrix<f64>>,
) -> Result<DVector<f64>> {
    let m = template.order.terms();
    let f = p[0];
    let mut theta = [0.0; 3];
    theta[..m].copy_from_slice(&p.as_slice()[1..1 + m]);
    let omega: Vector3<f64> = p.fixed_rows::<3>(1 + m).into();
    let t: Vector3<f64> = p.fixed_rows::<3>(4 + m).into();
    let r = rotation_from_axis_angle(&omega);

    let mut res = DVector::zeros(2 * corrs.len());
    for (k, c) in corrs.iter().enumerate() {
        let xc = r * c.x3d + t;
        if !(xc.z > 0.0) {
            return Err(Error::NonPositiveDepth { index: k, depth: xc.z });
        }
        let y = Vector2::new(xc.x / xc.z, xc.y / xc.z);
        let r2 = y.norm_squared();
        let s = 1.0 + r2 * (theta[0] + r2 * (theta[1] + r2 * theta[2]));
        let u = Vector2::new(f * s * y.x + template.cx, f * s * y.y + template.cy);
        res[2 * k] = c.x2d.x - u.x;
        res[2 * k + 1] = c.x2d.y - u.y;

        let Some(j) = jac.as_deref_mut() else { continue };
        let row = 2 * k;
        j[(row, 0)] = s * y.x;
        j[(row + 1, 0)] = s * y.y;
        let mut r2i = r2;
        for i in 0..m {
            j[(row, 1 + i)] = f * y.x * r2i;
            j[(row + 1, 1 + i)] = f * y.y * r2i;
            r2i *= r2;
        }
        let ds = theta[0] + r2 * (2.0 * theta[1] + 3.0 * r2 * theta[2]);
        let du_dy = nalgebra::Matrix2::new(
            f * (s + 2.0 * y.x * y.x * ds),
            f * 2.0 * y.x * y.y * ds,
            f * 2.0 * y.x * y.y * ds,
            f * (s + 2.0 * y.y * y.y * ds),
        );
        let iz = 1.0 / xc.z;
        let dy_dxc = Matrix2x3::new(iz, 0.0, -y.x * iz, 0.0, iz, -y.y * iz);
        let du_dxc = du_dy * dy_dxc;
        let du_dw = du_dxc * d_rotate_d_omega(&omega, &c.x3d);
        for a in 0..2 {
            for b in 0..3 {
                j[(row + a, 1 + m + b)] = du_dw[(a, b)];
                j[(row + a, 4 + m + b)] = du_dxc[(a, b)];
            }
        }
    }
    Ok(res)
}

/// Analytic projection Jacobian at `model`, rows `[x0, y0, x1, y1, …]`.
pub fn jacobian(model: &CameraModel, corrs: &[Correspondence]) -> Result<DMatrix<f64>> {
    let p = pack(model);
    let refs: Vec<&Correspondence> = corrs.iter().collect();
    let mut j = DMatrix::zeros(2 * corrs.len(), p.len());
    evaluate(&p, model, &refs, Some(&mut j))?;
    Ok(j)
}

/// Central finite-difference projection Jacobian with relative step `h`.
pub fn jacobian_fd(model: &CameraModel, corrs: &[Correspondence], h: f64) -> Result<DMatrix<f64>> {
    let p = pack(model);
    let refs: Vec<&Correspondence> = corrs.iter().collect();
    let mut j = DMatrix::zeros(2 * corrs.len(), p.len());
    for i in 0..p.len() {
        let step = h * p[i].abs().max(1e-2);
        let mut hi = p.clone();
        let mut lo = p.clone();
        hi[i] += step;
        lo[i] -= step;
        // residual = x − proj, so the projection derivative is the negated difference
        let d = (evaluate(&lo, model, &refs, None)? - evaluate(&hi, model, &refs, None)?) / (2.0 * step);
        j.set_column(i, &d);
    }
    Ok(j)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LmSettings {
    pub max_iter: usize,
    pub tol: f64,
    pub lambda0: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct LmOutcome {
    pub params: DVector<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    /// Cost after every accepted step, starting with the initial cost.
    pub cost_trace: Vec<f64>,
}

/// Scale-free gradient measure: the largest cosine between the residual and a
/// Jacobian column.
fn scaled_gradient(jtj: &DMatrix<f64>, g: &DVector<f64>, cost: f64) -> f64 {
    let rn = (2.0 * cost).sqrt();
    (0..g.len())
        .map(|i| {
            let cn = jtj[(i, i)].sqrt();
            if cn == 0.0 || rn == 0.0 {
                0.0
            } else {
                g[i].abs() / (cn * rn)
            }
        })
        .fold(0.0, f64::max)
}

/// Marquardt-damped Gauss-Newton on the parameters listed in `free`; the
/// remaining entries of `p0` stay fixed.
pub(crate) fn minimize(
    p0: DVector<f64>,
    template: &CameraModel,
    corrs: &[&Correspondence],
    free: &[usize],
    settings: LmSettings,
) -> Result<LmOutcome> {
    let n = p0.len();
    let mut p = p0;
    let mut jfull = DMatrix::zeros(2 * corrs.len(), n);
    let mut res = evaluate(&p, template, corrs, Some(&mut jfull))?;
    let mut cost = 0.5 * res.norm_squared();
    let mut lambda = settings.lambda0;
    let mut nu = 2.0;
    let mut trace = vec![cost];
    let mut grad_norm = f64::INFINITY;

    let select = |j: &DMatrix<f64>| DMatrix::from_fn(j.nrows(), free.len(), |r, c| j[(r, free[c])]);
    let mut j = select(&jfull);
    for iter in 1..=settings.max_iter {
        let jtj = j.transpose() * &j;
        // J is the projection Jacobian, so descent direction is +Jᵀ r
        let g = j.transpose() * &res;
        grad_norm = scaled_gradient(&jtj, &g, cost);
        if cost == 0.0 || grad_norm <= settings.tol {
            return Ok(LmOutcome {
                params: p,
                cost,
                iterations: iter - 1,
                gradient_norm: grad_norm,
                converged: true,
                cost_trace: trace,
            });
        }
        loop {
            let mut a = jtj.clone();
            let diag: Vec<f64> = (0..free.len()).map(|i| jtj[(i, i)].max(1e-300)).collect();
            for (i, d) in diag.iter().enumerate() {
                a[(i, i)] += lambda * d;
            }
            let step = a.cholesky().map(|c| c.solve(&g));
            let Some(step) = step else {
                lambda *= nu;
                nu *= 2.0;
                if lambda > 1e16 {
                    break;
                }
                continue;
            };
            let mut trial = p.clone();
            for (i, &fi) in free.iter().enumerate() {
                trial[fi] += step[i];
            }
            let tr = evaluate(&trial, template, corrs, Some(&mut jfull));
            let accepted = match tr {
                Ok(r) => {
                    let c = 0.5 * r.norm_squared();
                    if c < cost {
                        // gain ratio against the linear model decides how far to relax λ
                        let predicted: f64 = 0.5
                            * (0..free.len())
                                .map(|i| step[i] * (lambda * diag[i] * step[i] + g[i]))
                                .sum::<f64>();
                        let rho = if predicted > 0.0 { (cost - c) / predicted } else { 0.0 };
                        let rel_step =
                            step.norm() / (free.iter().map(|&i| p[i] * p[i]).sum::<f64>().sqrt() + settings.tol);
                        let rel_drop = (cost - c) / cost;
                        p = trial;
                        res = r;
                        cost = c;
                        trace.push(cost);
                        lambda = (lambda * (1.0f64 / 3.0).max(1.0 - (2.0 * rho - 1.0).powi(3))).max(1e-12);
                        nu = 2.0;
                        Some(rel_step <= settings.tol * 1e-2 || rel_drop <= settings.tol * settings.tol)
                    } else {
                        None
                    }
                }
                Err(_) => None,
            };
            match accepted {
                Some(stalled) => {
                    j = select(&jfull);
                    if stalled {
                        let jtj = j.transpose() * &j;
                        let g = j.transpose() * &res;
                        grad_norm = scaled_gradient(&jtj, &g, cost);
                        return Ok(LmOutcome {
                            params: p,
                            cost,
                            iterations: iter,
                            gradient_norm: grad_norm,
                            converged: true,
                            cost_trace: trace,
                        });
                    }
                    break;
                }
                None => {
                    lambda *= nu;
                    nu *= 2.0;
                    if lambda > 1e16 {
                        break;
                    }
                }
            }
        }
        if lambda > 1e16 {
            // no descent possible from here: numerically at the minimum
            evaluate(&p, template, corrs, Some(&mut jfull))?;
            return Ok(LmOutcome {
                params: p,
                cost,
                iterations: iter,
                gradient_norm: grad_norm,
                converged: true,
                cost_trace: trace,
            });
        }
    }
    Ok(LmOutcome {
        params: p,
        cost,
        iterations: settings.max_iter,
        gradient_norm: grad_norm,
        converged: false,
        cost_trace: trace,
    })
}

/// Order of the parameter vector for a model.
pub(crate) fn n_params(order: DistortionOrder) -> usize {
    7 + order.terms()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{gen_sets, SimConfig};

    #[test]
    fn pack_unpack_roundtrip() {
        let set = &gen_sets(&SimConfig {
            n_sets: 2,
            ..SimConfig::default()
        })
        .unwrap()[1];
        let m = &set.truth;
        let back = unpack(&pack(m), m);
        assert!((back.rotation - m.rotation).norm() < 1e-14);
        assert_eq!(back.theta, m.theta);
        assert_eq!(back.translation, m.translation);
        assert_eq!(pack(m).len(), n_params(m.order));
    }

    #[test]
    fn rotation_derivative_at_zero_matches_limit() {
        let v = Vector3::new(0.3, -1.2, 2.0);
        let tiny = Vector3::new(1e-7, -2e-7, 3e-8);
        let a = d_rotate_d_omega(&tiny, &v);
        let b = d_rotate_d_omega(&Vector3::zeros(), &v);
        assert!((a - b).norm() < 1e-5);
    }

    #[test]
    fn analytic_matches_finite_differences() {
        let sets = gen_sets(&SimConfig {
            n_sets: 3,
            ..SimConfig::default()
        })
        .unwrap();
        for set in &sets {
            for order in [DistortionOrder::One, DistortionOrder::Three] {
                let model = set.truth.clone().with_distortion(order, set.truth.theta);
                let ja = jacobian(&model, &set.corrs).unwrap();
                let jn = jacobian_fd(&model, &set.corrs, 1e-6).unwrap();
                for c in 0..ja.ncols() {
                    let scale = ja.column(c).amax().max(1e-12);
                    let err = (ja.column(c) - jn.column(c)).amax() / scale;
                    assert!(err < 1e-5, "col {c} err {err}");
                }
            }
        }
    }
}
