//! Synthetic checkerboard correspondences and the polynomial toy problem.
//!
//! A planar grid of saddle points is viewed by a distorted camera from a
//! sequence of decreasing distances, so later sets cover more of the image
//! and reach further into the distorted periphery. Detections get isotropic
//! Gaussian noise. The 3D points get scanner-like angular noise: each point is
//! rotated about the camera center, which keeps it on its sphere around the
//! camera, with the tilt component attenuated relative to pan.

use nalgebra::{Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rotation_from_axis_angle, CameraModel, Correspondence, DistortionOrder};
use crate::hull;
use crate::noise::{axis_rotation, lidar_scales, LidarGeometry, LidarScales, PanAxis};

pub use crate::hull::coverage;

/// Ground-truth distortion of the simulated `D(3,0)` camera.
pub const TRUE_THETA: [f64; 3] = [-0.0684, 0.0100, 0.0006];

/// Default scanner angular noise, radians: 0.1 px of horizontal image motion
/// at f = 800.
pub const DEFAULT_SIGMA_3D: f64 = 1.25e-4;

/// Name of the generator recorded in manifests.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha), stream = set index";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Focal length, px.
    pub f: f64,
    pub theta: [f64; 3],
    /// Saddle points per side.
    pub grid: usize,
    /// Image width and height, px.
    pub image_size: [f64; 2],
    /// Detector noise standard deviation, px.
    pub sigma_d: f64,
    /// Scanner pan noise standard deviation, radians.
    pub sigma_3d: f64,
    /// Tilt noise as a fraction of pan noise.
    pub tilt_ratio: f64,
    /// Half-range of each axis-angle component of the pattern rotation, degrees.
    pub rot_range_deg: f64,
    pub n_sets: usize,
    /// Fraction of the image area covered by the frontal pattern at the far end.
    pub far_fill: f64,
    /// Same, at the near end.
    pub near_fill: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            f: 800.0,
            theta: TRUE_THETA,
            grid: 15,
            image_size: [1600.0, 1600.0],
            sigma_d: 0.03,
            sigma_3d: DEFAULT_SIGMA_3D,
            tilt_ratio: 0.1,
            rot_range_deg: 15.0,
            n_sets: 56,
            far_fill: 0.25,
            near_fill: 0.9,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ConfigInvalid(msg));
        if self.grid < 2 {
            return bad(format!("grid must be at least 2, got {}", self.grid));
        }
        if !(self.f > 0.0) {
            return bad(format!("focal length must be positive, got {}", self.f));
        }
        if !(self.image_size[0] > 0.0 && self.image_size[1] > 0.0) {
            return bad(format!("image size must be positive, got {:?}", self.image_size));
        }
        if !(self.sigma_d >= 0.0 && self.sigma_3d >= 0.0 && self.tilt_ratio >= 0.0) {
            return bad("noise levels must be non-negative".into());
        }
        if !(self.rot_range_deg >= 0.0 && self.rot_range_deg < 60.0) {
            return bad(format!(
                "rotation range must lie in [0, 60) degrees, got {}",
                self.rot_range_deg
            ));
        }
        if self.n_sets == 0 {
            return bad("n_sets must be positive".into());
        }
        if !(self.far_fill > 0.0 && self.far_fill <= self.near_fill && self.near_fill <= 1.0) {
            return bad(format!(
                "need 0 < far_fill ≤ near_fill ≤ 1, got {} and {}",
                self.far_fill, self.near_fill
            ));
        }
        if self.theta.iter().any(|t| !t.is_finite()) {
            return bad("non-finite distortion".into());
        }
        Ok(())
    }

    fn camera(&self) -> CameraModel {
        CameraModel::pinhole(self.f, 0.5 * self.image_size[0], 0.5 * self.image_size[1])
            .with_distortion(DistortionOrder::Three, self.theta)
    }

    /// Planar grid with unit spacing, centered on the world origin in `z = 0`.
    pub fn grid_points(&self) -> Vec<Vector3<f64>> {
        let half = (self.grid - 1) as f64 / 2.0;
        (0..self.grid)
            .flat_map(|r| (0..self.grid).map(move |c| Vector3::new(c as f64 - half, r as f64 - half, 0.0)))
            .collect()
    }

    /// Pattern distances from far to near, geometrically spaced.
    pub fn distances(&self) -> Vec<f64> {
        let far = self.frontal_distance(self.far_fill);
        let near = self.frontal_distance(self.near_fill);
        if self.n_sets == 1 {
            return vec![near];
        }
        let ratio = near / far;
        (0..self.n_sets)
            .map(|i| far * ratio.powf(i as f64 / (self.n_sets - 1) as f64))
            .collect()
    }

    /// Distance at which the frontal grid's hull covers `fill` of the image.
    fn frontal_distance(&self, fill: f64) -> f64 {
        let target = fill * self.image_size[0] * self.image_size[1];
        let grid = self.grid_points();
        let cam = self.camera();
        let area = |d: f64| {
            let c = cam.clone().with_pose(Matrix3::identity(), Vector3::new(0.0, 0.0, d));
            let px: Vec<_> = grid.iter().filter_map(|x| c.project(x).ok()).collect();
            hull::coverage(&px)
        };
        // area shrinks with distance
        let span = (self.grid - 1) as f64;
        let (mut lo, mut hi) = (1e-3 * span, 1e3 * span);
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if area(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo * hi).sqrt()
    }
}

/// One simulated view.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSet {
    pub corrs: Vec<Correspondence>,
    pub truth: CameraModel,
    /// Known noise scalings, aligned with `corrs`.
    pub scales: Vec<LidarScales>,
    /// Convex-hull area of the detections, px².
    pub coverage: f64,
    /// Distance of the pattern center from the camera.
    pub distance: f64,
}

/// Generates `cfg.n_sets` views, far to near. Set `i` draws from its own RNG
/// stream, so any subset can be regenerated independently.
pub fn gen_sets(cfg: &SimConfig) -> Result<Vec<SimSet>> {
    cfg.validate()?;
    let distances = cfg.distances();
    let grid = cfg.grid_points();
    distances
        .iter()
        .enumerate()
        .map(|(i, &d)| gen_set(cfg, i, d, &grid))
        .collect()
}

/// RNG for set `index` of a run seeded with `seed`.
pub fn set_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn gen_set(cfg: &SimConfig, index: usize, distance: f64, grid: &[Vector3<f64>]) -> Result<SimSet> {
    let mut rng = set_rng(cfg.seed, index);
    let range = cfg.rot_range_deg.to_radians();
    let omega = Vector3::from_fn(|_, _| rng.random_range(-1.0..=1.0) * range);
    let truth = cfg
        .camera()
        .with_pose(rotation_from_axis_angle(&omega), Vector3::new(0.0, 0.0, distance));
    let center = truth.center();
    let up = truth.rotation.transpose() * Vector3::y();
    let scanner = LidarGeometry {
        origin: center,
        pan_axis: PanAxis::Camera,
        ..LidarGeometry::default()
    };
    let [w, h] = cfg.image_size;

    let mut corrs = Vec::with_capacity(grid.len());
    let mut scales = Vec::with_capacity(grid.len());
    for x in grid {
        // noise is drawn for every grid point so visibility does not shift the stream
        let nd: [f64; 2] = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let pan: f64 = rng.sample(StandardNormal);
        let tilt: f64 = rng.sample(StandardNormal);

        let Ok(exact) = truth.project(x) else { continue };
        if !(0.0..=w).contains(&exact.x) || !(0.0..=h).contains(&exact.y) {
            continue;
        }
        let x2d = exact + cfg.sigma_d * Vector2::new(nd[0], nd[1]);
        let x3d = perturb_on_sphere(
            x,
            &center,
            &up,
            cfg.sigma_3d * pan,
            cfg.sigma_3d * cfg.tilt_ratio * tilt,
        );
        let s = lidar_scales(&truth, x, &scanner)?;
        corrs.push(Correspondence::new(x2d, x3d));
        scales.push(LidarScales::new(s.a_x, cfg.tilt_ratio * s.a_y));
    }
    let px: Vec<_> = corrs.iter().map(|c| c.x2d).collect();
    Ok(SimSet {
        coverage: hull::coverage(&px),
        corrs,
        truth,
        scales,
        distance,
    })
}

/// Rotates `x` about `center` by `pan` around `up`, then by `tilt` around the
/// horizontal axis perpendicular to the viewing ray.
pub fn perturb_on_sphere(
    x: &Vector3<f64>,
    center: &Vector3<f64>,
    up: &Vector3<f64>,
    pan: f64,
    tilt: f64,
) -> Vector3<f64> {
    let ray = x - center;
    let tilt_axis = up.cross(&ray);
    let panned = axis_rotation(up, pan) * ray;
    let tilted = if tilt_axis.norm() > 0.0 {
        axis_rotation(&tilt_axis, tilt) * panned
    } else {
        panned
    };
    center + tilted
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    /// `y = x`
    TrueModel,
    /// `y = x + 0.5 x⁵`
    BadModel,
}

impl Hypothesis {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Hypothesis::TrueModel => x,
            Hypothesis::BadModel => x + 0.5 * x.powi(5),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyExample {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// Samples `y = x + N(0, σ²)` on `x ~ U[−1, 1]` and returns residuals against
/// the chosen hypothesis.
pub fn gen_poly_example(n: usize, noise_sigma: f64, hypothesis: Hypothesis, seed: u64) -> Result<PolyExample> {
    if n < 10 {
        return Err(Error::ConfigInvalid(format!("need at least 10 points, got {n}")));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::ConfigInvalid(format!(
            "noise sigma must be non-negative, got {noise_sigma}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let e: f64 = rng.sample(StandardNormal);
            x + noise_sigma * e
        })
        .collect();
    let residuals = xs.iter().zip(&ys).map(|(&x, &y)| y - hypothesis.eval(x)).collect();
    Ok(PolyExample { xs, ys, residuals })
}

/// Draws `n` standard normal variates from a seeded stream; handy for tests
/// and benchmarks that need reproducible Gaussian samples.
pub fn standard_normal_samples(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    StandardNormal.sample_iter(&mut rng).take(n).collect()
}
