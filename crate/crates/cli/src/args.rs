use std::path::PathBuf;

use calvalid::gof::{parse_test_list, TestKind, DEFAULT_ALPHA};
use calvalid::noise::DEFAULT_LIDAR_DELTA;
use calvalid::{DistortionOrder, Error, IrlsConfig, LidarGeometry, PanAxis, Result, SimConfig, ValidateConfig};
use clap::{Args, Parser, Subcommand};

pub const SEED_ENV: &str = "CALVALID_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "calvalid",
    version,
    about = "Validate camera calibrations from 2D-3D correspondences"
)]
pub struct Cli {
    /// RNG seed; the CALVALID_SEED environment variable takes precedence
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic checkerboard correspondence sets
    Simulate(SimulateArgs),
    /// Fit a camera model to a correspondence file
    Fit(FitArgs),
    /// Validate a model against a correspondence file (exit 0 accept, 2 reject, 1 error)
    Validate(ValidateArgs),
    /// Summarize validation records as CSV, SVG and histogram data
    Report(ReportArgs),
    /// Fit and validate every set listed in a simulation manifest
    Batch(BatchArgs),
}

/// Resolves the seed: environment first, then the flag, then zero.
pub fn effective_seed(flag: Option<u64>) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::ConfigInvalid(format!("{SEED_ENV} is not an unsigned integer: `{v}`"))),
        Err(_) => Ok(flag.unwrap_or(0)),
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 56)]
    pub n_sets: usize,
    #[arg(long, default_value_t = 800.0)]
    pub f: f64,
    /// Ground-truth distortion θ1,θ2,θ3
    #[arg(long, value_parser = parse_f64_list::<3>, default_value = "-0.0684,0.01,0.0006")]
    pub theta: [f64; 3],
    #[arg(long, default_value_t = 15)]
    pub grid: usize,
    /// Image size W,H in pixels
    #[arg(long, value_parser = parse_f64_list::<2>, default_value = "1600,1600")]
    pub image_size: [f64; 2],
    /// Detector noise std, px
    #[arg(long, default_value_t = 0.03)]
    pub sigma_d: f64,
    /// Scanner pan noise std, radians
    #[arg(long, default_value_t = calvalid::sim::DEFAULT_SIGMA_3D)]
    pub sigma_3d: f64,
    #[arg(long, default_value_t = 15.0)]
    pub rot_range: f64,
}

impl SimulateArgs {
    pub fn config(&self, seed: u64) -> SimConfig {
        SimConfig {
            f: self.f,
            theta: self.theta,
            grid: self.grid,
            image_size: self.image_size,
            sigma_d: self.sigma_d,
            sigma_3d: self.sigma_3d,
            rot_range_deg: self.rot_range,
            n_sets: self.n_sets,
            seed,
            ..SimConfig::default()
        }
    }
}

#[derive(Debug, Args, Clone)]
pub struct FitOptions {
    /// Distortion order: 1 for D(1,0), 3 for D(3,0)
    #[arg(long, default_value_t = 3, value_parser = parse_order)]
    pub order: u8,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Image size W,H; the principal point is fixed at its center
    #[arg(long, value_parser = parse_f64_list::<2>, default_value = "1600,1600")]
    pub image_size: [f64; 2],
}

impl FitOptions {
    pub fn config(&self, inlier_threshold: f64) -> calvalid::FitConfig {
        calvalid::FitConfig {
            order: order_of(self.order),
            max_iter: self.max_iter,
            tol: self.tol,
            inlier_threshold,
            image_size: self.image_size,
        }
    }
}

pub fn order_of(n: u8) -> DistortionOrder {
    if n == 1 {
        DistortionOrder::One
    } else {
        DistortionOrder::Three
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Correspondence file (JSON lines)
    #[arg(long)]
    pub corrs: PathBuf,
    /// Where to write the fitted model
    #[arg(long)]
    pub out: PathBuf,
    /// Starting model; without it the fitter initializes itself
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[command(flatten)]
    pub fit: FitOptions,
    /// Also write the correspondences with inlier flags recomputed from the fit
    #[arg(long)]
    pub flag_inliers: Option<PathBuf>,
    /// Inlier cut in robust residual scales
    #[arg(long, default_value_t = 3.0)]
    pub inlier_threshold: f64,
}

#[derive(Debug, Args, Clone)]
pub struct ValidateOptions {
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Comma separated subset of ks,dap,sw
    #[arg(long, default_value = "ks,dap,sw", value_parser = parse_tests)]
    pub tests: TestList,
    /// Scanner angular step for computed noise scales, radians
    #[arg(long, default_value_t = DEFAULT_LIDAR_DELTA)]
    pub delta: f64,
    #[arg(long, default_value_t = 100)]
    pub irls_max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub irls_tol: f64,
    /// Scanner origin X,Y,Z in world coordinates
    #[arg(long, value_parser = parse_f64_list::<3>, default_value = "0,0,0")]
    pub lidar_origin: [f64; 3],
    /// Fixed world pan axis X,Y,Z; default is the camera's vertical axis
    #[arg(long, value_parser = parse_f64_list::<3>)]
    pub lidar_up: Option<[f64; 3]>,
}

impl ValidateOptions {
    pub fn config(&self) -> ValidateConfig {
        ValidateConfig {
            alpha: self.alpha,
            tests: self.tests.0.clone(),
            irls: IrlsConfig {
                max_iter: self.irls_max_iter,
                tol: self.irls_tol,
                ..IrlsConfig::default()
            },
            lidar: LidarGeometry {
                origin: self.lidar_origin.into(),
                pan_axis: match self.lidar_up {
                    Some(v) => PanAxis::World(v.into()),
                    None => PanAxis::Camera,
                },
                delta: self.delta,
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corrs: PathBuf,
    /// Identifier stored in the record; defaults to the correspondence file stem
    #[arg(long)]
    pub set_id: Option<String>,
    /// Write the record here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the standardized residuals (JSON array) here
    #[arg(long)]
    pub residuals_out: Option<PathBuf>,
    #[command(flatten)]
    pub validate: ValidateOptions,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Validation record files (JSON object or JSON lines of objects)
    #[arg(required = true)]
    pub records: Vec<PathBuf>,
    /// Output directory for report.csv and report.svg
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "calibration validation")]
    pub title: String,
    /// Standardized residual files to histogram into histogram.json
    #[arg(long)]
    pub residuals: Vec<PathBuf>,
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    /// Directory written by `simulate`
    #[arg(long)]
    pub sim_dir: PathBuf,
    /// Output directory for models, records and the report
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub fit: FitOptions,
    #[command(flatten)]
    pub validate: ValidateOptions,
    /// Worker threads; output is identical for any value
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

fn parse_f64_list<const N: usize>(s: &str) -> std::result::Result<[f64; N], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma separated numbers, got `{s}`"));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|_| format!("not a number: `{p}`"))?;
    }
    Ok(out)
}

fn parse_order(s: &str) -> std::result::Result<u8, String> {
    match s {
        "1" => Ok(1),
        "3" => Ok(3),
        _ => Err(format!("distortion order must be 1 or 3, got `{s}`")),
    }
}

/// Wrapper so clap treats the comma list as one value.
#[derive(Debug, Clone)]
pub struct TestList(pub Vec<TestKind>);

fn parse_tests(s: &str) -> std::result::Result<TestList, String> {
    parse_test_list(s).map(TestList).map_err(|e| e.to_string())
}
