//! Goodness-of-fit tests of a sample against the standard normal.
//!
//! [`ks_test`] compares against the fully specified N(0, 1). [`dap_test`] and
//! [`sw_test`] test normality with location and scale estimated from the
//! sample, so they cannot detect a pure variance mismatch.

mod dap;
mod ks;
pub mod normal;
mod sw;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dap::{dap_test, kurtosis_z, skewness_z};
pub use ks::{kolmogorov_sf, ks_statistic, ks_test};
pub use sw::{sw_coefficients, sw_test};

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TestKind {
    #[serde(rename = "KS")]
    Ks,
    #[serde(rename = "DAP")]
    Dap,
    #[serde(rename = "SW")]
    Sw,
}

impl TestKind {
    pub const ALL: [TestKind; 3] = [TestKind::Ks, TestKind::Dap, TestKind::Sw];

    pub fn name(self) -> &'static str {
        match self {
            TestKind::Ks => "KS",
            TestKind::Dap => "DAP",
            TestKind::Sw => "SW",
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ks" => Ok(TestKind::Ks),
            "dap" => Ok(TestKind::Dap),
            "sw" => Ok(TestKind::Sw),
            other => Err(Error::ConfigInvalid(format!("unknown test `{other}`"))),
        }
    }
}

/// Outcome of one test at significance level `alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test: TestKind,
    pub statistic: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub reject_h0: bool,
    pub n: usize,
}

impl TestReport {
    pub(crate) fn new(test: TestKind, statistic: f64, p_value: f64, alpha: f64, n: usize) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        TestReport {
            test,
            statistic,
            p_value,
            alpha,
            reject_h0: p_value < alpha,
            n,
        }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::ConfigInvalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

pub(crate) fn check_finite(samples: &[f64]) -> Result<()> {
    match samples.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

pub(crate) fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Runs each requested test once over `samples`. Reports come back in the
/// fixed order KS, DAP, SW; duplicates are ignored.
pub fn validate(samples: &[f64], alpha: f64, tests: &[TestKind]) -> Result<Vec<TestReport>> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut kinds = tests.to_vec();
    kinds.sort();
    kinds.dedup();
    if kinds.is_empty() {
        return Err(Error::ConfigInvalid("no tests requested".into()));
    }
    kinds
        .into_iter()
        .map(|kind| match kind {
            TestKind::Ks => ks_test(samples, alpha),
            TestKind::Dap => dap_test(samples, alpha),
            TestKind::Sw => sw_test(samples, alpha),
        })
        .collect()
}

/// Parses a comma separated list such as `ks,dap,sw`.
pub fn parse_test_list(s: &str) -> Result<Vec<TestKind>> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect()
}

/// `n` standard normal quantiles `Φ⁻¹((i − 0.5)/n)`.
pub fn normal_scores(n: usize) -> Vec<f64> {
    (1..=n).map(|i| normal::quantile((i as f64 - 0.5) / n as f64)).collect()
}
