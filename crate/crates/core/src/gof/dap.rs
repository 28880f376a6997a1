use super::{check_alpha, check_finite, TestKind, TestReport};
use crate::error::{Error, Result};

pub const DAP_MIN_SAMPLES: usize = 20;

struct Moments {
    m2: f64,
    m3: f64,
    m4: f64,
}

fn central_moments(x: &[f64]) -> Moments {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    Moments {
        m2: m2 / n,
        m3: m3 / n,
        m4: m4 / n,
    }
}

fn moments_checked(x: &[f64]) -> Result<Moments> {
    let m = central_moments(x);
    let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m.m2 <= (scale * 1e-14).powi(2) {
        return Err(Error::ZeroVariance);
    }
    Ok(m)
}

/// D'Agostino's normalizing transform of the sample skewness `√b1`.
pub fn skewness_z(x: &[f64]) -> Result<f64> {
    let m = moments_checked(x)?;
    Ok(skew_z(x.len() as f64, m.m3 / m.m2.powf(1.5)))
}

fn skew_z(n: f64, b1: f64) -> f64 {
    let y = b1 * ((n + 1.0) * (n + 3.0) / (6.0 * (n - 2.0))).sqrt();
    let beta2 =
        3.0 * (n * n + 27.0 * n - 70.0) * (n + 1.0) * (n + 3.0) / ((n - 2.0) * (n + 5.0) * (n + 7.0) * (n + 9.0));
    let w2 = -1.0 + (2.0 * (beta2 - 1.0)).sqrt();
    let delta = 1.0 / (0.5 * w2.ln()).sqrt();
    let alpha = (2.0 / (w2 - 1.0)).sqrt();
    let ya = y / alpha;
    delta * (ya + (ya * ya + 1.0).sqrt()).ln()
}

/// Anscombe-Glynn normalizing transform of the sample kurtosis `b2`.
pub fn kurtosis_z(x: &[f64]) -> Result<f64> {
    let m = moments_checked(x)?;
    Ok(kurt_z(x.len() as f64, m.m4 / (m.m2 * m.m2)))
}

fn kurt_z(n: f64, b2: f64) -> f64 {
    let mean = 3.0 * (n - 1.0) / (n + 1.0);
    let var = 24.0 * n * (n - 2.0) * (n - 3.0) / ((n + 1.0) * (n + 1.0) * (n + 3.0) * (n + 5.0));
    let x = (b2 - mean) / var.sqrt();
    let sqrt_beta1 = 6.0 * (n * n - 5.0 * n + 2.0) / ((n + 7.0) * (n + 9.0))
        * (6.0 * (n + 3.0) * (n + 5.0) / (n * (n - 2.0) * (n - 3.0))).sqrt();
    let a = 6.0 + 8.0 / sqrt_beta1 * (2.0 / sqrt_beta1 + (1.0 + 4.0 / (sqrt_beta1 * sqrt_beta1)).sqrt());
    let term1 = 1.0 - 2.0 / (9.0 * a);
    let denom = 1.0 + x * (2.0 / (a - 4.0)).sqrt();
    let term2 = if denom == 0.0 {
        // the cube-root transform diverges; the sample is infinitely far out
        return if x > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
    } else {
        denom.signum() * ((1.0 - 2.0 / a) / denom.abs()).cbrt()
    };
    (term1 - term2) / (2.0 / (9.0 * a)).sqrt()
}

/// D'Agostino-Pearson omnibus test, `K² = Z_s² + Z_k²` referred to χ²(2).
pub fn dap_test(samples: &[f64], alpha: f64) -> Result<TestReport> {
    check_alpha(alpha)?;
    let n = samples.len();
    if n < DAP_MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            test: "DAP",
            min: DAP_MIN_SAMPLES,
            n,
        });
    }
    check_finite(samples)?;
    let m = moments_checked(samples)?;
    let nf = n as f64;
    let zs = skew_z(nf, m.m3 / m.m2.powf(1.5));
    let zk = kurt_z(nf, m.m4 / (m.m2 * m.m2));
    let k2 = zs * zs + zk * zk;
    Ok(TestReport::new(TestKind::Dap, k2, (-0.5 * k2).exp(), alpha, n))
}
