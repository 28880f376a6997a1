//! Shapiro-Wilk W with Royston's coefficient and p-value approximations
//! (algorithm AS R94).

use super::{check_alpha, check_finite, normal, sorted, TestKind, TestReport};
use crate::error::{Error, Result};

pub const SW_MIN_SAMPLES: usize = 8;
pub const SW_MAX_SAMPLES: usize = 5000;

const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
const C3: [f64; 4] = [0.5440, -0.39978, 0.025054, -6.714e-4];
const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
const G: [f64; 2] = [-2.273, 0.459];

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

/// Upper-half coefficients `a_1 ≥ a_2 ≥ … ≥ a_{n/2} > 0`, normalized so the
/// full antisymmetric vector has unit norm.
pub fn sw_coefficients(n: usize) -> Vec<f64> {
    let half = n / 2;
    let an = n as f64;
    let mut m: Vec<f64> = (1..=half)
        .map(|i| -normal::quantile((i as f64 - 0.375) / (an + 0.25)))
        .collect();
    let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / an.sqrt();
    let a1 = poly(&C1, rsn) + m[0] / ssumm2;

    let (first_scaled, fac) = if n > 5 {
        let a2 = m[1] / ssumm2 + poly(&C2, rsn);
        let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2)).sqrt();
        m[1] = a2;
        (2, fac)
    } else {
        let fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
        (1, fac)
    };
    m[0] = a1;
    for v in m.iter_mut().skip(first_scaled) {
        *v /= fac;
    }
    m
}

/// W statistic of sorted data, computed as `1 − w1` to keep precision near 1.
fn w_statistic(x: &[f64], a: &[f64]) -> f64 {
    let n = x.len();
    let range = x[n - 1] - x[0];
    let coef = |i: usize| -> f64 {
        let j = n - 1 - i;
        if i < j {
            -a[i]
        } else if i > j {
            a[j]
        } else {
            0.0
        }
    };
    let mean_x = x.iter().map(|v| v / range).sum::<f64>() / n as f64;
    let mean_a = (0..n).map(coef).sum::<f64>() / n as f64;
    let (mut ssa, mut ssx, mut sax) = (0.0, 0.0, 0.0);
    for (i, &xi) in x.iter().enumerate() {
        let da = coef(i) - mean_a;
        let dx = xi / range - mean_x;
        ssa += da * da;
        ssx += dx * dx;
        sax += da * dx;
    }
    let ssassx = (ssa * ssx).sqrt();
    let w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
    1.0 - w1
}

fn p_value(w: f64, n: usize) -> f64 {
    let an = n as f64;
    let w1 = 1.0 - w;
    if w1 <= 0.0 {
        return 1.0;
    }
    let mut y = w1.ln();
    let (m, s) = if n <= 11 {
        let gamma = poly(&G, an);
        if y >= gamma {
            return 1e-99;
        }
        y = -(gamma - y).ln();
        (poly(&C3, an), poly(&C4, an).exp())
    } else {
        let xx = an.ln();
        (poly(&C5, xx), poly(&C6, xx).exp())
    };
    normal::sf((y - m) / s)
}

/// Shapiro-Wilk test for `8 ≤ n ≤ 5000`.
pub fn sw_test(samples: &[f64], alpha: f64) -> Result<TestReport> {
    check_alpha(alpha)?;
    let n = samples.len();
    if n < SW_MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            test: "SW",
            min: SW_MIN_SAMPLES,
            n,
        });
    }
    if n > SW_MAX_SAMPLES {
        return Err(Error::TooManySamples {
            test: "SW",
            max: SW_MAX_SAMPLES,
            n,
        });
    }
    check_finite(samples)?;
    let x = sorted(samples);
    let range = x[n - 1] - x[0];
    let scale = x[0].abs().max(x[n - 1].abs());
    if range <= scale * 1e-12 || range < 1e-300 {
        return Err(Error::ZeroVariance);
    }
    let a = sw_coefficients(n);
    let w = w_statistic(&x, &a).clamp(0.0, 1.0);
    Ok(TestReport::new(TestKind::Sw, w, p_value(w, n), alpha, n))
}
