use std::f64::consts::PI;

use super::{check_alpha, check_finite, normal, sorted, TestKind, TestReport};
use crate::error::{Error, Result};

pub const KS_MIN_SAMPLES: usize = 8;

/// Two-sided one-sample statistic `D = sup |F_n − Φ|` against N(0, 1).
pub fn ks_statistic(samples: &[f64]) -> f64 {
    let x = sorted(samples);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = normal::cdf(v);
            let upper = (i + 1) as f64 / n - f;
            let lower = f - i as f64 / n;
            upper.max(lower)
        })
        .fold(0.0, f64::max)
}

/// Survival function of the Kolmogorov distribution,
/// `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} exp(−2k²λ²)`.
///
/// The alternating series converges slowly for small λ, so below 1.18 the
/// equivalent Jacobi theta form of the CDF is summed instead.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let q = if lambda < 1.18 {
        let a = -PI * PI / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        for k in 1..=100 {
            let m = (2 * k - 1) as f64;
            let term = (a * m * m).exp();
            sum += term;
            if term < 1e-17 {
                break;
            }
        }
        1.0 - (2.0 * PI).sqrt() / lambda * sum
    } else {
        let mut sum = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < 1e-12 {
                break;
            }
        }
        2.0 * sum
    };
    q.clamp(0.0, 1.0)
}

/// Kolmogorov-Smirnov test against the standard normal, with the asymptotic
/// p-value evaluated at `λ = (√n + 0.12 + 0.11/√n) D`.
pub fn ks_test(samples: &[f64], alpha: f64) -> Result<TestReport> {
    check_alpha(alpha)?;
    let n = samples.len();
    if n < KS_MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            test: "KS",
            min: KS_MIN_SAMPLES,
            n,
        });
    }
    check_finite(samples)?;
    let d = ks_statistic(samples);
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    Ok(TestReport::new(TestKind::Ks, d, kolmogorov_sf(lambda), alpha, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gof::normal_scores;
    use proptest::prelude::*;

    #[test]
    fn quantile_sample_has_minimal_distance() {
        for n in [10, 100, 1000] {
            let r = ks_test(&normal_scores(n), 0.05).unwrap();
            assert!((r.statistic - 0.5 / n as f64).abs() < 1e-12, "n={n} D={}", r.statistic);
            assert!(r.p_value > 0.999);
            assert!(!r.reject_h0);
        }
    }

    #[test]
    fn series_branches_agree_at_switch() {
        // both representations are exact; compare them straddling the switch point
        let alternating = |l: f64| {
            2.0 * (1..200)
                .map(|k| {
                    let kf = k as f64;
                    let s = if k % 2 == 1 { 1.0 } else { -1.0 };
                    s * (-2.0 * kf * kf * l * l).exp()
                })
                .sum::<f64>()
        };
        for l in [0.6, 0.9, 1.17, 1.19, 1.5] {
            assert!((kolmogorov_sf(l) - alternating(l)).abs() < 1e-10, "λ={l}");
        }
    }

    #[test]
    fn kolmogorov_reference_values() {
        // scipy.special.kolmogorov
        assert!((kolmogorov_sf(1.0) - 0.269_999_671_677_354_56).abs() < 1e-11);
        assert!((kolmogorov_sf(1.358_098_639_322_550_7) - 0.05).abs() < 1e-11);
        assert!((kolmogorov_sf(0.5) - 0.963_945_243_664_875_1).abs() < 1e-11);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            ks_test(&[0.0; 7], 0.05),
            Err(Error::TooFewSamples { min: 8, .. })
        ));
        let mut x = normal_scores(20);
        x[3] = f64::NAN;
        assert!(matches!(ks_test(&x, 0.05), Err(Error::NonFinite { index: 3 })));
    }

    #[test]
    fn variance_inflation_lowers_p_monotonically() {
        let base = normal_scores(500);
        let mut last = f64::INFINITY;
        for c in [1.0, 1.5, 2.0, 3.0] {
            let x: Vec<f64> = base.iter().map(|v| v * c).collect();
            let p = ks_test(&x, 0.05).unwrap().p_value;
            assert!(p <= last, "c={c} p={p} prev={last}");
            last = p;
        }
        assert!(last < 1e-6);
    }

    proptest! {
        #[test]
        fn statistic_bounds_and_permutation_invariance(
            mut x in prop::collection::vec(-5.0..5.0f64, 8..200),
            seed in any::<u64>(),
        ) {
            let n = x.len() as f64;
            let d = ks_statistic(&x);
            prop_assert!(d >= 0.5 / n - 1e-15 && d <= 1.0);
            // deterministic shuffle
            let mut s = seed;
            for i in (1..x.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                x.swap(i, (s >> 33) as usize % (i + 1));
            }
            prop_assert_eq!(ks_statistic(&x), d);
            let r = ks_test(&x, 0.05).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.p_value));
            prop_assert_eq!(r.reject_h0, r.p_value < 0.05);
        }
    }
}
