//! Goodness-of-fit statistics: Kolmogorov-Smirnov against a reference CDF.

use alloc::vec::Vec;

/// CDF of the unit-rate exponential distribution.
pub fn exp1_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -libm::expm1(-x)
    }
}

/// One-sample KS statistic `sup |F_n - F|` for the given reference CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs: Vec<f64> = samples.to_vec();
    xs.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut sup = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let fx = cdf(x);
        sup = sup.max((i as f64 / n - fx).abs());
        sup = sup.max(((i + 1) as f64 / n - fx).abs());
    }
    sup
}

/// Asymptotic two-sided KS p-value for statistic `d` with sample size `n`.
///
/// Uses the Kolmogorov limiting distribution of `sqrt(n) * d`, evaluated with
/// the theta-series form for small arguments and the alternating exponential
/// series otherwise.
pub fn ks_p_value(n: usize, d: f64) -> f64 {
    if n == 0 || d <= 0.0 {
        return 1.0;
    }
    let x = libm::sqrt(n as f64) * d;
    if x < 1e-3 {
        return 1.0;
    }
    let p = if x < 1.18 {
        // P(K <= x) via the Jacobi theta form; survival is its complement.
        let t = core::f64::consts::PI * core::f64::consts::PI / (8.0 * x * x);
        let cdf = libm::sqrt(2.0 * core::f64::consts::PI) / x
            * (libm::exp(-t) + libm::exp(-9.0 * t) + libm::exp(-25.0 * t) + libm::exp(-49.0 * t));
        1.0 - cdf
    } else {
        let mut sum = 0.0;
        for k in 1..=100 {
            let term = libm::exp(-2.0 * (k as f64) * (k as f64) * x * x);
            if term < 1e-18 {
                break;
            }
            sum += if k % 2 == 1 { term } else { -term };
        }
        2.0 * sum
    };
    p.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    #[test]
    fn statistic_zero_for_perfect_grid() {
        // Quantile midpoints of Exp(1) give the smallest possible statistic, 1/(2n).
        let n = 1000;
        let xs: Vec<f64> = (0..n)
            .map(|i| -libm::log(1.0 - (i as f64 + 0.5) / n as f64))
            .collect();
        let d = ks_statistic(&xs, exp1_cdf);
        assert!(d <= 0.5 / n as f64 + 1e-12, "{d}");
    }

    #[test]
    fn detects_wrong_distribution() {
        // Exp(2) samples against Exp(1): statistic should be large, p tiny.
        let mut s = Stream::new(4);
        let xs: Vec<f64> = (0..2000).map(|_| s.next_exp(2.0)).collect();
        let d = ks_statistic(&xs, exp1_cdf);
        assert!(d > 0.15, "{d}");
        assert!(ks_p_value(xs.len(), d) < 1e-6);
    }

    #[test]
    fn accepts_matching_distribution() {
        let mut s = Stream::new(6);
        let xs: Vec<f64> = (0..2000).map(|_| s.next_exp(1.0)).collect();
        let d = ks_statistic(&xs, exp1_cdf);
        assert!(ks_p_value(xs.len(), d) > 0.01, "d = {d}");
    }

    #[test]
    fn p_value_reference_points() {
        // The 5% critical value of the Kolmogorov distribution is 1.358.
        let n = 10_000;
        let d = 1.358 / libm::sqrt(n as f64);
        let p = ks_p_value(n, d);
        assert!((p - 0.05).abs() < 0.005, "{p}");
        // And the 1% point is 1.628.
        let d = 1.628 / libm::sqrt(n as f64);
        let p = ks_p_value(n, d);
        assert!((p - 0.01).abs() < 0.002, "{p}");
    }

    #[test]
    fn p_value_monotone_in_statistic() {
        let mut prev = 1.0;
        for i in 1..40 {
            let d = 0.05 * i as f64;
            let p = ks_p_value(100, d);
            assert!(p <= prev + 1e-12);
            prev = p;
        }
    }

    #[test]
    fn uniform_p_values_under_null() {
        // Across seeds, p-values should rarely fall under 0.01.
        let mut failures = 0;
        for seed in 0..200u64 {
            let mut s = Stream::new(seed);
            let xs: Vec<f64> = (0..400).map(|_| s.next_exp(1.0)).collect();
            let p = ks_p_value(xs.len(), ks_statistic(&xs, exp1_cdf));
            if p <= 0.01 {
                failures += 1;
            }
        }
        assert!(failures <= 10, "{failures} of 200 failed at the 1% level");
    }
}
