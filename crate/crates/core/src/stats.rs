//! Small statistical helpers shared across the estimation pipeline.

use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, Normal};

use crate::error::{Error, Result};

/// Empirical quantile with linear interpolation between order statistics.
///
/// Uses the `(n+1)q` plotting position (Weibull / R type 6): the position is
/// clamped to `[1, n]`, so `q = 0` and `q = 1` return the sample minimum and
/// maximum. Input must be sorted ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    assert!((0.0..=1.0).contains(&q), "quantile level outside [0,1]");
    let n = sorted.len();
    let pos = ((n + 1) as f64 * q).clamp(1.0, n as f64);
    let lo = pos.floor() as usize - 1;
    let frac = pos - pos.floor();
    if frac == 0.0 || lo + 1 >= n {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Central empirical interval covering `level` of the sample.
///
/// Returns the `((1-level)/2, (1+level)/2)` quantiles of `values`.
pub fn central_interval(values: &[f64], level: f64) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::domain(format!(
            "empirical interval needs at least 2 values, got {}",
            values.len()
        )));
    }
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::domain(format!(
            "interval level must be in (0, 1], got {level}"
        )));
    }
    let mut sorted = values.to_vec();
    if sorted.iter().any(|v| v.is_nan()) {
        return Err(Error::domain("interval input contains NaN".to_string()));
    }
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN filtered above"));
    let lo = quantile_sorted(&sorted, (1.0 - level) / 2.0);
    let hi = quantile_sorted(&sorted, (1.0 + level) / 2.0);
    Ok((lo, hi))
}

/// Two-sided p-value for a standard-normal statistic.
pub fn normal_two_sided_p(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z.is_infinite() {
        return 0.0;
    }
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal is valid");
    2.0 * std_normal.cdf(-z.abs())
}

/// Standard-normal quantile (inverse CDF).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "normal quantile needs p in (0,1)");
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal is valid");
    std_normal.inverse_cdf(p)
}

/// Two-sided exact sign-test p-value on `(n_pos, n_neg)` sign counts.
///
/// Ties (zeros) must already be excluded. With `m = n_pos + n_neg` fair-coin
/// trials, `p = 2 * min( P(X <= min(n_pos, n_neg)), 1/2 )` capped at 1;
/// an empty comparison (`m = 0`) yields `p = 1`.
pub fn sign_test_p(n_pos: u64, n_neg: u64) -> f64 {
    let m = n_pos + n_neg;
    if m == 0 {
        return 1.0;
    }
    let k = n_pos.min(n_neg);
    let tail = binomial_half_cdf(k, m).min(0.5);
    (2.0 * tail).min(1.0)
}

/// `P(X <= k)` for `X ~ Binomial(m, 1/2)`.
///
/// For small `m` the PMF terms are dyadic rationals, so direct summation is
/// exact in floating point (e.g. one trial gives exactly 1/2); the generic
/// incomplete-beta route is only used where the leading term would
/// underflow and its ~1e-15 error is irrelevant.
fn binomial_half_cdf(k: u64, m: u64) -> f64 {
    if k >= m {
        return 1.0;
    }
    if m <= 1000 {
        let mut term = 0.5f64.powi(m as i32); // C(m,0) / 2^m
        let mut sum = term;
        for i in 0..k {
            term *= (m - i) as f64 / (i + 1) as f64;
            sum += term;
        }
        sum.min(1.0)
    } else {
        let binom = Binomial::new(0.5, m).expect("p=1/2 with m>=1 trials is valid");
        binom.cdf(k)
    }
}

/// Sample mean; empty input yields NaN.
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Logistic sigmoid.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Logit of `p` in (0, 1).
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}
