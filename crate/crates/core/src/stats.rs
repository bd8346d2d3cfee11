//! F distribution, nested-model F-test, and the Wilcoxon–Mann–Whitney
//! rank-sum test.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::RegressionFit;
use crate::math;

/// Smaller sample size at which the rank-sum test switches from exact
/// enumeration to the normal approximation.
pub const RANK_SUM_EXACT_BELOW: usize = 8;

const CF_MAX_ITER: usize = 500;
const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`, taking `x` and `1 − x` separately
/// so callers near `x = 1` keep full precision.
fn beta_reg_split(a: f64, b: f64, x: f64, one_minus_x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if one_minus_x <= 0.0 {
        return 1.0;
    }
    let ln_front = math::ln_gamma(a + b) - math::ln_gamma(a) - math::ln_gamma(b)
        + a * math::ln(x)
        + b * math::ln(one_minus_x);
    let front = math::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, one_minus_x) / b
    }
}

/// Regularized incomplete beta function `I_x(a, b)` for `x ∈ [0, 1]`.
pub fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    beta_reg_split(a, b, x, 1.0 - x)
}

fn check_f_args(x: f64, d1: usize, d2: usize) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::invalid(format!("F quantile must be >= 0, got {x}")));
    }
    if d1 == 0 || d2 == 0 {
        return Err(Error::invalid(format!(
            "F degrees of freedom must be positive, got ({d1}, {d2})"
        )));
    }
    Ok(())
}

/// CDF of the F(d1, d2) distribution.
pub fn f_cdf(x: f64, d1: usize, d2: usize) -> Result<f64> {
    check_f_args(x, d1, d2)?;
    if x == f64::INFINITY {
        return Ok(1.0);
    }
    let (d1, d2) = (d1 as f64, d2 as f64);
    let denom = d1 * x + d2;
    Ok(beta_reg_split(d1 / 2.0, d2 / 2.0, d1 * x / denom, d2 / denom).clamp(0.0, 1.0))
}

/// Upper tail `1 − F(x)`, evaluated directly to keep small p-values accurate.
pub fn f_sf(x: f64, d1: usize, d2: usize) -> Result<f64> {
    check_f_args(x, d1, d2)?;
    if x == f64::INFINITY {
        return Ok(0.0);
    }
    let (d1, d2) = (d1 as f64, d2 as f64);
    let denom = d1 * x + d2;
    Ok(beta_reg_split(d2 / 2.0, d1 / 2.0, d2 / denom, d1 * x / denom).clamp(0.0, 1.0))
}

/// Outcome of a nested-model F-test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FTest {
    pub f_stat: f64,
    pub p_value: f64,
    pub d1: usize,
    pub d2: usize,
    /// The full model reproduced the data to rounding precision.
    pub perfect_fit: bool,
}

/// Residual sum of squares indistinguishable from zero at this sample size.
fn is_zero_rss(rss: f64, fit: &RegressionFit) -> bool {
    let tol = fit.n_obs as f64 * f64::EPSILON;
    rss <= tol * tol * fit.y_energy
}

/// F-test of `restricted` against `full` over `n_used` shared observations.
pub fn f_test_nested(
    full: &RegressionFit,
    restricted: &RegressionFit,
    n_used: usize,
) -> Result<FTest> {
    let nested = restricted.labels.len() < full.labels.len()
        && restricted.labels.iter().all(|l| full.labels.contains(l));
    if !nested {
        return Err(Error::invalid(
            "restricted model columns are not a strict subset of the full model",
        ));
    }
    let k_full = full.n_params();
    let d1 = k_full - restricted.n_params();
    if n_used <= k_full {
        return Err(Error::invalid(format!(
            "{n_used} observations leave no residual dof for {k_full} parameters"
        )));
    }
    let d2 = n_used - k_full;
    let (rss_f, rss_r) = (full.rss, restricted.rss);
    if rss_r < rss_f - 1e-9 * rss_r.max(rss_f) {
        return Err(Error::invalid(format!(
            "restricted rss {rss_r} is below full rss {rss_f}; models are not nested"
        )));
    }

    if is_zero_rss(rss_f, full) {
        let no_gain = is_zero_rss(rss_r, restricted);
        return Ok(FTest {
            f_stat: if no_gain { 0.0 } else { f64::INFINITY },
            p_value: if no_gain { 1.0 } else { 0.0 },
            d1,
            d2,
            perfect_fit: true,
        });
    }

    let f_stat = (((rss_r - rss_f) / d1 as f64) / (rss_f / d2 as f64)).max(0.0);
    Ok(FTest {
        f_stat,
        p_value: f_sf(f_stat, d1, d2)?,
        d1,
        d2,
        perfect_fit: false,
    })
}

/// Outcome of a two-sided rank-sum test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankSumTest {
    /// Mann–Whitney U of the first sample: its rank sum minus `n_a(n_a+1)/2`.
    pub u_stat: f64,
    pub p_value: f64,
    /// Whether the p-value came from exact enumeration.
    pub exact: bool,
}

/// Doubled midranks (always integers) of the pooled sample, plus the tie-group
/// sizes.
fn doubled_midranks(pooled: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0u64; pooled.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && pooled[order[end]] == pooled[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1 ..= end, midrank * 2 = (start + 1) + end
        let twice = (start + 1 + end) as u64;
        for &i in &order[start..end] {
            ranks[i] = twice;
        }
        ties.push(end - start);
        start = end;
    }
    (ranks, ties)
}

/// Two-sided Wilcoxon–Mann–Whitney test with midranks for ties.
///
/// Exact permutation distribution (conditional on the tie pattern) when the
/// smaller sample has fewer than [`RANK_SUM_EXACT_BELOW`] values; otherwise the
/// tie-corrected normal approximation with continuity correction.
pub fn rank_sum_test(sample_a: &[f64], sample_b: &[f64]) -> Result<RankSumTest> {
    if sample_a.is_empty() || sample_b.is_empty() {
        return Err(Error::invalid("rank-sum test needs two nonempty samples"));
    }
    if sample_a.iter().chain(sample_b).any(|v| v.is_nan()) {
        return Err(Error::invalid("rank-sum samples must not contain NaN"));
    }
    let (na, nb) = (sample_a.len(), sample_b.len());
    let n = na + nb;
    let pooled: Vec<f64> = sample_a.iter().chain(sample_b).copied().collect();
    let (ranks, ties) = doubled_midranks(&pooled);

    let twice_rank_sum_a: u64 = ranks[..na].iter().sum();
    let u_stat = twice_rank_sum_a as f64 / 2.0 - (na * (na + 1)) as f64 / 2.0;

    if na.min(nb) >= RANK_SUM_EXACT_BELOW {
        let mean = (na * nb) as f64 / 2.0;
        let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum();
        let nf = n as f64;
        let var = (na * nb) as f64 / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
        let p_value = if var <= 0.0 {
            1.0
        } else {
            let z = ((u_stat - mean).abs() - 0.5).max(0.0) / math::sqrt(var);
            math::erfc(z / core::f64::consts::SQRT_2).min(1.0)
        };
        return Ok(RankSumTest {
            u_stat,
            p_value,
            exact: false,
        });
    }

    // Distribution of the smaller sample's doubled rank sum over all
    // equally likely label assignments.
    let (k, observed) = if na <= nb {
        (na, twice_rank_sum_a)
    } else {
        (nb, ranks[na..].iter().sum())
    };
    let max_sum: u64 = {
        let mut sorted = ranks.clone();
        sorted.sort_unstable();
        sorted[n - k..].iter().sum()
    };
    let width = max_sum as usize + 1;
    // counts[j * width + s]: subsets of size j with doubled rank sum s
    let mut counts = vec![0.0f64; (k + 1) * width];
    counts[0] = 1.0;
    for (item, &r) in ranks.iter().enumerate() {
        let r = r as usize;
        for j in (1..=k.min(item + 1)).rev() {
            let (lower, upper) = counts.split_at_mut(j * width);
            let prev = &lower[(j - 1) * width..];
            let cur = &mut upper[..width];
            for s in (r..width).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    let dist = &counts[k * width..];
    let total: f64 = dist.iter().sum();
    let obs = observed as usize;
    let lower: f64 = dist[..=obs].iter().sum();
    let upper: f64 = dist[obs..].iter().sum();
    let p_value = (2.0 * lower.min(upper) / total).min(1.0);
    Ok(RankSumTest {
        u_stat,
        p_value,
        exact: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{least_squares, ColumnLabel, DesignMatrix};

    #[test]
    fn f_cdf_basics() {
        assert_eq!(f_cdf(0.0, 3, 7).unwrap(), 0.0);
        assert_eq!(f_cdf(f64::INFINITY, 3, 7).unwrap(), 1.0);
        assert!(f_cdf(1e12, 3, 7).unwrap() > 1.0 - 1e-12);
        assert!(f_cdf(-1.0, 3, 7).is_err());
        assert!(f_cdf(1.0, 0, 7).is_err());
    }

    #[test]
    fn f22_closed_form() {
        // F(2,2) has CDF x / (x + 1).
        for &x in &[0.01, 0.5, 1.0, 2.0, 10.0, 123.0] {
            let got = f_cdf(x, 2, 2).unwrap();
            assert!((got - x / (x + 1.0)).abs() < 1e-13, "x={x}");
        }
        assert!((f_cdf(1.0, 2, 2).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn f_1_10_critical_value() {
        // t(10) two-sided 5% critical value 2.228139; F = t².
        let p = f_sf(2.228_138_851_986_273_5_f64.powi(2), 1, 10).unwrap();
        assert!((p - 0.05).abs() < 1e-9, "{p}");
        let p = f_sf(4.96, 1, 10).unwrap();
        assert!((p - 0.050).abs() < 5e-4, "{p}");
    }

    #[test]
    fn reciprocal_symmetry() {
        for &(d1, d2) in &[(1, 1), (2, 5), (5, 2), (10, 3), (7, 40)] {
            for &x in &[0.1, 0.7, 1.0, 3.3, 25.0] {
                let lhs = f_cdf(x, d1, d2).unwrap();
                let rhs = 1.0 - f_cdf(1.0 / x, d2, d1).unwrap();
                assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn beta_reg_symmetric_identity() {
        for &(a, b, x) in &[(0.5, 0.5, 0.3), (2.0, 3.0, 0.9), (10.0, 0.5, 0.99)] {
            let lhs = beta_reg(a, b, x);
            let rhs = 1.0 - beta_reg(b, a, 1.0 - x);
            assert!((lhs - rhs).abs() < 1e-13);
        }
    }

    fn fit_with(labels: &[ColumnLabel], cols: &[Vec<f64>], y: &[f64]) -> RegressionFit {
        let x =
            DesignMatrix::from_columns(labels.iter().copied().zip(cols.iter().cloned()).collect())
                .unwrap();
        least_squares(&x, y).unwrap()
    }

    #[test]
    fn f_test_no_improvement() {
        let n = 20;
        let y: Vec<f64> = (0..n).map(|i| ((i * 7) % 5) as f64).collect();
        let restricted = fit_with(&[ColumnLabel::Intercept], &[vec![1.0; n]], &y);
        // A superset whose extra column earned nothing: identical rss.
        let mut full = restricted.clone();
        full.labels.push(ColumnLabel::Trend);
        full.coefficients.push(0.0);
        let res = f_test_nested(&full, &restricted, n).unwrap();
        assert_eq!(res.f_stat, 0.0);
        assert_eq!(res.p_value, 1.0);
    }

    #[test]
    fn f_test_rejects_non_nested() {
        let n = 12;
        let y: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let a = fit_with(&[ColumnLabel::Intercept], &[vec![1.0; n]], &y);
        let b = fit_with(
            &[ColumnLabel::Trend],
            &[(0..n).map(|i| i as f64).collect()],
            &y,
        );
        assert!(f_test_nested(&a, &b, n).is_err());
        assert!(f_test_nested(&a, &a, n).is_err());
    }

    #[test]
    fn f_test_perfect_fit() {
        let n = 15;
        let t: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let y: Vec<f64> = t.iter().map(|v| 1.0 + 3.0 * v).collect();
        let full = fit_with(
            &[ColumnLabel::Intercept, ColumnLabel::Trend],
            &[vec![1.0; n], t.clone()],
            &y,
        );
        let restricted = fit_with(&[ColumnLabel::Intercept], &[vec![1.0; n]], &y);
        let res = f_test_nested(&full, &restricted, n).unwrap();
        assert!(res.perfect_fit);
        assert_eq!(res.p_value, 0.0);
    }

    #[test]
    fn rank_sum_complete_separation() {
        let r = rank_sum_test(&[1.0, 2.0, 3.0], &[10.0, 11.0, 12.0]).unwrap();
        assert_eq!(r.u_stat, 0.0);
        assert!(r.exact);
        assert!((r.p_value - 0.1).abs() < 1e-15);
    }

    #[test]
    fn rank_sum_identical_samples() {
        let a = [1.0, 4.0, 2.5, 9.0];
        assert!((rank_sum_test(&a, &a).unwrap().p_value - 1.0).abs() < 1e-12);
        let big: Vec<f64> = (0..20).map(|i| (i * 37 % 11) as f64).collect();
        let r = rank_sum_test(&big, &big).unwrap();
        assert!(!r.exact);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_sum_errors() {
        assert!(rank_sum_test(&[], &[1.0]).is_err());
        assert!(rank_sum_test(&[1.0], &[]).is_err());
        assert!(rank_sum_test(&[f64::NAN], &[1.0]).is_err());
    }

    #[test]
    fn rank_sum_all_tied_large() {
        let r = rank_sum_test(&[3.0; 10], &[3.0; 12]).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn rank_sum_normal_approximation_reference() {
        // 10 vs 10, no ties, complete separation: U = 0, mean 50, var 175.
        let a: Vec<f64> = (0..10).map(f64::from).collect();
        let b: Vec<f64> = (10..20).map(f64::from).collect();
        let r = rank_sum_test(&a, &b).unwrap();
        let z: f64 = (50.0 - 0.5) / 175f64.sqrt();
        let want = libm::erfc(z / core::f64::consts::SQRT_2);
        assert_eq!(r.u_stat, 0.0);
        assert!((r.p_value - want).abs() < 1e-15);
        assert!(r.p_value < 2e-4);
    }
}
