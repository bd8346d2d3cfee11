//! Design matrices and least-squares fitting.
//!
//! Fits use Householder QR with column pivoting. The numerical rank is the
//! number of diagonal entries of `R` above `max(rows, cols)·ε·|R₀₀|`; anything
//! short of full column rank is rejected rather than regularized.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// `|R₀₀| / |R_nn|` above which a fit is flagged as ill-conditioned.
pub const CONDITION_WARNING_RATIO: f64 = 1e10;

/// Semantic tag of a design-matrix column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColumnLabel {
    Intercept,
    /// Linear trend, centered over the rows of the fit.
    Trend,
    /// Driver (stimulus or source voxel) at lag `k ≥ 1`.
    StimulusLag(usize),
    /// The fitted series itself at lag `k ≥ 1`.
    AutoLag(usize),
    /// HRF-convolved stimulus regressor.
    Convolved,
    /// Free-form column, used by tests and ad hoc designs.
    Custom(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    /// Row-major.
    entries: Vec<f64>,
    labels: Vec<ColumnLabel>,
}

impl DesignMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        entries: Vec<f64>,
        labels: Vec<ColumnLabel>,
    ) -> Result<Self> {
        if cols == 0 {
            return Err(Error::invalid("design matrix needs at least one column"));
        }
        if entries.len() != rows * cols {
            return Err(Error::invalid(format!(
                "{rows}x{cols} design needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if labels.len() != cols {
            return Err(Error::invalid(format!(
                "{cols} columns but {} labels",
                labels.len()
            )));
        }
        if rows < cols {
            return Err(Error::invalid(format!(
                "{rows} observations cannot identify {cols} parameters"
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("design entries must be finite"));
        }
        Ok(Self {
            rows,
            cols,
            entries,
            labels,
        })
    }

    /// Builds a matrix from labeled columns of equal length.
    pub fn from_columns(columns: Vec<(ColumnLabel, Vec<f64>)>) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, |c| c.1.len());
        if let Some((label, c)) = columns.iter().find(|c| c.1.len() != rows) {
            return Err(Error::invalid(format!(
                "column {label:?} has {} rows, expected {rows}",
                c.len()
            )));
        }
        let mut entries = vec![0.0; rows * cols];
        for (j, (_, col)) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                entries[i * cols + j] = v;
            }
        }
        let labels = columns.into_iter().map(|c| c.0).collect();
        Self::new(rows, cols, entries, labels)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn labels(&self) -> &[ColumnLabel] {
        &self.labels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.cols + col]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// `X·β`.
    pub fn mul_vec(&self, beta: &[f64]) -> Vec<f64> {
        self.entries
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(beta).map(|(a, b)| a * b).sum())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    /// One coefficient per design column, in column order.
    pub coefficients: Vec<f64>,
    pub labels: Vec<ColumnLabel>,
    /// `Σ (y − fitted)²`.
    pub rss: f64,
    /// Observations used by the fit.
    pub n_obs: usize,
    /// `rows − cols`.
    pub dof_residual: usize,
    pub fitted: Vec<f64>,
    pub condition_warning: bool,
    /// `Σ y²`, the scale against which a zero rss is judged.
    pub y_energy: f64,
}

impl RegressionFit {
    pub fn coefficient(&self, label: ColumnLabel) -> Option<f64> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .map(|j| self.coefficients[j])
    }

    pub fn n_params(&self) -> usize {
        self.coefficients.len()
    }
}

/// Ordinary least squares `min ‖y − Xβ‖²`.
pub fn least_squares(x: &DesignMatrix, y: &[f64]) -> Result<RegressionFit> {
    let (m, n) = (x.rows, x.cols);
    if y.len() != m {
        return Err(Error::invalid(format!(
            "response has {} values, design has {m} rows",
            y.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("response values must be finite"));
    }

    let qr = PivotedQr::factor(x);
    let rank = qr.rank();
    if rank < n {
        return Err(Error::RankDeficient { rank, cols: n });
    }

    let mut qty = y.to_vec();
    qr.apply_qt(&mut qty);
    let beta_perm = qr.solve_upper(&qty[..n]);
    let mut coefficients = vec![0.0; n];
    for (k, &j) in qr.perm.iter().enumerate() {
        coefficients[j] = beta_perm[k];
    }

    let fitted = x.mul_vec(&coefficients);
    let rss = y.iter().zip(&fitted).map(|(a, b)| (a - b) * (a - b)).sum();
    let y_energy = y.iter().map(|v| v * v).sum();
    Ok(RegressionFit {
        coefficients,
        labels: x.labels.clone(),
        rss,
        n_obs: m,
        dof_residual: m - n,
        fitted,
        condition_warning: qr.condition_ratio() > CONDITION_WARNING_RATIO,
        y_energy,
    })
}

/// Compact Householder QR with column pivoting, column-major storage.
struct PivotedQr {
    m: usize,
    n: usize,
    /// Below-diagonal parts hold the Householder vectors (with implicit
    /// leading 1); upper triangle holds `R`.
    a: Vec<f64>,
    tau: Vec<f64>,
    perm: Vec<usize>,
}

impl PivotedQr {
    fn factor(x: &DesignMatrix) -> Self {
        let (m, n) = (x.rows, x.cols);
        let mut a = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                a[j * m + i] = x.entries[i * n + j];
            }
        }
        let mut tau = vec![0.0; n];
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            // Pivot on the largest remaining column norm; norms are recomputed
            // rather than downdated, which is cheap at these widths.
            let mut best = k;
            let mut best_norm = -1.0;
            for j in k..n {
                let col = &a[j * m + k..(j + 1) * m];
                let s: f64 = col.iter().map(|v| v * v).sum();
                if s > best_norm {
                    best_norm = s;
                    best = j;
                }
            }
            if best != k {
                for i in 0..m {
                    a.swap(k * m + i, best * m + i);
                }
                perm.swap(k, best);
            }

            let col = &mut a[k * m + k..(k + 1) * m];
            let alpha = col[0];
            let tail: f64 = col[1..].iter().map(|v| v * v).sum();
            if tail == 0.0 {
                tau[k] = 0.0;
                continue;
            }
            let norm = math::sqrt(alpha * alpha + tail);
            let beta = if alpha >= 0.0 { -norm } else { norm };
            let v0 = alpha - beta;
            col[1..].iter_mut().for_each(|v| *v /= v0);
            col[0] = beta;
            tau[k] = (beta - alpha) / beta;

            let (left, right) = a.split_at_mut((k + 1) * m);
            let v = &left[k * m + k..(k + 1) * m];
            for j in 0..n - k - 1 {
                let c = &mut right[j * m + k..(j + 1) * m];
                let mut dot = c[0];
                for i in 1..v.len() {
                    dot += v[i] * c[i];
                }
                dot *= tau[k];
                c[0] -= dot;
                for i in 1..v.len() {
                    c[i] -= dot * v[i];
                }
            }
        }
        Self { m, n, a, tau, perm }
    }

    fn r(&self, i: usize, j: usize) -> f64 {
        self.a[j * self.m + i]
    }

    fn rank(&self) -> usize {
        let r00 = self.r(0, 0).abs();
        if r00 == 0.0 {
            return 0;
        }
        let tol = self.m.max(self.n) as f64 * f64::EPSILON * r00;
        (0..self.n)
            .take_while(|&k| self.r(k, k).abs() > tol)
            .count()
    }

    fn condition_ratio(&self) -> f64 {
        let last = self.r(self.n - 1, self.n - 1).abs();
        self.r(0, 0).abs() / last
    }

    fn apply_qt(&self, y: &mut [f64]) {
        let m = self.m;
        for k in 0..self.n {
            if self.tau[k] == 0.0 {
                continue;
            }
            let v = &self.a[k * m + k..(k + 1) * m];
            let mut dot = y[k];
            for i in 1..v.len() {
                dot += v[i] * y[k + i];
            }
            dot *= self.tau[k];
            y[k] -= dot;
            for i in 1..v.len() {
                y[k + i] -= dot * v[i];
            }
        }
    }

    fn solve_upper(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = rhs.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.r(i, j) * x[j];
            }
            x[i] = s / self.r(i, i);
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// Independent route: form XᵀX and Xᵀy, solve by Gaussian elimination
    /// with partial pivoting.
    fn normal_equations(x: &DesignMatrix, y: &[f64]) -> Vec<f64> {
        let n = x.cols();
        let mut a = vec![vec![0.0; n + 1]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = (0..x.rows()).map(|r| x.get(r, i) * x.get(r, j)).sum();
            }
            a[i][n] = (0..x.rows()).map(|r| x.get(r, i) * y[r]).sum();
        }
        for c in 0..n {
            let p = (c..n)
                .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
                .unwrap();
            a.swap(c, p);
            for r in c + 1..n {
                let f = a[r][c] / a[c][c];
                for k in c..=n {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
        let mut beta = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| a[i][j] * beta[j]).sum();
            beta[i] = (a[i][n] - s) / a[i][i];
        }
        beta
    }

    fn intercept_trend(n: usize) -> DesignMatrix {
        DesignMatrix::from_columns(vec![
            (ColumnLabel::Intercept, vec![1.0; n]),
            (ColumnLabel::Custom(0), (1..=n).map(|t| t as f64).collect()),
        ])
        .unwrap()
    }

    #[test]
    fn noiseless_line() {
        let x = intercept_trend(10);
        let y: Vec<f64> = (1..=10).map(|t| 3.0 + 2.0 * t as f64).collect();
        let fit = least_squares(&x, &y).unwrap();
        assert!((fit.coefficients[0] - 3.0).abs() < 1e-9);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-9);
        assert!(fit.rss < 1e-9);
        assert_eq!(fit.dof_residual, 8);
    }

    #[test]
    fn zero_response() {
        let x = intercept_trend(10);
        let fit = least_squares(&x, &[0.0; 10]).unwrap();
        assert!(fit.coefficients.iter().all(|&c| c == 0.0));
        assert_eq!(fit.rss, 0.0);
    }

    #[test]
    fn matches_normal_equations_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let labels: Vec<_> = (0..3).map(ColumnLabel::Custom).collect();
        let entries: Vec<f64> = (0..36).map(|_| rng.sample(StandardNormal)).collect();
        let x = DesignMatrix::new(12, 3, entries, labels).unwrap();
        let y: Vec<f64> = (0..12).map(|_| rng.sample(StandardNormal)).collect();
        let fit = least_squares(&x, &y).unwrap();
        let oracle = normal_equations(&x, &y);
        for (a, b) in fit.coefficients.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1e-12), "{a} vs {b}");
        }
    }

    #[test]
    fn residual_orthogonal_to_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let labels: Vec<_> = (0..5).map(ColumnLabel::Custom).collect();
        let entries: Vec<f64> = (0..200).map(|_| rng.sample(StandardNormal)).collect();
        let x = DesignMatrix::new(40, 5, entries, labels).unwrap();
        let y: Vec<f64> = (0..40).map(|_| rng.random::<f64>() * 10.0).collect();
        let fit = least_squares(&x, &y).unwrap();
        let resid: Vec<f64> = y.iter().zip(&fit.fitted).map(|(a, b)| a - b).collect();
        let mut xtr = 0.0f64;
        let mut xty = 0.0f64;
        for j in 0..5 {
            let a: f64 = (0..40).map(|i| x.get(i, j) * resid[i]).sum();
            let b: f64 = (0..40).map(|i| x.get(i, j) * y[i]).sum();
            xtr += a * a;
            xty += b * b;
        }
        assert!(xtr.sqrt() <= 1e-6 * xty.sqrt() + 1e-9);
    }

    #[test]
    fn rank_deficiency_reports_rank() {
        let n = 12;
        let t: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let x = DesignMatrix::from_columns(vec![
            (ColumnLabel::Intercept, vec![1.0; n]),
            (ColumnLabel::Custom(0), t.clone()),
            (
                ColumnLabel::Custom(1),
                t.iter().map(|v| 2.0 * v + 1.0).collect(),
            ),
            (ColumnLabel::Custom(2), vec![0.0; n]),
        ])
        .unwrap();
        let err = least_squares(&x, &t).unwrap_err();
        assert_eq!(err, Error::RankDeficient { rank: 2, cols: 4 });
    }

    #[test]
    fn dimension_errors() {
        let x = intercept_trend(5);
        assert!(matches!(
            least_squares(&x, &[1.0; 4]),
            Err(Error::InvalidParameter(_))
        ));
        assert!(DesignMatrix::new(1, 2, vec![1.0, 2.0], vec![ColumnLabel::Intercept; 2]).is_err());
    }

    #[test]
    fn ill_conditioning_is_flagged() {
        let n = 30;
        let t: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let x = DesignMatrix::from_columns(vec![
            (ColumnLabel::Intercept, vec![1.0; n]),
            (
                ColumnLabel::Custom(0),
                t.iter().map(|v| 1.0 + 1e-11 * v).collect(),
            ),
        ])
        .unwrap();
        let fit = least_squares(&x, &t).unwrap();
        assert!(fit.condition_warning);
        assert!(
            !least_squares(&intercept_trend(30), &t)
                .unwrap()
                .condition_warning
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn system() -> impl Strategy<Value = (DesignMatrix, Vec<f64>, Vec<f64>)> {
            (2usize..5, 0usize..20).prop_flat_map(|(cols, extra)| {
                let rows = cols + 1 + extra;
                (
                    proptest::collection::vec(-10.0f64..10.0, rows * cols),
                    proptest::collection::vec(-10.0f64..10.0, rows),
                    proptest::collection::vec(-10.0f64..10.0, rows),
                )
                    .prop_map(move |(e, y, extra_col)| {
                        let labels = (0..cols).map(ColumnLabel::Custom).collect();
                        (
                            DesignMatrix::new(rows, cols, e, labels).unwrap(),
                            y,
                            extra_col,
                        )
                    })
            })
        }

        proptest! {
            #[test]
            fn scale_equivariance((x, y, _) in system(), c in 0.01f64..100.0) {
                let Ok(f1) = least_squares(&x, &y) else { return Ok(()) };
                let yc: Vec<f64> = y.iter().map(|v| v * c).collect();
                let f2 = least_squares(&x, &yc).unwrap();
                let scale = f1.coefficients.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                for (a, b) in f1.coefficients.iter().zip(&f2.coefficients) {
                    prop_assert!((a * c - b).abs() <= 1e-8 * scale * c);
                }
                prop_assert!((f1.rss * c * c - f2.rss).abs() <= 1e-8 * f2.y_energy);
            }

            #[test]
            fn adding_a_column_never_increases_rss((x, y, extra) in system()) {
                let Ok(small) = least_squares(&x, &y) else { return Ok(()) };
                let mut cols: Vec<(ColumnLabel, Vec<f64>)> = (0..x.cols())
                    .map(|j| (x.labels()[j], (0..x.rows()).map(|i| x.get(i, j)).collect()))
                    .collect();
                cols.push((ColumnLabel::Custom(99), extra));
                let big = DesignMatrix::from_columns(cols).unwrap();
                if let Ok(bigfit) = least_squares(&big, &y) {
                    prop_assert!(bigfit.rss <= small.rss * (1.0 + 1e-10) + 1e-12 * small.y_energy);
                }
            }
        }
    }
}
