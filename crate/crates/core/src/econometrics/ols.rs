//! Least squares by column-wise Householder QR.
//!
//! Columns are orthogonalized in order. A column whose component outside the
//! span of the columns already accepted is tiny relative to its own norm is
//! dropped, so in a collinear set the later columns go first.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative residual norm below which a column counts as collinear.
pub const COLLINEAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct OlsFit {
    /// Names of the retained columns, in input order.
    pub names: Vec<String>,
    /// Input indices of the retained columns.
    pub kept: Vec<usize>,
    pub dropped: Vec<String>,
    pub beta: DVector<f64>,
    pub residuals: DVector<f64>,
    /// `(X'X)^{-1}` over the retained columns.
    pub xtx_inv: DMatrix<f64>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
}

impl OlsFit {
    pub fn nobs(&self) -> usize {
        self.residuals.len()
    }

    pub fn coef(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.beta[i])
    }

    /// Retained columns of `x`.
    pub fn kept_columns(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        x.select_columns(&self.kept)
    }
}

pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<OlsFit> {
    let (n, k) = x.shape();
    if names.len() != k {
        return Err(Error::InvalidArgument(format!(
            "{} column names for {} columns",
            names.len(),
            k
        )));
    }
    if y.len() != n {
        return Err(Error::InvalidArgument(format!(
            "response has {} rows, design has {}",
            y.len(),
            n
        )));
    }
    let mut qty = y.clone();
    let mut reflectors: Vec<(DVector<f64>, f64)> = Vec::new();
    let mut r_cols: Vec<DVector<f64>> = Vec::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..k {
        let mut c = x.column(j).clone_owned();
        let norm0 = c.norm();
        let rank = kept.len();
        for (r, (v, beta)) in reflectors.iter().enumerate() {
            apply_reflector(&mut c, r, v, *beta);
        }
        let tail = c.rows(rank, n - rank).norm();
        if norm0 == 0.0 || rank >= n || tail <= COLLINEAR_TOL * norm0 {
            dropped.push(names[j].clone());
            continue;
        }
        let (v, beta, alpha) = householder(c.rows(rank, n - rank).clone_owned());
        apply_reflector(&mut qty, rank, &v, beta);
        reflectors.push((v, beta));
        let mut col = DVector::zeros(rank + 1);
        col.rows_mut(0, rank).copy_from(&c.rows(0, rank));
        col[rank] = alpha;
        r_cols.push(col);
        kept.push(j);
    }
    let p = kept.len();
    if p == 0 {
        return Err(Error::RankDeficient(dropped));
    }
    let mut r = DMatrix::zeros(p, p);
    for (j, col) in r_cols.iter().enumerate() {
        r.view_mut((0, j), (col.len(), 1)).copy_from(col);
    }
    let rhs = qty.rows(0, p).clone_owned();
    let beta = r
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::RankDeficient(dropped.clone()))?;
    let rinv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::RankDeficient(dropped.clone()))?;
    let xtx_inv = &rinv * rinv.transpose();
    let xk = x.select_columns(&kept);
    let residuals = y - &xk * &beta;
    let ybar = y.mean();
    let tss: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let rss = residuals.norm_squared();
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { f64::NAN };
    let adj_r_squared = if n > p {
        1.0 - (1.0 - r_squared) * (n as f64 - 1.0) / (n - p) as f64
    } else {
        f64::NAN
    };
    Ok(OlsFit {
        names: kept.iter().map(|&j| names[j].clone()).collect(),
        kept,
        dropped,
        beta,
        residuals,
        xtx_inv,
        r_squared,
        adj_r_squared,
    })
}

/// Reflector `I - beta v v'` mapping `a` onto `alpha e_1`.
fn householder(a: DVector<f64>) -> (DVector<f64>, f64, f64) {
    let norm = a.norm();
    let alpha = if a[0] >= 0.0 { -norm } else { norm };
    let mut v = a;
    v[0] -= alpha;
    let vv = v.norm_squared();
    let beta = if vv > 0.0 { 2.0 / vv } else { 0.0 };
    (v, beta, alpha)
}

fn apply_reflector(c: &mut DVector<f64>, offset: usize, v: &DVector<f64>, beta: f64) {
    let mut seg = c.rows_mut(offset, v.len());
    let d = beta * v.dot(&seg);
    seg.axpy(-d, v, 1.0);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("x{i}")).collect()
    }

    fn random_design(n: usize, k: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, k, |_, j| if j == 0 { 1.0 } else { rng.random_range(-1.0..1.0) });
        let y = DVector::from_fn(n, |i, _| x.row(i).sum() + rng.random_range(-0.5..0.5));
        (x, y)
    }

    #[test]
    fn matches_normal_equations() {
        let (x, y) = random_design(200, 6, 7);
        let fit = ols(&x, &y, &names(6)).unwrap();
        let xtx = x.transpose() * &x;
        let inv = xtx.clone().try_inverse().unwrap();
        let b = &inv * x.transpose() * &y;
        assert!((&fit.beta - &b).amax() < 1e-12);
        assert!((&fit.xtx_inv - &inv).amax() < 1e-12);
        assert!(fit.dropped.is_empty());
        // residuals are orthogonal to the design
        assert!((x.transpose() * &fit.residuals).amax() < 1e-10);
    }

    #[test]
    fn later_collinear_column_dropped() {
        let (x0, y) = random_design(50, 3, 9);
        let mut x = DMatrix::zeros(50, 4);
        x.columns_mut(0, 3).copy_from(&x0);
        let combo = x0.column(1) * 2.0 - x0.column(2);
        x.set_column(3, &combo);
        let fit = ols(&x, &y, &names(4)).unwrap();
        assert_eq!(fit.dropped, vec!["x3".to_string()]);
        assert_eq!(fit.kept, vec![0, 1, 2]);
        let reference = ols(&x0, &y, &names(3)).unwrap();
        assert!((&fit.beta - &reference.beta).amax() < 1e-12);
    }

    #[test]
    fn dummy_trap_drops_intercept_copy() {
        // two exhaustive dummies then an intercept
        let n = 10;
        let x = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => (i < 5) as u8 as f64,
            1 => (i >= 5) as u8 as f64,
            _ => 1.0,
        });
        let y = DVector::from_fn(n, |i, _| if i < 5 { 1.0 } else { 3.0 });
        let fit = ols(&x, &y, &names(3)).unwrap();
        assert_eq!(fit.dropped, vec!["x2".to_string()]);
        assert!((fit.beta[0] - 1.0).abs() < 1e-12 && (fit.beta[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn all_zero_design_is_rank_deficient() {
        let x = DMatrix::zeros(5, 2);
        let y = DVector::from_element(5, 1.0);
        assert!(matches!(ols(&x, &y, &names(2)), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn exact_fit_recovers_coefficients() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DVector::from_row_slice(&[1.0, 3.0, 5.0, 7.0]);
        let fit = ols(&x, &y, &names(2)).unwrap();
        assert!((fit.beta[0] - 1.0).abs() < 1e-14 && (fit.beta[1] - 2.0).abs() < 1e-14);
        assert!((fit.r_squared - 1.0).abs() < 1e-14);
    }
}
