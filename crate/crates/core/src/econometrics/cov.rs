//! Heteroskedasticity- and cluster-robust coefficient covariances.
//!
//! All estimators are plain sandwiches `(X'X)^{-1} M (X'X)^{-1}` without
//! small-sample scaling. Two-way clustering combines the one-way meats as
//! `M_A + M_B - M_{A∩B}`; if that is not positive semi-definite, negative
//! eigenvalues of the result are set to zero.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::ols::OlsFit;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum CovKind {
    /// White heteroskedasticity-robust.
    Hc0,
    /// One-way clustering on the given labels.
    Cluster(Vec<u64>),
    /// Two-way clustering on two label sets.
    TwoWay(Vec<u64>, Vec<u64>),
}

fn check_len(labels: &[u64], n: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} cluster labels for {} observations",
            labels.len(),
            n
        )));
    }
    Ok(())
}

fn distinct(labels: &[u64]) -> usize {
    let mut v = labels.to_vec();
    v.sort_unstable();
    v.dedup();
    v.len()
}

/// `Σ_g (X_g' e_g)(X_g' e_g)'` over clusters `g`.
fn cluster_meat(x: &DMatrix<f64>, e: &DVector<f64>, labels: &[u64]) -> DMatrix<f64> {
    let k = x.ncols();
    let mut scores: HashMap<u64, DVector<f64>> = HashMap::new();
    for (i, &g) in labels.iter().enumerate() {
        let s = scores.entry(g).or_insert_with(|| DVector::zeros(k));
        s.axpy(e[i], &x.row(i).transpose(), 1.0);
    }
    let mut keys: Vec<u64> = scores.keys().copied().collect();
    keys.sort_unstable();
    let mut meat = DMatrix::zeros(k, k);
    for g in keys {
        let s = &scores[&g];
        meat += s * s.transpose();
    }
    meat
}

fn hc0_meat(x: &DMatrix<f64>, e: &DVector<f64>) -> DMatrix<f64> {
    let k = x.ncols();
    let mut meat = DMatrix::zeros(k, k);
    for i in 0..x.nrows() {
        let r = x.row(i).transpose();
        meat += (&r * r.transpose()) * (e[i] * e[i]);
    }
    meat
}

/// Set negative eigenvalues of a symmetric matrix to zero.
pub fn psd_floor(m: DMatrix<f64>) -> DMatrix<f64> {
    let sym = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    if eig.eigenvalues.iter().all(|&v| v >= 0.0) {
        return sym;
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0)));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Coefficient covariance of `fit`, where `x` is the full design passed to
/// the regression.
pub fn covariance(fit: &OlsFit, x: &DMatrix<f64>, kind: &CovKind) -> Result<DMatrix<f64>> {
    let xk = fit.kept_columns(x);
    let e = &fit.residuals;
    let n = e.len();
    let bread = &fit.xtx_inv;
    let meat = match kind {
        CovKind::Hc0 => hc0_meat(&xk, e),
        CovKind::Cluster(a) => {
            check_len(a, n)?;
            cluster_meat(&xk, e, a)
        }
        CovKind::TwoWay(a, b) => {
            check_len(a, n)?;
            check_len(b, n)?;
            match (distinct(a) > 1, distinct(b) > 1) {
                (true, true) => {
                    let both: Vec<u64> = a
                        .iter()
                        .zip(b)
                        .map(|(&u, &v)| pair_label(u, v))
                        .collect();
                    let v = bread
                        * (cluster_meat(&xk, e, a) + cluster_meat(&xk, e, b)
                            - cluster_meat(&xk, e, &both))
                        * bread;
                    return Ok(psd_floor(v));
                }
                (true, false) => cluster_meat(&xk, e, a),
                (false, _) => cluster_meat(&xk, e, b),
            }
        }
    };
    Ok(bread * meat * bread)
}

fn pair_label(u: u64, v: u64) -> u64 {
    u.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ v.rotate_left(29)
}

/// Coefficient table with normal-approximation inference.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefTable {
    pub names: Vec<String>,
    pub coef: Vec<f64>,
    pub se: Vec<f64>,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
    pub nobs: usize,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub dropped: Vec<String>,
}

impl CoefTable {
    pub fn new(fit: &OlsFit, cov: &DMatrix<f64>) -> Self {
        let se: Vec<f64> = (0..fit.beta.len()).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
        let t: Vec<f64> = fit.beta.iter().zip(&se).map(|(b, s)| b / s).collect();
        let p = t.iter().map(|&z| crate::stats::normal_p_value(z)).collect();
        CoefTable {
            names: fit.names.clone(),
            coef: fit.beta.iter().copied().collect(),
            se,
            t,
            p,
            nobs: fit.nobs(),
            r_squared: fit.r_squared,
            adj_r_squared: fit.adj_r_squared,
            dropped: fit.dropped.clone(),
        }
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

#[cfg(test)]
mod tests {
    use super::super::ols::ols;
    use super::*;

    fn data() -> (DMatrix<f64>, DVector<f64>, Vec<u64>, Vec<u64>) {
        // 12 observations, deterministic, 3 firms x 4 dates
        let xs = [0.3, -1.2, 0.8, 1.5, -0.4, 0.9, -2.0, 0.1, 1.1, -0.7, 0.5, 2.2];
        let ys = [1.0, -0.5, 1.9, 2.4, 0.2, 1.1, -1.8, 0.9, 2.0, -0.1, 1.4, 3.3];
        let x = DMatrix::from_fn(12, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
        let y = DVector::from_row_slice(&ys);
        let firm = (0..12).map(|i| (i / 4) as u64).collect();
        let date = (0..12).map(|i| (i % 4) as u64).collect();
        (x, y, firm, date)
    }

    fn names() -> Vec<String> {
        vec!["const".into(), "x".into()]
    }

    #[test]
    fn hc0_matches_statsmodels() {
        let (x, y, _, _) = data();
        let fit = ols(&x, &y, &names()).unwrap();
        let v = covariance(&fit, &x, &CovKind::Hc0).unwrap();
        assert!((v[(0, 0)].sqrt() - HC0_SE[0]).abs() < 1e-10);
        assert!((v[(1, 1)].sqrt() - HC0_SE[1]).abs() < 1e-10);
    }

    #[test]
    fn cluster_matches_statsmodels() {
        let (x, y, firm, date) = data();
        let fit = ols(&x, &y, &names()).unwrap();
        let v = covariance(&fit, &x, &CovKind::Cluster(firm.clone())).unwrap();
        assert!((v[(1, 1)].sqrt() - CLUSTER_SE[1]).abs() < 1e-10);
        assert!((v[(0, 0)].sqrt() - CLUSTER_SE[0]).abs() < 1e-10);
        let v = covariance(&fit, &x, &CovKind::TwoWay(firm, date)).unwrap();
        assert!((v[(1, 1)].sqrt() - TWOWAY_SE[1]).abs() < 1e-10);
        assert!((v[(0, 0)].sqrt() - TWOWAY_SE[0]).abs() < 1e-10);
    }

    #[test]
    fn two_way_with_singleton_dimension_equals_one_way() {
        let (x, y, firm, _) = data();
        let fit = ols(&x, &y, &names()).unwrap();
        let singles: Vec<u64> = (0..12).collect();
        let a = covariance(&fit, &x, &CovKind::TwoWay(firm.clone(), singles)).unwrap();
        let b = covariance(&fit, &x, &CovKind::Cluster(firm.clone())).unwrap();
        assert!((a - &b).amax() < 1e-12);
        let c = covariance(&fit, &x, &CovKind::TwoWay(firm, vec![0; 12])).unwrap();
        assert!((c - b).amax() < 1e-12);
    }

    #[test]
    fn singleton_clusters_equal_hc0() {
        let (x, y, _, _) = data();
        let fit = ols(&x, &y, &names()).unwrap();
        let a = covariance(&fit, &x, &CovKind::Cluster((0..12).collect())).unwrap();
        let b = covariance(&fit, &x, &CovKind::Hc0).unwrap();
        assert!((a - b).amax() < 1e-12);
    }

    #[test]
    fn floor_removes_negative_eigenvalues() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let f = psd_floor(m);
        let eig = SymmetricEigen::new(f.clone());
        assert!(eig.eigenvalues.iter().all(|&v| v > -1e-12));
        assert!((f[(0, 0)] - 1.5).abs() < 1e-12 && (f[(0, 1)] - 1.5).abs() < 1e-12);
    }

    const HC0_SE: [f64; 2] = [0.060567443611960654, 0.04339278232517604];
    const CLUSTER_SE: [f64; 2] = [0.07430967449678581, 0.016037566620638946];
    const TWOWAY_SE: [f64; 2] = [0.050502702664724314, 0.04507059014736633];
}
