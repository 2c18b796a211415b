//! Inventory error-correction model, estimated per stock-day and category,
//! with base, drop and recovery coefficient blocks.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::cov::{covariance, CovKind};
use super::ols::ols;
use crate::error::Result;
use crate::flow::EcmDay;
use crate::types::{Date, TraderCategory};

/// Price-change lags beyond the contemporaneous one.
pub const PRICE_LAGS: usize = 3;

pub const BASE_BLOCK: [&str; 7] = ["const", "dy_lag1", "y_lag1", "dp0", "dp1", "dp2", "dp3"];

pub fn ecm_names() -> Vec<String> {
    let mut v: Vec<String> = BASE_BLOCK.iter().map(|s| s.to_string()).collect();
    v.extend(BASE_BLOCK.iter().map(|s| format!("drop_{s}")));
    v.extend(BASE_BLOCK.iter().map(|s| format!("recovery_{s}")));
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct EcmEstimate {
    pub stock: String,
    pub date: Date,
    pub category: TraderCategory,
    pub names: Vec<String>,
    pub coef: Vec<f64>,
    /// Heteroskedasticity-robust variances.
    pub var: Vec<f64>,
    /// Inventory never moved, so all coefficients are zero by construction.
    pub degenerate: bool,
    pub nobs: usize,
}

/// Regression of `Δy_t` on the base block and its interactions with the
/// drop and recovery indicators, for inventory path `y`.
pub fn ecm_regression(
    y: &[f64],
    log_mid: &[Option<f64>],
    drop: &[bool],
    recovery: &[bool],
) -> Result<(Vec<String>, Vec<f64>, Vec<f64>, usize, bool)> {
    let names = ecm_names();
    let first = PRICE_LAGS + 1;
    let mut data = Vec::new();
    let mut resp = Vec::new();
    for t in first.max(2)..y.len() {
        let dp: Option<Vec<f64>> = (0..=PRICE_LAGS)
            .map(|i| Some(log_mid[t - i]? - log_mid[t - i - 1]?))
            .collect();
        let Some(dp) = dp else { continue };
        let mut base = vec![1.0, y[t - 1] - y[t - 2], y[t - 1]];
        base.extend(dp);
        let d = if drop[t] { 1.0 } else { 0.0 };
        let u = if recovery[t] { 1.0 } else { 0.0 };
        data.extend(base.iter().copied());
        data.extend(base.iter().map(|v| v * d));
        data.extend(base.iter().map(|v| v * u));
        resp.push(y[t] - y[t - 1]);
    }
    let n = resp.len();
    let k = names.len();
    if resp.iter().all(|v| *v == 0.0) && y.iter().all(|v| *v == 0.0) {
        return Ok((names, vec![0.0; k], vec![0.0; k], n, true));
    }
    let x = DMatrix::from_row_slice(n, k, &data);
    let yv = DVector::from_vec(resp);
    let fit = ols(&x, &yv, &names)?;
    let cov = covariance(&fit, &x, &CovKind::Hc0)?;
    let mut coef = vec![f64::NAN; k];
    let mut var = vec![f64::NAN; k];
    for (i, &j) in fit.kept.iter().enumerate() {
        coef[j] = fit.beta[i];
        var[j] = cov[(i, i)];
    }
    Ok((names, coef, var, n, false))
}

pub fn ecm_estimate(day: &EcmDay, category: TraderCategory) -> Result<EcmEstimate> {
    let y: Vec<f64> = day.inventory.iter().map(|r| r[category.index()]).collect();
    let (names, coef, var, nobs, degenerate) = ecm_regression(&y, &day.log_mid, &day.drop, &day.recovery)?;
    Ok(EcmEstimate {
        stock: day.stock.clone(),
        date: day.date,
        category,
        names,
        coef,
        var,
        degenerate,
        nobs,
    })
}

/// Average coefficient across days with the t-statistic
/// `mean / sqrt(Σ var_d / N²)`, treating days as independent.
#[derive(Debug, Clone, PartialEq)]
pub struct EcmAverage {
    pub name: String,
    pub mean: f64,
    pub se: f64,
    pub t: f64,
    pub days: usize,
}

pub fn ecm_average(estimates: &[&EcmEstimate]) -> Vec<EcmAverage> {
    let mut acc: BTreeMap<usize, (String, f64, f64, usize)> = BTreeMap::new();
    for e in estimates.iter().filter(|e| !e.degenerate) {
        for (j, name) in e.names.iter().enumerate() {
            if e.coef[j].is_finite() && e.var[j].is_finite() {
                let a = acc.entry(j).or_insert((name.clone(), 0.0, 0.0, 0));
                a.1 += e.coef[j];
                a.2 += e.var[j];
                a.3 += 1;
            }
        }
    }
    acc.into_values()
        .map(|(name, sum, var, n)| {
            let nf = n as f64;
            let se = (var / (nf * nf)).sqrt();
            let mean = sum / nf;
            EcmAverage {
                name,
                mean,
                se,
                t: mean / se,
                days: n,
            }
        })
        .collect()
}
