//! Cross-section of events: does a DMM's late-stage flow follow the flow of
//! informed traders earlier in the same event?

use nalgebra::{DMatrix, DVector};

use super::cov::{covariance, CoefTable, CovKind};
use super::ols::ols;
use crate::detector::Phase;
use crate::error::Result;
use crate::flow::{FlowCell, MeasuredEvent};
use crate::types::TraderCategory;

/// Regressor names after the constant.
pub const CROSS_REGRESSORS: [&str; 6] = [
    "own_early_intermediate",
    "IB_HFT_OWN_early_intermediate",
    "IB_CLIENT_early_intermediate",
    "log_volume",
    "spread_pct",
    "return",
];

/// One row: late-stage imbalance of `dmm` (millions) and the regressors
/// measured over the early and intermediate stages.
pub fn cross_row(m: &MeasuredEvent, dmm: TraderCategory) -> (f64, [f64; 6]) {
    let mut late = FlowCell::default();
    let mut before = FlowCell::default();
    let (mut vol, mut spread, mut n_spread, mut ret) = (0.0, 0.0, 0usize, 0.0);
    for r in &m.intervals {
        match r.phase {
            Phase::Late => late.merge(&r.flow),
            Phase::Early | Phase::Intermediate => {
                before.merge(&r.flow);
                vol += r.volume;
                if let Some(s) = r.spread_pct {
                    spread += s;
                    n_spread += 1;
                }
                ret += r.ret.unwrap_or(0.0);
            }
            _ => {}
        }
    }
    let avg_spread = if n_spread > 0 { spread / n_spread as f64 } else { 0.0 };
    (
        late.ti(dmm) / 1e6,
        [
            before.ti(dmm) / 1e6,
            before.ti(TraderCategory::IbHftOwn) / 1e6,
            before.ti(TraderCategory::IbClient) / 1e6,
            vol.ln_1p(),
            avg_spread,
            ret,
        ],
    )
}

/// OLS with a constant and heteroskedasticity-robust errors.
pub fn cross_sectional(events: &[&MeasuredEvent], dmm: TraderCategory) -> Result<CoefTable> {
    if events.len() < 10 {
        log::warn!("cross-section of {} events is small", events.len());
    }
    let rows: Vec<(f64, [f64; 6])> = events.iter().map(|m| cross_row(m, dmm)).collect();
    let x = DMatrix::from_fn(rows.len(), 7, |i, j| if j == 0 { 1.0 } else { rows[i].1[j - 1] });
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.0));
    let mut names = vec!["const".to_string()];
    names.extend(CROSS_REGRESSORS.iter().map(|s| s.to_string()));
    let fit = ols(&x, &y, &names)?;
    let cov = covariance(&fit, &x, &CovKind::Hc0)?;
    Ok(CoefTable::new(&fit, &cov))
}

/// Plain version on prepared data, used for oracle checks.
pub fn cross_sectional_rows(y: &DVector<f64>, regressors: &DMatrix<f64>) -> Result<CoefTable> {
    let n = regressors.nrows();
    let mut x = DMatrix::from_element(n, regressors.ncols() + 1, 1.0);
    x.columns_mut(1, regressors.ncols()).copy_from(regressors);
    let mut names = vec!["const".to_string()];
    names.extend((0..regressors.ncols()).map(|j| format!("x{j}")));
    let fit = ols(&x, y, &names)?;
    let cov = covariance(&fit, &x, &CovKind::Hc0)?;
    Ok(CoefTable::new(&fit, &cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn response_equal_to_regressor() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = DMatrix::from_fn(27, 3, |_, _| rng.random_range(-1.0..1.0));
        let y = x.column(1).clone_owned();
        let t = cross_sectional_rows(&y, &x).unwrap();
        assert!((t.coef[2] - 1.0).abs() < 1e-12);
        for j in [0, 1, 3] {
            assert!(t.coef[j].abs() < 1e-12);
        }
    }

    #[test]
    fn matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = DMatrix::from_fn(27, 6, |_, _| rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(27, |i, _| x.row(i).sum() * 0.5 + rng.random_range(-0.1..0.1));
        let t = cross_sectional_rows(&y, &x).unwrap();
        let mut full = DMatrix::from_element(27, 7, 1.0);
        full.columns_mut(1, 6).copy_from(&x);
        let b = (full.transpose() * &full).try_inverse().unwrap() * full.transpose() * &y;
        for j in 0..7 {
            assert!((t.coef[j] - b[j]).abs() <= 1e-8 * b[j].abs().max(1.0));
        }
    }
}
