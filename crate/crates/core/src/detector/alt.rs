//! Volatility-based alternatives: flag 10-second returns, or residuals of a
//! return autoregression, beyond the per-stock 99.9th percentile of their
//! absolute values.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};

use crate::econometrics::ols;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::stats::quantile;
use crate::types::{Date, DayKey, DayTape, Micros};

/// Own and market lags in the residual regression.
pub const RESIDUAL_LAGS: usize = 10;

/// Percentile of absolute values above which an interval is flagged.
pub const FLAG_PERCENTILE: f64 = 0.999;

/// Grid returns of one stock-day.
#[derive(Debug, Clone, PartialEq)]
pub struct GridReturns {
    pub key: DayKey,
    pub grid: Grid,
    /// Log change of the last trade price over each interval; `None` before
    /// the first trade.
    pub values: Vec<Option<f64>>,
}

impl GridReturns {
    pub fn from_tape(tape: &DayTape, grid: Grid) -> Self {
        let values = (0..grid.len)
            .map(|k| {
                let a = tape.last_trade_at(grid.start(k))?;
                let b = tape.last_trade_at(grid.end(k))?;
                Some(b.price.ln() - a.price.ln())
            })
            .collect();
        GridReturns {
            key: tape.key().clone(),
            grid,
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AltFlag {
    pub key: DayKey,
    pub interval: usize,
    /// Right edge of the flagged interval.
    pub t_end: Micros,
    /// Flagged return or residual.
    pub value: f64,
}

impl AltFlag {
    pub fn is_negative(&self) -> bool {
        self.value < 0.0
    }
}

fn flag_by_percentile(
    cells: Vec<(DayKey, usize, Micros, f64)>,
) -> Vec<AltFlag> {
    let abs: Vec<f64> = cells.iter().map(|c| c.3.abs()).collect();
    let Some(cut) = quantile(&abs, FLAG_PERCENTILE) else {
        return Vec::new();
    };
    cells
        .into_iter()
        .filter(|c| c.3.abs() >= cut)
        .map(|(key, interval, t_end, value)| AltFlag {
            key,
            interval,
            t_end,
            value,
        })
        .collect()
}

fn by_stock(panel: &[GridReturns]) -> BTreeMap<&str, Vec<&GridReturns>> {
    let mut m: BTreeMap<&str, Vec<&GridReturns>> = BTreeMap::new();
    for g in panel {
        m.entry(g.key.stock.as_str()).or_default().push(g);
    }
    for days in m.values_mut() {
        days.sort_by_key(|g| g.key.date);
    }
    m
}

/// Flags with `|r|` at or above the stock's percentile cut.
pub fn return_epm_detector(panel: &[GridReturns]) -> Vec<AltFlag> {
    let mut out = Vec::new();
    for days in by_stock(panel).into_values() {
        let cells = days
            .iter()
            .flat_map(|g| {
                g.values.iter().enumerate().filter_map(move |(k, v)| {
                    v.map(|r| (g.key.clone(), k, g.grid.end(k), r))
                })
            })
            .collect();
        out.extend(flag_by_percentile(cells));
    }
    out
}

/// Equal-weighted cross-sectional mean return per (date, interval).
pub fn market_returns(panel: &[GridReturns]) -> HashMap<Date, Vec<Option<f64>>> {
    let mut acc: HashMap<Date, Vec<(f64, usize)>> = HashMap::new();
    for g in panel {
        let row = acc
            .entry(g.key.date)
            .or_insert_with(|| vec![(0.0, 0); g.values.len()]);
        if row.len() < g.values.len() {
            row.resize(g.values.len(), (0.0, 0));
        }
        for (k, v) in g.values.iter().enumerate() {
            if let Some(r) = v {
                row[k].0 += r;
                row[k].1 += 1;
            }
        }
    }
    acc.into_iter()
        .map(|(d, row)| {
            let m = row
                .into_iter()
                .map(|(s, n)| (n > 0).then(|| s / n as f64))
                .collect();
            (d, m)
        })
        .collect()
}

/// Flags on residuals of `r_t` regressed on a constant, ten own lags and ten
/// market lags, pooled over each stock's days with lags kept within a day.
pub fn residual_epm_detector(panel: &[GridReturns]) -> Result<Vec<AltFlag>> {
    let market = market_returns(panel);
    let mut out = Vec::new();
    let p = 1 + 2 * RESIDUAL_LAGS;
    for (stock, days) in by_stock(panel) {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut ys = Vec::new();
        let mut ids = Vec::new();
        for g in days {
            let m = &market[&g.key.date];
            for k in RESIDUAL_LAGS..g.values.len() {
                let Some(y) = g.values[k] else { continue };
                let mut row = Vec::with_capacity(p);
                row.push(1.0);
                let own = (1..=RESIDUAL_LAGS).map(|l| g.values[k - l]);
                let mkt = (1..=RESIDUAL_LAGS).map(|l| m.get(k - l).copied().flatten());
                let lags: Option<Vec<f64>> = own.chain(mkt).collect();
                let Some(lags) = lags else { continue };
                row.extend(lags);
                rows.push(row);
                ys.push(y);
                ids.push((g.key.clone(), k, g.grid.end(k)));
            }
        }
        if rows.len() <= p {
            return Err(Error::TooShort {
                needed: p + 1,
                have: rows.len(),
            });
        }
        let x = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        let y = DVector::from_vec(ys);
        let mut names = vec!["const".to_string()];
        names.extend((1..=RESIDUAL_LAGS).map(|l| format!("own_lag{l}")));
        names.extend((1..=RESIDUAL_LAGS).map(|l| format!("mkt_lag{l}")));
        let fit = ols(&x, &y, &names)?;
        if !fit.dropped.is_empty() {
            log::warn!("{stock}: residual regression dropped {:?}", fit.dropped);
        }
        let cells = ids
            .into_iter()
            .zip(fit.residuals.iter())
            .map(|((key, k, t), &e)| (key, k, t, e))
            .collect();
        out.extend(flag_by_percentile(cells));
    }
    Ok(out)
}
