//! Price and return series feeding the detector and the flow metrics.

use crate::error::{Error, Result};
use crate::types::TradeEvent;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Raw,
    PreAveraged { window: usize },
}

/// Log-prices at strictly increasing instants (seconds since open).
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub times: Vec<f64>,
    pub log_prices: Vec<f64>,
    pub provenance: Provenance,
}

impl PriceSeries {
    pub fn new(times: Vec<f64>, log_prices: Vec<f64>) -> Result<Self> {
        if times.len() != log_prices.len() {
            return Err(Error::InvalidArgument(
                "times and prices differ in length".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "instants must be strictly increasing".into(),
            ));
        }
        if log_prices.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument("log-prices must be finite".into()));
        }
        Ok(PriceSeries {
            times,
            log_prices,
            provenance: Provenance::Raw,
        })
    }

    /// Transaction log-prices; trades sharing a stamp collapse to the last one.
    pub fn from_trades(trades: &[TradeEvent]) -> Self {
        let mut times: Vec<f64> = Vec::with_capacity(trades.len());
        let mut log_prices: Vec<f64> = Vec::with_capacity(trades.len());
        let mut last_ts = None;
        for t in trades {
            let lp = t.price.ln();
            if last_ts == Some(t.ts) {
                *log_prices.last_mut().unwrap() = lp;
            } else {
                times.push(t.ts.as_secs_f64());
                log_prices.push(lp);
                last_ts = Some(t.ts);
            }
        }
        PriceSeries {
            times,
            log_prices,
            provenance: Provenance::Raw,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Last log-price at or before `t`.
    pub fn price_at(&self, t: f64) -> Option<f64> {
        let n = self.times.partition_point(|&s| s <= t);
        n.checked_sub(1).map(|i| self.log_prices[i])
    }
}

/// Discretely sampled returns on `[start_i, end_i]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Returns {
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub values: Vec<f64>,
}

impl Returns {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Triangular pre-averaging weights `g(j/(k+1))`, `j = 1..=k`, normalized to
/// sum to one, with `g(x) = min(x, 1 - x)`.
pub fn preaverage_weights(window: usize) -> Vec<f64> {
    let k1 = (window + 1) as f64;
    let raw: Vec<f64> = (1..=window)
        .map(|j| {
            let x = j as f64 / k1;
            x.min(1.0 - x)
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Weighted local average of `window` consecutive log-prices, stamped at the
/// last instant of each window. Output length is `n - window + 1`.
pub fn preaverage(raw: &PriceSeries, window: usize) -> Result<PriceSeries> {
    if window == 0 {
        return Err(Error::InvalidArgument("pre-averaging window must be >= 1".into()));
    }
    let n = raw.len();
    if n < window {
        return Err(Error::TooShort {
            needed: window,
            have: n,
        });
    }
    let w = preaverage_weights(window);
    let mut times = Vec::with_capacity(n - window + 1);
    let mut log_prices = Vec::with_capacity(n - window + 1);
    for end in window - 1..n {
        let lo = end + 1 - window;
        let v: f64 = w
            .iter()
            .zip(&raw.log_prices[lo..=end])
            .map(|(a, b)| a * b)
            .sum();
        times.push(raw.times[end]);
        log_prices.push(v);
    }
    Ok(PriceSeries {
        times,
        log_prices,
        provenance: Provenance::PreAveraged { window },
    })
}

pub fn log_returns(series: &PriceSeries) -> Result<Returns> {
    if series.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            have: series.len(),
        });
    }
    let n = series.len() - 1;
    let mut out = Returns {
        start: Vec::with_capacity(n),
        end: Vec::with_capacity(n),
        values: Vec::with_capacity(n),
    };
    for i in 1..series.len() {
        out.start.push(series.times[i - 1]);
        out.end.push(series.times[i]);
        out.values.push(series.log_prices[i] - series.log_prices[i - 1]);
    }
    Ok(out)
}

/// Per-minute intraday periodicity factors for one stock.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicityProfile {
    /// `None` where no day has data or the average is exactly zero.
    pub gamma: Vec<Option<f64>>,
}

impl PeriodicityProfile {
    pub fn at(&self, minute: usize) -> Option<f64> {
        self.gamma.get(minute).copied().flatten()
    }
}

/// `gamma_m = 1 / |mean over days of raw_m|`. Scaling by the absolute mean
/// keeps the sign of the raw measure, so heavy selling stays in the left tail.
/// `raw[day][minute]` is `None` where that day has no value.
pub fn periodicity_profile(raw: &[Vec<Option<f64>>]) -> PeriodicityProfile {
    let minutes = raw.iter().map(Vec::len).max().unwrap_or(0);
    let gamma = (0..minutes)
        .map(|m| {
            let vals: Vec<f64> = raw.iter().filter_map(|d| d.get(m).copied().flatten()).collect();
            if vals.is_empty() {
                return None;
            }
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            (mean != 0.0 && mean.is_finite()).then(|| 1.0 / mean.abs())
        })
        .collect();
    PeriodicityProfile { gamma }
}
