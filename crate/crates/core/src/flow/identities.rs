//! Accounting identities every tape must satisfy.

use crate::detector::EpmEvent;
use crate::grid::Grid;
use crate::types::{DayTape, TraderCategory};

use super::imbalance::FlowCell;
use super::impact::price_impact;
use super::pnl::event_pnl;

/// Relative tolerance of the zero-sum P&L check, against the interval's
/// traded value plus the marked inventory value.
pub const PNL_ZERO_SUM_TOL: f64 = 1e-9;

/// Failure counts; all zero on a consistent tape.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IdentityCheck {
    pub intervals: usize,
    pub split_failures: usize,
    pub market_failures: usize,
    pub pnl_failures: usize,
    pub impact_failures: usize,
}

impl IdentityCheck {
    pub fn ok(&self) -> bool {
        self.split_failures + self.market_failures + self.pnl_failures + self.impact_failures == 0
    }

    pub fn merge(&mut self, o: &IdentityCheck) {
        self.intervals += o.intervals;
        self.split_failures += o.split_failures;
        self.market_failures += o.market_failures;
        self.pnl_failures += o.pnl_failures;
        self.impact_failures += o.impact_failures;
    }
}

/// Check `TI = DI + SI` per category, market-wide `TI = 0` and zero-sum
/// gross P&L on every interval of `grid`, and `TPI = DPI - PPI` for every
/// event.
pub fn check_identities(tape: &DayTape, grid: &Grid, events: &[&EpmEvent]) -> IdentityCheck {
    let mut out = IdentityCheck {
        intervals: grid.len,
        ..Default::default()
    };
    let pnl = event_pnl(tape, grid, None);
    let mut held = [0.0f64; TraderCategory::COUNT];
    for k in 0..grid.len {
        let trades = &tape.trades[tape.trade_range(grid.start(k), grid.end(k))];
        let cell = FlowCell::from_trades(trades);
        if TraderCategory::ALL
            .iter()
            .any(|&c| cell.ti_units(c) != cell.di[c.index()] + cell.si[c.index()])
        {
            out.split_failures += 1;
        }
        if cell.market_ti_units() != 0 {
            out.market_failures += 1;
        }
        for t in trades {
            held[t.buyer.index()] += t.quantity;
            held[t.seller.index()] += t.quantity;
        }
        if let Some(mark) = tape.last_trade_at(grid.end(k)).map(|t| t.price) {
            let g = &pnl.gross[k];
            let sum: f64 = g.iter().map(|v| v.unwrap_or(0.0)).sum();
            let scale = mark * held.iter().sum::<f64>() + trades.iter().map(|t| t.volume()).sum::<f64>();
            if sum.abs() > PNL_ZERO_SUM_TOL * scale.max(1.0) {
                out.pnl_failures += 1;
            }
        }
    }
    for e in events {
        if let Some(p) = price_impact(e, tape) {
            if p.tpi != p.dpi - p.ppi {
                out.impact_failures += 1;
            }
        }
    }
    out
}
