//! Mark-to-market profit and loss per category over an event window.

use crate::config::FeeSchedule;
use crate::grid::Grid;
use crate::types::{Date, DayTape, Side, TradeEvent, TraderCategory};

const N: usize = TraderCategory::COUNT;

/// Fee (negative) or rebate (positive) on one leg of a trade, in currency.
pub fn leg_fee(fees: &FeeSchedule, date: Date, cat: TraderCategory, aggressive: bool, value: f64) -> f64 {
    let bps = if cat.is_dmm() {
        if aggressive {
            -fees.taker_bps
        } else {
            fees.rebate_bps_on(date)
        }
    } else {
        -fees.standard_bps
    };
    bps * 1e-4 * value
}

/// P&L per interval and category; `None` where no mark price exists yet.
#[derive(Debug, Clone, PartialEq)]
pub struct PnlSeries {
    pub gross: Vec<[Option<f64>; N]>,
    /// Gross P&L plus rebates minus fees, when a schedule was given.
    pub net: Option<Vec<[Option<f64>; N]>>,
    /// Inventory in shares at the end of each interval.
    pub inventory: Vec<[f64; N]>,
}

/// Inventories start at zero at the grid origin. Interval `k` earns the
/// carried inventory times the change in mark, plus each new trade marked
/// from its price to the interval's closing mark.
pub fn event_pnl(tape: &DayTape, grid: &Grid, fees: Option<(&FeeSchedule, Date)>) -> PnlSeries {
    let mut inv = [0.0; N];
    let mut mark = tape.last_trade_at(grid.origin).map(|t| t.price);
    let mut out = PnlSeries {
        gross: Vec::with_capacity(grid.len),
        net: fees.map(|_| Vec::with_capacity(grid.len)),
        inventory: Vec::with_capacity(grid.len),
    };
    for k in 0..grid.len {
        let range = tape.trade_range(grid.start(k), grid.end(k));
        let trades: &[TradeEvent] = &tape.trades[range];
        let new_mark = trades.last().map(|t| t.price).or(mark);
        let mut gross = [None; N];
        let mut net = [None; N];
        if let Some(m) = new_mark {
            let mut g = [0.0; N];
            let mut f = [0.0; N];
            if let Some(prev) = mark {
                for c in 0..N {
                    g[c] = inv[c] * (m - prev);
                }
            }
            for t in trades {
                let (b, s) = (t.buyer.index(), t.seller.index());
                let edge = t.quantity * (m - t.price);
                g[b] += edge;
                g[s] -= edge;
                inv[b] += t.quantity;
                inv[s] -= t.quantity;
                if let Some((sched, date)) = fees {
                    let v = t.volume();
                    f[b] += leg_fee(sched, date, t.buyer, t.side == Side::Buy, v);
                    f[s] += leg_fee(sched, date, t.seller, t.side == Side::Sell, v);
                }
            }
            for c in 0..N {
                gross[c] = Some(g[c]);
                net[c] = Some(g[c] + f[c]);
            }
        }
        mark = new_mark;
        out.gross.push(gross);
        if let Some(n) = out.net.as_mut() {
            n.push(net);
        }
        out.inventory.push(inv);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Micros, TraderCategory::*};

    fn tr(ts_s: i64, price: f64, q: f64, side: Side, buyer: TraderCategory, seller: TraderCategory) -> TradeEvent {
        TradeEvent {
            ts: Micros::from_secs(ts_s),
            price,
            quantity: q,
            side,
            buyer,
            seller,
        }
    }

    fn grid(n: usize) -> Grid {
        Grid {
            origin: Micros::from_secs(100),
            step: Micros::from_secs(10),
            len: n,
        }
    }

    #[test]
    fn buy_at_mark_is_flat_then_loses() {
        let tape = DayTape {
            key: None,
            trades: vec![
                tr(105, 10.0, 100.0, Side::Buy, PureHftMm, NonHftClient),
                tr(115, 9.90, 1.0, Side::Sell, NonHftOwn, NonHftClient),
            ],
            quotes: vec![],
        };
        let p = event_pnl(&tape, &grid(2), None);
        assert_eq!(p.gross[0][PureHftMm.index()], Some(0.0));
        let second = p.gross[1][PureHftMm.index()].unwrap();
        assert!((second + 10.0).abs() < 1e-9, "{second}");
        assert_eq!(p.inventory[1][PureHftMm.index()], 100.0);
    }

    #[test]
    fn no_mark_is_sentinel_and_carry_forward() {
        let tape = DayTape {
            key: None,
            trades: vec![tr(125, 10.0, 5.0, Side::Buy, IbHftMm, IbClient)],
            quotes: vec![],
        };
        let p = event_pnl(&tape, &grid(4), None);
        assert_eq!(p.gross[0][0], None);
        assert_eq!(p.gross[1][0], None);
        assert_eq!(p.gross[2][IbHftMm.index()], Some(0.0));
        assert_eq!(p.gross[3][IbHftMm.index()], Some(0.0));
    }

    #[test]
    fn fees_by_role() {
        let fees = FeeSchedule::default();
        let date = Date(20130115);
        let tape = DayTape {
            key: None,
            trades: vec![tr(105, 10.0, 1000.0, Side::Sell, IbHftMm, PureHftMm)],
            quotes: vec![],
        };
        let p = event_pnl(&tape, &grid(1), Some((&fees, date)));
        let net = p.net.unwrap();
        // passive DMM buyer earns 0.20 bps, aggressive DMM seller pays 0.30 bps
        assert!((net[0][IbHftMm.index()].unwrap() - 0.2).abs() < 1e-12);
        assert!((net[0][PureHftMm.index()].unwrap() + 0.3).abs() < 1e-12);
        assert_eq!(leg_fee(&fees, date, NonHftClient, false, 1e4), -0.55);
        assert!((leg_fee(&fees, Date(20130701), IbHftMm, false, 1e4) - 0.22).abs() < 1e-15);
    }

    #[test]
    fn gross_is_zero_sum() {
        let cats = TraderCategory::ALL;
        let trades: Vec<TradeEvent> = (0..400)
            .map(|i| {
                let price = 10.0 + ((i * 7919) % 97) as f64 * 0.001;
                let side = if i % 3 == 0 { Side::Sell } else { Side::Buy };
                tr(100 + i / 4, price, (1 + i % 13) as f64 * 10.0, side, cats[i as usize % 10], cats[(i as usize * 3 + 1) % 10])
            })
            .collect();
        let tape = DayTape { key: None, trades, quotes: vec![] };
        let p = event_pnl(&tape, &grid(10), None);
        for row in &p.gross {
            let s: f64 = row.iter().map(|v| v.unwrap()).sum();
            assert!(s.abs() < 1e-9, "{s}");
        }
    }
}
