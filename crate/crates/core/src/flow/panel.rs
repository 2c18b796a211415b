//! Event windows cut into 10-second intervals with flows, controls and P&L,
//! and the full-day inventory paths used by the error-correction model.

use crate::config::FeeSchedule;
use crate::detector::{EpmEvent, Phase};
use crate::error::Result;
use crate::grid::Grid;
use crate::types::{DayTape, Micros, SessionSpec, TraderCategory};

use super::descriptives::{event_descriptives, EventDescriptives};
use super::imbalance::FlowCell;
use super::impact::{price_impact, PriceImpact};
use super::pnl::event_pnl;

const N: usize = TraderCategory::COUNT;

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRecord {
    pub k: usize,
    pub t_end: Micros,
    pub phase: Phase,
    pub flow: FlowCell,
    /// Log change of the last trade price; `None` before the first trade.
    pub ret: Option<f64>,
    /// Traded value.
    pub volume: f64,
    /// Quoted spread in percent of the midquote at the interval end.
    pub spread_pct: Option<f64>,
    pub pnl: [Option<f64>; N],
    pub pnl_net: [Option<f64>; N],
}

impl IntervalRecord {
    pub fn log_volume(&self) -> f64 {
        self.volume.ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredEvent {
    pub id: usize,
    pub event: EpmEvent,
    pub intervals: Vec<IntervalRecord>,
    pub impact: Option<PriceImpact>,
    pub descriptives: EventDescriptives,
}

/// Grid of whole steps from the pre-event instant; a partial last step is
/// dropped.
pub fn event_grid(event: &EpmEvent, step_s: f64) -> Result<Grid> {
    Grid::covering(
        event.t_pre_event,
        event.t_end - event.t_pre_event,
        Micros::from_secs_f64(step_s),
    )
}

/// Phase of interval `k`, decided by its midpoint.
pub fn interval_phase(event: &EpmEvent, grid: &Grid, k: usize) -> Phase {
    let mid = Micros(grid.start(k).0 + grid.step.0 / 2);
    event.phase_of(mid).expect("grid lies inside the event window")
}

pub fn measure_event(
    id: usize,
    event: &EpmEvent,
    tape: &DayTape,
    session: &SessionSpec,
    fees: &FeeSchedule,
    step_s: f64,
) -> Result<MeasuredEvent> {
    let grid = event_grid(event, step_s)?;
    let pnl = event_pnl(tape, &grid, Some((fees, event.date)));
    let net = pnl.net.as_ref().expect("fees given");
    let price = |t| tape.last_trade_at(t).map(|tr| tr.price.ln());
    let intervals = (0..grid.len)
        .map(|k| {
            let trades = &tape.trades[tape.trade_range(grid.start(k), grid.end(k))];
            IntervalRecord {
                k,
                t_end: grid.end(k),
                phase: interval_phase(event, &grid, k),
                flow: FlowCell::from_trades(trades),
                ret: match (price(grid.start(k)), price(grid.end(k))) {
                    (Some(a), Some(b)) => Some(b - a),
                    _ => None,
                },
                volume: trades.iter().map(|t| t.volume()).sum(),
                spread_pct: tape.quote_at(grid.end(k)).map(|q| 100.0 * q.relative_spread()),
                pnl: pnl.gross[k],
                pnl_net: net[k],
            }
        })
        .collect();
    Ok(MeasuredEvent {
        id,
        event: event.clone(),
        intervals,
        impact: price_impact(event, tape),
        descriptives: event_descriptives(event, tape, session),
    })
}

/// Full-day inputs of the error-correction model for one stock-day.
#[derive(Debug, Clone, PartialEq)]
pub struct EcmDay {
    pub stock: String,
    pub date: crate::types::Date,
    /// Net inventory per category in millions, cumulated from the open, at
    /// each interval end.
    pub inventory: Vec<[f64; N]>,
    /// Log midquote at each interval end.
    pub log_mid: Vec<Option<f64>>,
    /// Interval end within `[t_start, t_trough]` of some event.
    pub drop: Vec<bool>,
    /// Interval end within `(t_trough, t_end]` of some event.
    pub recovery: Vec<bool>,
}

/// Drop and recovery indicators of `events` at each instant.
pub fn ecm_flags(instants: &[Micros], events: &[&EpmEvent]) -> (Vec<bool>, Vec<bool>) {
    instants
        .iter()
        .map(|&t| {
            (
                events.iter().any(|e| e.in_decline(t)),
                events.iter().any(|e| e.t_trough < t && t <= e.t_end),
            )
        })
        .unzip()
}

pub fn ecm_day(tape: &DayTape, events: &[&EpmEvent], grid: &Grid) -> EcmDay {
    let mut cum = FlowCell::default();
    let mut next = 0;
    let mut inventory = Vec::with_capacity(grid.len);
    let mut log_mid = Vec::with_capacity(grid.len);
    let instants: Vec<Micros> = grid.instants().collect();
    let (drop, recovery) = ecm_flags(&instants, events);
    for &t in &instants {
        while next < tape.trades.len() && tape.trades[next].ts <= t {
            cum.add(&tape.trades[next]);
            next += 1;
        }
        let mut y = [0.0; N];
        for c in TraderCategory::ALL {
            y[c.index()] = cum.ti(c) / 1e6;
        }
        inventory.push(y);
        log_mid.push(tape.quote_at(t).map(|q| q.midpoint().ln()));
    }
    let key = tape.key();
    EcmDay {
        stock: key.stock.clone(),
        date: key.date,
        inventory,
        log_mid,
        drop,
        recovery,
    }
}
