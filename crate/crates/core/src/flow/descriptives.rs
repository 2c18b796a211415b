//! Per-event descriptive statistics and DMM rebate revenue.

use crate::config::FeeSchedule;
use crate::detector::EpmEvent;
use crate::stats::{summarize, Summary};
use crate::types::{DayTape, SessionSpec, TraderCategory};

use super::imbalance::{units_to_currency, value_units};

/// One row of the event descriptive table. Counts and volumes refer to the
/// declining part `(t_start, t_trough]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventDescriptives {
    /// Start-to-trough return, percent.
    pub return_pct: f64,
    pub duration_min: f64,
    pub duration_pct: f64,
    pub trades: usize,
    pub trades_pct: f64,
    /// Traded value in thousands.
    pub volume_k: f64,
    pub volume_pct: f64,
    /// Signed traded value in thousands.
    pub signed_volume_k: f64,
    /// Signed value relative to the absolute signed value of the whole day.
    pub signed_volume_pct: f64,
}

fn pct(part: f64, whole: f64) -> f64 {
    if whole == 0.0 {
        0.0
    } else {
        100.0 * part / whole
    }
}

pub fn event_descriptives(event: &EpmEvent, tape: &DayTape, session: &SessionSpec) -> EventDescriptives {
    let range = tape.trade_range(event.t_start, event.t_trough);
    let ev = &tape.trades[range];
    let day_vol: f64 = tape.trades.iter().map(|t| t.volume()).sum();
    let day_signed: f64 = tape.trades.iter().map(|t| t.signed_volume()).sum();
    let vol: f64 = ev.iter().map(|t| t.volume()).sum();
    let signed: f64 = ev.iter().map(|t| t.signed_volume()).sum();
    let price = |t| tape.last_trade_at(t).map(|tr| tr.price);
    let return_pct = match (price(event.t_start), price(event.t_trough)) {
        (Some(a), Some(b)) => 100.0 * (b / a - 1.0),
        _ => 0.0,
    };
    let day_s = session.length_s() as f64;
    EventDescriptives {
        return_pct,
        duration_min: event.tau_s() / 60.0,
        duration_pct: pct(event.tau_s(), day_s),
        trades: ev.len(),
        trades_pct: pct(ev.len() as f64, tape.trades.len() as f64),
        volume_k: vol / 1e3,
        volume_pct: pct(vol, day_vol),
        signed_volume_k: signed / 1e3,
        signed_volume_pct: pct(signed, day_signed.abs()),
    }
}

/// Column names and summaries of a set of descriptive rows.
pub fn summarize_descriptives(rows: &[EventDescriptives]) -> Vec<(&'static str, Option<Summary>)> {
    let col = |f: fn(&EventDescriptives) -> f64| -> Option<Summary> {
        summarize(&rows.iter().map(f).collect::<Vec<_>>())
    };
    vec![
        ("return_pct", col(|r| r.return_pct)),
        ("duration_min", col(|r| r.duration_min)),
        ("duration_pct", col(|r| r.duration_pct)),
        ("trades", col(|r| r.trades as f64)),
        ("trades_pct", col(|r| r.trades_pct)),
        ("volume_k", col(|r| r.volume_k)),
        ("volume_pct", col(|r| r.volume_pct)),
        ("signed_volume_k", col(|r| r.signed_volume_k)),
        ("signed_volume_pct", col(|r| r.signed_volume_pct)),
    ]
}

/// Passive traded value of `cat` over the event window.
pub fn passive_volume(event: &EpmEvent, tape: &DayTape, cat: TraderCategory) -> f64 {
    let range = tape.trade_range(event.t_pre_event, event.t_end);
    let units: i64 = tape.trades[range]
        .iter()
        .filter(|t| t.passive() == cat)
        .map(value_units)
        .sum();
    units_to_currency(units)
}

/// Average rebate revenue per event of each DMM category: passive value
/// supplied during the window times the rebate in force on that date.
pub fn dmm_rebate_estimate(
    events: &[(&EpmEvent, &DayTape)],
    fees: &FeeSchedule,
) -> Vec<(TraderCategory, f64)> {
    TraderCategory::ANALYSED
        .iter()
        .filter(|c| c.is_dmm())
        .map(|&c| {
            let total: f64 = events
                .iter()
                .map(|(e, tape)| rebate_value(passive_volume(e, tape, c), fees.rebate_bps_on(e.date)))
                .sum();
            let avg = if events.is_empty() { 0.0 } else { total / events.len() as f64 };
            (c, avg)
        })
        .collect()
}

pub fn rebate_value(passive_value: f64, rebate_bps: f64) -> f64 {
    passive_value * rebate_bps * 1e-4
}
