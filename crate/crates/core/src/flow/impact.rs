//! Permanent, downward and transient price impact of an event.

use crate::detector::EpmEvent;
use crate::types::DayTape;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceImpact {
    pub ppi: f64,
    pub dpi: f64,
    pub tpi: f64,
}

/// Log-price changes from the pre-event instant to the end (permanent) and
/// to the trough (downward); transient is their difference. `None` when no
/// trade precedes the pre-event instant.
pub fn price_impact(event: &EpmEvent, tape: &DayTape) -> Option<PriceImpact> {
    let p = |t| tape.last_trade_at(t).map(|tr| tr.price.ln());
    let p0 = p(event.t_pre_event)?;
    let ppi = p(event.t_end)? - p0;
    let dpi = p(event.t_trough)? - p0;
    Some(PriceImpact {
        ppi,
        dpi,
        tpi: dpi - ppi,
    })
}
