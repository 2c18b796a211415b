//! Selling pressure: the most negative cumulative signed volume over trailing
//! windows of zero to thirty minutes, normalized by an intraday profile.

use std::collections::HashMap;

use crate::detector::{EpmEvent, EventClass};
use crate::grid::Grid;
use crate::preprocess::{periodicity_profile, PeriodicityProfile};
use crate::types::{DayKey, DayTape, Micros};

pub const MAX_WINDOW_MIN: usize = 30;

/// Signed traded value per minute of the session.
pub fn minute_signed_volume(tape: &DayTape, minutes: usize) -> Vec<f64> {
    let grid = Grid {
        origin: Micros(0),
        step: Micros::from_secs(60),
        len: minutes,
    };
    let mut out = vec![0.0; minutes];
    for t in &tape.trades {
        if let Some(m) = grid.interval_of(t.ts) {
            out[m] += t.signed_volume();
        }
    }
    out
}

/// `(min over u of Σ_{m-u..=m} sv, argmin u)` with the smallest `u` on ties.
pub fn raw_pressure(sv: &[f64], m: usize) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    let mut cum = 0.0;
    for u in 0..=MAX_WINDOW_MIN.min(m) {
        cum += sv[m - u];
        if cum < best.0 {
            best = (cum, u);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct PressurePoint {
    pub key: DayKey,
    pub minute: usize,
    pub raw: f64,
    pub u_star: usize,
    /// Normalized value; `None` where the profile is undefined.
    pub sp: Option<f64>,
}

impl PressurePoint {
    /// Seconds since open covered by `[m - u*, m]`.
    pub fn span(&self) -> (Micros, Micros) {
        (
            Micros::from_secs(60 * (self.minute - self.u_star) as i64),
            Micros::from_secs(60 * (self.minute as i64 + 1)),
        )
    }
}

/// Pressure for every minute of every day, each stock normalized by its
/// own profile across days.
pub fn selling_pressure(tapes: &[&DayTape], minutes: usize) -> Vec<PressurePoint> {
    let mut by_stock: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, t) in tapes.iter().enumerate() {
        by_stock.entry(t.key().stock.as_str()).or_default().push(i);
    }
    let raws: Vec<Vec<(f64, usize)>> = tapes
        .iter()
        .map(|t| {
            let sv = minute_signed_volume(t, minutes);
            (0..minutes).map(|m| raw_pressure(&sv, m)).collect()
        })
        .collect();
    let mut profiles: HashMap<&str, PeriodicityProfile> = HashMap::new();
    for (stock, idx) in &by_stock {
        let raw: Vec<Vec<Option<f64>>> = idx
            .iter()
            .map(|&i| raws[i].iter().map(|r| Some(r.0)).collect())
            .collect();
        profiles.insert(stock, periodicity_profile(&raw));
    }
    let mut out = Vec::with_capacity(tapes.len() * minutes);
    for (i, t) in tapes.iter().enumerate() {
        let key = t.key();
        let prof = &profiles[key.stock.as_str()];
        for (m, &(raw, u)) in raws[i].iter().enumerate() {
            out.push(PressurePoint {
                key: key.clone(),
                minute: m,
                raw,
                u_star: u,
                sp: prof.at(m).map(|g| g * raw),
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TailSet {
    NoEvent,
    Unsystematic,
    Systematic,
}

impl TailSet {
    pub fn as_str(self) -> &'static str {
        match self {
            TailSet::NoEvent => "none",
            TailSet::Unsystematic => "unsystematic",
            TailSet::Systematic => "systematic",
        }
    }
}

/// The lowest `round(N * fraction)` normalized values, each labelled by the
/// events of the same stock-day that its window overlaps (systematic first).
pub fn extract_pressure_tail<'a>(
    points: &'a [PressurePoint],
    fraction: f64,
    events: &[EpmEvent],
) -> Vec<(&'a PressurePoint, TailSet)> {
    let mut valid: Vec<&PressurePoint> = points.iter().filter(|p| p.sp.is_some()).collect();
    valid.sort_by(|a, b| {
        a.sp.unwrap()
            .total_cmp(&b.sp.unwrap())
            .then_with(|| a.key.cmp(&b.key))
            .then(a.minute.cmp(&b.minute))
    });
    let n = (valid.len() as f64 * fraction).round() as usize;
    let mut by_day: HashMap<&DayKey, Vec<&EpmEvent>> = HashMap::new();
    let keys: Vec<DayKey> = events.iter().map(EpmEvent::key).collect();
    for (k, e) in keys.iter().zip(events) {
        by_day.entry(k).or_default().push(e);
    }
    valid
        .into_iter()
        .take(n)
        .map(|p| {
            let (lo, hi) = p.span();
            let mut set = TailSet::NoEvent;
            for e in by_day.get(&p.key).into_iter().flatten() {
                if e.overlaps(lo, hi) {
                    let s = match e.class {
                        EventClass::Systematic => TailSet::Systematic,
                        EventClass::Unsystematic => TailSet::Unsystematic,
                    };
                    set = set.max(s);
                }
            }
            (p, set)
        })
        .collect()
}
