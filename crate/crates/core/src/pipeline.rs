//! Detection and measurement over a panel of stock-days.

use rayon::prelude::*;

use std::collections::{BTreeMap, HashMap};

use crate::config::AnalysisConfig;
use crate::detector::alt::{residual_epm_detector, return_epm_detector, AltFlag, GridReturns};
use crate::detector::{
    classify_systematic, critical_value, segment_events, DetectorSettings, DriftBurstSeries, EpmEvent, EventClass,
    Segmentation,
};
use crate::econometrics::var::pool_events;
use crate::econometrics::{build_var_design, cross_sectional, ecm_average, ecm_estimate, estimate_var, Flavor};
use crate::error::{Error, Result};
use crate::flow::{ecm_day, extract_pressure_tail, measure_event, selling_pressure, MeasuredEvent};
use crate::grid::session_grid;
use crate::report::{coef_rows, ecm_rows, RegRow};
use crate::tables::{events_by_day, AltInterval, InventoryDay, MetricsBundle};
use crate::types::{DayKey, DayTape, TraderCategory};

/// Configured barrier, or the simulated one when none is fixed.
pub fn resolve_barrier(cfg: &AnalysisConfig) -> Result<f64> {
    match cfg.critical_value {
        Some(cv) => Ok(cv),
        None => critical_value(&DetectorSettings::from(cfg), cfg.confidence, cfg.cv_paths, cfg.cv_seed),
    }
}

/// Segment one stock-day. With `upward` the statistic is mirrored so that
/// upward bursts come out as events; their trough statistic keeps the
/// original (positive) sign.
pub fn detect_day(
    settings: &DetectorSettings,
    tape: &DayTape,
    barrier: f64,
    merge_gap_s: f64,
    upward: bool,
) -> Segmentation {
    match settings.day_statistic(tape) {
        Some(series) => segment_day(settings, tape.key(), series, barrier, merge_gap_s, upward),
        None => Segmentation::default(),
    }
}

/// [`detect_day`] on an already computed statistic.
pub fn segment_day(
    settings: &DetectorSettings,
    key: &DayKey,
    mut series: DriftBurstSeries,
    barrier: f64,
    merge_gap_s: f64,
    upward: bool,
) -> Segmentation {
    if upward {
        for s in series.stat.iter_mut().flatten() {
            *s = -*s;
        }
    }
    let mut seg = segment_events(&series, barrier, merge_gap_s, settings.session.length_s() as f64, key);
    if upward {
        for e in &mut seg.events {
            e.trough_stat = -e.trough_stat;
        }
        for r in &mut seg.rejected {
            r.trough_stat = -r.trough_stat;
        }
    }
    seg
}

/// Detect across all tapes in parallel, then classify. Events come out
/// sorted by date, stock and start.
pub fn detect_panel(tapes: &[DayTape], cfg: &AnalysisConfig, barrier: f64) -> Segmentation {
    let settings = DetectorSettings::from(cfg);
    let parts: Vec<Segmentation> = tapes
        .par_iter()
        .map(|t| detect_day(&settings, t, barrier, cfg.merge_gap_s, cfg.upward))
        .collect();
    let mut out = Segmentation::default();
    for p in parts {
        out.events.extend(p.events);
        out.rejected.extend(p.rejected);
    }
    out.events
        .sort_by(|a, b| (a.date, &a.stock, a.t_start).cmp(&(b.date, &b.stock, b.t_start)));
    out.rejected
        .sort_by(|a, b| (a.key.date, &a.key.stock, a.t_trough).cmp(&(b.key.date, &b.key.stock, b.t_trough)));
    classify_systematic(&mut out.events, cfg.systematic_threshold);
    out
}

/// Measure every event on its own tape; ids follow the order of `events`.
pub fn measure_panel(
    tapes: &[DayTape],
    events: &[crate::detector::EpmEvent],
    cfg: &AnalysisConfig,
) -> Result<Vec<MeasuredEvent>> {
    let find = |key: &DayKey| {
        tapes
            .iter()
            .find(|t| t.key.as_ref() == Some(key))
            .ok_or_else(|| Error::InvalidArgument(format!("no tape for event on {key}")))
    };
    events
        .par_iter()
        .enumerate()
        .map(|(id, e)| {
            let tape = find(&e.key())?;
            measure_event(id, e, tape, &cfg.session, &cfg.fees, cfg.grid_step_s)
        })
        .collect()
}

/// Every metric of the measurement step: per-event interval records,
/// selling pressure with its tail labels, full-day inventory paths of the
/// stock-days holding an event, and the volatility-based detector flags.
pub fn measure_all(tapes: &[DayTape], events: &[EpmEvent], cfg: &AnalysisConfig) -> Result<MetricsBundle> {
    let measured = measure_panel(tapes, events, cfg)?;
    let grid = session_grid(&cfg.session, cfg.grid_step_s)?;

    let refs: Vec<&DayTape> = tapes.iter().collect();
    let minutes = (cfg.session.length_s() / 60) as usize;
    let points = selling_pressure(&refs, minutes);
    let tail: HashMap<(DayKey, usize), _> = extract_pressure_tail(&points, cfg.pressure_tail, events)
        .into_iter()
        .map(|(p, set)| ((p.key.clone(), p.minute), set))
        .collect();
    let pressure = points
        .iter()
        .map(|p| {
            let t = tail.get(&(p.key.clone(), p.minute)).copied();
            (p.clone(), t)
        })
        .collect();

    let by_day = events_by_day(events, None);
    let inventory = tapes
        .par_iter()
        .filter(|t| by_day.contains_key(t.key()))
        .map(|t| InventoryDay::from_ecm(&ecm_day(t, &[], &grid), grid.instants().collect()))
        .collect();

    let panel: Vec<GridReturns> = tapes.iter().map(|t| GridReturns::from_tape(t, grid.clone())).collect();
    let mut alt_cells: BTreeMap<String, usize> = BTreeMap::new();
    for g in &panel {
        *alt_cells.entry(g.key.stock.clone()).or_default() += g.values.iter().flatten().count();
    }
    let to_interval = |detector: &str, f: AltFlag| AltInterval {
        detector: detector.to_string(),
        key: f.key,
        lo: f.t_end - grid.step,
        hi: f.t_end,
        value: f.value,
    };
    let mut alt_flags: Vec<AltInterval> = return_epm_detector(&panel)
        .into_iter()
        .map(|f| to_interval("return", f))
        .collect();
    match residual_epm_detector(&panel) {
        Ok(flags) => alt_flags.extend(flags.into_iter().map(|f| to_interval("residual", f))),
        Err(e) => log::warn!("residual detector skipped: {e}"),
    }

    Ok(MetricsBundle {
        events: measured,
        pressure,
        inventory,
        alt_flags,
        alt_cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Var(Flavor),
    Cross,
    Ecm,
}

impl std::str::FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "var" => Model::Var(Flavor::Total),
            "var-aggr" => Model::Var(Flavor::Aggressive),
            "var-pass" => Model::Var(Flavor::Passive),
            "pnl" => Model::Var(Flavor::Pnl),
            "cross" => Model::Cross,
            "ecm" => Model::Ecm,
            o => return Err(Error::InvalidArgument(format!("unknown model {o:?}"))),
        })
    }
}

/// Replace the event list of measured events by `events`, which must
/// describe the same windows in the same order (classes may differ).
pub fn reclassify(measured: &mut [MeasuredEvent], events: &[EpmEvent]) -> Result<()> {
    if measured.len() != events.len() {
        return Err(Error::InvalidArgument(format!(
            "{} events given for {} measured events",
            events.len(),
            measured.len()
        )));
    }
    for (m, e) in measured.iter_mut().zip(events) {
        let a = &m.event;
        if (&a.stock, a.date, a.t_start, a.t_trough) != (&e.stock, e.date, e.t_start, e.t_trough) {
            return Err(Error::InvalidArgument(format!("event {} does not match its metrics", m.id)));
        }
        m.event.class = e.class;
    }
    Ok(())
}

/// Estimate `model` on the events of `pool`. Rows come out per equation in
/// a fixed order.
pub fn regress(
    measured: &[MeasuredEvent],
    inventory: &[InventoryDay],
    model: Model,
    pool: EventClass,
    cfg: &AnalysisConfig,
) -> Result<Vec<RegRow>> {
    let mut rows = Vec::new();
    match model {
        Model::Var(flavor) => {
            let design = build_var_design(measured, pool, flavor, cfg.var_lags, cfg.min_duration_s)?;
            for (g, t) in estimate_var(&design)? {
                rows.extend(coef_rows(&g.label(), &t));
            }
        }
        Model::Cross => {
            let pooled = pool_events(measured, pool, cfg.min_duration_s);
            for dmm in TraderCategory::ALL.into_iter().filter(|c| c.is_dmm()) {
                rows.extend(coef_rows(dmm.as_str(), &cross_sectional(&pooled, dmm)?));
            }
        }
        Model::Ecm => {
            let evs: Vec<EpmEvent> = pool_events(measured, pool, cfg.min_duration_s)
                .into_iter()
                .map(|m| m.event.clone())
                .collect();
            let by_day = events_by_day(&evs, None);
            let days: Vec<_> = inventory
                .iter()
                .filter_map(|d| by_day.get(&d.key).map(|e| d.with_events(e)))
                .collect();
            if days.is_empty() {
                return Err(Error::InvalidArgument(format!("no inventory paths for {pool} event days")));
            }
            for cat in TraderCategory::ANALYSED {
                let est = days
                    .par_iter()
                    .map(|d| ecm_estimate(d, cat))
                    .collect::<Result<Vec<_>>>()?;
                let refs: Vec<_> = est.iter().collect();
                rows.extend(ecm_rows(cat.as_str(), &ecm_average(&refs)));
            }
        }
    }
    Ok(rows)
}
