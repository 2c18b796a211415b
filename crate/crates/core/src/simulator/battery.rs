//! Monte Carlo batteries: false detections on burst-free days and power
//! against injected bursts.

use rayon::prelude::*;

use super::engine::{simulate_day, SimDay};
use super::scenario::{business_days, BurstSpec, SimScenario, StockSpec};
use crate::config::AnalysisConfig;
use crate::detector::DetectorSettings;
use crate::error::Result;
use crate::flow::identities::{check_identities, IdentityCheck};
use crate::grid::session_grid;
use crate::pipeline::segment_day;
use crate::stats::quantile;
use crate::types::Date;

/// First date of battery calendars.
pub const BATTERY_START: Date = Date(20000103);

#[derive(Debug, Clone, PartialEq)]
pub struct NullReport {
    pub stock_days: usize,
    pub events: usize,
    pub rejected: usize,
    pub events_per_1000: f64,
    /// Most negative statistic seen on each day, where defined.
    pub day_minima: Vec<f64>,
    pub identities: IdentityCheck,
}

/// One scenario per battery day, so each day gets its own seed.
fn battery_days(stock: &StockSpec, n_days: usize, seed: u64, burst: Option<&BurstSpec>) -> Result<Vec<SimScenario>> {
    Ok(business_days(BATTERY_START, n_days)?
        .into_iter()
        .map(|d| SimScenario {
            seed,
            dates: vec![d],
            stocks: vec![stock.clone()],
            bursts: burst
                .map(|b| BurstSpec {
                    stock: None,
                    date: d,
                    ..b.clone()
                })
                .into_iter()
                .collect(),
            ..SimScenario::default()
        })
        .collect())
}

fn run_day(
    scn: &SimScenario,
    settings: &DetectorSettings,
    cfg: &AnalysisConfig,
    barrier: f64,
) -> (SimDay, crate::detector::Segmentation, Option<f64>, IdentityCheck) {
    let day = simulate_day(scn, &scn.stocks[0], scn.dates[0]);
    let (minimum, seg) = match settings.day_statistic(&day.tape) {
        Some(series) => (
            series.min_stat(),
            segment_day(settings, day.tape.key(), series, barrier, cfg.merge_gap_s, false),
        ),
        None => (None, Default::default()),
    };
    let grid = session_grid(&cfg.session, cfg.grid_step_s).expect("validated session");
    let events: Vec<_> = seg.events.iter().collect();
    let ids = check_identities(&day.tape, &grid, &events);
    (day, seg, minimum, ids)
}

/// Simulate `n_days` burst-free days of `stock` and count detections at
/// `barrier`.
pub fn null_battery(
    stock: &StockSpec,
    n_days: usize,
    seed: u64,
    cfg: &AnalysisConfig,
    barrier: f64,
) -> Result<NullReport> {
    let settings = DetectorSettings::from(cfg);
    let days = battery_days(stock, n_days, seed, None)?;
    let rows: Vec<_> = days
        .par_iter()
        .map(|scn| {
            let (_, seg, minimum, ids) = run_day(scn, &settings, cfg, barrier);
            (seg.events.len(), seg.rejected.len(), minimum, ids)
        })
        .collect();
    let mut rep = NullReport {
        stock_days: n_days,
        events: 0,
        rejected: 0,
        events_per_1000: 0.0,
        day_minima: Vec::new(),
        identities: IdentityCheck::default(),
    };
    for (e, r, m, ids) in rows {
        rep.events += e;
        rep.rejected += r;
        rep.day_minima.extend(m);
        rep.identities.merge(&ids);
    }
    rep.events_per_1000 = 1000.0 * rep.events as f64 / n_days.max(1) as f64;
    Ok(rep)
}

/// Events a null battery would produce at another barrier, from its day
/// minima; a day counts once however many excursions it holds.
pub fn days_below(rep: &NullReport, barrier: f64) -> usize {
    rep.day_minima.iter().filter(|m| **m < barrier).count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerReport {
    pub stock_days: usize,
    pub detected: usize,
    pub detection_rate: f64,
    /// Detected trough minus injected `tau`, seconds.
    pub timing_errors_s: Vec<f64>,
    pub median_abs_timing_error_s: Option<f64>,
    /// Detected duration over injected duration.
    pub duration_ratios: Vec<f64>,
    /// Mean efficient-price return from onset to `tau`.
    pub mean_realized_return: f64,
    pub identities: IdentityCheck,
}

/// Inject `burst` into each of `n_days` days of `stock`. A burst counts as
/// detected when an accepted event has its trough between the onset and
/// one burst duration after `tau`.
pub fn power_battery(
    stock: &StockSpec,
    burst: &BurstSpec,
    n_days: usize,
    seed: u64,
    cfg: &AnalysisConfig,
    barrier: f64,
) -> Result<PowerReport> {
    let settings = DetectorSettings::from(cfg);
    let days = battery_days(stock, n_days, seed, Some(burst))?;
    let rows: Vec<_> = days
        .par_iter()
        .map(|scn| {
            let (day, seg, _, ids) = run_day(scn, &settings, cfg, barrier);
            let tb = &day.truth[0];
            let hit = seg
                .events
                .iter()
                .filter(|e| {
                    let t = e.t_trough.as_secs_f64();
                    tb.onset_s <= t && t <= tb.tau_s + burst.duration_s
                })
                .min_by(|a, b| a.trough_stat.total_cmp(&b.trough_stat))
                .map(|e| (e.t_trough.as_secs_f64() - tb.tau_s, e.tau_s() / burst.duration_s));
            (hit, tb.realized_return, ids)
        })
        .collect();
    let mut rep = PowerReport {
        stock_days: n_days,
        detected: 0,
        detection_rate: 0.0,
        timing_errors_s: Vec::new(),
        median_abs_timing_error_s: None,
        duration_ratios: Vec::new(),
        mean_realized_return: 0.0,
        identities: IdentityCheck::default(),
    };
    for (hit, r, ids) in rows {
        if let Some((err, ratio)) = hit {
            rep.detected += 1;
            rep.timing_errors_s.push(err);
            rep.duration_ratios.push(ratio);
        }
        rep.mean_realized_return += r / n_days as f64;
        rep.identities.merge(&ids);
    }
    rep.detection_rate = rep.detected as f64 / n_days.max(1) as f64;
    let abs: Vec<f64> = rep.timing_errors_s.iter().map(|e| e.abs()).collect();
    rep.median_abs_timing_error_s = quantile(&abs, 0.5);
    Ok(rep)
}
