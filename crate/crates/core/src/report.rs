//! Table- and figure-shaped outputs assembled from a metrics directory and
//! a directory of regression tables. Everything here is a pure function of
//! its inputs and writes rows in a fixed order.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::detector::{EpmEvent, EventClass, Phase};
use crate::econometrics::var::Group;
use crate::econometrics::{CoefTable, EcmAverage};
use crate::error::{Error, Result};
use crate::flow::descriptives::summarize_descriptives;
use crate::flow::{MeasuredEvent, PressurePoint, TailSet};
use crate::stats::{normal_p_value, stars, std_dev};
use crate::tables::{self, num, opt, AltInterval, Rows};
use crate::types::Micros;

pub const HIST_BINS: usize = 21;
/// Half-width of the histogram span in standard deviations.
pub const HIST_SPAN_SD: f64 = 4.0;

pub const POOLS: [(&str, Option<EventClass>); 3] = [
    ("all", None),
    ("unsystematic", Some(EventClass::Unsystematic)),
    ("systematic", Some(EventClass::Systematic)),
];

fn in_pool(m: &MeasuredEvent, pool: Option<EventClass>) -> bool {
    pool.map_or(true, |p| m.event.class == p)
}

fn pct2(part: f64, whole: f64) -> String {
    if whole == 0.0 {
        "0.00".into()
    } else {
        format!("{:.2}", 100.0 * part / whole)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapRow {
    pub detector: String,
    pub stocks: usize,
    pub flagged: usize,
    pub flagged_per_stock: f64,
    /// Percent of defined return intervals.
    pub flagged_pct: f64,
    pub negative: usize,
    pub db_events: usize,
    /// Events with a negative flag inside their declining part.
    pub overlapping: usize,
    pub overlapping_pct: f64,
}

/// Flag counts of each alternative detector and how many drift-burst events
/// contain at least one of its negative flags within `[t_start, t_trough]`.
/// Flags cover `(lo, hi]`.
pub fn overlap_table(
    db_events: &[EpmEvent],
    flags: &[AltInterval],
    cells: &BTreeMap<String, usize>,
    detectors: &[&str],
) -> Vec<OverlapRow> {
    let stocks = cells.len();
    let total_cells: usize = cells.values().sum();
    detectors
        .iter()
        .map(|&d| {
            let mine: Vec<&AltInterval> = flags.iter().filter(|f| f.detector == d).collect();
            let negative = mine.iter().filter(|f| f.value < 0.0).count();
            let overlapping = db_events
                .iter()
                .filter(|e| {
                    mine.iter().any(|f| {
                        f.value < 0.0
                            && f.key.stock == e.stock
                            && f.key.date == e.date
                            && f.lo < e.t_trough
                            && f.hi >= e.t_start
                    })
                })
                .count();
            let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { 100.0 * a as f64 / b as f64 };
            OverlapRow {
                detector: d.to_string(),
                stocks,
                flagged: mine.len(),
                flagged_per_stock: if stocks == 0 { 0.0 } else { mine.len() as f64 / stocks as f64 },
                flagged_pct: ratio(mine.len(), total_cells),
                negative,
                db_events: db_events.len(),
                overlapping,
                overlapping_pct: ratio(overlapping, db_events.len()),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub group: Group,
    /// Minutes from the start of the decline on the average-duration clock.
    pub minute: f64,
    pub mean_cum_ti: f64,
}

/// Cumulative imbalance of one group at `t`, interpolated linearly between
/// interval ends and starting from zero at the pre-event instant.
fn cum_at(m: &MeasuredEvent, group: Group, t: Micros) -> f64 {
    let mut prev_t = m.event.t_pre_event;
    let mut prev_v = 0.0;
    for r in &m.intervals {
        let v = prev_v + crate::econometrics::var::response(r, group, crate::econometrics::Flavor::Total).unwrap_or(0.0);
        if t <= r.t_end {
            if t <= prev_t {
                return prev_v;
            }
            let w = (t.0 - prev_t.0) as f64 / (r.t_end.0 - prev_t.0) as f64;
            return prev_v + w * (v - prev_v);
        }
        prev_t = r.t_end;
        prev_v = v;
    }
    prev_v
}

/// Mean cumulative imbalance per group on a common clock: event time is
/// rescaled so that every decline lasts `mean_duration_s`, and the window
/// from two durations before the start to four after is sampled every
/// `step_s` of average time.
pub fn curve_data(events: &[&MeasuredEvent], mean_duration_s: f64, step_s: f64) -> Vec<CurvePoint> {
    if events.is_empty() || !(mean_duration_s > 0.0) || !(step_s > 0.0) {
        return Vec::new();
    }
    let n = (6.0 * mean_duration_s / step_s).round().max(1.0) as usize;
    let mut out = Vec::with_capacity((n + 1) * Group::all().len());
    for group in Group::all() {
        for j in 0..=n {
            let x = -2.0 * mean_duration_s + j as f64 * 6.0 * mean_duration_s / n as f64;
            let mean = events
                .iter()
                .map(|m| {
                    let t = m.event.t_start.0 as f64 + x * m.event.tau_s() / mean_duration_s * 1e6;
                    cum_at(m, group, Micros(t.round() as i64))
                })
                .sum::<f64>()
                / events.len() as f64;
            out.push(CurvePoint {
                group,
                minute: x / 60.0,
                mean_cum_ti: mean,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistBin {
    pub stage: Phase,
    pub group: Group,
    pub bin: usize,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

pub fn bin_edges() -> Vec<f64> {
    let w = 2.0 * HIST_SPAN_SD / HIST_BINS as f64;
    (0..=HIST_BINS).map(|i| -HIST_SPAN_SD + i as f64 * w).collect()
}

/// Bin of a standardized value; values beyond the span go to the edge bins.
pub fn bin_of(z: f64) -> usize {
    let w = 2.0 * HIST_SPAN_SD / HIST_BINS as f64;
    (((z + HIST_SPAN_SD) / w).floor().max(0.0) as usize).min(HIST_BINS - 1)
}

/// Imbalance changes over consecutive one-minute blocks lying wholly inside
/// one stage, per (stage, group).
pub fn minute_changes(m: &MeasuredEvent, step_s: f64) -> Vec<(Phase, Group, f64)> {
    let per = ((60.0 / step_s).round() as usize).max(1);
    let mut out = Vec::new();
    for stage in Phase::ALL {
        let ks: Vec<usize> = m
            .intervals
            .iter()
            .filter(|r| r.phase == stage)
            .map(|r| r.k)
            .collect();
        for block in ks.chunks_exact(per) {
            for group in Group::all() {
                let d = block
                    .iter()
                    .map(|&k| {
                        crate::econometrics::var::response(&m.intervals[k], group, crate::econometrics::Flavor::Total)
                            .unwrap_or(0.0)
                    })
                    .sum();
                out.push((stage, group, d));
            }
        }
    }
    out
}

/// Histograms of one-minute imbalance changes per stage and group. Each
/// change is divided by the standard deviation of all changes of the same
/// stock and group in `events`, then binned on shared edges.
pub fn histogram_data(events: &[&MeasuredEvent], step_s: f64) -> Vec<HistBin> {
    let changes: Vec<(&str, Phase, Group, f64)> = events
        .iter()
        .flat_map(|m| {
            minute_changes(m, step_s)
                .into_iter()
                .map(move |(p, g, d)| (m.event.stock.as_str(), p, g, d))
        })
        .collect();
    let mut by: BTreeMap<(&str, Group), Vec<f64>> = BTreeMap::new();
    for (s, _, g, d) in &changes {
        by.entry((s, *g)).or_default().push(*d);
    }
    let sd: BTreeMap<(&str, Group), f64> = by
        .into_iter()
        .filter_map(|(k, v)| std_dev(&v).filter(|s| *s > 0.0).map(|s| (k, s)))
        .collect();
    let mut counts: BTreeMap<(Phase, Group), [usize; HIST_BINS]> = BTreeMap::new();
    for stage in Phase::ALL {
        for g in Group::all() {
            counts.insert((stage, g), [0; HIST_BINS]);
        }
    }
    for (s, p, g, d) in changes {
        if let Some(sd) = sd.get(&(s, g)) {
            counts.get_mut(&(p, g)).expect("all cells seeded")[bin_of(d / sd)] += 1;
        }
    }
    let edges = bin_edges();
    counts
        .into_iter()
        .flat_map(|((stage, group), c)| {
            let edges = edges.clone();
            (0..HIST_BINS).map(move |b| HistBin {
                stage,
                group,
                bin: b,
                lo: edges[b],
                hi: edges[b + 1],
                count: c[b],
            })
        })
        .collect()
}

/// Normalized pressure of every minute, divided by its stock's standard
/// deviation and binned on the shared edges.
pub fn pressure_histogram(points: &[&PressurePoint]) -> [usize; HIST_BINS] {
    let mut by: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for p in points {
        if let Some(v) = p.sp {
            by.entry(p.key.stock.as_str()).or_default().push(v);
        }
    }
    let mut counts = [0; HIST_BINS];
    for v in by.values() {
        if let Some(sd) = std_dev(v).filter(|s| *s > 0.0) {
            for x in v {
                counts[bin_of(x / sd)] += 1;
            }
        }
    }
    counts
}

/// One coefficient row of a regression output file.
#[derive(Debug, Clone, PartialEq)]
pub struct RegRow {
    pub equation: String,
    pub term: String,
    pub coef: Option<f64>,
    pub se: Option<f64>,
    pub t: Option<f64>,
    pub p: Option<f64>,
    pub adj_r_squared: Option<f64>,
    pub nobs: usize,
}

pub const REGRESSION_HEADER: [&str; 9] = ["equation", "term", "coef", "se", "t", "p", "stars", "adj_r_squared", "nobs"];

pub fn coef_rows(equation: &str, t: &CoefTable) -> Vec<RegRow> {
    let fin = |v: f64| v.is_finite().then_some(v);
    t.names
        .iter()
        .enumerate()
        .map(|(i, n)| RegRow {
            equation: equation.to_string(),
            term: n.clone(),
            coef: fin(t.coef[i]),
            se: fin(t.se[i]),
            t: fin(t.t[i]),
            p: fin(t.p[i]),
            adj_r_squared: fin(t.adj_r_squared),
            nobs: t.nobs,
        })
        .collect()
}

/// Averaged error-correction coefficients; `nobs` counts days.
pub fn ecm_rows(equation: &str, avg: &[EcmAverage]) -> Vec<RegRow> {
    let fin = |v: f64| v.is_finite().then_some(v);
    avg.iter()
        .map(|a| RegRow {
            equation: equation.to_string(),
            term: a.name.clone(),
            coef: fin(a.mean),
            se: fin(a.se),
            t: fin(a.t),
            p: fin(a.t).map(normal_p_value),
            adj_r_squared: None,
            nobs: a.days,
        })
        .collect()
}

pub fn write_regression_csv(rows: &[RegRow], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(REGRESSION_HEADER)?;
    for r in rows {
        w.write_record([
            r.equation.clone(),
            r.term.clone(),
            opt(r.coef),
            opt(r.se),
            opt(r.t),
            opt(r.p),
            r.p.map(stars).unwrap_or("").to_string(),
            opt(r.adj_r_squared),
            r.nobs.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_regression_csv(path: &Path) -> Result<Vec<RegRow>> {
    let r = Rows::open(path)?;
    (0..r.len())
        .map(|i| {
            Ok(RegRow {
                equation: r.str(i, "equation")?.to_string(),
                term: r.str(i, "term")?.to_string(),
                coef: r.opt_f64(i, "coef")?,
                se: r.opt_f64(i, "se")?,
                t: r.opt_f64(i, "t")?,
                p: r.opt_f64(i, "p")?,
                adj_r_squared: r.opt_f64(i, "adj_r_squared")?,
                nobs: r.get(i, "nobs")?,
            })
        })
        .collect()
}

/// Terms down, equations across: each term takes a coefficient line with
/// stars and a line with its t-statistic in parentheses; adjusted R² and
/// the observation count close the table.
pub fn format_regression(rows: &[RegRow]) -> Vec<Vec<String>> {
    let mut equations: Vec<&str> = Vec::new();
    let mut terms: Vec<&str> = Vec::new();
    for r in rows {
        if !equations.contains(&r.equation.as_str()) {
            equations.push(&r.equation);
        }
        if !terms.contains(&r.term.as_str()) {
            terms.push(&r.term);
        }
    }
    let find = |e: &str, t: &str| rows.iter().find(|r| r.equation == e && r.term == t);
    let mut out = vec![std::iter::once("term".to_string())
        .chain(equations.iter().map(|e| e.to_string()))
        .collect::<Vec<_>>()];
    for t in &terms {
        let mut c = vec![t.to_string()];
        let mut s = vec![String::new()];
        for e in &equations {
            match find(e, t) {
                Some(r) => {
                    c.push(match r.coef {
                        Some(v) => format!("{v:.3}{}", r.p.map(stars).unwrap_or("")),
                        None => String::new(),
                    });
                    s.push(r.t.map(|v| format!("({v:.2})")).unwrap_or_default());
                }
                None => {
                    c.push(String::new());
                    s.push(String::new());
                }
            }
        }
        out.push(c);
        out.push(s);
    }
    let first = |e: &str| rows.iter().find(|r| r.equation == e);
    let mut adj = vec!["adj_r_squared".to_string()];
    let mut nobs = vec!["nobs".to_string()];
    for e in &equations {
        let r = first(e);
        adj.push(r.and_then(|r| r.adj_r_squared).map(|v| format!("{v:.3}")).unwrap_or_default());
        nobs.push(r.map(|r| r.nobs.to_string()).unwrap_or_default());
    }
    out.push(adj);
    out.push(nobs);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact {
    pub file: String,
    pub kind: String,
    pub rows: usize,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub events: usize,
    pub grid_step_s: f64,
    pub artifacts: Vec<Artifact>,
}

struct Out<'a> {
    dir: &'a Path,
    artifacts: Vec<Artifact>,
}

impl Out<'_> {
    fn write(&mut self, file: &str, kind: &str, rows: Vec<Vec<String>>) -> Result<()> {
        let path = self.dir.join(file);
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(&path)?;
        for r in &rows {
            w.write_record(r)?;
        }
        w.flush()?;
        drop(w);
        self.artifacts.push(Artifact {
            file: file.to_string(),
            kind: kind.to_string(),
            rows: rows.len().saturating_sub(1),
            bytes: fs::metadata(&path)?.len(),
        });
        Ok(())
    }
}

fn row<const K: usize>(v: [&str; K]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Interval length of the measured events, from consecutive interval ends.
pub fn grid_step_s(events: &[MeasuredEvent]) -> Option<f64> {
    events
        .iter()
        .find(|m| m.intervals.len() >= 2)
        .map(|m| (m.intervals[1].t_end - m.intervals[0].t_end).as_secs_f64())
}

/// Regression tables found in `dir`, sorted by file name.
pub fn regression_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    v.sort();
    Ok(v)
}

/// Build every report artifact from `metrics` and the regression tables in
/// `regress_dir` (if given) into `out_dir`, and write `manifest.json`.
pub fn write_report(metrics: &Path, regress_dir: Option<&Path>, out_dir: &Path) -> Result<Manifest> {
    let bundle = tables::read_metrics(metrics)?;
    fs::create_dir_all(out_dir)?;
    let events = &bundle.events;
    let step = grid_step_s(events).unwrap_or(10.0);
    let mut out = Out {
        dir: out_dir,
        artifacts: Vec::new(),
    };

    let mut rows = vec![row(["pool", "statistic", "events"])];
    let cols: Vec<&str> = summarize_descriptives(&[]).into_iter().map(|c| c.0).collect();
    rows[0].extend(cols.iter().map(|c| c.to_string()));
    for (name, pool) in POOLS {
        let d: Vec<_> = events
            .iter()
            .filter(|m| in_pool(m, pool))
            .map(|m| m.descriptives.clone())
            .collect();
        let summ = summarize_descriptives(&d);
        for (stat, f) in [
            ("mean", (|s: &crate::stats::Summary| s.mean) as fn(&crate::stats::Summary) -> f64),
            ("std", |s| s.std),
            ("min", |s| s.min),
            ("q10", |s| s.q10),
            ("median", |s| s.median),
            ("q90", |s| s.q90),
            ("max", |s| s.max),
        ] {
            let mut r = row([name, stat]);
            r.push(d.len().to_string());
            r.extend(summ.iter().map(|(_, s)| s.as_ref().map(|s| format!("{:.2}", f(s))).unwrap_or_default()));
            rows.push(r);
        }
    }
    out.write("descriptives_table.csv", "descriptives", rows)?;

    let db: Vec<EpmEvent> = events.iter().map(|m| m.event.clone()).collect();
    let ov = overlap_table(&db, &bundle.alt_flags, &bundle.alt_cells, &["return", "residual"]);
    let mut rows = vec![row([
        "detector",
        "stocks",
        "flagged",
        "flagged_per_stock",
        "flagged_pct",
        "negative",
        "db_events",
        "overlapping",
        "overlapping_pct",
    ])];
    let total_cells: usize = bundle.alt_cells.values().sum();
    for o in &ov {
        rows.push(vec![
            o.detector.clone(),
            o.stocks.to_string(),
            o.flagged.to_string(),
            format!("{:.2}", o.flagged_per_stock),
            pct2(o.flagged as f64, total_cells as f64),
            o.negative.to_string(),
            o.db_events.to_string(),
            o.overlapping.to_string(),
            pct2(o.overlapping as f64, o.db_events as f64),
        ]);
    }
    out.write("overlap_table.csv", "overlap", rows)?;

    for (name, pool) in &POOLS[1..] {
        let pooled: Vec<&MeasuredEvent> = events.iter().filter(|m| in_pool(m, *pool)).collect();
        let mean_tau = if pooled.is_empty() {
            0.0
        } else {
            pooled.iter().map(|m| m.event.tau_s()).sum::<f64>() / pooled.len() as f64
        };
        let mut rows = vec![row(["group", "minute", "mean_cum_ti"])];
        for c in curve_data(&pooled, mean_tau, step) {
            rows.push(vec![c.group.label(), num(c.minute), num(c.mean_cum_ti)]);
        }
        out.write(&format!("curves_{name}.csv"), "curve", rows)?;

        let mut rows = vec![row(["stage", "group", "bin", "lo", "hi", "count"])];
        if !pooled.is_empty() {
            for b in histogram_data(&pooled, step) {
                rows.push(vec![
                    b.stage.as_str().to_string(),
                    b.group.label(),
                    b.bin.to_string(),
                    num(b.lo),
                    num(b.hi),
                    b.count.to_string(),
                ]);
            }
        }
        out.write(&format!("imbalance_hist_{name}.csv"), "histogram", rows)?;
    }

    let points: Vec<&PressurePoint> = bundle.pressure.iter().map(|p| &p.0).collect();
    let counts = pressure_histogram(&points);
    let edges = bin_edges();
    let mut rows = vec![row(["bin", "lo", "hi", "count"])];
    for (b, c) in counts.iter().enumerate() {
        rows.push(vec![b.to_string(), num(edges[b]), num(edges[b + 1]), c.to_string()]);
    }
    out.write("pressure_hist.csv", "histogram", rows)?;

    let mut win: BTreeMap<(TailSet, usize), usize> = BTreeMap::new();
    for (p, t) in &bundle.pressure {
        if let Some(t) = t {
            *win.entry((*t, p.u_star)).or_default() += 1;
        }
    }
    let mut rows = vec![row(["set", "u_star", "count"])];
    for ((t, u), c) in win {
        rows.push(vec![t.as_str().to_string(), u.to_string(), c.to_string()]);
    }
    out.write("pressure_tail.csv", "pressure_tail", rows)?;

    if let Some(dir) = regress_dir {
        for p in regression_files(dir)? {
            let stem = p
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| Error::InvalidArgument(format!("bad table name {}", p.display())))?;
            let reg = read_regression_csv(&p)?;
            out.write(&format!("table_{stem}.csv"), "regression", format_regression(&reg))?;
        }
    }

    let manifest = Manifest {
        events: events.len(),
        grid_step_s: step,
        artifacts: out.artifacts,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    fs::write(out_dir.join("manifest.json"), json + "\n")?;
    Ok(manifest)
}
