//! CSV files passed between pipeline stages: the detected event list and the
//! metrics directory written by the measurement step.
//!
//! Times are seconds after the session open. Floating-point fields use the
//! shortest representation that reads back to the same value, so a metrics
//! directory round-trips exactly.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use csv::StringRecord;

use crate::detector::{EpmEvent, EventClass, Phase};
use crate::error::{Error, Result};
use crate::flow::{EcmDay, EventDescriptives, FlowCell, IntervalRecord, MeasuredEvent, PressurePoint, PriceImpact};
use crate::types::{Date, DayKey, Micros, TraderCategory};

const N: usize = TraderCategory::COUNT;

pub const EVENTS_HEADER: [&str; 9] = [
    "stock",
    "date",
    "t_pre_event",
    "t_start",
    "t_trough",
    "t_end",
    "tau_s",
    "trough_stat",
    "classification",
];

pub const EVENTS_FILE: &str = "events.csv";
pub const INTERVALS_FILE: &str = "intervals.csv";
pub const IMBALANCE_FILE: &str = "imbalance.csv";
pub const PNL_FILE: &str = "pnl.csv";
pub const IMPACT_FILE: &str = "impact.csv";
pub const DESCRIPTIVES_FILE: &str = "descriptives.csv";
pub const PRESSURE_FILE: &str = "pressure.csv";
pub const INVENTORY_FILE: &str = "inventory.csv";
pub const ALT_FLAGS_FILE: &str = "alt_flags.csv";
pub const ALT_CELLS_FILE: &str = "alt_cells.csv";

/// Seconds with up to six decimals, trailing zeros dropped.
pub fn fmt_secs(t: Micros) -> String {
    let (s, us) = (t.0.div_euclid(Micros::PER_SEC), t.0.rem_euclid(Micros::PER_SEC));
    if us == 0 {
        format!("{s}")
    } else {
        let frac = format!("{us:06}");
        format!("{s}.{}", frac.trim_end_matches('0'))
    }
}

pub fn parse_secs(s: &str) -> Option<Micros> {
    let v: f64 = s.trim().parse().ok()?;
    v.is_finite().then(|| Micros::from_secs_f64(v))
}

/// Finite values in shortest round-trip form, anything else empty.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Rows of a headed CSV file, addressed by column name.
pub struct Rows {
    path: PathBuf,
    cols: HashMap<String, usize>,
    recs: Vec<StringRecord>,
}

impl Rows {
    pub fn open(path: &Path) -> Result<Rows> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let cols = rdr
            .headers()?
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_string(), i))
            .collect();
        let recs = rdr.records().collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Rows {
            path: path.to_path_buf(),
            cols,
            recs,
        })
    }

    pub fn len(&self) -> usize {
        self.recs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recs.is_empty()
    }

    fn err(&self, row: usize, msg: String) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line: row as u64 + 2,
            msg,
        }
    }

    fn col(&self, name: &str) -> Result<usize> {
        self.cols
            .get(name)
            .copied()
            .ok_or_else(|| Error::Parse {
                path: self.path.clone(),
                line: 1,
                msg: format!("missing column {name:?}"),
            })
    }

    pub fn str(&self, row: usize, name: &str) -> Result<&str> {
        let c = self.col(name)?;
        Ok(self.recs[row].get(c).unwrap_or("").trim())
    }

    pub fn get<T: FromStr>(&self, row: usize, name: &str) -> Result<T> {
        let s = self.str(row, name)?;
        s.parse()
            .map_err(|_| self.err(row, format!("bad {name} value {s:?}")))
    }

    /// Empty field as `None`.
    pub fn opt_f64(&self, row: usize, name: &str) -> Result<Option<f64>> {
        let s = self.str(row, name)?;
        if s.is_empty() {
            return Ok(None);
        }
        s.parse()
            .map(Some)
            .map_err(|_| self.err(row, format!("bad {name} value {s:?}")))
    }

    pub fn secs(&self, row: usize, name: &str) -> Result<Micros> {
        let s = self.str(row, name)?;
        parse_secs(s).ok_or_else(|| self.err(row, format!("bad {name} time {s:?}")))
    }

    /// Integer micro-currency units from a currency amount.
    pub fn units(&self, row: usize, name: &str) -> Result<i64> {
        let v: f64 = self.get(row, name)?;
        Ok((v * 1e6).round() as i64)
    }
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::WriterBuilder::new().has_headers(false).from_path(path)?)
}

pub fn write_events_csv(events: &[EpmEvent], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(EVENTS_HEADER)?;
    for e in events {
        w.write_record([
            e.stock.clone(),
            e.date.to_string(),
            fmt_secs(e.t_pre_event),
            fmt_secs(e.t_start),
            fmt_secs(e.t_trough),
            fmt_secs(e.t_end),
            num(e.tau_s()),
            num(e.trough_stat),
            e.class.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_events_csv(path: &Path) -> Result<Vec<EpmEvent>> {
    let r = Rows::open(path)?;
    (0..r.len())
        .map(|i| {
            let e = EpmEvent {
                stock: r.str(i, "stock")?.to_string(),
                date: r.get(i, "date")?,
                t_pre_event: r.secs(i, "t_pre_event")?,
                t_start: r.secs(i, "t_start")?,
                t_trough: r.secs(i, "t_trough")?,
                t_end: r.secs(i, "t_end")?,
                trough_stat: r.get(i, "trough_stat")?,
                class: r.get(i, "classification")?,
            };
            if !(e.t_pre_event <= e.t_start && e.t_start < e.t_trough && e.t_trough <= e.t_end) {
                return Err(r.err(i, "event times out of order".into()));
            }
            Ok(e)
        })
        .collect()
}

fn parse_phase(s: &str) -> Option<Phase> {
    Phase::ALL.into_iter().find(|p| p.as_str() == s)
}

/// Everything the measurement step produces.
#[derive(Debug, Clone, Default)]
pub struct MetricsBundle {
    pub events: Vec<MeasuredEvent>,
    /// Pressure points with the tail set of those in the extreme tail.
    pub pressure: Vec<(PressurePoint, Option<crate::flow::TailSet>)>,
    pub inventory: Vec<InventoryDay>,
    pub alt_flags: Vec<AltInterval>,
    /// Return intervals with a defined value, per stock.
    pub alt_cells: BTreeMap<String, usize>,
}

/// Full-day inventory and midquote path of one stock-day, before any event
/// indicators are attached.
#[derive(Debug, Clone, PartialEq)]
pub struct InventoryDay {
    pub key: DayKey,
    pub instants: Vec<Micros>,
    pub inventory: Vec<[f64; N]>,
    pub log_mid: Vec<Option<f64>>,
}

impl InventoryDay {
    pub fn from_ecm(day: &EcmDay, instants: Vec<Micros>) -> Self {
        InventoryDay {
            key: DayKey::new(day.stock.clone(), day.date),
            instants,
            inventory: day.inventory.clone(),
            log_mid: day.log_mid.clone(),
        }
    }

    /// Attach drop and recovery indicators of `events` (same stock-day).
    pub fn with_events(&self, events: &[&EpmEvent]) -> EcmDay {
        let (drop, recovery) = crate::flow::panel::ecm_flags(&self.instants, events);
        EcmDay {
            stock: self.key.stock.clone(),
            date: self.key.date,
            inventory: self.inventory.clone(),
            log_mid: self.log_mid.clone(),
            drop,
            recovery,
        }
    }
}

/// One interval flagged by a volatility-based detector.
#[derive(Debug, Clone, PartialEq)]
pub struct AltInterval {
    pub detector: String,
    pub key: DayKey,
    pub lo: Micros,
    pub hi: Micros,
    pub value: f64,
}

pub fn write_metrics(dir: &Path, m: &MetricsBundle) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut open = |name: &str| -> Result<csv::Writer<fs::File>> {
        let p = dir.join(name);
        written.push(p.clone());
        writer(&p)
    };

    let evs: Vec<EpmEvent> = m.events.iter().map(|e| e.event.clone()).collect();
    write_events_csv(&evs, &dir.join(EVENTS_FILE))?;

    let mut w = open(INTERVALS_FILE)?;
    w.write_record(["event", "interval", "phase", "t_end", "return", "volume", "spread_pct"])?;
    for e in &m.events {
        for r in &e.intervals {
            w.write_record([
                e.id.to_string(),
                r.k.to_string(),
                r.phase.as_str().to_string(),
                fmt_secs(r.t_end),
                opt(r.ret),
                num(r.volume),
                opt(r.spread_pct),
            ])?;
        }
    }
    w.flush()?;

    let mut w = open(IMBALANCE_FILE)?;
    w.write_record(["event", "interval", "category", "TI", "DI", "SI"])?;
    for e in &m.events {
        for r in &e.intervals {
            for c in TraderCategory::ALL {
                w.write_record([
                    e.id.to_string(),
                    r.k.to_string(),
                    c.to_string(),
                    num(r.flow.ti(c)),
                    num(r.flow.di(c)),
                    num(r.flow.si(c)),
                ])?;
            }
        }
    }
    w.flush()?;

    let mut w = open(PNL_FILE)?;
    w.write_record(["event", "interval", "category", "pnl", "pnl_net"])?;
    for e in &m.events {
        for r in &e.intervals {
            for c in TraderCategory::ALL {
                w.write_record([
                    e.id.to_string(),
                    r.k.to_string(),
                    c.to_string(),
                    opt(r.pnl[c.index()]),
                    opt(r.pnl_net[c.index()]),
                ])?;
            }
        }
    }
    w.flush()?;

    let mut w = open(IMPACT_FILE)?;
    w.write_record(["event", "ppi", "dpi", "tpi"])?;
    for e in &m.events {
        let p = e.impact.as_ref();
        w.write_record([
            e.id.to_string(),
            opt(p.map(|p| p.ppi)),
            opt(p.map(|p| p.dpi)),
            opt(p.map(|p| p.tpi)),
        ])?;
    }
    w.flush()?;

    let mut w = open(DESCRIPTIVES_FILE)?;
    w.write_record([
        "event",
        "stock",
        "date",
        "classification",
        "return_pct",
        "duration_min",
        "duration_pct",
        "trades",
        "trades_pct",
        "volume_k",
        "volume_pct",
        "signed_volume_k",
        "signed_volume_pct",
    ])?;
    for e in &m.events {
        let d = &e.descriptives;
        w.write_record([
            e.id.to_string(),
            e.event.stock.clone(),
            e.event.date.to_string(),
            e.event.class.to_string(),
            num(d.return_pct),
            num(d.duration_min),
            num(d.duration_pct),
            d.trades.to_string(),
            num(d.trades_pct),
            num(d.volume_k),
            num(d.volume_pct),
            num(d.signed_volume_k),
            num(d.signed_volume_pct),
        ])?;
    }
    w.flush()?;

    let mut w = open(PRESSURE_FILE)?;
    w.write_record(["stock", "date", "minute", "raw", "u_star", "sp", "tail"])?;
    for (p, tail) in &m.pressure {
        w.write_record([
            p.key.stock.clone(),
            p.key.date.to_string(),
            p.minute.to_string(),
            num(p.raw),
            p.u_star.to_string(),
            opt(p.sp),
            tail.map(|t| t.as_str().to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;

    let mut w = open(INVENTORY_FILE)?;
    let mut head = vec!["stock".to_string(), "date".into(), "t_end".into(), "log_mid".into()];
    head.extend(TraderCategory::ALL.iter().map(|c| c.to_string()));
    w.write_record(&head)?;
    for d in &m.inventory {
        for (i, t) in d.instants.iter().enumerate() {
            let mut rec = vec![d.key.stock.clone(), d.key.date.to_string(), fmt_secs(*t), opt(d.log_mid[i])];
            rec.extend(d.inventory[i].iter().map(|v| num(*v)));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;

    let mut w = open(ALT_FLAGS_FILE)?;
    w.write_record(["detector", "stock", "date", "t_start", "t_end", "value"])?;
    for f in &m.alt_flags {
        w.write_record([
            f.detector.clone(),
            f.key.stock.clone(),
            f.key.date.to_string(),
            fmt_secs(f.lo),
            fmt_secs(f.hi),
            num(f.value),
        ])?;
    }
    w.flush()?;

    let mut w = open(ALT_CELLS_FILE)?;
    w.write_record(["stock", "intervals"])?;
    for (s, n) in &m.alt_cells {
        w.write_record([s.clone(), n.to_string()])?;
    }
    w.flush()?;

    written.insert(0, dir.join(EVENTS_FILE));
    Ok(written)
}

/// Rebuild the measured events of a metrics directory. Event ids are row
/// positions in its `events.csv`.
pub fn read_measured(dir: &Path) -> Result<Vec<MeasuredEvent>> {
    let events = read_events_csv(&dir.join(EVENTS_FILE))?;
    let n = events.len();
    let mut intervals: Vec<Vec<IntervalRecord>> = vec![Vec::new(); n];

    let r = Rows::open(&dir.join(INTERVALS_FILE))?;
    for i in 0..r.len() {
        let id: usize = r.get(i, "event")?;
        let k: usize = r.get(i, "interval")?;
        if id >= n || k != intervals[id].len() {
            return Err(r.err(i, format!("unexpected event {id} interval {k}")));
        }
        let phase = parse_phase(r.str(i, "phase")?).ok_or_else(|| r.err(i, "bad phase".into()))?;
        intervals[id].push(IntervalRecord {
            k,
            t_end: r.secs(i, "t_end")?,
            phase,
            flow: FlowCell::default(),
            ret: r.opt_f64(i, "return")?,
            volume: r.get(i, "volume")?,
            spread_pct: r.opt_f64(i, "spread_pct")?,
            pnl: [None; N],
            pnl_net: [None; N],
        });
    }

    let cell = |r: &Rows, i: usize, intervals: &mut Vec<Vec<IntervalRecord>>| -> Result<(usize, usize, usize)> {
        let id: usize = r.get(i, "event")?;
        let k: usize = r.get(i, "interval")?;
        let c: TraderCategory = r.get(i, "category")?;
        if id >= n || k >= intervals[id].len() {
            return Err(r.err(i, format!("unknown event {id} interval {k}")));
        }
        Ok((id, k, c.index()))
    };

    let r = Rows::open(&dir.join(IMBALANCE_FILE))?;
    for i in 0..r.len() {
        let (id, k, c) = cell(&r, i, &mut intervals)?;
        let f = &mut intervals[id][k].flow;
        f.di[c] = r.units(i, "DI")?;
        f.si[c] = r.units(i, "SI")?;
    }

    let r = Rows::open(&dir.join(PNL_FILE))?;
    for i in 0..r.len() {
        let (id, k, c) = cell(&r, i, &mut intervals)?;
        let rec = &mut intervals[id][k];
        rec.pnl[c] = r.opt_f64(i, "pnl")?;
        rec.pnl_net[c] = r.opt_f64(i, "pnl_net")?;
    }

    let mut impact: Vec<Option<PriceImpact>> = vec![None; n];
    let r = Rows::open(&dir.join(IMPACT_FILE))?;
    for i in 0..r.len() {
        let id: usize = r.get(i, "event")?;
        if id >= n {
            return Err(r.err(i, format!("unknown event {id}")));
        }
        if let (Some(ppi), Some(dpi), Some(tpi)) = (r.opt_f64(i, "ppi")?, r.opt_f64(i, "dpi")?, r.opt_f64(i, "tpi")?) {
            impact[id] = Some(PriceImpact { ppi, dpi, tpi });
        }
    }

    let mut desc: Vec<Option<EventDescriptives>> = vec![None; n];
    let r = Rows::open(&dir.join(DESCRIPTIVES_FILE))?;
    for i in 0..r.len() {
        let id: usize = r.get(i, "event")?;
        if id >= n {
            return Err(r.err(i, format!("unknown event {id}")));
        }
        desc[id] = Some(EventDescriptives {
            return_pct: r.get(i, "return_pct")?,
            duration_min: r.get(i, "duration_min")?,
            duration_pct: r.get(i, "duration_pct")?,
            trades: r.get(i, "trades")?,
            trades_pct: r.get(i, "trades_pct")?,
            volume_k: r.get(i, "volume_k")?,
            volume_pct: r.get(i, "volume_pct")?,
            signed_volume_k: r.get(i, "signed_volume_k")?,
            signed_volume_pct: r.get(i, "signed_volume_pct")?,
        });
    }

    events
        .into_iter()
        .zip(intervals)
        .zip(impact.into_iter().zip(desc))
        .enumerate()
        .map(|(id, ((event, intervals), (impact, d)))| {
            let descriptives = d.ok_or_else(|| Error::InvalidArgument(format!("event {id} has no descriptives row")))?;
            Ok(MeasuredEvent {
                id,
                event,
                intervals,
                impact,
                descriptives,
            })
        })
        .collect()
}

pub fn read_inventory(dir: &Path) -> Result<Vec<InventoryDay>> {
    let r = Rows::open(&dir.join(INVENTORY_FILE))?;
    let mut days: Vec<InventoryDay> = Vec::new();
    for i in 0..r.len() {
        let key = DayKey::new(r.str(i, "stock")?, r.get::<Date>(i, "date")?);
        if days.last().map(|d| d.key != key).unwrap_or(true) {
            days.push(InventoryDay {
                key,
                instants: Vec::new(),
                inventory: Vec::new(),
                log_mid: Vec::new(),
            });
        }
        let d = days.last_mut().expect("pushed above");
        d.instants.push(r.secs(i, "t_end")?);
        d.log_mid.push(r.opt_f64(i, "log_mid")?);
        let mut y = [0.0; N];
        for c in TraderCategory::ALL {
            y[c.index()] = r.get(i, c.as_str())?;
        }
        d.inventory.push(y);
    }
    Ok(days)
}

pub fn read_pressure(dir: &Path) -> Result<Vec<(PressurePoint, Option<crate::flow::TailSet>)>> {
    use crate::flow::TailSet;
    let r = Rows::open(&dir.join(PRESSURE_FILE))?;
    (0..r.len())
        .map(|i| {
            let tail = match r.str(i, "tail")? {
                "" => None,
                "none" => Some(TailSet::NoEvent),
                "unsystematic" => Some(TailSet::Unsystematic),
                "systematic" => Some(TailSet::Systematic),
                o => return Err(r.err(i, format!("unknown tail set {o:?}"))),
            };
            Ok((
                PressurePoint {
                    key: DayKey::new(r.str(i, "stock")?, r.get::<Date>(i, "date")?),
                    minute: r.get(i, "minute")?,
                    raw: r.get(i, "raw")?,
                    u_star: r.get(i, "u_star")?,
                    sp: r.opt_f64(i, "sp")?,
                },
                tail,
            ))
        })
        .collect()
}

pub fn read_alt(dir: &Path) -> Result<(Vec<AltInterval>, BTreeMap<String, usize>)> {
    let r = Rows::open(&dir.join(ALT_FLAGS_FILE))?;
    let flags = (0..r.len())
        .map(|i| {
            Ok(AltInterval {
                detector: r.str(i, "detector")?.to_string(),
                key: DayKey::new(r.str(i, "stock")?, r.get::<Date>(i, "date")?),
                lo: r.secs(i, "t_start")?,
                hi: r.secs(i, "t_end")?,
                value: r.get(i, "value")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let r = Rows::open(&dir.join(ALT_CELLS_FILE))?;
    let cells = (0..r.len())
        .map(|i| Ok((r.str(i, "stock")?.to_string(), r.get(i, "intervals")?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok((flags, cells))
}

pub fn read_metrics(dir: &Path) -> Result<MetricsBundle> {
    let (alt_flags, alt_cells) = read_alt(dir)?;
    Ok(MetricsBundle {
        events: read_measured(dir)?,
        pressure: read_pressure(dir)?,
        inventory: read_inventory(dir)?,
        alt_flags,
        alt_cells,
    })
}

/// Events whose class matches, keyed by stock-day.
pub fn events_by_day<'a>(events: &'a [EpmEvent], pool: Option<EventClass>) -> BTreeMap<DayKey, Vec<&'a EpmEvent>> {
    let mut m: BTreeMap<DayKey, Vec<&EpmEvent>> = BTreeMap::new();
    for e in events.iter().filter(|e| pool.map_or(true, |p| e.class == p)) {
        m.entry(e.key()).or_default().push(e);
    }
    m
}
