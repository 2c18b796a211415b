//! Turning sub-barrier dips of the statistic into dated events.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::kernel::DriftBurstSeries;
use crate::error::Error;
use crate::types::{Date, DayKey, Micros};

/// Level whose last upward crossing before the trough marks the event start.
pub const START_LEVEL: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventClass {
    Systematic,
    Unsystematic,
}

impl EventClass {
    pub fn as_str(self) -> &'static str {
        match self {
            EventClass::Systematic => "systematic",
            EventClass::Unsystematic => "unsystematic",
        }
    }
}

impl fmt::Display for EventClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim() {
            "systematic" => Ok(EventClass::Systematic),
            "unsystematic" => Ok(EventClass::Unsystematic),
            o => Err(Error::InvalidArgument(format!("unknown event class {o:?}"))),
        }
    }
}

/// Stage of an event window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    PreEvent,
    Early,
    Intermediate,
    Late,
    Recovery,
}

impl Phase {
    pub const ALL: [Phase; 5] = [
        Phase::PreEvent,
        Phase::Early,
        Phase::Intermediate,
        Phase::Late,
        Phase::Recovery,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::PreEvent => "pre_event",
            Phase::Early => "early",
            Phase::Intermediate => "intermediate",
            Phase::Late => "late",
            Phase::Recovery => "recovery",
        }
    }

    /// Early, intermediate and late stages of the price decline.
    pub fn is_decline(self) -> bool {
        matches!(self, Phase::Early | Phase::Intermediate | Phase::Late)
    }
}

/// One detected extreme price movement.
#[derive(Debug, Clone, PartialEq)]
pub struct EpmEvent {
    pub stock: String,
    pub date: Date,
    pub t_pre_event: Micros,
    pub t_start: Micros,
    pub t_trough: Micros,
    pub t_end: Micros,
    pub trough_stat: f64,
    pub class: EventClass,
}

impl EpmEvent {
    pub fn key(&self) -> DayKey {
        DayKey::new(self.stock.clone(), self.date)
    }

    pub fn tau(&self) -> Micros {
        self.t_trough - self.t_start
    }

    pub fn tau_s(&self) -> f64 {
        self.tau().as_secs_f64()
    }

    /// Ends of the early and intermediate stages.
    pub fn stage_bounds(&self) -> (Micros, Micros) {
        let tau = self.tau().0;
        (
            Micros(self.t_start.0 + tau / 3),
            Micros(self.t_start.0 + 2 * tau / 3),
        )
    }

    /// Stage containing `t`, with right-closed stages; `None` outside the window.
    pub fn phase_of(&self, t: Micros) -> Option<Phase> {
        if t < self.t_pre_event || t > self.t_end {
            return None;
        }
        let (b1, b2) = self.stage_bounds();
        Some(if t <= self.t_start {
            Phase::PreEvent
        } else if t <= b1 {
            Phase::Early
        } else if t <= b2 {
            Phase::Intermediate
        } else if t <= self.t_trough {
            Phase::Late
        } else {
            Phase::Recovery
        })
    }

    /// Whether `t` lies in the declining part `[t_start, t_trough]`.
    pub fn in_decline(&self, t: Micros) -> bool {
        self.t_start <= t && t <= self.t_trough
    }

    pub fn overlaps(&self, lo: Micros, hi: Micros) -> bool {
        lo <= self.t_end && self.t_pre_event <= hi
    }
}

/// A dip that could not be turned into an event.
#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub key: DayKey,
    pub t_trough: Micros,
    pub trough_stat: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Segmentation {
    pub events: Vec<EpmEvent>,
    pub rejected: Vec<Rejection>,
}

/// Group dips below `barrier` into events.
///
/// Dips closer than `merge_gap_s` seconds are one event, as are dips that
/// share the same excursion below the start level. The trough is the lowest
/// statistic in the group; the start is the last instant before it with the
/// statistic at or above the start level. With `τ` the start-to-trough time,
/// the window runs from `2τ` before the start to `3τ` after the trough and
/// must fit in `[0, session_len_s]`.
pub fn segment_events(
    series: &DriftBurstSeries,
    barrier: f64,
    merge_gap_s: f64,
    session_len_s: f64,
    key: &DayKey,
) -> Segmentation {
    let stat = &series.stat;
    // maximal runs below the barrier
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut open: Option<usize> = None;
    for (k, s) in stat.iter().enumerate() {
        let below = matches!(s, Some(v) if *v < barrier);
        match (below, open) {
            (true, None) => open = Some(k),
            (false, Some(a)) => {
                runs.push((a, k - 1));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(a) = open {
        runs.push((a, stat.len() - 1));
    }
    let mut groups: Vec<(usize, usize)> = Vec::new();
    for run in runs {
        match groups.last_mut() {
            Some(g) if series.time(run.0) - series.time(g.1) < merge_gap_s => g.1 = run.1,
            _ => groups.push(run),
        }
    }

    let mut out = Segmentation::default();
    let mut found: Vec<(usize, usize)> = Vec::new(); // (start index, trough index)
    for (a, b) in groups {
        let trough = (a..=b)
            .filter(|&k| stat[k].is_some())
            .min_by(|&i, &j| stat[i].unwrap().total_cmp(&stat[j].unwrap()))
            .expect("run holds a value");
        let depth = stat[trough].unwrap();
        let reject = |reason: &str| Rejection {
            key: key.clone(),
            t_trough: Micros::from_secs_f64(series.time(trough)),
            trough_stat: depth,
            reason: reason.to_string(),
        };
        let mut start = None;
        for j in (0..trough).rev() {
            match stat[j] {
                None => break,
                Some(v) if v >= START_LEVEL => {
                    start = Some(j);
                    break;
                }
                _ => {}
            }
        }
        let Some(start) = start else {
            out.rejected.push(reject("no crossing of the start level before the trough"));
            continue;
        };
        match found.last_mut() {
            Some(prev) if prev.0 == start => {
                if depth < stat[prev.1].unwrap() {
                    prev.1 = trough;
                }
            }
            _ => found.push((start, trough)),
        }
    }

    for (start, trough) in found {
        let t_start = series.time(start);
        let t_trough = series.time(trough);
        let tau = t_trough - t_start;
        let pre = t_start - 2.0 * tau;
        let end = t_trough + 3.0 * tau;
        let depth = stat[trough].unwrap();
        if pre < 0.0 || end > session_len_s {
            out.rejected.push(Rejection {
                key: key.clone(),
                t_trough: Micros::from_secs_f64(t_trough),
                trough_stat: depth,
                reason: "event window leaves the session".into(),
            });
            continue;
        }
        out.events.push(EpmEvent {
            stock: key.stock.clone(),
            date: key.date,
            t_pre_event: Micros::from_secs_f64(pre),
            t_start: Micros::from_secs_f64(t_start),
            t_trough: Micros::from_secs_f64(t_trough),
            t_end: Micros::from_secs_f64(end),
            trough_stat: depth,
            class: EventClass::Unsystematic,
        });
    }
    out
}

/// Label events systematic when their declining windows chain together,
/// through pairwise overlap on the same date, across at least `threshold`
/// distinct stocks.
pub fn classify_systematic(events: &mut [EpmEvent], threshold: usize) {
    let n = events.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (events[i].date, events[i].t_start));
    // sweep per date, joining each event with every open window it overlaps
    let mut active: Vec<usize> = Vec::new();
    let mut current_date = None;
    for &i in &order {
        if current_date != Some(events[i].date) {
            active.clear();
            current_date = Some(events[i].date);
        }
        active.retain(|&j| events[j].t_trough >= events[i].t_start);
        for &j in &active {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            parent[a] = b;
        }
        active.push(i);
    }
    let mut stocks: std::collections::HashMap<usize, BTreeSet<&str>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        stocks.entry(r).or_default().insert(events[i].stock.as_str());
    }
    let sizes: Vec<usize> = (0..n)
        .map(|i| stocks[&find(&mut parent, i)].len())
        .collect();
    for (e, size) in events.iter_mut().zip(sizes) {
        e.class = if size >= threshold {
            EventClass::Systematic
        } else {
            EventClass::Unsystematic
        };
    }
}

/// Minutes on a common clock where every event lasts `mean_duration_s` from
/// start to trough.
pub fn normalize_event_time(event: &EpmEvent, mean_duration_s: f64, t: Micros) -> f64 {
    (t - event.t_start).as_secs_f64() * mean_duration_s / event.tau_s() / 60.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key() -> DayKey {
        DayKey::new("AAA", "20130102".parse().unwrap())
    }

    fn series(stat: Vec<Option<f64>>, t0: f64) -> DriftBurstSeries {
        let n = stat.len();
        DriftBurstSeries {
            t0,
            step: 1.0,
            mu: vec![None; n],
            sigma: vec![None; n],
            stat,
        }
    }

    fn ev(stock: &str, start: i64, trough: i64) -> EpmEvent {
        let tau = trough - start;
        EpmEvent {
            stock: stock.into(),
            date: "20130102".parse().unwrap(),
            t_pre_event: Micros::from_secs(start - 2 * tau),
            t_start: Micros::from_secs(start),
            t_trough: Micros::from_secs(trough),
            t_end: Micros::from_secs(trough + 3 * tau),
            trough_stat: -6.0,
            class: EventClass::Unsystematic,
        }
    }

    #[test]
    fn single_dip_timestamps() {
        // 0 until 1000, linear decline to -7 at 1100, back to 0 by 1200
        let stat: Vec<Option<f64>> = (0..3000)
            .map(|k| {
                let v = if (1000..=1100).contains(&k) {
                    -7.0 * (k - 1000) as f64 / 100.0
                } else if (1100..1200).contains(&k) {
                    -7.0 * (1200 - k) as f64 / 100.0
                } else {
                    0.0
                };
                Some(v)
            })
            .collect();
        let s = series(stat, 1800.0);
        let seg = segment_events(&s, -5.0, 60.0, 30600.0, &key());
        assert_eq!(seg.events.len(), 1);
        let e = &seg.events[0];
        // last value >= -1 is at k = 1014 (-0.98)
        assert_eq!(e.t_start, Micros::from_secs(1800 + 1014));
        assert_eq!(e.t_trough, Micros::from_secs(1800 + 1100));
        assert_eq!(e.tau(), Micros::from_secs(86));
        assert_eq!(e.t_pre_event, Micros::from_secs(1800 + 1014 - 172));
        assert_eq!(e.t_end, Micros::from_secs(1800 + 1100 + 258));
        assert_eq!(e.trough_stat, -7.0);
    }

    #[test]
    fn close_dips_merge() {
        let mut stat = vec![Some(0.0); 600];
        for k in 200..260 {
            stat[k] = Some(-3.0);
        }
        stat[240] = Some(-5.5);
        stat[245] = Some(-6.5);
        let seg = segment_events(&series(stat, 0.0), -5.0, 60.0, 30600.0, &key());
        assert_eq!(seg.events.len(), 1);
        assert_eq!(seg.events[0].t_trough, Micros::from_secs(245));
        assert_eq!(seg.events[0].t_start, Micros::from_secs(199));
    }

    #[test]
    fn separated_dips_are_two_events() {
        let mut stat = vec![Some(0.0); 1000];
        for (lo, hi, trough) in [(200, 230, 225), (500, 530, 520)] {
            for k in lo..hi {
                stat[k] = Some(-3.0);
            }
            stat[trough] = Some(-6.0);
        }
        let seg = segment_events(&series(stat, 0.0), -5.0, 60.0, 30600.0, &key());
        assert_eq!(seg.events.len(), 2);
    }

    #[test]
    fn dips_in_one_start_excursion_collapse() {
        let mut stat = vec![Some(0.0); 1000];
        for k in 200..500 {
            stat[k] = Some(-3.0);
        }
        stat[250] = Some(-5.5);
        stat[450] = Some(-6.0);
        let seg = segment_events(&series(stat, 1000.0), -5.0, 60.0, 30600.0, &key());
        assert_eq!(seg.events.len(), 1);
        assert_eq!(seg.events[0].t_trough, Micros::from_secs(1450));
    }

    #[test]
    fn window_outside_session_rejected() {
        let mut stat = vec![Some(0.0); 100];
        for k in 50..90 {
            stat[k] = Some(-3.0);
        }
        stat[80] = Some(-6.0);
        let seg = segment_events(&series(stat, 0.0), -5.0, 60.0, 30600.0, &key());
        assert!(seg.events.is_empty());
        assert_eq!(seg.rejected.len(), 1);
        let seg = segment_events(&series(vec![Some(0.0), Some(-6.0), Some(0.0)], 30598.0), -5.0, 60.0, 30600.0, &key());
        assert_eq!(seg.rejected.len(), 1);
    }

    #[test]
    fn sentinel_before_crossing_rejected() {
        let mut stat = vec![None; 10];
        stat.extend(vec![Some(-3.0); 20]);
        stat.push(Some(-6.0));
        stat.extend(vec![Some(0.0); 20]);
        let seg = segment_events(&series(stat, 500.0), -5.0, 60.0, 30600.0, &key());
        assert!(seg.events.is_empty());
        assert_eq!(seg.rejected.len(), 1);
    }

    #[test]
    fn phases() {
        let e = ev("A", 1000, 1090);
        assert_eq!(e.phase_of(Micros::from_secs(900)), Some(Phase::PreEvent));
        assert_eq!(e.phase_of(Micros::from_secs(1000)), Some(Phase::PreEvent));
        assert_eq!(e.phase_of(Micros::from_secs(1010)), Some(Phase::Early));
        assert_eq!(e.phase_of(Micros::from_secs(1040)), Some(Phase::Intermediate));
        assert_eq!(e.phase_of(Micros::from_secs(1090)), Some(Phase::Late));
        assert_eq!(e.phase_of(Micros::from_secs(1300)), Some(Phase::Recovery));
        assert_eq!(e.phase_of(Micros::from_secs(1361)), None);
        assert_eq!(e.phase_of(Micros::from_secs(819)), None);
    }

    #[test]
    fn systematic_threshold() {
        let mut evs: Vec<EpmEvent> = (0..10).map(|i| ev(&format!("S{i}"), 1000 + i, 1100 + i)).collect();
        evs.push(ev("LONE", 5000, 5100));
        classify_systematic(&mut evs, 10);
        assert!(evs[..10].iter().all(|e| e.class == EventClass::Systematic));
        assert_eq!(evs[10].class, EventClass::Unsystematic);

        let mut nine: Vec<EpmEvent> = (0..9).map(|i| ev(&format!("S{i}"), 1000 + i, 1100 + i)).collect();
        // a second event of an already counted stock does not add a stock
        nine.push(ev("S0", 1050, 1150));
        classify_systematic(&mut nine, 10);
        assert!(nine.iter().all(|e| e.class == EventClass::Unsystematic));
    }

    #[test]
    fn systematic_requires_same_date() {
        let mut evs: Vec<EpmEvent> = (0..10).map(|i| ev(&format!("S{i}"), 1000, 1100)).collect();
        evs[9].date = "20130103".parse().unwrap();
        classify_systematic(&mut evs, 10);
        assert!(evs.iter().all(|e| e.class == EventClass::Unsystematic));
    }

    #[test]
    fn normalized_time() {
        let e = ev("A", 1000, 1090);
        assert!((normalize_event_time(&e, 571.8, e.t_trough) - 571.8 / 60.0).abs() < 1e-12);
        assert_eq!(normalize_event_time(&e, 571.8, e.t_start), 0.0);
        let t = normalize_event_time(&e, 571.8, e.t_pre_event);
        assert!((t + 2.0 * 571.8 / 60.0).abs() < 1e-12);
    }
}
