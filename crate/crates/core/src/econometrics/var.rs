//! Panel VAR of category order flow (or P&L) on event phases.
//!
//! Rows are 10-second intervals of the events in one pool. Regressors, in
//! order: the five phase dummies (or one whole-event dummy for P&L), which
//! also play the role of the intercept; stock indicators against a reference
//! stock; lags 1..=L of every category's response, kept within each event;
//! contemporaneous return, log traded value and percentage spread.
//! Non-dummy variables are z-scored per stock over all event intervals
//! supplied, before pooling. P&L responses are left in currency units.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};

use super::cov::{covariance, CoefTable, CovKind};
use super::ols::ols;
use crate::detector::{EventClass, Phase};
use crate::error::{Error, Result};
use crate::flow::{FlowCell, IntervalRecord, MeasuredEvent};
use crate::stats::{moments, zscore};
use crate::types::TraderCategory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flavor {
    Total,
    Aggressive,
    Passive,
    Pnl,
}

impl Flavor {
    pub fn as_str(self) -> &'static str {
        match self {
            Flavor::Total => "var",
            Flavor::Aggressive => "var-aggr",
            Flavor::Passive => "var-pass",
            Flavor::Pnl => "pnl",
        }
    }
}

/// Response groups: the seven HFT and client categories plus all NON_HFT
/// accounts together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    Cat(TraderCategory),
    NonHft,
}

impl Group {
    pub fn all() -> Vec<Group> {
        let mut g: Vec<Group> = TraderCategory::ANALYSED
            .iter()
            .filter(|c| !c.is_non_hft())
            .map(|&c| Group::Cat(c))
            .collect();
        g.push(Group::NonHft);
        g
    }

    pub fn label(self) -> String {
        match self {
            Group::Cat(c) => c.as_str().to_string(),
            Group::NonHft => "NON_HFT".to_string(),
        }
    }

    fn members(self) -> Vec<TraderCategory> {
        match self {
            Group::Cat(c) => vec![c],
            Group::NonHft => TraderCategory::ANALYSED
                .iter()
                .copied()
                .filter(|c| c.is_non_hft())
                .collect(),
        }
    }
}

/// Raw response of `group` in one interval; `None` where P&L is undefined.
pub fn response(rec: &IntervalRecord, group: Group, flavor: Flavor) -> Option<f64> {
    let f: &FlowCell = &rec.flow;
    let mut total = 0.0;
    for c in group.members() {
        total += match flavor {
            Flavor::Total => f.ti(c),
            Flavor::Aggressive => f.di(c),
            Flavor::Passive => f.si(c),
            Flavor::Pnl => rec.pnl[c.index()]?,
        };
    }
    Some(total)
}

#[derive(Debug, Clone)]
pub struct Design {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
    /// One response per group, aligned with `groups`.
    pub responses: Vec<DVector<f64>>,
    pub groups: Vec<Group>,
    pub stock_ids: Vec<u64>,
    pub date_ids: Vec<u64>,
    /// `(event id, interval)` of each row.
    pub rows: Vec<(usize, usize)>,
}

pub fn phase_name(p: Phase) -> &'static str {
    p.as_str()
}

/// Events of `pool` lasting at least `min_duration_s`.
pub fn pool_events(events: &[MeasuredEvent], pool: EventClass, min_duration_s: f64) -> Vec<&MeasuredEvent> {
    events
        .iter()
        .filter(|m| m.event.class == pool && m.event.tau_s() >= min_duration_s)
        .collect()
}

pub fn build_var_design(
    all: &[MeasuredEvent],
    pool: EventClass,
    flavor: Flavor,
    lags: usize,
    min_duration_s: f64,
) -> Result<Design> {
    let groups = Group::all();
    let g = groups.len();
    // per-stock moments over every supplied event interval
    let mut per_stock: BTreeMap<&str, Vec<&IntervalRecord>> = BTreeMap::new();
    for m in all {
        per_stock.entry(m.event.stock.as_str()).or_default().extend(m.intervals.iter());
    }
    type Mom = Option<(f64, f64)>;
    let mut moms: BTreeMap<&str, (Vec<Mom>, [Mom; 3])> = BTreeMap::new();
    for (stock, recs) in &per_stock {
        let resp: Vec<Mom> = groups
            .iter()
            .map(|&gr| moments(&recs.iter().filter_map(|r| response(r, gr, flavor)).collect::<Vec<_>>()))
            .collect();
        let ctl = [
            moments(&recs.iter().filter_map(|r| r.ret).collect::<Vec<_>>()),
            moments(&recs.iter().map(|r| r.log_volume()).collect::<Vec<_>>()),
            moments(&recs.iter().filter_map(|r| r.spread_pct).collect::<Vec<_>>()),
        ];
        moms.insert(stock, (resp, ctl));
    }

    let events = pool_events(all, pool, min_duration_s);
    if events.is_empty() {
        return Err(Error::InvalidArgument(format!("no {pool} events in the pool")));
    }
    let stocks: Vec<&str> = events
        .iter()
        .map(|m| m.event.stock.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let dates: Vec<u32> = events
        .iter()
        .map(|m| m.event.date.0)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut names: Vec<String> = match flavor {
        Flavor::Pnl => vec!["event".to_string()],
        _ => Phase::ALL.iter().map(|p| phase_name(*p).to_string()).collect(),
    };
    let n_dummy = names.len();
    names.extend(stocks.iter().skip(1).map(|s| format!("fe_{s}")));
    for l in 1..=lags {
        names.extend(groups.iter().map(|gr| format!("lag{l}_{}", gr.label())));
    }
    names.extend(["return", "log_volume", "spread_pct"].map(String::from));
    let k = names.len();

    let mut data: Vec<f64> = Vec::new();
    let mut resp: Vec<Vec<f64>> = vec![Vec::new(); g];
    let (mut stock_ids, mut date_ids, mut rows) = (Vec::new(), Vec::new(), Vec::new());
    for m in events {
        let stock = m.event.stock.as_str();
        let (rm, cm) = &moms[stock];
        let si = stocks.binary_search(&stock).expect("pooled stock");
        // standardized responses of every group for every interval
        let z: Vec<Option<Vec<f64>>> = m
            .intervals
            .iter()
            .map(|r| {
                groups
                    .iter()
                    .zip(rm)
                    .map(|(&gr, mo)| {
                        let v = response(r, gr, flavor)?;
                        Some(if flavor == Flavor::Pnl { v } else { zscore(v, *mo) })
                    })
                    .collect()
            })
            .collect();
        for (t, r) in m.intervals.iter().enumerate().skip(lags) {
            let (Some(ret), Some(spread)) = (r.ret, r.spread_pct) else { continue };
            let Some(y) = &z[t] else { continue };
            let lagged: Option<Vec<&Vec<f64>>> = (1..=lags).map(|l| z[t - l].as_ref()).collect();
            let Some(lagged) = lagged else { continue };
            let mut row = vec![0.0; k];
            match flavor {
                Flavor::Pnl => row[0] = 1.0,
                _ => row[r.phase.index()] = 1.0,
            }
            if si > 0 {
                row[n_dummy + si - 1] = 1.0;
            }
            let mut c = n_dummy + stocks.len() - 1;
            for lz in lagged {
                row[c..c + g].copy_from_slice(lz);
                c += g;
            }
            row[c] = zscore(ret, cm[0]);
            row[c + 1] = zscore(r.log_volume(), cm[1]);
            row[c + 2] = zscore(spread, cm[2]);
            data.extend(row);
            for (j, v) in y.iter().enumerate() {
                resp[j].push(*v);
            }
            stock_ids.push(si as u64);
            date_ids.push(dates.binary_search(&m.event.date.0).expect("pooled date") as u64);
            rows.push((m.id, r.k));
        }
    }
    let n = rows.len();
    Ok(Design {
        names,
        x: DMatrix::from_row_slice(n, k, &data),
        responses: resp.into_iter().map(DVector::from_vec).collect(),
        groups,
        stock_ids,
        date_ids,
        rows,
    })
}

/// Estimate every equation with two-way (stock, date) clustering. Groups
/// whose response has no variation are skipped.
pub fn estimate_var(design: &Design) -> Result<Vec<(Group, CoefTable)>> {
    let kind = CovKind::TwoWay(design.stock_ids.clone(), design.date_ids.clone());
    let mut out = Vec::new();
    for (gr, y) in design.groups.iter().zip(&design.responses) {
        let var = y.variance();
        if !(var > 0.0) {
            log::warn!("{}: response has no variation, equation skipped", gr.label());
            continue;
        }
        let fit = ols(&design.x, y, &design.names)?;
        if !fit.dropped.is_empty() {
            log::warn!("{}: dropped collinear columns {:?}", gr.label(), fit.dropped);
        }
        let cov = covariance(&fit, &design.x, &kind)?;
        out.push((*gr, CoefTable::new(&fit, &cov)));
    }
    Ok(out)
}
