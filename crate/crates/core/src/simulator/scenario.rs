//! Scenario files: a header of global keys followed by repeated `[stock]`,
//! `[burst]` and `[agent]` blocks.
//!
//! ```text
//! seed = 7
//! dates = 20130102, 20130103
//!
//! [stock]
//! id = AAA
//! sigma_daily = 0.02
//!
//! [burst]
//! stock = AAA
//! date = 20130102
//! tau = 12:00:00
//! magnitude = 0.0135
//! duration_s = 572
//!
//! [agent]
//! script = default
//! phase = early
//! category = IB_HFT_OWN
//! weight = 0.3
//! buy = 0.1
//! aggressive = 0.9
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate, Weekday};

use crate::config::{parse_blocks, parse_value, Block};
use crate::detector::Phase;
use crate::error::{Error, Result};
use crate::types::{parse_clock, Date, SessionSpec, TraderCategory};

/// Shape of the intraday volatility multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolProfile {
    Flat,
    /// Smooth rise from 1 at the open to 2 at midsession and back.
    MiddayDouble,
}

impl VolProfile {
    /// Multiplier at fraction `u` of the session.
    pub fn at(self, u: f64) -> f64 {
        match self {
            VolProfile::Flat => 1.0,
            VolProfile::MiddayDouble => 1.5 - 0.5 * (2.0 * std::f64::consts::PI * u).cos(),
        }
    }
}

impl FromStr for VolProfile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(VolProfile::Flat),
            "midday_double" => Ok(VolProfile::MiddayDouble),
            _ => Err(Error::Scenario(format!("unknown vol_profile {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Down,
    Up,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Down => -1.0,
            Direction::Up => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Down => "down",
            Direction::Up => "up",
        }
    }
}

impl FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "down" => Ok(Direction::Down),
            "up" => Ok(Direction::Up),
            _ => Err(Error::Scenario(format!("unknown direction {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StockSpec {
    pub id: String,
    pub price: f64,
    /// Daily volatility of the log price.
    pub sigma_daily: f64,
    pub vol_profile: VolProfile,
    /// Expected jumps per day.
    pub jump_intensity: f64,
    pub jump_std: f64,
    /// Observation noise, basis points of the log price.
    pub noise_bps: f64,
    /// Trades per second; the default gives about 14,400 per session.
    pub trade_rate: f64,
    pub spread_bps: f64,
    /// Mean trade size in shares.
    pub size_mean: f64,
}

impl Default for StockSpec {
    fn default() -> Self {
        StockSpec {
            id: "SIM".into(),
            price: 50.0,
            sigma_daily: 0.02,
            vol_profile: VolProfile::Flat,
            jump_intensity: 0.0,
            jump_std: 0.002,
            noise_bps: 1.0,
            trade_rate: 0.47,
            spread_bps: 5.0,
            size_mean: 200.0,
        }
    }
}

/// An injected drift burst. The drift is `-a (tau - t)^(-alpha)` on
/// `[tau - duration, tau)`, with `a` set so the drift integrates to
/// `magnitude`; afterwards `recovery` of the move reverts linearly over
/// `recovery_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct BurstSpec {
    /// `None` injects the burst into every stock.
    pub stock: Option<String>,
    pub date: Date,
    /// Seconds after the open.
    pub tau_s: f64,
    pub magnitude: f64,
    pub duration_s: f64,
    pub alpha: f64,
    pub direction: Direction,
    pub recovery: f64,
    pub recovery_s: f64,
    /// Uniform jitter of `tau` across stocks, in seconds either side.
    pub tau_jitter_s: f64,
    /// Agent script active around the burst.
    pub script: String,
    /// Trade-rate multiplier from onset to `tau`.
    pub intensity: f64,
}

impl BurstSpec {
    pub fn coefficient(&self) -> f64 {
        self.magnitude * (1.0 - self.alpha) / self.duration_s.powf(1.0 - self.alpha)
    }

    pub fn applies_to(&self, stock: &str) -> bool {
        self.stock.as_deref().is_none_or(|s| s == stock)
    }
}

/// Where an agent block applies: outside any burst, or in one phase of a
/// burst window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ScriptPhase {
    Normal,
    Event(Phase),
}

impl FromStr for ScriptPhase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "normal" {
            return Ok(ScriptPhase::Normal);
        }
        Phase::ALL
            .iter()
            .find(|p| p.as_str() == s)
            .map(|p| ScriptPhase::Event(*p))
            .ok_or_else(|| Error::Scenario(format!("unknown phase {s:?}")))
    }
}

impl fmt::Display for ScriptPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScriptPhase::Normal => f.write_str("normal"),
            ScriptPhase::Event(p) => f.write_str(p.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub script: String,
    pub phase: ScriptPhase,
    pub category: TraderCategory,
    /// Share of trades this category takes part in.
    pub weight: f64,
    /// Probability of being the buyer.
    pub buy: f64,
    /// Probability of initiating rather than resting.
    pub aggressive: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimScenario {
    pub seed: u64,
    pub session: SessionSpec,
    pub dates: Vec<Date>,
    /// Simulate only stock-days that carry a burst.
    pub burst_days_only: bool,
    pub dt_s: f64,
    pub tick: f64,
    pub quote_step_s: f64,
    pub stocks: Vec<StockSpec>,
    pub bursts: Vec<BurstSpec>,
    pub agents: Vec<AgentSpec>,
}

impl Default for SimScenario {
    fn default() -> Self {
        SimScenario {
            seed: 1,
            session: SessionSpec::default(),
            dates: vec![Date(20130102)],
            burst_days_only: false,
            dt_s: 0.1,
            tick: 0.001,
            quote_step_s: 1.0,
            stocks: vec![StockSpec::default()],
            bursts: Vec::new(),
            agents: Vec::new(),
        }
    }
}

/// Background participation when a scenario scripts nothing else.
pub fn default_agents() -> Vec<AgentSpec> {
    use TraderCategory::*;
    [
        (PureHftMm, 0.20, 0.3),
        (PureHftOwn, 0.08, 0.6),
        (PureClient, 0.02, 0.6),
        (IbHftMm, 0.15, 0.3),
        (IbHftOwn, 0.10, 0.6),
        (IbHftParent, 0.05, 0.6),
        (IbClient, 0.15, 0.6),
        (NonHftClient, 0.20, 0.6),
        (NonHftOwn, 0.05, 0.6),
    ]
    .into_iter()
    .map(|(category, weight, aggressive)| AgentSpec {
        script: "default".into(),
        phase: ScriptPhase::Normal,
        category,
        weight,
        buy: 0.5,
        aggressive,
    })
    .collect()
}

/// `n` consecutive weekdays starting at `start` (or the next weekday).
pub fn business_days(start: Date, n: usize) -> Result<Vec<Date>> {
    let bad = || Error::Scenario(format!("invalid date {start}"));
    let mut d = NaiveDate::from_ymd_opt(start.year() as i32, start.month(), start.day()).ok_or_else(bad)?;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(Date(d.year() as u32 * 10_000 + d.month() * 100 + d.day()));
        }
        d = d.succ_opt().ok_or_else(bad)?;
    }
    Ok(out)
}

fn entry_err(line: usize, msg: impl fmt::Display) -> Error {
    Error::Scenario(format!("line {line}: {msg}"))
}

fn reject_unknown(block: &Block, known: &[&str]) -> Result<()> {
    for (line, k, _) in &block.entries {
        if !known.contains(&k.as_str()) {
            return Err(entry_err(*line, format!("unknown key {k}")));
        }
    }
    Ok(())
}

fn field<T: FromStr>(block: &Block, key: &str) -> Result<Option<T>> {
    let Some((line, _, v)) = block.entries.iter().rev().find(|(_, k, _)| k == key) else {
        return Ok(None);
    };
    parse_value(*line, key, v).map(Some)
}

fn required<T: FromStr>(block: &Block, key: &str) -> Result<T> {
    field(block, key)?.ok_or_else(|| entry_err(block.line, format!("missing {key}")))
}

fn clock_or_secs(v: &str, session: &SessionSpec) -> Result<f64> {
    if v.contains(':') {
        Ok((parse_clock(v)? - session.open) as f64)
    } else {
        v.parse()
            .map_err(|_| Error::Scenario(format!("cannot parse time {v:?}")))
    }
}

impl SimScenario {
    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let blocks = parse_blocks(text)?;
        let head = &blocks[0];
        reject_unknown(
            head,
            &[
                "seed", "dates", "start_date", "n_days", "days", "dt_ms", "tick", "quote_step_s",
                "session.open", "session.close", "session.analysis_start",
            ],
        )?;
        let mut s = SimScenario::default();
        if let Some(v) = field(head, "seed")? {
            s.seed = v;
        }
        for (key, slot) in [
            ("session.open", &mut s.session.open),
            ("session.close", &mut s.session.close),
            ("session.analysis_start", &mut s.session.analysis_start),
        ] {
            if let Some(v) = head.get(key) {
                *slot = parse_clock(v)?;
            }
        }
        if let Some(v) = head.get("dates") {
            s.dates = v
                .split(',')
                .map(|d| d.trim().parse())
                .collect::<Result<Vec<Date>>>()?;
        } else if let Some(n) = field::<usize>(head, "n_days")? {
            let start = field(head, "start_date")?.unwrap_or(Date(20130102));
            s.dates = business_days(start, n)?;
        }
        match head.get("days") {
            None | Some("all") => {}
            Some("bursts") => s.burst_days_only = true,
            Some(v) => return Err(Error::Scenario(format!("days must be all or bursts, got {v:?}"))),
        }
        if let Some(ms) = field::<f64>(head, "dt_ms")? {
            s.dt_s = ms / 1000.0;
        }
        if let Some(v) = field(head, "tick")? {
            s.tick = v;
        }
        if let Some(v) = field(head, "quote_step_s")? {
            s.quote_step_s = v;
        }

        let mut stocks = Vec::new();
        for b in &blocks[1..] {
            match b.name.as_deref() {
                Some("stock") => stocks.push(parse_stock(b)?),
                Some("burst") => s.bursts.push(parse_burst(b, &s.session)?),
                Some("agent") => s.agents.push(parse_agent(b)?),
                other => {
                    return Err(entry_err(b.line, format!("unknown block {:?}", other.unwrap_or(""))));
                }
            }
        }
        if !stocks.is_empty() {
            s.stocks = stocks;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.session.validate()?;
        let bad = |m: String| Err(Error::Scenario(m));
        if self.dates.is_empty() || self.stocks.is_empty() {
            return bad("a scenario needs at least one date and one stock".into());
        }
        if !(self.dt_s > 0.0) || !(self.tick > 0.0) || !(self.quote_step_s > 0.0) {
            return bad("dt_ms, tick and quote_step_s must be positive".into());
        }
        let mut ids = std::collections::BTreeSet::new();
        for st in &self.stocks {
            if !ids.insert(st.id.as_str()) {
                return bad(format!("stock {} defined twice", st.id));
            }
            if st.id.is_empty() || st.id.contains(['_', '/', ',']) {
                return bad(format!("stock id {:?} must be non-empty without '_', '/' or ','", st.id));
            }
            let rates = [st.sigma_daily, st.jump_intensity, st.jump_std, st.noise_bps, st.spread_bps];
            if rates.iter().any(|v| !(*v >= 0.0)) {
                return bad(format!("{}: volatility, jump, noise and spread settings must be non-negative", st.id));
            }
            if !(st.price > 0.0) || !(st.trade_rate > 0.0) || !(st.size_mean >= 1.0) {
                return bad(format!("{}: price and trade_rate must be positive, size_mean at least 1", st.id));
            }
        }
        for b in &self.bursts {
            if !(b.alpha > 0.5 && b.alpha < 1.0) {
                return bad(format!("burst alpha must lie in (0.5, 1), got {}", b.alpha));
            }
            if !(b.magnitude >= 0.0) || !(b.duration_s > 0.0) || !(b.intensity > 0.0) {
                return bad("burst magnitude must be non-negative, duration and intensity positive".into());
            }
            if !(0.0..=1.0).contains(&b.recovery) || !(b.recovery_s > 0.0) || !(b.tau_jitter_s >= 0.0) {
                return bad("burst recovery must lie in [0, 1] with positive recovery_s".into());
            }
            if let Some(st) = &b.stock {
                if !ids.contains(st.as_str()) {
                    return bad(format!("burst on unknown stock {st}"));
                }
            }
            if b.tau_s - b.duration_s - b.tau_jitter_s < 0.0
                || b.tau_s + b.recovery_s + b.tau_jitter_s > self.session.length_s() as f64
            {
                return bad(format!("burst at {}s does not fit in the session", b.tau_s));
            }
        }
        let mut sums: BTreeMap<(&str, ScriptPhase), (f64, f64, f64)> = BTreeMap::new();
        for a in &self.agents {
            if !(a.weight >= 0.0) || !(0.0..=1.0).contains(&a.buy) || !(0.0..=1.0).contains(&a.aggressive) {
                return bad(format!(
                    "agent {} in {}/{}: weight must be non-negative, buy and aggressive in [0, 1]",
                    a.category, a.script, a.phase
                ));
            }
            let e = sums.entry((a.script.as_str(), a.phase)).or_default();
            e.0 += a.weight;
            e.1 += a.weight * a.buy;
            e.2 += a.weight * (1.0 - a.buy);
        }
        for ((script, phase), (w, b, s)) in sums {
            if (w - 1.0).abs() > 1e-9 {
                return bad(format!("weights of {script}/{phase} sum to {w}, expected 1"));
            }
            if !(b > 0.0 && s > 0.0) {
                return bad(format!("{script}/{phase} needs both buyers and sellers"));
            }
        }
        Ok(())
    }
}

fn parse_stock(b: &Block) -> Result<StockSpec> {
    reject_unknown(
        b,
        &[
            "id", "price", "sigma_daily", "vol_profile", "jump_intensity", "jump_std", "noise_bps",
            "trade_rate", "spread_bps", "size_mean",
        ],
    )?;
    let mut s = StockSpec {
        id: required(b, "id")?,
        ..StockSpec::default()
    };
    macro_rules! opt {
        ($($f:ident),*) => {$(
            if let Some(v) = field(b, stringify!($f))? {
                s.$f = v;
            }
        )*};
    }
    opt!(price, sigma_daily, vol_profile, jump_intensity, jump_std, noise_bps, trade_rate, spread_bps, size_mean);
    Ok(s)
}

fn parse_burst(b: &Block, session: &SessionSpec) -> Result<BurstSpec> {
    reject_unknown(
        b,
        &[
            "stock", "date", "tau", "magnitude", "duration_s", "alpha", "direction", "recovery",
            "recovery_s", "tau_jitter_s", "script", "intensity",
        ],
    )?;
    let duration_s: f64 = required(b, "duration_s")?;
    let stock: String = required(b, "stock")?;
    Ok(BurstSpec {
        stock: (stock != "*").then_some(stock),
        date: required(b, "date")?,
        tau_s: clock_or_secs(&required::<String>(b, "tau")?, session)?,
        magnitude: required(b, "magnitude")?,
        duration_s,
        alpha: field(b, "alpha")?.unwrap_or(0.75),
        direction: field(b, "direction")?.unwrap_or(Direction::Down),
        recovery: field(b, "recovery")?.unwrap_or(0.5),
        recovery_s: field(b, "recovery_s")?.unwrap_or(3.0 * duration_s),
        tau_jitter_s: field(b, "tau_jitter_s")?.unwrap_or(0.0),
        script: field(b, "script")?.unwrap_or_else(|| "default".into()),
        intensity: field(b, "intensity")?.unwrap_or(1.0),
    })
}

fn parse_agent(b: &Block) -> Result<AgentSpec> {
    reject_unknown(b, &["script", "phase", "category", "weight", "buy", "aggressive"])?;
    let category: TraderCategory = required(b, "category")?;
    if category == TraderCategory::Other {
        return Err(entry_err(b.line, "agents must use one of the nine analysed categories"));
    }
    Ok(AgentSpec {
        script: field(b, "script")?.unwrap_or_else(|| "default".into()),
        phase: field(b, "phase")?.unwrap_or(ScriptPhase::Normal),
        category,
        weight: required(b, "weight")?,
        buy: field(b, "buy")?.unwrap_or(0.5),
        aggressive: field(b, "aggressive")?.unwrap_or(0.5),
    })
}
