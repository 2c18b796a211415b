//! Canonical event and session types shared by every stage of the pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Microseconds since session open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Micros(pub i64);

impl Micros {
    pub const PER_SEC: i64 = 1_000_000;

    pub fn from_secs(s: i64) -> Self {
        Micros(s * Self::PER_SEC)
    }

    pub fn from_secs_f64(s: f64) -> Self {
        Micros((s * Self::PER_SEC as f64).round() as i64)
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / Self::PER_SEC as f64
    }
}

impl std::ops::Add for Micros {
    type Output = Micros;
    fn add(self, o: Micros) -> Micros {
        Micros(self.0 + o.0)
    }
}

impl std::ops::Sub for Micros {
    type Output = Micros;
    fn sub(self, o: Micros) -> Micros {
        Micros(self.0 - o.0)
    }
}

/// Trader taxonomy. `Other` collects flags outside the nine analysed groups:
/// those trades count toward market totals but never get a category row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TraderCategory {
    PureHftMm,
    PureHftOwn,
    PureClient,
    IbHftMm,
    IbHftOwn,
    IbHftParent,
    IbClient,
    NonHftClient,
    NonHftOwn,
    Other,
}

impl TraderCategory {
    /// The nine analysed categories, in table order.
    pub const ANALYSED: [TraderCategory; 9] = [
        TraderCategory::PureHftMm,
        TraderCategory::PureHftOwn,
        TraderCategory::PureClient,
        TraderCategory::IbHftMm,
        TraderCategory::IbHftOwn,
        TraderCategory::IbHftParent,
        TraderCategory::IbClient,
        TraderCategory::NonHftClient,
        TraderCategory::NonHftOwn,
    ];

    /// All ten buckets including `Other`; indexes match [`TraderCategory::index`].
    pub const ALL: [TraderCategory; 10] = [
        TraderCategory::PureHftMm,
        TraderCategory::PureHftOwn,
        TraderCategory::PureClient,
        TraderCategory::IbHftMm,
        TraderCategory::IbHftOwn,
        TraderCategory::IbHftParent,
        TraderCategory::IbClient,
        TraderCategory::NonHftClient,
        TraderCategory::NonHftOwn,
        TraderCategory::Other,
    ];

    pub const COUNT: usize = 10;

    pub fn index(self) -> usize {
        self as usize
    }

    /// Designated market makers under the exchange liquidity agreement.
    pub fn is_dmm(self) -> bool {
        matches!(self, TraderCategory::PureHftMm | TraderCategory::IbHftMm)
    }

    pub fn is_non_hft(self) -> bool {
        matches!(self, TraderCategory::NonHftClient | TraderCategory::NonHftOwn)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TraderCategory::PureHftMm => "PURE_HFT_MM",
            TraderCategory::PureHftOwn => "PURE_HFT_OWN",
            TraderCategory::PureClient => "PURE_CLIENT",
            TraderCategory::IbHftMm => "IB_HFT_MM",
            TraderCategory::IbHftOwn => "IB_HFT_OWN",
            TraderCategory::IbHftParent => "IB_HFT_PARENT",
            TraderCategory::IbClient => "IB_CLIENT",
            TraderCategory::NonHftClient => "NON_HFT_CLIENT",
            TraderCategory::NonHftOwn => "NON_HFT_OWN",
            TraderCategory::Other => "OTHER",
        }
    }

    /// Lenient parse: anything outside the taxonomy lands in `Other`.
    /// The flag tells the caller whether a fallback happened.
    pub fn parse_lenient(s: &str) -> (TraderCategory, bool) {
        match s.parse() {
            Ok(c) => (c, false),
            Err(_) => (TraderCategory::Other, true),
        }
    }
}

impl fmt::Display for TraderCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TraderCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TraderCategory::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown trader category {s:?}")))
    }
}

/// Aggressor side of a trade: `Buy` means buyer-initiated (s = +1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Buy => 1.0,
            Side::Sell => -1.0,
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeEvent {
    pub ts: Micros,
    pub price: f64,
    pub quantity: f64,
    pub side: Side,
    pub buyer: TraderCategory,
    pub seller: TraderCategory,
}

impl TradeEvent {
    /// Currency volume V = Q * P.
    pub fn volume(&self) -> f64 {
        self.quantity * self.price
    }

    /// s * V: positive for buyer-initiated trades.
    pub fn signed_volume(&self) -> f64 {
        self.side.sign() * self.volume()
    }

    pub fn aggressor(&self) -> TraderCategory {
        match self.side {
            Side::Buy => self.buyer,
            Side::Sell => self.seller,
        }
    }

    pub fn passive(&self) -> TraderCategory {
        match self.side {
            Side::Buy => self.seller,
            Side::Sell => self.buyer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuoteEvent {
    pub ts: Micros,
    pub bid: f64,
    pub ask: f64,
}

impl QuoteEvent {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.bid + self.ask)
    }

    /// (ask - bid) / midpoint, as a fraction.
    pub fn relative_spread(&self) -> f64 {
        (self.ask - self.bid) / self.midpoint()
    }
}

/// Calendar day as `YYYYMMDD`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Date(pub u32);

impl Date {
    pub fn year(self) -> u32 {
        self.0 / 10_000
    }
    pub fn month(self) -> u32 {
        (self.0 / 100) % 100
    }
    pub fn day(self) -> u32 {
        self.0 % 100
    }
}

impl fmt::Display for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:08}", self.0)
    }
}

impl FromStr for Date {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("invalid date {s:?}, expected YYYYMMDD"));
        if s.len() != 8 || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let v: u32 = s.parse().map_err(|_| bad())?;
        let d = Date(v);
        if !(1..=12).contains(&d.month()) || !(1..=31).contains(&d.day()) {
            return Err(bad());
        }
        Ok(d)
    }
}

/// Key of one event file.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DayKey {
    pub stock: String,
    pub date: Date,
}

impl DayKey {
    pub fn new(stock: impl Into<String>, date: Date) -> Self {
        DayKey {
            stock: stock.into(),
            date,
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}_{}.csv", self.stock, self.date)
    }
}

impl fmt::Display for DayKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.stock, self.date)
    }
}

/// Trading session in seconds after midnight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionSpec {
    pub open: i64,
    pub close: i64,
    pub analysis_start: i64,
}

impl Default for SessionSpec {
    /// 9:00 to 17:30 with detection from 9:30.
    fn default() -> Self {
        SessionSpec {
            open: 9 * 3600,
            close: 17 * 3600 + 1800,
            analysis_start: 9 * 3600 + 1800,
        }
    }
}

impl SessionSpec {
    pub fn new(open: i64, close: i64, analysis_start: i64) -> Result<Self> {
        let s = SessionSpec {
            open,
            close,
            analysis_start,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.open < self.analysis_start && self.analysis_start < self.close) {
            return Err(Error::InvalidArgument(format!(
                "session requires open < analysis_start < close, got {} / {} / {}",
                self.open, self.analysis_start, self.close
            )));
        }
        Ok(())
    }

    /// Session length in seconds.
    pub fn length_s(&self) -> i64 {
        self.close - self.open
    }

    /// Offset of the analysis start from the open, in seconds.
    pub fn analysis_offset_s(&self) -> i64 {
        self.analysis_start - self.open
    }

    pub fn end(&self) -> Micros {
        Micros::from_secs(self.length_s())
    }
}

/// Parse `HH:MM` or `HH:MM:SS` into seconds after midnight.
pub fn parse_clock(s: &str) -> Result<i64> {
    let bad = || Error::InvalidArgument(format!("invalid clock time {s:?}"));
    let parts: Vec<&str> = s.trim().split(':').collect();
    if !(2..=3).contains(&parts.len()) {
        return Err(bad());
    }
    let mut secs = 0i64;
    for (i, p) in parts.iter().enumerate() {
        let v: i64 = p.parse().map_err(|_| bad())?;
        let lim = if i == 0 { 24 } else { 60 };
        if !(0..lim).contains(&v) {
            return Err(bad());
        }
        secs = secs * 60 + v;
    }
    if parts.len() == 2 {
        secs *= 60;
    }
    Ok(secs)
}

pub fn format_clock(secs: i64) -> String {
    format!("{:02}:{:02}:{:02}", secs / 3600, (secs / 60) % 60, secs % 60)
}

/// All trades and quotes of one (stock, date), sorted by timestamp.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DayTape {
    pub key: Option<DayKey>,
    pub trades: Vec<TradeEvent>,
    pub quotes: Vec<QuoteEvent>,
}

impl DayTape {
    pub fn key(&self) -> &DayKey {
        self.key.as_ref().expect("tape without key")
    }

    /// Last trade at or before `t`.
    pub fn last_trade_at(&self, t: Micros) -> Option<&TradeEvent> {
        let n = self.trades.partition_point(|tr| tr.ts <= t);
        n.checked_sub(1).map(|i| &self.trades[i])
    }

    /// Prevailing quote at `t`.
    pub fn quote_at(&self, t: Micros) -> Option<&QuoteEvent> {
        let n = self.quotes.partition_point(|q| q.ts <= t);
        n.checked_sub(1).map(|i| &self.quotes[i])
    }

    /// Index range of trades with timestamp in `(lo, hi]`.
    pub fn trade_range(&self, lo: Micros, hi: Micros) -> std::ops::Range<usize> {
        let a = self.trades.partition_point(|tr| tr.ts <= lo);
        let b = self.trades.partition_point(|tr| tr.ts <= hi);
        a..b.max(a)
    }
}
