//! Flat `key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored. A `[name]` line opens a new
//! block; scenario files use repeated blocks, analysis configs use none.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{parse_clock, SessionSpec};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Block {
    /// `None` for keys above the first header.
    pub name: Option<String>,
    pub line: usize,
    pub entries: Vec<(usize, String, String)>,
}

impl Block {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(_, k, _)| k == key)
            .map(|(_, _, v)| v.as_str())
    }
}

pub fn parse_blocks(text: &str) -> Result<Vec<Block>> {
    let mut blocks = vec![Block::default()];
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(name) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            blocks.push(Block {
                name: Some(name.trim().to_string()),
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {line}: expected `key = value`")))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config(format!("line {line}: empty key")));
        }
        blocks
            .last_mut()
            .expect("at least one block")
            .entries
            .push((line, k.to_string(), v.trim().to_string()));
    }
    Ok(blocks)
}

pub(crate) fn parse_value<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("line {line}: cannot parse {key} = {v:?}")))
}

/// Fee and rebate schedule, in basis points of traded value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeeSchedule {
    pub taker_bps: f64,
    pub rebate_bps: f64,
    /// Rebate applying between `rebate_high_from` and `rebate_high_to`
    /// (month*100 + day, inclusive).
    pub rebate_high_bps: f64,
    pub rebate_high_from: u32,
    pub rebate_high_to: u32,
    pub standard_bps: f64,
    pub auction_bps: f64,
}

impl Default for FeeSchedule {
    fn default() -> Self {
        FeeSchedule {
            taker_bps: 0.30,
            rebate_bps: 0.20,
            rebate_high_bps: 0.22,
            rebate_high_from: 603,
            rebate_high_to: 1031,
            standard_bps: 0.55,
            auction_bps: 0.6,
        }
    }
}

impl FeeSchedule {
    pub fn rebate_bps_on(&self, date: crate::types::Date) -> f64 {
        let md = date.month() * 100 + date.day();
        if (self.rebate_high_from..=self.rebate_high_to).contains(&md) {
            self.rebate_high_bps
        } else {
            self.rebate_bps
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.taker_bps,
            self.rebate_bps,
            self.rebate_high_bps,
            self.standard_bps,
            self.auction_bps,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config("fees must be non-negative".into()));
        }
        if !(self.rebate_bps.max(self.rebate_high_bps) < self.taker_bps
            && self.taker_bps < self.standard_bps)
        {
            return Err(Error::Config(
                "fees must satisfy rebate < taker fee < standard fee".into(),
            ));
        }
        Ok(())
    }
}

/// Everything the `detect`, `measure` and `regress` stages read from a config.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub session: SessionSpec,
    pub grid_step_s: f64,
    pub preaverage_window: usize,
    pub h_mean_s: f64,
    pub h_vol_s: f64,
    pub hac_max_lags: usize,
    pub min_obs: usize,
    pub confidence: f64,
    pub cv_paths: usize,
    pub cv_seed: u64,
    /// Fixed barrier; skips the Monte Carlo when set.
    pub critical_value: Option<f64>,
    pub merge_gap_s: f64,
    pub systematic_threshold: usize,
    pub min_duration_s: f64,
    /// Detect upward instead of downward movements.
    pub upward: bool,
    pub var_lags: usize,
    pub pressure_tail: f64,
    pub fees: FeeSchedule,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            session: SessionSpec::default(),
            grid_step_s: 10.0,
            preaverage_window: 5,
            h_mean_s: 300.0,
            h_vol_s: 1500.0,
            hac_max_lags: 10,
            min_obs: 10,
            confidence: 0.999,
            cv_paths: 5000,
            cv_seed: 20130417,
            critical_value: None,
            merge_gap_s: 60.0,
            systematic_threshold: 10,
            min_duration_s: 100.0,
            upward: false,
            var_lags: 5,
            pressure_tail: 0.001,
            fees: FeeSchedule::default(),
        }
    }
}

impl AnalysisConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let blocks = parse_blocks(text)?;
        if blocks.len() > 1 {
            return Err(Error::Config(format!(
                "line {}: blocks are not allowed in an analysis config",
                blocks[1].line
            )));
        }
        let mut cfg = AnalysisConfig::default();
        let mut seen = BTreeMap::new();
        for (line, k, v) in &blocks[0].entries {
            let (line, v) = (*line, v.as_str());
            if let Some(prev) = seen.insert(k.clone(), line) {
                return Err(Error::Config(format!(
                    "line {line}: {k} already set on line {prev}"
                )));
            }
            match k.as_str() {
                "session.open" => cfg.session.open = parse_clock(v)?,
                "session.close" => cfg.session.close = parse_clock(v)?,
                "session.analysis_start" => cfg.session.analysis_start = parse_clock(v)?,
                "grid.step_seconds" => cfg.grid_step_s = parse_value(line, k, v)?,
                "preaverage.window" => cfg.preaverage_window = parse_value(line, k, v)?,
                "db.h_mean_s" => cfg.h_mean_s = parse_value(line, k, v)?,
                "db.h_vol_s" => cfg.h_vol_s = parse_value(line, k, v)?,
                "db.hac_max_lags" => cfg.hac_max_lags = parse_value(line, k, v)?,
                "db.min_obs" => cfg.min_obs = parse_value(line, k, v)?,
                "db.confidence" => cfg.confidence = parse_value(line, k, v)?,
                "db.cv_paths" => cfg.cv_paths = parse_value(line, k, v)?,
                "db.cv_seed" => cfg.cv_seed = parse_value(line, k, v)?,
                "db.critical_value" => cfg.critical_value = Some(parse_value(line, k, v)?),
                "db.merge_gap_s" => cfg.merge_gap_s = parse_value(line, k, v)?,
                "db.systematic_threshold" => cfg.systematic_threshold = parse_value(line, k, v)?,
                "db.min_duration_s" => cfg.min_duration_s = parse_value(line, k, v)?,
                "db.upward" => cfg.upward = parse_value(line, k, v)?,
                "var.lags" => cfg.var_lags = parse_value(line, k, v)?,
                "pressure.tail_fraction" => cfg.pressure_tail = parse_value(line, k, v)?,
                "fees.taker_bps" => cfg.fees.taker_bps = parse_value(line, k, v)?,
                "fees.rebate_bps" => cfg.fees.rebate_bps = parse_value(line, k, v)?,
                "fees.rebate_high_bps" => cfg.fees.rebate_high_bps = parse_value(line, k, v)?,
                "fees.rebate_high_from" => cfg.fees.rebate_high_from = parse_value(line, k, v)?,
                "fees.rebate_high_to" => cfg.fees.rebate_high_to = parse_value(line, k, v)?,
                "fees.standard_bps" => cfg.fees.standard_bps = parse_value(line, k, v)?,
                "fees.auction_bps" => cfg.fees.auction_bps = parse_value(line, k, v)?,
                _ => return Err(Error::Config(format!("line {line}: unknown key {k}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.session.validate()?;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.grid_step_s > 0.0) {
            return bad("grid.step_seconds must be positive");
        }
        if self.preaverage_window == 0 {
            return bad("preaverage.window must be at least 1");
        }
        if !(self.h_vol_s > self.h_mean_s && self.h_mean_s > 0.0) {
            return bad("bandwidths must satisfy h_vol > h_mean > 0");
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return bad("db.confidence must lie in (0, 1)");
        }
        if self.cv_paths < 1000 && self.critical_value.is_none() {
            return bad("db.cv_paths must be at least 1000");
        }
        if self.critical_value.is_some_and(|c| c >= 0.0) {
            return bad("db.critical_value must be negative");
        }
        if !(self.pressure_tail > 0.0 && self.pressure_tail < 1.0) {
            return bad("pressure.tail_fraction must lie in (0, 1)");
        }
        if self.systematic_threshold < 2 {
            return bad("db.systematic_threshold must be at least 2");
        }
        self.fees.validate()
    }
}
