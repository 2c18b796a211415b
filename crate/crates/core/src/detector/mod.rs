//! Drift-burst detection: estimators, the null critical value, segmentation
//! of significant dips into events, and simpler alternative flags.

pub mod alt;
pub mod critical;
pub mod kernel;
pub mod segment;

pub use critical::{critical_value, null_path};
pub use kernel::{db_statistic, spot_drift, spot_vol, sweep, DriftBurstSeries, KernelSpec};
pub use segment::{
    classify_systematic, normalize_event_time, segment_events, EpmEvent, EventClass, Phase,
    Rejection, Segmentation,
};

use crate::config::AnalysisConfig;
use crate::error::Result;
use crate::preprocess::{log_returns, preaverage, PriceSeries};
use crate::types::{DayTape, SessionSpec};

/// Everything needed to turn a price path into a statistic series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorSettings {
    pub kernel: KernelSpec,
    pub preaverage_window: usize,
    pub session: SessionSpec,
    /// Evaluation step in seconds.
    pub eval_step: f64,
}

impl Default for DetectorSettings {
    fn default() -> Self {
        DetectorSettings {
            kernel: KernelSpec {
                filter_window: 5,
                ..KernelSpec::default()
            },
            preaverage_window: 5,
            session: SessionSpec::default(),
            eval_step: 1.0,
        }
    }
}

impl From<&AnalysisConfig> for DetectorSettings {
    fn from(cfg: &AnalysisConfig) -> Self {
        DetectorSettings {
            kernel: KernelSpec {
                h_mean: cfg.h_mean_s,
                h_vol: cfg.h_vol_s,
                hac_max_lags: cfg.hac_max_lags,
                min_obs: cfg.min_obs,
                open_correction: true,
                filter_window: cfg.preaverage_window,
            },
            preaverage_window: cfg.preaverage_window,
            session: cfg.session,
            eval_step: 1.0,
        }
    }
}

impl DetectorSettings {
    /// Statistic on the evaluation clock from the analysis start to the close.
    pub fn statistic(&self, raw: &PriceSeries) -> Result<DriftBurstSeries> {
        let kernel = KernelSpec {
            filter_window: self.preaverage_window,
            ..self.kernel
        };
        kernel.validate()?;
        let t0 = self.session.analysis_offset_s() as f64;
        let span = (self.session.length_s() - self.session.analysis_offset_s()) as f64;
        let len = (span / self.eval_step).floor() as usize + 1;
        let smoothed = preaverage(raw, self.preaverage_window)?;
        let ret = log_returns(&smoothed)?;
        Ok(sweep(&ret, &kernel, t0, self.eval_step, len))
    }

    /// Statistic for one stock-day of trades; `None` if too few trades.
    pub fn day_statistic(&self, tape: &DayTape) -> Option<DriftBurstSeries> {
        let raw = PriceSeries::from_trades(&tape.trades);
        self.statistic(&raw).ok()
    }
}
