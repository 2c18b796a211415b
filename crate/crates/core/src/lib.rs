//! Detection of extreme price movements in tick data and measurement of who
//! supplies and consumes liquidity around them.

pub mod config;
pub mod detector;
pub mod econometrics;
pub mod error;
pub mod flow;
pub mod grid;
pub mod io;
pub mod pipeline;
pub mod preprocess;
pub mod report;
pub mod simulator;
pub mod stats;
pub mod tables;
pub mod types;

pub use config::{AnalysisConfig, FeeSchedule};
pub use detector::{DetectorSettings, EpmEvent, EventClass, Phase};
pub use error::{Error, Result};
pub use grid::Grid;
pub use types::{
    Date, DayKey, DayTape, Micros, QuoteEvent, SessionSpec, Side, TradeEvent, TraderCategory,
};
