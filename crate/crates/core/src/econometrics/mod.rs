//! Regression machinery and the model-specific designs.

pub mod cov;
pub mod cross;
pub mod ecm;
pub mod ols;
pub mod var;

pub use cov::{covariance, psd_floor, CoefTable, CovKind};
pub use cross::cross_sectional;
pub use ecm::{ecm_average, ecm_estimate, EcmAverage, EcmEstimate};
pub use ols::{ols, OlsFit};
pub use var::{build_var_design, estimate_var, Design, Flavor, Group};
