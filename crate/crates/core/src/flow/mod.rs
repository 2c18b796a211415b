//! Order-flow measures around events: imbalances, price impact, selling
//! pressure, P&L and descriptive statistics.

pub mod descriptives;
pub mod identities;
pub mod imbalance;
pub mod impact;
pub mod panel;
pub mod pnl;
pub mod pressure;

pub use descriptives::{dmm_rebate_estimate, event_descriptives, EventDescriptives};
pub use identities::{check_identities, IdentityCheck};
pub use imbalance::{demand_supply_imbalance, trading_imbalance, FlowCell};
pub use impact::{price_impact, PriceImpact};
pub use panel::{ecm_day, event_grid, measure_event, EcmDay, IntervalRecord, MeasuredEvent};
pub use pnl::{event_pnl, PnlSeries};
pub use pressure::{extract_pressure_tail, selling_pressure, PressurePoint, TailSet};
