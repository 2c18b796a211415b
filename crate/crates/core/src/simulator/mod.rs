//! Synthetic markets with injected drift bursts and scripted trader
//! categories, used as ground truth for the detector and the models.

pub mod battery;
pub mod engine;
pub mod inventory;
pub mod scenario;

pub use battery::{null_battery, power_battery, NullReport, PowerReport};
pub use engine::{day_seed, scenario_days, simulate, simulate_day, SimDay, TruthBurst};
pub use inventory::{synthetic_ecm_day, InventoryProcess};
pub use scenario::{AgentSpec, BurstSpec, Direction, ScriptPhase, SimScenario, StockSpec, VolProfile};

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::io::write_events_file;

pub const TRUTH_HEADER: &str = "stock,date,onset_s,tau_s,recovery_end_s,magnitude,direction,script,realized_return";

/// Write every tape as an event file plus `truth.csv` listing the bursts.
pub fn write_simulation(days: &[SimDay], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for d in days {
        write_events_file(&d.tape, dir)?;
    }
    let mut f = std::io::BufWriter::new(fs::File::create(dir.join("truth.csv"))?);
    writeln!(f, "{TRUTH_HEADER}")?;
    for t in days.iter().flat_map(|d| &d.truth) {
        writeln!(
            f,
            "{},{},{:.3},{:.3},{:.3},{},{},{},{:.8}",
            t.stock,
            t.date,
            t.onset_s,
            t.tau_s,
            t.recovery_end_s,
            t.magnitude,
            t.direction.as_str(),
            t.script,
            t.realized_return
        )?;
    }
    f.flush()?;
    Ok(())
}
