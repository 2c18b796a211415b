//! Uniform interval grids over a session or an event window.
//!
//! Intervals are right-closed, `(end - step, end]`, so an event stamped on
//! a boundary belongs to the interval it closes. The very first interval
//! also owns its left edge, and a trailing partial interval is dropped.

use crate::error::{Error, Result};
use crate::types::{Micros, SessionSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub origin: Micros,
    pub step: Micros,
    pub len: usize,
}

impl Grid {
    /// Grid of whole steps covering `[origin, origin + span]`.
    pub fn covering(origin: Micros, span: Micros, step: Micros) -> Result<Grid> {
        if step.0 <= 0 {
            return Err(Error::InvalidArgument(format!(
                "grid step must be positive, got {}us",
                step.0
            )));
        }
        let len = (span.0.max(0) / step.0) as usize;
        Ok(Grid { origin, step, len })
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// End instant of interval `k` (0-based).
    pub fn end(&self, k: usize) -> Micros {
        Micros(self.origin.0 + (k as i64 + 1) * self.step.0)
    }

    pub fn start(&self, k: usize) -> Micros {
        Micros(self.origin.0 + k as i64 * self.step.0)
    }

    /// Interval ends in order.
    pub fn instants(&self) -> impl Iterator<Item = Micros> + '_ {
        (0..self.len).map(|k| self.end(k))
    }

    /// Interval holding `t`, or `None` outside the grid.
    pub fn interval_of(&self, t: Micros) -> Option<usize> {
        let rel = t.0 - self.origin.0;
        if rel < 0 {
            return None;
        }
        let k = if rel == 0 {
            0
        } else {
            ((rel - 1) / self.step.0) as usize
        };
        (k < self.len).then_some(k)
    }
}

/// Session grid with a step given in seconds.
pub fn session_grid(session: &SessionSpec, step_s: f64) -> Result<Grid> {
    if !(step_s > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "grid step must be positive, got {step_s}"
        )));
    }
    Grid::covering(
        Micros(0),
        session.end(),
        Micros::from_secs_f64(step_s),
    )
}
