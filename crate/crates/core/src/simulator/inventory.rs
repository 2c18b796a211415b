//! Synthetic inventory paths with known error-correction coefficients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::flow::EcmDay;
use crate::types::{Date, TraderCategory};

/// `Δy_t = (delta + delta_drop·D_t) y_{t-1} + e_t` with unit innovations,
/// on a full-day grid with one declining window per day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InventoryProcess {
    pub delta: f64,
    pub delta_drop: f64,
    pub intervals: usize,
    /// Length of the declining window in intervals.
    pub drop_len: usize,
    /// Per-interval log midquote volatility.
    pub mid_sd: f64,
}

impl Default for InventoryProcess {
    fn default() -> Self {
        InventoryProcess {
            delta: -0.05,
            delta_drop: -0.05,
            intervals: 3060,
            drop_len: 60,
            mid_sd: 1e-4,
        }
    }
}

/// One day of the process, carried by `category`.
pub fn synthetic_ecm_day(p: &InventoryProcess, category: TraderCategory, seed: u64, day: u32) -> EcmDay {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(day as u64);
    let n = p.intervals;
    let start = rng.random_range(n / 5..n / 2);
    let drop: Vec<bool> = (0..n).map(|t| start <= t && t < start + p.drop_len).collect();
    let recovery: Vec<bool> = (0..n)
        .map(|t| start + p.drop_len <= t && t < start + 4 * p.drop_len)
        .collect();
    let mut inventory = vec![[0.0; TraderCategory::COUNT]; n];
    let mut log_mid = Vec::with_capacity(n);
    let (mut y, mut m) = (0.0, 50f64.ln());
    for t in 0..n {
        let e: f64 = StandardNormal.sample(&mut rng);
        let z: f64 = StandardNormal.sample(&mut rng);
        if t > 0 {
            let d = if drop[t] { p.delta + p.delta_drop } else { p.delta };
            y += d * y + e;
            m += p.mid_sd * z;
        }
        inventory[t][category.index()] = y;
        log_mid.push(Some(m));
    }
    EcmDay {
        stock: "SYN".into(),
        date: Date(20130102),
        inventory,
        log_mid,
        drop,
        recovery,
    }
}
