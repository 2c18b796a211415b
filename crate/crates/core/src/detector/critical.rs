//! Critical value of the session minimum of the statistic under the null.
//!
//! Null paths are driftless unit-volatility Brownian motions observed once a
//! second over the whole session. Each path goes through the same
//! pre-averaging and estimator as real data, so serial dependence introduced
//! by smoothing is reflected in the simulated minima.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::DetectorSettings;
use crate::error::{Error, Result};
use crate::preprocess::PriceSeries;
use crate::stats::quantile;

/// One driftless Brownian path with one observation per second over the
/// session, from stream `path` of `seed`.
pub fn null_path(settings: &DetectorSettings, seed: u64, path: u64) -> Option<PriceSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    let n = settings.session.length_s() as usize;
    let mut times = Vec::with_capacity(n + 1);
    let mut prices = Vec::with_capacity(n + 1);
    let mut p = 0.0;
    for i in 0..=n {
        if i > 0 {
            let z: f64 = StandardNormal.sample(&mut rng);
            p += 1e-4 * z;
        }
        times.push(i as f64);
        prices.push(p);
    }
    PriceSeries::new(times, prices).ok()
}

/// Session minimum of the statistic on one simulated null path.
pub fn null_path_minimum(settings: &DetectorSettings, seed: u64, path: u64) -> Option<f64> {
    settings.statistic(&null_path(settings, seed, path)?).ok()?.min_stat()
}

/// Minima over `n_paths` independent null paths.
pub fn simulate_minima(settings: &DetectorSettings, n_paths: usize, seed: u64) -> Vec<f64> {
    (0..n_paths as u64)
        .into_par_iter()
        .filter_map(|k| null_path_minimum(settings, seed, k))
        .collect()
}

/// Lower `1 - confidence` quantile of the simulated session minima.
pub fn critical_value(
    settings: &DetectorSettings,
    confidence: f64,
    n_paths: usize,
    seed: u64,
) -> Result<f64> {
    if !(0.5..1.0).contains(&confidence) {
        return Err(Error::InvalidArgument(format!(
            "confidence must lie in [0.5, 1), got {confidence}"
        )));
    }
    if n_paths < 1000 {
        return Err(Error::InvalidArgument(format!(
            "at least 1000 simulated paths are needed, got {n_paths}"
        )));
    }
    let minima = simulate_minima(settings, n_paths, seed);
    quantile(&minima, 1.0 - confidence)
        .ok_or_else(|| Error::InvalidArgument("no simulated path produced a statistic".into()))
}
