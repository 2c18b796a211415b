//! Left-sided exponential kernel estimators of spot drift and spot
//! volatility, and the studentized drift statistic built from them.
//!
//! A return on `[start_i, end_i]` enters the estimate at instant `t` only once
//! it is fully observed (`end_i <= t`); its weight is `K((start_i - t)/h)` with
//! `K(x) = exp(-|x|) 1(x <= 0)`.
//!
//! Two evaluation paths exist: the direct sums ([`spot_drift`], [`spot_vol`],
//! [`db_statistic`]) and the incremental one-second sweep ([`sweep`]), which
//! carries exponentially decayed running sums. Both must agree to 1e-12.

use crate::error::{Error, Result};
use crate::preprocess::{preaverage_weights, Returns};

/// `K(x) = exp(-|x|)` for `x <= 0`, zero otherwise.
pub fn kernel(x: f64) -> f64 {
    if x <= 0.0 {
        x.exp()
    } else {
        0.0
    }
}

/// `∫ K(x)^2 dx` for the left-sided exponential kernel.
pub const KERNEL_CONSTANT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    /// Drift bandwidth, seconds.
    pub h_mean: f64,
    /// Volatility bandwidth, seconds.
    pub h_vol: f64,
    /// Cap on Bartlett lags in the variance correction.
    pub hac_max_lags: usize,
    /// Minimum returns inside three bandwidths before an estimate is reported.
    pub min_obs: usize,
    /// Rescale the variance sum by the kernel mass actually observed since the
    /// first return, so the estimate is not biased low right after the open.
    pub open_correction: bool,
    /// Pre-averaging window the returns were built with (1 for raw returns).
    pub filter_window: usize,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec {
            h_mean: 300.0,
            h_vol: 1500.0,
            hac_max_lags: 10,
            min_obs: 10,
            open_correction: true,
            filter_window: 1,
        }
    }
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.h_vol > self.h_mean && self.h_mean > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "bandwidths must satisfy h_vol > h_mean > 0, got {} and {}",
                self.h_vol, self.h_mean
            )));
        }
        Ok(())
    }

    pub fn kernel_constant(&self) -> f64 {
        KERNEL_CONSTANT
    }

    /// Expected Bartlett long-run variance of unit-variance white noise passed
    /// through the pre-averaging filter, relative to the truth. Dividing by it
    /// removes the truncation bias for filtered returns; it is 1 for raw data.
    pub fn filter_bias(&self, hac_lags: usize) -> f64 {
        let w = preaverage_weights(self.filter_window.max(1));
        let gamma = |l: usize| -> f64 { w.iter().zip(w.iter().skip(l)).map(|(a, b)| a * b).sum() };
        let mut c = gamma(0);
        for l in 1..=hac_lags {
            c += 2.0 * (1.0 - l as f64 / (hac_lags as f64 + 1.0)) * gamma(l);
        }
        c
    }

    /// Bartlett lag count for `n_local` nearby returns.
    pub fn auto_lags(&self, n_local: usize) -> usize {
        let l = (n_local as f64).cbrt().ceil() as usize;
        l.min(self.hac_max_lags)
    }
}

/// Returns fully observed by `t`: indices `0..n`.
fn observed(ret: &Returns, t: f64) -> usize {
    ret.end.partition_point(|&e| e <= t)
}

/// Count of observed returns starting within `3h` before `t`.
fn local_count(ret: &Returns, n: usize, t: f64, h: f64) -> usize {
    let lo = ret.start[..n].partition_point(|&s| s < t - 3.0 * h);
    n - lo
}

/// `(1/h) Σ K((start_i - t)/h) r_i`, or `None` with too little local data.
pub fn spot_drift(ret: &Returns, t: f64, spec: &KernelSpec) -> Option<f64> {
    let n = observed(ret, t);
    if local_count(ret, n, t, spec.h_mean) < spec.min_obs {
        return None;
    }
    let h = spec.h_mean;
    let s: f64 = (0..n)
        .map(|i| kernel((ret.start[i] - t) / h) * ret.values[i])
        .sum();
    Some(s / h)
}

/// Kernel variance with `hac_lags` Bartlett-weighted cross products; a
/// negative corrected value falls back to the plain sum of squares.
pub fn spot_vol(ret: &Returns, t: f64, spec: &KernelSpec, hac_lags: usize) -> Option<f64> {
    let n = observed(ret, t);
    if local_count(ret, n, t, spec.h_vol) < spec.min_obs {
        return None;
    }
    let h = spec.h_vol;
    let w: Vec<f64> = (0..n).map(|i| kernel((ret.start[i] - t) / h)).collect();
    let r = &ret.values;
    let plain: f64 = (0..n).map(|i| w[i] * r[i] * r[i]).sum();
    let mut cross = 0.0;
    for l in 1..=hac_lags {
        let bw = 1.0 - l as f64 / (hac_lags as f64 + 1.0);
        let c: f64 = (l..n).map(|i| w[i] * r[i] * r[i - l]).sum();
        cross += 2.0 * bw * c;
    }
    let adjusted = plain + cross;
    let mut var = if adjusted < 0.0 { plain } else { adjusted } / h / spec.filter_bias(hac_lags);
    if spec.open_correction && n > 0 {
        var /= observed_mass(t - ret.start[0], h);
    }
    Some(var.sqrt())
}

fn observed_mass(elapsed: f64, h: f64) -> f64 {
    -(-elapsed / h).exp_m1()
}

/// `sqrt(h_mean / 𝒦) · μ̂ / σ̂`, with the lag count chosen from local data.
pub fn db_statistic(ret: &Returns, t: f64, spec: &KernelSpec) -> Option<f64> {
    let n = observed(ret, t);
    let lags = spec.auto_lags(local_count(ret, n, t, spec.h_vol));
    let mu = spot_drift(ret, t, spec)?;
    let sigma = spot_vol(ret, t, spec, lags)?;
    studentize(mu, sigma, spec)
}

fn studentize(mu: f64, sigma: f64, spec: &KernelSpec) -> Option<f64> {
    (sigma > 0.0).then(|| (spec.h_mean / spec.kernel_constant()).sqrt() * mu / sigma)
}

/// Drift, volatility and statistic on a regular evaluation clock.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftBurstSeries {
    /// First evaluation instant, seconds since open.
    pub t0: f64,
    /// Evaluation step, seconds.
    pub step: f64,
    pub mu: Vec<Option<f64>>,
    pub sigma: Vec<Option<f64>>,
    pub stat: Vec<Option<f64>>,
}

impl DriftBurstSeries {
    pub fn len(&self) -> usize {
        self.stat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stat.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.step
    }

    pub fn min_stat(&self) -> Option<f64> {
        self.stat.iter().flatten().copied().reduce(f64::min)
    }
}

/// Exponentially decayed running sum, kept relative to the current instant.
struct Decayed {
    h: f64,
    sums: Vec<f64>,
}

impl Decayed {
    fn new(h: f64, width: usize) -> Self {
        Decayed {
            h,
            sums: vec![0.0; width],
        }
    }

    fn decay(&mut self, factor: f64) {
        for s in &mut self.sums {
            *s *= factor;
        }
    }
}

/// Evaluate the statistic at `t0, t0 + step, ...` (`len` instants) in one pass.
pub fn sweep(ret: &Returns, spec: &KernelSpec, t0: f64, step: f64, len: usize) -> DriftBurstSeries {
    let max_l = spec.hac_max_lags;
    let mut drift = Decayed::new(spec.h_mean, 1);
    // slot 0: squares, slot l: lag-l cross products
    let mut var = Decayed::new(spec.h_vol, max_l + 1);
    let decay_m = (-step / spec.h_mean).exp();
    let decay_v = (-step / spec.h_vol).exp();
    let bias: Vec<f64> = (0..=max_l).map(|l| spec.filter_bias(l)).collect();
    let r = &ret.values;
    let n = r.len();
    let (mut next, mut lo_m, mut lo_v) = (0usize, 0usize, 0usize);
    let mut out = DriftBurstSeries {
        t0,
        step,
        mu: Vec::with_capacity(len),
        sigma: Vec::with_capacity(len),
        stat: Vec::with_capacity(len),
    };
    for k in 0..len {
        let t = t0 + k as f64 * step;
        if k > 0 {
            drift.decay(decay_m);
            var.decay(decay_v);
        }
        while next < n && ret.end[next] <= t {
            let i = next;
            let wm = kernel((ret.start[i] - t) / drift.h);
            let wv = kernel((ret.start[i] - t) / var.h);
            drift.sums[0] += wm * r[i];
            var.sums[0] += wv * r[i] * r[i];
            for l in 1..=max_l.min(i) {
                var.sums[l] += wv * r[i] * r[i - l];
            }
            next += 1;
        }
        while lo_m < next && ret.start[lo_m] < t - 3.0 * spec.h_mean {
            lo_m += 1;
        }
        while lo_v < next && ret.start[lo_v] < t - 3.0 * spec.h_vol {
            lo_v += 1;
        }
        let n_m = next - lo_m;
        let n_v = next - lo_v;
        let mu = (n_m >= spec.min_obs).then(|| drift.sums[0] / spec.h_mean);
        let sigma = (n_v >= spec.min_obs).then(|| {
            let lags = spec.auto_lags(n_v);
            let plain = var.sums[0];
            let mut adjusted = plain;
            for l in 1..=lags {
                let bw = 1.0 - l as f64 / (lags as f64 + 1.0);
                adjusted += 2.0 * bw * var.sums[l];
            }
            let mut v = if adjusted < 0.0 { plain } else { adjusted } / spec.h_vol / bias[lags];
            if spec.open_correction && next > 0 {
                v /= observed_mass(t - ret.start[0], spec.h_vol);
            }
            v.sqrt()
        });
        let stat = match (mu, sigma) {
            (Some(m), Some(s)) => studentize(m, s, spec),
            _ => None,
        };
        out.mu.push(mu);
        out.sigma.push(sigma);
        out.stat.push(stat);
    }
    out
}
