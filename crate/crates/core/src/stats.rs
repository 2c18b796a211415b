//! Small descriptive and distributional helpers.

use statrs::distribution::{ContinuousCDF, Normal};

pub fn mean(x: &[f64]) -> Option<f64> {
    (!x.is_empty()).then(|| x.iter().sum::<f64>() / x.len() as f64)
}

/// Sample standard deviation (`n - 1` denominator).
pub fn std_dev(x: &[f64]) -> Option<f64> {
    if x.len() < 2 {
        return None;
    }
    let m = mean(x)?;
    let ss: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    Some((ss / (x.len() - 1) as f64).sqrt())
}

/// Mean and sample standard deviation of `x`, for z-scoring.
pub fn moments(x: &[f64]) -> Option<(f64, f64)> {
    Some((mean(x)?, std_dev(x)?))
}

/// `(v - mean) / sd`; zero everywhere when `sd` is zero or undefined.
pub fn zscore(v: f64, m: Option<(f64, f64)>) -> f64 {
    match m {
        Some((mu, sd)) if sd > 0.0 => (v - mu) / sd,
        _ => 0.0,
    }
}

/// Linearly interpolated quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

pub fn quantile(x: &[f64], p: f64) -> Option<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub q10: f64,
    pub median: f64,
    pub q90: f64,
}

pub fn summarize(x: &[f64]) -> Option<Summary> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    Some(Summary {
        mean: mean(&v)?,
        std: std_dev(&v).unwrap_or(f64::NAN),
        min: v[0],
        max: v[v.len() - 1],
        q10: quantile_sorted(&v, 0.1)?,
        median: quantile_sorted(&v, 0.5)?,
        q90: quantile_sorted(&v, 0.9)?,
    })
}

/// Two-sided p-value of a z statistic.
pub fn normal_p_value(z: f64) -> f64 {
    let n = Normal::standard();
    2.0 * n.cdf(-z.abs())
}

pub fn normal_cdf(z: f64) -> f64 {
    Normal::standard().cdf(z)
}

/// Significance marker at the 10%, 5% and 1% levels.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

/// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of the KS statistic `d` for sample size `n`, with the
/// Stephens small-sample adjustment.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut p = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = 2.0 * (-1f64).powi(j - 1) * (-2.0 * jf * jf * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}
