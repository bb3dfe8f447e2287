//! Streaming moments, circular histogram, autocorrelation, and one-sample
//! distances against the invariant law.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::{InvariantLaw, SystemState};

/// Effective sample size below which distance tests refuse to run.
pub const MIN_EFFECTIVE_SAMPLES: f64 = 10_000.0;

/// Per-coordinate mean and variance of `u` plus a histogram of `x`.
/// `merge` is exact-commutative.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub count: u64,
    pub mean: Vec<f64>,
    m2: Vec<f64>,
    pub x_hist: Vec<u64>,
    pub period: f64,
}

impl EnsembleStats {
    pub fn new(dim: usize, n_bins: usize, period: f64) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
            x_hist: vec![0; n_bins.max(1)],
            period,
        }
    }

    pub fn push(&mut self, state: &SystemState<f64>) {
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &u) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(&state.u) {
            let delta = u - *m;
            *m += delta / n;
            *s += delta * (u - *m);
        }
        let bins = self.x_hist.len();
        let b = ((state.x / self.period) * bins as f64) as usize;
        self.x_hist[b.min(bins - 1)] += 1;
    }

    pub fn merge(&self, other: &Self) -> Self {
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        if n == 0.0 {
            return self.clone();
        }
        let mut mean = Vec::with_capacity(self.mean.len());
        let mut m2 = Vec::with_capacity(self.mean.len());
        for j in 0..self.mean.len() {
            let delta = other.mean[j] - self.mean[j];
            mean.push((na * self.mean[j] + nb * other.mean[j]) / n);
            m2.push(self.m2[j] + other.m2[j] + delta * delta * na * nb / n);
        }
        Self {
            count: self.count + other.count,
            mean,
            m2,
            x_hist: self.x_hist.iter().zip(&other.x_hist).map(|(a, b)| a + b).collect(),
            period: self.period,
        }
    }

    /// Unbiased sample variances.
    pub fn variances(&self) -> Vec<f64> {
        let d = (self.count.max(2) - 1) as f64;
        self.m2.iter().map(|s| s / d).collect()
    }

    pub fn histogram_mass(&self) -> Vec<f64> {
        let n = self.count.max(1) as f64;
        self.x_hist.iter().map(|&c| c as f64 / n).collect()
    }
}

/// Normalised autocorrelation `ρ(0..=max_lag)` by FFT.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Vec<f64> {
    let n = series.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .map(|&v| Complex::new(v - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let c0 = buf[0].re;
    if c0 == 0.0 {
        return vec![1.0; max_lag.min(n - 1) + 1];
    }
    (0..=max_lag.min(n - 1)).map(|k| buf[k].re / c0).collect()
}

/// Integrated autocorrelation time `τ = 1 + 2 Σ_{t ≤ M} ρ(t)` with the
/// self-consistent window `M ≥ c τ(M)`, `c = 5`. In units of samples.
pub fn integrated_autocorr_time(series: &[f64]) -> f64 {
    let rho = autocorrelation(series, series.len().saturating_sub(1));
    let mut tau = 1.0;
    for (m, &r) in rho.iter().enumerate().skip(1) {
        tau += 2.0 * r;
        if m as f64 >= 5.0 * tau {
            return tau.max(1.0);
        }
    }
    tau.max(1.0)
}

/// `sup |F_n - N(0, variance)|`.
pub fn ks_gaussian(samples: &[f64], variance: f64) -> f64 {
    let normal = Normal::new(0.0, variance.sqrt()).expect("positive variance");
    ks_against(samples, |x| normal.cdf(x))
}

fn ks_against<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Kuiper `V = D⁺ + D⁻` of points on `[0, period)` against the uniform law.
pub fn kuiper_uniform(samples: &[f64], period: f64) -> f64 {
    let mut s: Vec<f64> = samples.iter().map(|x| x / period).collect();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d_plus = 0.0f64;
    let mut d_minus = 0.0f64;
    for (i, &f) in s.iter().enumerate() {
        d_plus = d_plus.max((i + 1) as f64 / n - f);
        d_minus = d_minus.max(f - i as f64 / n);
    }
    d_plus + d_minus
}

/// Asymptotic 1% critical value of the one-sample KS distance.
pub fn ks_critical_1pct(n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    1.628 / (sn + 0.12 + 0.11 / sn)
}

/// 1% critical value of Kuiper's `V` with Stephens' finite-sample correction.
pub fn kuiper_critical_1pct(n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    2.001 / (sn + 0.155 + 0.24 / sn)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceReport {
    pub n_samples: usize,
    pub n_effective: f64,
    pub ks_u: Vec<f64>,
    pub kuiper_x: f64,
    pub ks_critical: f64,
    pub kuiper_critical: f64,
}

/// KS of each `u` marginal against its Gaussian and Kuiper of `x` against
/// the uniform law. `n_effective` is the sample count after accounting for
/// correlation; it must reach [`MIN_EFFECTIVE_SAMPLES`].
pub fn ks_circular_and_gaussian(
    states: &[SystemState<f64>],
    law: &InvariantLaw<f64>,
    n_effective: f64,
) -> Result<DistanceReport> {
    if n_effective < MIN_EFFECTIVE_SAMPLES {
        return Err(Error::InsufficientSamples {
            got: n_effective,
            required: MIN_EFFECTIVE_SAMPLES,
        });
    }
    let d = law.gaussian_variances.len();
    let ks_u = (0..d)
        .map(|j| {
            let col: Vec<f64> = states.iter().map(|s| s.u[j]).collect();
            ks_gaussian(&col, law.gaussian_variances[j])
        })
        .collect();
    let xs: Vec<f64> = states.iter().map(|s| s.x).collect();
    let n = states.len();
    Ok(DistanceReport {
        n_samples: n,
        n_effective,
        ks_u,
        kuiper_x: kuiper_uniform(&xs, law.uniform_mass),
        ks_critical: ks_critical_1pct(n_effective as usize),
        kuiper_critical: kuiper_critical_1pct(n_effective as usize),
    })
}
