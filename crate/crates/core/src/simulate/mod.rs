//! Monte Carlo for the lifted system
//!
//! ```text
//! du = e(x) dt
//! dx = -Σ_j a_j u_j e_j'(x) dt + σ dB
//! ```
//!
//! The noise is additive on a flat circle, so Stratonovich and Itô agree.
//! Each trajectory owns a ChaCha8 stream: `seed_from_u64(seed)` followed by
//! `set_stream(trajectory_index)`.

mod stats;

pub use stats::{
    autocorrelation, integrated_autocorr_time, kuiper_critical_1pct, kuiper_uniform, ks_critical_1pct,
    ks_gaussian, ks_circular_and_gaussian, DistanceReport, EnsembleStats, MIN_EFFECTIVE_SAMPLES,
};

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SpectralModel, SystemState};
use crate::scalar::Scalar;
use crate::torus_basis::{circumference, reduce_to_circle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    EulerMaruyama,
    #[default]
    StrangSplitting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorConfig<T> {
    pub dt: T,
    pub scheme: Scheme,
    pub seed: u64,
    pub sigma: T,
}

impl<T: Scalar> IntegratorConfig<T> {
    /// Checks `dt > 0`, `σ ≥ 0`; returns warnings for `dt · max a_j|λ_j| ≥ 0.1`.
    pub fn validate(&self, model: &SpectralModel<T>) -> Result<Vec<String>> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.sigma >= T::zero()) || !self.sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("σ must be nonnegative, got {}", self.sigma)));
        }
        let stiff = model.stiffnesses().into_iter().fold(T::zero(), |a, s| a.max(s));
        let mut warnings = Vec::new();
        if self.dt * stiff >= T::lit(0.1) {
            warnings.push(format!(
                "dt·max a_j|λ_j| = {} ≥ 0.1; the step is coarse for the stiffest mode",
                self.dt * stiff
            ));
        }
        Ok(warnings)
    }
}

/// RNG of trajectory `stream` under `seed`.
pub fn trajectory_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn standard_normal<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

/// One step with a given standard normal draw.
pub fn step<T: Scalar>(
    model: &SpectralModel<T>,
    state: &SystemState<T>,
    config: &IntegratorConfig<T>,
    noise: T,
) -> SystemState<T> {
    let l = model.circumference_param;
    let dt = config.dt;
    let kick = config.sigma * dt.sqrt() * noise;
    match config.scheme {
        Scheme::EulerMaruyama => {
            let (e, _) = model.basis_values(state.x);
            let dx = model.position_drift(&state.u, state.x);
            let u = state.u.iter().zip(&e).map(|(&u, &ej)| u + ej * dt).collect();
            SystemState {
                u,
                x: reduce_to_circle(state.x + dx * dt + kick, l),
            }
        }
        Scheme::StrangSplitting => {
            let half = dt * T::lit(0.5);
            let (e, _) = model.basis_values(state.x);
            let u: Vec<T> = state.u.iter().zip(&e).map(|(&u, &ej)| u + ej * half).collect();
            let x = reduce_to_circle(state.x + model.position_drift(&u, state.x) * dt + kick, l);
            let (e, _) = model.basis_values(x);
            let u = u.iter().zip(&e).map(|(&u, &ej)| u + ej * half).collect();
            SystemState { u, x }
        }
    }
}

/// Recorded states `(t, state)` every `thin` steps, starting with the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<SystemState<T>>,
}

/// Runs `n_steps` steps drawing noise from `rng`; the visitor sees every
/// state after each step.
pub fn run<T: Scalar, R: Rng + ?Sized, F: FnMut(usize, &SystemState<T>)>(
    model: &SpectralModel<T>,
    initial: SystemState<T>,
    config: &IntegratorConfig<T>,
    n_steps: usize,
    rng: &mut R,
    mut visit: F,
) -> SystemState<T> {
    let mut state = initial;
    for i in 0..n_steps {
        let z = standard_normal::<T, R>(rng);
        state = step(model, &state, config, z);
        visit(i + 1, &state);
    }
    state
}

/// Trajectory with stream 0 of `config.seed`.
pub fn simulate_trajectory<T: Scalar>(
    model: &SpectralModel<T>,
    initial: SystemState<T>,
    config: &IntegratorConfig<T>,
    n_steps: usize,
    thin: usize,
) -> Result<Trajectory<T>> {
    simulate_trajectory_stream(model, initial, config, n_steps, thin, 0)
}

pub fn simulate_trajectory_stream<T: Scalar>(
    model: &SpectralModel<T>,
    initial: SystemState<T>,
    config: &IntegratorConfig<T>,
    n_steps: usize,
    thin: usize,
    stream: u64,
) -> Result<Trajectory<T>> {
    if n_steps == 0 || thin == 0 {
        return Err(Error::InvalidArgument("n_steps and thin must be at least 1".into()));
    }
    config.validate(model)?;
    let mut rng = trajectory_rng(config.seed, stream);
    let mut times = vec![T::zero()];
    let mut states = vec![initial.clone()];
    run(model, initial, config, n_steps, &mut rng, |i, s| {
        if i % thin == 0 {
            times.push(config.dt * T::from_usize_lossy(i));
            states.push(s.clone());
        }
    });
    Ok(Trajectory { times, states })
}

/// Draw from `μ̂`: `u_j ~ N(0, 1/(a_j|λ_j|))`, `x` uniform on `[0, 2πL)`.
pub fn sample_invariant<T: Scalar, R: Rng + ?Sized>(model: &SpectralModel<T>, rng: &mut R) -> Result<SystemState<T>> {
    let std = model.std_devs()?;
    let u = std.iter().map(|&s| s * standard_normal::<T, R>(rng)).collect();
    let x = T::lit(rng.random::<f64>()) * circumference(model.circumference_param);
    Ok(SystemState::new(u, x, model.circumference_param))
}

/// Exact transition of the collapsed OU process over time `t`:
/// `N(e^{-θ_j t} z_j, (1 - e^{-2θ_j t}) / (a_j|λ_j|))`, `θ_j = a_j|λ_j|/(2ν)`.
pub fn sample_ou_exact<T: Scalar, R: Rng + ?Sized>(
    z0: &[T],
    t: T,
    model: &SpectralModel<T>,
    rng: &mut R,
) -> Result<Vec<T>> {
    if !(t >= T::zero()) {
        return Err(Error::InvalidArgument(format!("time must be nonnegative, got {t}")));
    }
    if z0.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: z0.len(),
        });
    }
    let law = model.invariant_law()?;
    let two_vol = T::lit(2.0) * model.total_volume();
    Ok(z0
        .iter()
        .enumerate()
        .map(|(j, &z)| {
            let theta = model.stiffness(j) / two_vol;
            let decay = (-theta * t).exp();
            let var = (T::one() - decay * decay) * law.gaussian_variances[j];
            let draw = standard_normal::<T, R>(rng);
            if t == T::zero() {
                z
            } else {
                decay * z + var.sqrt() * draw
            }
        })
        .collect())
}

/// Endpoints of `n_trajectories` independent runs of `n_steps` steps,
/// each started from `μ̂` on its own stream.
pub fn stationary_endpoints<T: Scalar>(
    model: &SpectralModel<T>,
    config: &IntegratorConfig<T>,
    n_trajectories: usize,
    n_steps: usize,
) -> Result<Vec<SystemState<T>>> {
    config.validate(model)?;
    (0..n_trajectories as u64)
        .map(|k| {
            let mut rng = trajectory_rng(config.seed, k);
            let start = sample_invariant(model, &mut rng)?;
            Ok(run(model, start, config, n_steps, &mut rng, |_, _| {}))
        })
        .collect()
}

/// FNV-1a hash of `(L, frequencies, coefficients)`.
pub fn model_hash<T: Scalar>(model: &SpectralModel<T>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    feed(&model.circumference_param.as_f64().to_le_bytes());
    for (&k, &a) in model.frequencies.iter().zip(&model.frequency_coefficients) {
        feed(&k.to_le_bytes());
        feed(&a.as_f64().to_le_bytes());
    }
    h
}

pub const DUMP_MAGIC: &[u8; 8] = b"SRDTRAJ1";

/// Binary dump: magic `SRDTRAJ1`, then little-endian `u64` model hash,
/// `u64` dimension `d`, `u64` record count, then per record `d + 2`
/// little-endian `f64`: `t, u_1..u_d, x`.
pub fn write_trajectory<T: Scalar, W: Write>(model: &SpectralModel<T>, traj: &Trajectory<T>, mut w: W) -> std::io::Result<()> {
    w.write_all(DUMP_MAGIC)?;
    w.write_all(&model_hash(model).to_le_bytes())?;
    w.write_all(&(model.dim() as u64).to_le_bytes())?;
    w.write_all(&(traj.states.len() as u64).to_le_bytes())?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        w.write_all(&t.as_f64().to_le_bytes())?;
        for u in &s.u {
            w.write_all(&u.as_f64().to_le_bytes())?;
        }
        w.write_all(&s.x.as_f64().to_le_bytes())?;
    }
    Ok(())
}

/// Reads a dump back as `(model hash, records)`.
pub fn read_trajectory(bytes: &[u8]) -> Result<(u64, Vec<Vec<f64>>)> {
    let bad = || Error::InvalidArgument("not a trajectory dump".into());
    if bytes.len() < 32 || &bytes[..8] != DUMP_MAGIC {
        return Err(bad());
    }
    let word = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
    let (hash, dim, n) = (word(8), word(16) as usize, word(24) as usize);
    let width = dim + 2;
    if bytes.len() != 32 + 8 * width * n {
        return Err(bad());
    }
    let records = (0..n)
        .map(|r| {
            (0..width)
                .map(|c| f64::from_le_bytes(bytes[32 + 8 * (r * width + c)..][..8].try_into().unwrap()))
                .collect()
        })
        .collect();
    Ok((hash, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn pair() -> SpectralModel<f64> {
        SpectralModel::torus(1.0, &[1], &[1.0]).unwrap()
    }

    fn config(scheme: Scheme, sigma: f64, dt: f64) -> IntegratorConfig<f64> {
        IntegratorConfig {
            dt,
            scheme,
            seed: 42,
            sigma,
        }
    }

    #[test]
    fn zero_state_without_noise() {
        let m = pair();
        for scheme in [Scheme::EulerMaruyama, Scheme::StrangSplitting] {
            let c = config(scheme, 0.0, 1e-3);
            let s0 = SystemState::new(vec![0.0, 0.0], 0.7, 1.0);
            let s1 = step(&m, &s0, &c, 0.3);
            let (e, _) = m.basis_values(0.7);
            if scheme == Scheme::EulerMaruyama {
                assert_eq!(s1.x, 0.7);
            }
            assert!((s1.x - 0.7).abs() < 1e-6);
            for j in 0..2 {
                assert!((s1.u[j] - e[j] * 1e-3).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn halving_step_is_second_order_consistent() {
        let m = SpectralModel::torus(1.3, &[1, 2], &[1.0, 0.5]).unwrap();
        let s0 = SystemState::new(vec![0.4, -0.3, 0.8, 0.1], 1.1, 1.3);
        let dt = 1e-2;
        for scheme in [Scheme::EulerMaruyama, Scheme::StrangSplitting] {
            let one = step(&m, &s0, &config(scheme, 0.0, dt), 0.0);
            let c2 = config(scheme, 0.0, dt / 2.0);
            let two = step(&m, &step(&m, &s0, &c2, 0.0), &c2, 0.0);
            let diff: f64 = one.u.iter().zip(&two.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(diff < 10.0 * dt * dt, "{scheme:?}: {diff}");
        }
    }

    #[test]
    fn positions_stay_on_circle_and_runs_repeat() {
        let m = pair();
        let c = config(Scheme::StrangSplitting, 2.0, 1e-2);
        let s0 = SystemState::new(vec![1.0, -1.0], 0.0, 1.0);
        let a = simulate_trajectory(&m, s0.clone(), &c, 2000, 7).unwrap();
        let b = simulate_trajectory(&m, s0, &c, 2000, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.states.iter().all(|s| (0.0..2.0 * PI).contains(&s.x)));
        assert_eq!(a.states.len(), 1 + 2000 / 7);
    }

    #[test]
    fn noiseless_run_stays_bounded() {
        let m = pair();
        let c = config(Scheme::StrangSplitting, 0.0, 1e-3);
        let mut rng = trajectory_rng(1, 0);
        let s0 = SystemState::new(vec![0.5, 0.2], 0.3, 1.0);
        let phi0 = m.potential_phi(&s0.u).unwrap();
        let mut max_phi: f64 = phi0;
        run(&m, s0, &c, 1_000_000, &mut rng, |_, s| {
            max_phi = max_phi.max(m.potential_phi(&s.u).unwrap());
        });
        assert!(max_phi.is_finite() && max_phi < 100.0 * (1.0 + phi0), "{max_phi}");
    }

    #[test]
    fn warns_on_coarse_step() {
        let m = SpectralModel::torus(0.1, &[1], &[1.0]).unwrap();
        let w = config(Scheme::StrangSplitting, 1.0, 1e-2).validate(&m).unwrap();
        assert_eq!(w.len(), 1);
        assert!(config(Scheme::StrangSplitting, 1.0, 0.0).validate(&m).is_err());
    }

    #[test]
    fn ou_sampler() {
        let m = pair();
        let mut rng = trajectory_rng(3, 0);
        let z0 = vec![1.5, -0.5];
        assert_eq!(sample_ou_exact(&z0, 0.0, &m, &mut rng).unwrap(), z0);
        assert!(sample_ou_exact(&z0, -1.0, &m, &mut rng).is_err());
        let theta = m.stiffness(0) / (2.0 * m.total_volume());
        assert!((theta - 1.0 / (4.0 * PI)).abs() < 1e-15);
        let t = 50.0 / theta;
        let n = 100_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..n {
            let z = sample_ou_exact(&z0, t, &m, &mut rng).unwrap();
            sum += z[0];
            sq += z[0] * z[0];
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        // variance 1, se of mean 1/√n, se of variance ≈ √(2/n)
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn dump_round_trip() {
        let m = pair();
        let c = config(Scheme::EulerMaruyama, 1.0, 1e-3);
        let t = simulate_trajectory(&m, SystemState::new(vec![0.1, 0.2], 0.3, 1.0), &c, 10, 2).unwrap();
        let mut buf = Vec::new();
        write_trajectory(&m, &t, &mut buf).unwrap();
        let (hash, recs) = read_trajectory(&buf).unwrap();
        assert_eq!(hash, model_hash(&m));
        assert_eq!(recs.len(), t.states.len());
        assert_eq!(recs[3][0], t.times[3]);
        assert_eq!(recs[3][3], t.states[3].x);
        assert!(read_trajectory(&buf[..20]).is_err());
    }

    #[test]
    fn single_precision_step() {
        let m = SpectralModel::<f32>::torus(1.0, &[1], &[1.0]).unwrap();
        let c = IntegratorConfig {
            dt: 1e-3f32,
            scheme: Scheme::StrangSplitting,
            seed: 0,
            sigma: 1.0,
        };
        let t = simulate_trajectory(&m, SystemState::new(vec![0.0, 0.0], 0.0, 1.0), &c, 100, 10).unwrap();
        assert_eq!(t.states.len(), 11);
    }
}
