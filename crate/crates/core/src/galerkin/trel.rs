//! `t_rel = inf{t : ‖exp(tA)‖₂ ≤ e⁻¹}` on the mean-zero subspace.
//!
//! `A_σ + A_σᵀ ≤ 0`, so `‖exp(tA)‖` is nonincreasing and bisection applies.
//! The norm is the maximum over rotation sectors; a sector whose norm at the
//! current best time is already below `e⁻¹` cannot raise the answer.

use nalgebra::DMatrix;
use serde::Serialize;

use super::sectors::{project_sector, RotationSectors};
use super::{build_operator, GalerkinOperator, Truncation};
use crate::error::{Error, Result};
use crate::model::SpectralModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrelOptions {
    /// Bisection stops when the bracket is below `rel_tol · t`.
    pub rel_tol: f64,
    /// Bracket search gives up beyond this time.
    pub t_max: f64,
    /// Relative change between `(D, J)` and `(D+2, J+2)` accepted as converged.
    pub convergence_threshold: f64,
}

impl Default for TrelOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            t_max: 1e6,
            convergence_threshold: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrelMeasurement {
    pub t_rel: f64,
    pub sigma: f64,
    pub truncation: Truncation,
    pub basis_size: usize,
    /// Rotation charge of the sector attaining the maximum.
    pub binding_charge: u32,
    /// `‖exp(t_rel A)‖₂`, at most `e⁻¹`.
    pub norm_at_t_rel: f64,
}

/// Largest singular value of `exp(t B)`.
pub fn exp_norm(b: &DMatrix<f64>, t: f64) -> f64 {
    if b.nrows() == 0 {
        return 0.0;
    }
    let e = (b * t).exp();
    e.singular_values().max()
}

/// Sector matrices `B_c(σ) = Q_cᵀ A_σ Q_c`, charges ascending.
pub fn sector_matrices(model: &SpectralModel<f64>, op: &GalerkinOperator) -> Result<Vec<(u32, DMatrix<f64>)>> {
    let sectors = RotationSectors::new(model, &op.basis)?;
    let s2 = op.sigma * op.sigma;
    Ok(sectors
        .sectors
        .iter()
        .map(|sec| {
            let (b0, bd) = project_sector(op, sec);
            (sec.charge, b0 + bd * s2)
        })
        .collect())
}

/// `inf{t : ‖exp(tB)‖ ≤ e⁻¹}` for `t` above `lower`, assuming the norm at
/// `lower` exceeds `e⁻¹`.
fn bisect(b: &DMatrix<f64>, lower: f64, opts: &TrelOptions) -> Result<(f64, f64)> {
    let target = (-1.0f64).exp();
    let mut lo = lower;
    let mut hi = if lower > 0.0 { 2.0 * lower } else { 1.0 };
    let mut norm_hi = exp_norm(b, hi);
    while norm_hi > target {
        lo = hi;
        hi *= 2.0;
        if hi > opts.t_max {
            return Err(Error::BracketExhausted { t_max: opts.t_max });
        }
        norm_hi = exp_norm(b, hi);
    }
    while hi - lo > opts.rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        let n = exp_norm(b, mid);
        if n > target {
            lo = mid;
        } else {
            hi = mid;
            norm_hi = n;
        }
    }
    Ok((hi, norm_hi))
}

/// `t_rel` from a list of invariant blocks.
pub fn trel_of_blocks(blocks: &[(u32, DMatrix<f64>)], opts: &TrelOptions) -> Result<(f64, u32, f64)> {
    let target = (-1.0f64).exp();
    let mut best = 0.0;
    let mut charge = 0;
    let mut norm = 0.0;
    for (c, b) in blocks {
        if b.nrows() == 0 {
            continue;
        }
        if best > 0.0 && exp_norm(b, best) <= target {
            continue;
        }
        let (t, n) = bisect(b, best, opts)?;
        best = t;
        charge = *c;
        norm = n;
    }
    Ok((best, charge, norm))
}

pub fn measure_trel(model: &SpectralModel<f64>, op: &GalerkinOperator, opts: &TrelOptions) -> Result<TrelMeasurement> {
    let blocks = sector_matrices(model, op)?;
    let (t_rel, binding_charge, norm_at_t_rel) = trel_of_blocks(&blocks, opts)?;
    Ok(TrelMeasurement {
        t_rel,
        sigma: op.sigma,
        truncation: op.basis.truncation,
        basis_size: op.len(),
        binding_charge,
        norm_at_t_rel,
    })
}

/// `t_rel` from the full dense matrix with the constant removed; reference
/// for the sector computation on small truncations.
pub fn measure_trel_dense(op: &GalerkinOperator, opts: &TrelOptions) -> Result<f64> {
    let a = op.a_sigma_dense();
    let n = a.nrows();
    let b = a.view((1, 1), (n - 1, n - 1)).into_owned();
    let (t, _, _) = trel_of_blocks(&[(0, b)], opts)?;
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergedTrel {
    pub coarse: TrelMeasurement,
    pub fine: TrelMeasurement,
    /// `|fine - coarse| / fine`
    pub rel_delta: f64,
    pub converged: bool,
}

impl ConvergedTrel {
    pub fn t_rel(&self) -> f64 {
        self.fine.t_rel
    }

    pub fn require_converged(self, threshold: f64) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                rel_delta: self.rel_delta,
                threshold,
            })
        }
    }
}

/// Measures at `(D, J)` and `(D+2, J+2)` and compares.
pub fn measure_trel_converged(
    model: &SpectralModel<f64>,
    truncation: Truncation,
    sigma: f64,
    opts: &TrelOptions,
) -> Result<ConvergedTrel> {
    let coarse = measure_trel(model, &build_operator(model, truncation, sigma)?, opts)?;
    let fine = measure_trel(model, &build_operator(model, truncation.refined(), sigma)?, opts)?;
    let rel_delta = (fine.t_rel - coarse.t_rel).abs() / fine.t_rel;
    Ok(ConvergedTrel {
        converged: rel_delta < opts.convergence_threshold,
        coarse,
        fine,
        rel_delta,
    })
}

/// Refines `(D, J) → (D+2, J+2)` from `start` until two consecutive
/// refinements each change `t_rel` by less than the threshold, or the
/// degree would exceed `max_degree`. The last comparison is returned either
/// way. A single small step is not trusted: at small `σ` the sequence can
/// stall for one refinement and then move again by several percent.
pub fn refine_until_converged(
    model: &SpectralModel<f64>,
    start: Truncation,
    max_degree: u32,
    sigma: f64,
    opts: &TrelOptions,
) -> Result<ConvergedTrel> {
    let mut coarse = measure_trel(model, &build_operator(model, start, sigma)?, opts)?;
    let mut previous_small = false;
    loop {
        let next = coarse.truncation.refined();
        let fine = measure_trel(model, &build_operator(model, next, sigma)?, opts)?;
        let rel_delta = (fine.t_rel - coarse.t_rel).abs() / fine.t_rel;
        let small = rel_delta < opts.convergence_threshold;
        let converged = small && previous_small;
        if converged || next.max_degree + 2 > max_degree {
            return Ok(ConvergedTrel {
                coarse,
                fine,
                rel_delta,
                converged,
            });
        }
        previous_small = small;
        coarse = fine;
    }
}

/// Largest real part of the spectrum of `A_σ` on the mean-zero subspace.
pub fn spectral_abscissa(model: &SpectralModel<f64>, op: &GalerkinOperator) -> Result<f64> {
    let blocks = sector_matrices(model, op)?;
    let mut worst = f64::NEG_INFINITY;
    for (_, b) in blocks {
        worst = worst.max(block_abscissa(&b)?);
    }
    Ok(worst)
}

pub fn block_abscissa(b: &DMatrix<f64>) -> Result<f64> {
    if b.nrows() == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    let schur = b
        .clone()
        .try_schur(1e-14, 10_000)
        .ok_or_else(|| Error::Eigensolver("Schur iteration did not converge".into()))?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .fold(f64::NEG_INFINITY, |w, z| w.max(z.re)))
}
