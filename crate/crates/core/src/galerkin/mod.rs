//! Galerkin discretisation of the lifted generator in the orthonormal basis
//! `H_α(u) ψ_m(x)` of `L²(μ̂)`, structural checks at matrix level, and the
//! relaxation time of the truncated semigroup.
//!
//! `H_α` is a product of normalised Hermite polynomials scaled to the
//! Gaussian standard deviations, truncated at total degree `D`. The Fourier
//! factor is `ψ_0 = 1`, `ψ_{+j} = √2 cos(jx/L)`, `ψ_{-j} = √2 sin(jx/L)` for
//! `1 ≤ j ≤ J`, orthonormal for the uniform probability on the circle.
//!
//! Row layout: `row = hermite_index · (2J + 1) + fourier_position`, with
//! Fourier positions ordered `0, +1, -1, +2, -2, ...`. Row 0 is the constant.

mod operator;
mod sectors;
mod trel;
mod verify;

pub use operator::{build_operator, quadrature_cross_check, GalerkinOperator};
pub use sectors::{project_sector, RotationSectors, Sector};
pub use trel::{
    block_abscissa, exp_norm, measure_trel, measure_trel_converged, measure_trel_dense, refine_until_converged, sector_matrices,
    spectral_abscissa, trel_of_blocks, ConvergedTrel, TrelMeasurement, TrelOptions,
};
pub use verify::{
    collapse_matrix, random_polys, verify_bochner, verify_drift_lemma, verify_lift_conditions, verify_lstar_l,
    BochnerReport, DriftLemmaReport, LiftReport, LstarLReport,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hermite::{binomial, MultiIndexSet};
use crate::model::SpectralModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Truncation {
    /// Maximal total Hermite degree `D`.
    pub max_degree: u32,
    /// Maximal Fourier frequency `J`.
    pub max_fourier: u32,
}

impl Truncation {
    pub fn new(max_degree: u32, max_fourier: u32) -> Self {
        Self {
            max_degree,
            max_fourier,
        }
    }

    /// `C(D + d, d) · (2J + 1)`.
    pub fn basis_size(&self, dim: usize) -> usize {
        binomial(self.max_degree as usize + dim, dim) * (2 * self.max_fourier as usize + 1)
    }

    /// `(D + 2, J + 2)`, the refinement used by the convergence policy.
    pub fn refined(&self) -> Self {
        Self::new(self.max_degree + 2, self.max_fourier + 2)
    }
}

/// Position of Fourier index `m` in the ordering `0, +1, -1, +2, -2, ...`.
#[inline]
pub fn fourier_position(m: i32) -> usize {
    match m {
        0 => 0,
        m if m > 0 => 2 * m as usize - 1,
        m => 2 * (-m) as usize,
    }
}

#[inline]
pub fn fourier_index(pos: usize) -> i32 {
    if pos == 0 {
        0
    } else if pos % 2 == 1 {
        pos.div_ceil(2) as i32
    } else {
        -((pos / 2) as i32)
    }
}

/// `ψ_a ψ_b` expanded in `ψ`: up to two `(index, coefficient)` pairs.
pub fn fourier_product(a: i32, b: i32) -> Vec<(i32, f64)> {
    if a == 0 {
        return vec![(b, 1.0)];
    }
    if b == 0 {
        return vec![(a, 1.0)];
    }
    let (p, q) = (a.unsigned_abs() as i32, b.unsigned_abs() as i32);
    let mut out = Vec::with_capacity(2);
    match (a > 0, b > 0) {
        // 2 cos p cos q = cos(p-q) + cos(p+q)
        (true, true) => {
            push_cos(&mut out, p - q, 1.0);
            push_cos(&mut out, p + q, 1.0);
        }
        // 2 sin p sin q = cos(p-q) - cos(p+q)
        (false, false) => {
            push_cos(&mut out, p - q, 1.0);
            push_cos(&mut out, p + q, -1.0);
        }
        // 2 cos p sin q = sin(p+q) + sin(q-p)
        (true, false) => {
            push_sin(&mut out, p + q, 1.0);
            push_sin(&mut out, q - p, 1.0);
        }
        (false, true) => {
            push_sin(&mut out, p + q, 1.0);
            push_sin(&mut out, p - q, 1.0);
        }
    }
    out
}

fn push_cos(out: &mut Vec<(i32, f64)>, n: i32, c: f64) {
    if n == 0 {
        out.push((0, c));
    } else {
        out.push((n.abs(), c * std::f64::consts::FRAC_1_SQRT_2));
    }
}

fn push_sin(out: &mut Vec<(i32, f64)>, n: i32, c: f64) {
    if n != 0 {
        out.push((-n.abs(), c * n.signum() as f64 * std::f64::consts::FRAC_1_SQRT_2));
    }
}

/// `L ∂_x ψ_m = (index, coefficient)`: `∂_x ψ_{+j} = -(j/L) ψ_{-j}`,
/// `∂_x ψ_{-j} = (j/L) ψ_{+j}`. Returns `None` for the constant.
#[inline]
pub fn fourier_derivative(m: i32) -> Option<(i32, f64)> {
    match m {
        0 => None,
        m if m > 0 => Some((-m, -(m as f64))),
        m => Some((-m, (-m) as f64)),
    }
}

/// Tensor basis `H_α ⊗ ψ_m` with its index maps.
#[derive(Debug, Clone)]
pub struct GalerkinBasis {
    pub truncation: Truncation,
    pub hermite: MultiIndexSet,
    pub std_devs: Vec<f64>,
    pub circumference_param: f64,
}

impl GalerkinBasis {
    pub fn new(model: &SpectralModel<f64>, truncation: Truncation) -> Result<Self> {
        if truncation.max_degree < 1 {
            return Err(Error::InvalidTruncation("Hermite degree D must be at least 1".into()));
        }
        if truncation.max_fourier < model.max_frequency() {
            return Err(Error::InvalidTruncation(format!(
                "Fourier window J = {} is below the largest model frequency {}",
                truncation.max_fourier,
                model.max_frequency()
            )));
        }
        Ok(Self {
            truncation,
            hermite: MultiIndexSet::total_degree(model.dim(), truncation.max_degree),
            std_devs: model.std_devs()?,
            circumference_param: model.circumference_param,
        })
    }

    pub fn n_fourier(&self) -> usize {
        2 * self.truncation.max_fourier as usize + 1
    }

    pub fn len(&self) -> usize {
        self.hermite.len() * self.n_fourier()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.hermite.dim
    }

    pub fn row(&self, hermite_index: usize, m: i32) -> usize {
        hermite_index * self.n_fourier() + fourier_position(m)
    }

    /// Row of `(α, m)`, or `None` outside the truncation.
    pub fn row_of(&self, alpha: &[u32], m: i32) -> Option<usize> {
        if m.unsigned_abs() > self.truncation.max_fourier {
            return None;
        }
        self.hermite.index_of(alpha).map(|h| self.row(h, m))
    }

    pub fn hermite_index(&self, row: usize) -> usize {
        row / self.n_fourier()
    }

    pub fn fourier_of(&self, row: usize) -> i32 {
        fourier_index(row % self.n_fourier())
    }

    pub fn multi_index(&self, row: usize) -> &[u32] {
        self.hermite.get(self.hermite_index(row))
    }

    /// Rows of pure-`u` functions (`m = 0`) with total degree `≤ max_degree`.
    pub fn pure_u_rows(&self, max_degree: u32) -> Vec<usize> {
        (0..self.hermite.len())
            .filter(|&h| self.hermite.get(h).iter().sum::<u32>() <= max_degree)
            .map(|h| self.row(h, 0))
            .collect()
    }

    /// Value of basis function `row` at `(u, x)`.
    pub fn eval(&self, row: usize, u: &[f64], x: f64) -> f64 {
        let alpha = self.multi_index(row);
        let h: f64 = alpha
            .iter()
            .zip(u)
            .zip(&self.std_devs)
            .map(|((&n, &ui), &s)| crate::hermite::hermite_normalized(n as usize, ui / s)[n as usize])
            .product();
        h * eval_fourier(self.fourier_of(row), x, self.circumference_param)
    }
}

/// `ψ_m(x)`.
pub fn eval_fourier(m: i32, x: f64, l: f64) -> f64 {
    let w = m.unsigned_abs() as f64 * x / l;
    match m {
        0 => 1.0,
        m if m > 0 => std::f64::consts::SQRT_2 * w.cos(),
        _ => std::f64::consts::SQRT_2 * w.sin(),
    }
}
