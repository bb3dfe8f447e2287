//! Assembly of the Galerkin matrix from ladder rules.

use std::io::Write;

use nalgebra::DMatrix;
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use super::{fourier_derivative, fourier_product, GalerkinBasis, Truncation};
use crate::error::Result;
use crate::hermite::GaussianGrid;
use crate::model::{LiftedJet, SpectralModel, SystemState};
use crate::torus_basis::{make_quadrature, TrigKind};

/// `A_σ = A0 + σ² Δ`, with `A0` the transport part (antisymmetric) and `Δ`
/// the diagonal `-½ (j/L)²` of `½ ∂²_x`.
#[derive(Debug, Clone)]
pub struct GalerkinOperator {
    pub basis: GalerkinBasis,
    pub a0: CsrMatrix<f64>,
    pub delta_diag: Vec<f64>,
    pub sigma: f64,
}

impl GalerkinOperator {
    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        Self {
            sigma,
            ..self.clone()
        }
    }

    /// `A_σ v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = self.apply_a0(v);
        let s2 = self.sigma * self.sigma;
        for ((o, &d), &x) in out.iter_mut().zip(&self.delta_diag).zip(v) {
            *o += s2 * d * x;
        }
        out
    }

    pub fn apply_a0(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (r, row) in self.a0.row_iter().enumerate() {
            out[r] = row.col_indices().iter().zip(row.values()).map(|(&c, &a)| a * v[c]).sum();
        }
        out
    }

    /// `A0ᵀ v`.
    pub fn apply_a0_transpose(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (r, row) in self.a0.row_iter().enumerate() {
            for (&c, &a) in row.col_indices().iter().zip(row.values()) {
                out[c] += a * v[r];
            }
        }
        out
    }

    pub fn a0_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for (r, c, &v) in self.a0.triplet_iter() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn a_sigma_dense(&self) -> DMatrix<f64> {
        let mut m = self.a0_dense();
        let s2 = self.sigma * self.sigma;
        for (i, &d) in self.delta_diag.iter().enumerate() {
            m[(i, i)] += s2 * d;
        }
        m
    }

    /// `max |A0 + A0ᵀ|`.
    pub fn antisymmetry_defect(&self) -> f64 {
        let n = self.len();
        let mut worst = 0.0f64;
        let t = self.a0.transpose();
        for r in 0..n {
            let a = self.a0.row(r);
            let b = t.row(r);
            let mut acc: std::collections::HashMap<usize, f64> = Default::default();
            for (&c, &v) in a.col_indices().iter().zip(a.values()) {
                *acc.entry(c).or_default() += v;
            }
            for (&c, &v) in b.col_indices().iter().zip(b.values()) {
                *acc.entry(c).or_default() += v;
            }
            worst = acc.values().fold(worst, |w, v| w.max(v.abs()));
        }
        worst
    }

    /// `max |A_σ|` over the row and column of the constant function.
    pub fn constant_leak(&self) -> f64 {
        let row = self.a0.row(0).values().iter().fold(0.0f64, |w, v| w.max(v.abs()));
        let col = self
            .a0
            .triplet_iter()
            .filter(|(_, c, _)| *c == 0)
            .fold(0.0f64, |w, (_, _, v)| w.max(v.abs()));
        row.max(col).max((self.sigma * self.sigma * self.delta_diag[0]).abs())
    }

    /// `A_σ` as `row col value` lines, zero-based, nonzeros only.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# rows={} cols={} sigma={:.16e}", self.len(), self.len(), self.sigma)?;
        let s2 = self.sigma * self.sigma;
        for (r, row) in self.a0.row_iter().enumerate() {
            let mut diag_done = false;
            for (&c, &v) in row.col_indices().iter().zip(row.values()) {
                let mut v = v;
                if c == r {
                    v += s2 * self.delta_diag[r];
                    diag_done = true;
                }
                if v != 0.0 {
                    writeln!(w, "{r} {c} {v:.16e}")?;
                }
            }
            let d = s2 * self.delta_diag[r];
            if !diag_done && d != 0.0 {
                writeln!(w, "{r} {r} {d:.16e}")?;
            }
        }
        Ok(())
    }
}

/// Galerkin matrix of `L̂^(σ)` on the truncated basis.
///
/// Columns are `L̂(H_α ψ_m)` expanded with `∂_u h_n = (√n/s) h_{n-1}`,
/// `u h_n = s(√(n+1) h_{n+1} + √n h_{n-1})`, product-to-sum for `e_j ψ_m`
/// and `e_j' ∂_x ψ_m`; components outside the truncation are dropped.
pub fn build_operator(model: &SpectralModel<f64>, truncation: Truncation, sigma: f64) -> Result<GalerkinOperator> {
    let basis = GalerkinBasis::new(model, truncation)?;
    let n = basis.len();
    let l = model.circumference_param;
    let inv_sqrt_vol = model.total_volume().sqrt().recip();
    // e_i = ν^{-1/2} ψ_{±k}; e_i' = ±(k/L) ν^{-1/2} ψ_{∓k}
    let members: Vec<(i32, i32, f64)> = model
        .basis
        .iter()
        .map(|b| {
            let k = b.frequency as i32;
            let kl = b.frequency as f64 / l;
            match b.kind {
                TrigKind::Cosine => (k, -k, -kl * inv_sqrt_vol),
                TrigKind::Sine => (-k, k, kl * inv_sqrt_vol),
            }
        })
        .collect();
    let mut coo = CooMatrix::new(n, n);
    let mut beta = vec![0u32; model.dim()];
    for h in 0..basis.hermite.len() {
        let alpha = basis.hermite.get(h).to_vec();
        for pos in 0..basis.n_fourier() {
            let m = super::fourier_index(pos);
            let col = basis.row(h, m);
            for (i, &(e_idx, de_idx, de_coef)) in members.iter().enumerate() {
                let s = basis.std_devs[i];
                // e_i ∂_{u_i}
                if alpha[i] >= 1 {
                    beta.copy_from_slice(&alpha);
                    beta[i] -= 1;
                    let c = (alpha[i] as f64).sqrt() / s * inv_sqrt_vol;
                    for (mm, pc) in fourier_product(e_idx, m) {
                        if let Some(row) = basis.row_of(&beta, mm) {
                            coo.push(row, col, c * pc);
                        }
                    }
                }
                // -a_i u_i e_i' ∂_x
                let Some((dm, dc)) = fourier_derivative(m) else {
                    continue;
                };
                let a = model.coefficients[i];
                let fourier = fourier_product(de_idx, dm);
                for (shift, cu) in [(1i32, s * (alpha[i] as f64 + 1.0).sqrt()), (-1, s * (alpha[i] as f64).sqrt())] {
                    if cu == 0.0 {
                        continue;
                    }
                    beta.copy_from_slice(&alpha);
                    beta[i] = (beta[i] as i32 + shift) as u32;
                    let c = -a * cu * de_coef * dc / l;
                    for &(mm, pc) in &fourier {
                        if let Some(row) = basis.row_of(&beta, mm) {
                            coo.push(row, col, c * pc);
                        }
                    }
                }
            }
        }
    }
    let a0 = CsrMatrix::from(&coo);
    let delta_diag = (0..n)
        .map(|r| {
            let j = basis.fourier_of(r) as f64 / l;
            -0.5 * j * j
        })
        .collect();
    Ok(GalerkinOperator {
        basis,
        a0,
        delta_diag,
        sigma,
    })
}

/// Largest deviation between the assembled `A_σ` and direct quadrature of
/// `⟨b_p, L̂^(σ) b_q⟩_{μ̂}` over all entries.
///
/// Gauss–Hermite with `D + 1` nodes per coordinate is exact for the
/// degree-`2D + 1` integrand; the trapezoid rule covers frequency `2J + k_max`.
pub fn quadrature_cross_check(model: &SpectralModel<f64>, op: &GalerkinOperator) -> Result<f64> {
    let basis = &op.basis;
    let t = basis.truncation;
    let grid = GaussianGrid::new(&basis.std_devs, t.max_degree as usize + 1);
    let l = model.circumference_param;
    let rule = make_quadrature(2 * t.max_fourier as usize + model.max_frequency() as usize, l)?;
    let period = rule.integrate(|_| 1.0);
    let n = basis.len();
    let nf = basis.n_fourier();
    let deg = t.max_degree as usize;
    let dense = op.a_sigma_dense();
    let mut worst = 0.0f64;
    // accumulate ⟨b_p, L̂ b_q⟩ point by point: values of every b_p and every
    // L̂ b_q at the node, then a rank-one update
    let mut acc = DMatrix::<f64>::zeros(n, n);
    let mut vals = vec![0.0; n];
    let mut gen = vec![0.0; n];
    for (u, &wu) in grid.points.iter().zip(&grid.weights) {
        let tables: Vec<Vec<f64>> = u
            .iter()
            .zip(&basis.std_devs)
            .map(|(&ui, &s)| crate::hermite::hermite_normalized(deg + 1, ui / s))
            .collect();
        for (&x, &wx) in rule.nodes.iter().zip(&rule.weights) {
            let w = wu * wx / period;
            let state = SystemState::new(u.clone(), x, l);
            for h in 0..basis.hermite.len() {
                let alpha = basis.hermite.get(h);
                let hv: f64 = alpha.iter().enumerate().map(|(j, &a)| tables[j][a as usize]).product();
                let grad: Vec<f64> = (0..alpha.len())
                    .map(|i| {
                        if alpha[i] == 0 {
                            return 0.0;
                        }
                        let lowered = (alpha[i] as f64).sqrt() / basis.std_devs[i] * tables[i][alpha[i] as usize - 1];
                        alpha
                            .iter()
                            .enumerate()
                            .filter(|&(j, _)| j != i)
                            .map(|(j, &a)| tables[j][a as usize])
                            .product::<f64>()
                            * lowered
                    })
                    .collect();
                for pos in 0..nf {
                    let m = super::fourier_index(pos);
                    let row = h * nf + pos;
                    let (f, fx, fxx) = fourier_jet(m, x, l);
                    vals[row] = hv * f;
                    let jet = |_: &[f64], _: f64| LiftedJet {
                        value: hv * f,
                        grad_u: grad.iter().map(|g| g * f).collect(),
                        d_x: hv * fx,
                        d_xx: hv * fxx,
                    };
                    gen[row] = model.apply_lifted_generator(jet, op.sigma, &state);
                }
            }
            for q in 0..n {
                let g = w * gen[q];
                if g == 0.0 {
                    continue;
                }
                for p in 0..n {
                    acc[(p, q)] += vals[p] * g;
                }
            }
        }
    }
    for p in 0..n {
        for q in 0..n {
            worst = worst.max((acc[(p, q)] - dense[(p, q)]).abs());
        }
    }
    Ok(worst)
}

fn fourier_jet(m: i32, x: f64, l: f64) -> (f64, f64, f64) {
    let j = m.unsigned_abs() as f64 / l;
    let r2 = std::f64::consts::SQRT_2;
    let (s, c) = (j * x).sin_cos();
    match m {
        0 => (1.0, 0.0, 0.0),
        m if m > 0 => (r2 * c, -r2 * j * s, -r2 * j * j * c),
        _ => (r2 * s, r2 * j * c, -r2 * j * j * s),
    }
}
