//! Block decomposition of the Galerkin matrix by the rotation symmetry.
//!
//! Shifting `x` by `c` while rotating every `(u_cos, u_sin)` pair of
//! frequency `k` by the angle `kc/L` maps solutions to solutions and
//! preserves `μ̂`. Its generator
//!
//! ```text
//! G = L ∂_x + Σ_pairs k (u_cos ∂_{u_sin} - u_sin ∂_{u_cos})
//! ```
//!
//! is antisymmetric with spectrum in `iZ` and commutes with `A_σ`, so the
//! eigenspaces of `-G²` (eigenvalue `c²`) are invariant under `A_σ`. `G`
//! preserves each pair's total Hermite degree and `|m|`, so `-G²` is
//! diagonalised blockwise on tiny blocks.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};

use super::{fourier_derivative, GalerkinBasis, GalerkinOperator};
use crate::error::{Error, Result};
use crate::model::SpectralModel;

/// Orthonormal basis of one eigenspace of `-G²`, columns stored sparsely.
#[derive(Debug, Clone)]
pub struct Sector {
    /// `|c|`, the rotation charge.
    pub charge: u32,
    pub columns: Vec<Vec<(usize, f64)>>,
}

impl Sector {
    pub fn dim(&self) -> usize {
        self.columns.len()
    }
}

#[derive(Debug, Clone)]
pub struct RotationSectors {
    pub sectors: Vec<Sector>,
    pub total_len: usize,
}

impl RotationSectors {
    /// Sectors of the mean-zero subspace (the constant is left out).
    pub fn new(model: &SpectralModel<f64>, basis: &GalerkinBasis) -> Result<Self> {
        let n_pairs = model.n_frequencies();
        let freqs: Vec<i64> = model.frequencies.iter().map(|&k| k as i64).collect();
        // small blocks keyed by (per-pair degree, |m|)
        let mut blocks: BTreeMap<(Vec<u32>, u32), Vec<usize>> = BTreeMap::new();
        for row in 1..basis.len() {
            let alpha = basis.multi_index(row);
            let key: Vec<u32> = (0..n_pairs).map(|p| alpha[2 * p] + alpha[2 * p + 1]).collect();
            blocks
                .entry((key, basis.fourier_of(row).unsigned_abs()))
                .or_default()
                .push(row);
        }
        let mut by_charge: BTreeMap<u32, Vec<Vec<(usize, f64)>>> = BTreeMap::new();
        for rows in blocks.values() {
            let b = rows.len();
            let local: std::collections::HashMap<usize, usize> =
                rows.iter().enumerate().map(|(i, &r)| (r, i)).collect();
            let mut g = DMatrix::<f64>::zeros(b, b);
            for (qi, &q) in rows.iter().enumerate() {
                for (r, v) in apply_rotation_generator(basis, &freqs, q) {
                    let pi = *local.get(&r).ok_or_else(|| {
                        Error::Eigensolver("rotation generator left its invariant block".into())
                    })?;
                    g[(pi, qi)] += v;
                }
            }
            let m = g.transpose() * &g;
            let eig = SymmetricEigen::new(m);
            for (i, &lam) in eig.eigenvalues.iter().enumerate() {
                let c = lam.max(0.0).sqrt().round();
                if (lam - c * c).abs() > 1e-8 * (1.0 + c * c) {
                    return Err(Error::Eigensolver(format!(
                        "rotation eigenvalue {lam} is not a square integer"
                    )));
                }
                let col: Vec<(usize, f64)> = rows
                    .iter()
                    .enumerate()
                    .map(|(k, &r)| (r, eig.eigenvectors[(k, i)]))
                    .filter(|&(_, v)| v.abs() > 1e-15)
                    .collect();
                by_charge.entry(c as u32).or_default().push(col);
            }
        }
        Ok(Self {
            sectors: by_charge
                .into_iter()
                .map(|(charge, columns)| Sector { charge, columns })
                .collect(),
            total_len: basis.len(),
        })
    }

    /// Dimension of the mean-zero subspace covered (total length minus one).
    pub fn covered(&self) -> usize {
        self.sectors.iter().map(Sector::dim).sum()
    }
}

/// `G b_q` as `(row, value)` pairs.
fn apply_rotation_generator(basis: &GalerkinBasis, freqs: &[i64], q: usize) -> Vec<(usize, f64)> {
    let alpha = basis.multi_index(q);
    let h = basis.hermite_index(q);
    let m = basis.fourier_of(q);
    let mut out = Vec::new();
    if let Some((mm, c)) = fourier_derivative(m) {
        out.push((basis.row(h, mm), c));
    }
    let mut beta = alpha.to_vec();
    for (p, &k) in freqs.iter().enumerate() {
        let (ic, is) = (2 * p, 2 * p + 1);
        let (a, b) = (alpha[ic] as f64, alpha[is] as f64);
        // u_c ∂_s - u_s ∂_c on h_a(u_c) h_b(u_s), equal scales within a pair
        if alpha[is] >= 1 {
            beta[ic] += 1;
            beta[is] -= 1;
            if let Some(r) = basis.row_of(&beta, m) {
                out.push((r, k as f64 * (b * (a + 1.0)).sqrt()));
            }
            beta[ic] -= 1;
            beta[is] += 1;
        }
        if alpha[ic] >= 1 {
            beta[ic] -= 1;
            beta[is] += 1;
            if let Some(r) = basis.row_of(&beta, m) {
                out.push((r, -(k as f64) * (a * (b + 1.0)).sqrt()));
            }
            beta[ic] += 1;
            beta[is] -= 1;
        }
    }
    out
}

/// Restriction `Qᵀ A0 Q` and `Qᵀ Δ Q` of the operator to a sector.
pub fn project_sector(op: &GalerkinOperator, sector: &Sector) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = sector.dim();
    // rows_of_q[g] = [(column, value)]
    let mut rows_of_q: std::collections::HashMap<usize, Vec<(usize, f64)>> = Default::default();
    for (j, col) in sector.columns.iter().enumerate() {
        for &(g, v) in col {
            rows_of_q.entry(g).or_default().push((j, v));
        }
    }
    let mut b0 = DMatrix::<f64>::zeros(n, n);
    let mut bd = DMatrix::<f64>::zeros(n, n);
    let mut w: std::collections::HashMap<usize, f64> = Default::default();
    for (s, col) in sector.columns.iter().enumerate() {
        // w = A0 q_s = -A0ᵀ q_s, read off rows of A0 by antisymmetry
        w.clear();
        for &(g, v) in col {
            let row = op.a0.row(g);
            for (&c, &a) in row.col_indices().iter().zip(row.values()) {
                *w.entry(c).or_default() -= a * v;
            }
        }
        for (&g, &wv) in &w {
            if let Some(entries) = rows_of_q.get(&g) {
                for &(r, qv) in entries {
                    b0[(r, s)] += qv * wv;
                }
            }
        }
        for &(g, v) in col {
            if let Some(entries) = rows_of_q.get(&g) {
                for &(r, qv) in entries {
                    bd[(r, s)] += qv * op.delta_diag[g] * v;
                }
            }
        }
    }
    (b0, bd)
}
