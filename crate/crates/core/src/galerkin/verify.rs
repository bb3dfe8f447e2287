//! Matrix-level and quadrature checks of the identities behind the bounds.
//!
//! Pure-`u` functions `g(u)` are the rows with Fourier index 0. For them the
//! transport part acts as `L̂(g∘π) = e(x)·∇g(u)`, which the truncation
//! represents exactly once `J ≥ k_max`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::GalerkinOperator;
use crate::error::{Error, Result};
use crate::hermite::{GaussianGrid, HermitePoly, MultiIndexSet};
use crate::model::{CollapsedJet, SpectralModel};
use crate::torus_basis::make_quadrature;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftReport {
    pub sigma: f64,
    pub n_functions: usize,
    /// `max |⟨L̂(g∘π), h∘π⟩|`
    pub first_residual: f64,
    /// `max |½⟨L̂(g∘π), L̂(h∘π)⟩ - (2ν)⁻¹⟨∇g, ∇h⟩_μ|`
    pub second_residual: f64,
}

/// Both lift conditions on all Hermite basis functions up to degree `D - 1`.
pub fn verify_lift_conditions(model: &SpectralModel<f64>, op: &GalerkinOperator) -> Result<LiftReport> {
    let basis = &op.basis;
    let deg = basis.truncation.max_degree - 1;
    let rows = basis.pure_u_rows(deg);
    let images: Vec<Vec<f64>> = rows.iter().map(|&r| op.apply(&unit(op.len(), r))).collect();
    let mut first = 0.0f64;
    for (gi, img) in images.iter().enumerate() {
        for &h in &rows {
            first = first.max(img[h].abs());
        }
        let _ = gi;
    }
    // ⟨∇b_g, ∇b_h⟩_μ by Gauss–Hermite, exact for degree 2(D-1)
    let grid = GaussianGrid::new(&basis.std_devs, deg as usize + 1);
    let grads: Vec<Vec<Vec<f64>>> = rows
        .iter()
        .map(|&r| {
            let poly = single_hermite(basis.dim(), basis.truncation.max_degree, &basis.std_devs, basis.hermite_index(r));
            grid.points.iter().map(|p| poly.jet(p).grad).collect()
        })
        .collect();
    let scale = (2.0 * model.total_volume()).recip();
    let mut second = 0.0f64;
    for i in 0..rows.len() {
        for j in i..rows.len() {
            let lhs = 0.5 * dot(&images[i], &images[j]);
            let rhs: f64 = grid
                .weights
                .iter()
                .enumerate()
                .map(|(q, &w)| w * dot(&grads[i][q], &grads[j][q]))
                .sum::<f64>()
                * scale;
            second = second.max((lhs - rhs).abs());
        }
    }
    Ok(LiftReport {
        sigma: op.sigma,
        n_functions: rows.len(),
        first_residual: first,
        second_residual: second,
    })
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn single_hermite(dim: usize, max_degree: u32, std_devs: &[f64], index: usize) -> HermitePoly {
    let set = MultiIndexSet::total_degree(dim, max_degree);
    let mut coeffs = vec![0.0; set.len()];
    coeffs[index] = 1.0;
    HermitePoly::new(set, coeffs, std_devs.to_vec())
}

/// `count` polynomials of total degree `≤ degree` with standard normal
/// coefficients and no constant term.
pub fn random_polys(dim: usize, degree: u32, std_devs: &[f64], count: usize, seed: u64) -> Vec<HermitePoly> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let set = MultiIndexSet::total_degree(dim, degree);
            let mut coeffs: Vec<f64> = (0..set.len())
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            coeffs[0] = 0.0;
            HermitePoly::new(set, coeffs, std_devs.to_vec())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BochnerReport {
    pub n_polys: usize,
    pub degree: u32,
    /// `max |∫(∇*∇g)² - ∫‖∇²g‖²_F - Σ a_j|λ_j| ∫(∂_j g)²|`
    pub max_residual: f64,
    /// Same, relative to the left side.
    pub max_rel_residual: f64,
}

/// Bochner's identity with `∇*∇g = -Δg + ∇Φ·∇g` on random polynomials.
pub fn verify_bochner(model: &SpectralModel<f64>, degree: u32, n_polys: usize, seed: u64) -> Result<BochnerReport> {
    let std = model.std_devs()?;
    let stiff = model.stiffnesses();
    let grid = GaussianGrid::new(&std, degree as usize + 1);
    let mut worst = 0.0f64;
    let mut worst_rel = 0.0f64;
    for g in random_polys(model.dim(), degree, &std, n_polys, seed) {
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for (p, &w) in grid.points.iter().zip(&grid.weights) {
            let jet = g.jet(p);
            let lap: f64 = (0..p.len()).map(|i| jet.hess[i][i]).sum();
            let drift: f64 = (0..p.len()).map(|i| stiff[i] * p[i] * jet.grad[i]).sum();
            let op = drift - lap;
            lhs += w * op * op;
            let hs: f64 = jet.hess.iter().flatten().map(|h| h * h).sum();
            let gs: f64 = (0..p.len()).map(|i| stiff[i] * jet.grad[i] * jet.grad[i]).sum();
            rhs += w * (hs + gs);
        }
        worst = worst.max((lhs - rhs).abs());
        worst_rel = worst_rel.max((lhs - rhs).abs() / lhs.abs().max(1e-300));
    }
    Ok(BochnerReport {
        n_polys,
        degree,
        max_residual: worst,
        max_rel_residual: worst_rel,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftLemmaReport {
    pub n_polys: usize,
    pub degree: u32,
    pub violations: usize,
    /// `min (right - left)` over the test set.
    pub min_slack: f64,
    /// `min (right - left) / right`.
    pub min_rel_slack: f64,
}

/// `∫|∇Φ|²|∇g|² ≤ 2(Σ_j a_j|λ_j|)∫|∇g|² + 4∫‖∇²g‖²_F` on random polynomials,
/// the sum running over all basis members.
pub fn verify_drift_lemma(model: &SpectralModel<f64>, degree: u32, n_polys: usize, seed: u64) -> Result<DriftLemmaReport> {
    let std = model.std_devs()?;
    let stiff = model.stiffnesses();
    let total: f64 = stiff.iter().sum();
    let grid = GaussianGrid::new(&std, degree as usize + 1);
    let mut violations = 0;
    let mut min_slack = f64::INFINITY;
    let mut min_rel = f64::INFINITY;
    let polys = random_polys(model.dim(), degree, &std, n_polys, seed);
    for g in &polys {
        let mut left = 0.0;
        let mut grad_sq = 0.0;
        let mut hess_sq = 0.0;
        for (p, &w) in grid.points.iter().zip(&grid.weights) {
            let jet = g.jet(p);
            let phi_sq: f64 = (0..p.len()).map(|i| (stiff[i] * p[i]).powi(2)).sum();
            let gsq: f64 = jet.grad.iter().map(|v| v * v).sum();
            left += w * phi_sq * gsq;
            grad_sq += w * gsq;
            hess_sq += w * jet.hess.iter().flatten().map(|h| h * h).sum::<f64>();
        }
        let right = 2.0 * total * grad_sq + 4.0 * hess_sq;
        let slack = right - left;
        if slack < 0.0 {
            violations += 1;
        }
        min_slack = min_slack.min(slack);
        min_rel = min_rel.min(slack / right);
    }
    Ok(DriftLemmaReport {
        n_polys,
        degree,
        violations,
        min_slack,
        min_rel_slack: min_rel,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LstarLReport {
    pub n_polys: usize,
    pub degree: u32,
    /// `max |A0ᵀA0 g - P(closed form)|` over coefficients and test functions.
    pub max_residual: f64,
    /// `max ‖L̂*L̂(g∘π)‖ / ‖Lg‖`.
    pub max_ratio: f64,
}

/// Compares `A0ᵀA0 g` with the closed form
/// `-eᵀ∇²g e + Σ_ij a_i u_i e_i' e_j' ∂_j g` projected by quadrature.
///
/// Needs `J ≥ 2 k_max` so the product `e_i' e_j'` stays in the window, and
/// test degree `≤ D - 2`.
pub fn verify_lstar_l(
    model: &SpectralModel<f64>,
    op: &GalerkinOperator,
    degree: u32,
    n_polys: usize,
    seed: u64,
) -> Result<LstarLReport> {
    let basis = &op.basis;
    let t = basis.truncation;
    if t.max_fourier < 2 * model.max_frequency() || degree + 2 > t.max_degree {
        return Err(Error::InvalidTruncation(format!(
            "L̂*L̂ check needs J ≥ 2·k_max and degree ≤ D - 2, got D={}, J={}, degree={degree}",
            t.max_degree, t.max_fourier
        )));
    }
    let std = &basis.std_devs;
    let grid = GaussianGrid::new(std, (t.max_degree + degree) as usize / 2 + 1);
    let l = model.circumference_param;
    let rule = make_quadrature(t.max_fourier as usize + 2 * model.max_frequency() as usize, l)?;
    let period = rule.integrate(|_| 1.0);
    let n = op.len();
    let nf = basis.n_fourier();
    let polys = random_polys(model.dim(), degree, std, n_polys, seed);
    // b_p values on the u-grid (Hermite part) and x-grid (Fourier part)
    let herm_vals: Vec<Vec<f64>> = grid
        .points
        .iter()
        .map(|p| {
            let tables: Vec<Vec<f64>> = p
                .iter()
                .zip(std)
                .map(|(&ui, &s)| crate::hermite::hermite_normalized(t.max_degree as usize, ui / s))
                .collect();
            basis
                .hermite
                .iter()
                .map(|a| a.iter().enumerate().map(|(j, &k)| tables[j][k as usize]).product())
                .collect()
        })
        .collect();
    let four_vals: Vec<Vec<f64>> = rule
        .nodes
        .iter()
        .map(|&x| (0..nf).map(|pos| super::eval_fourier(super::fourier_index(pos), x, l)).collect())
        .collect();
    let collapse_scale = (2.0 * model.total_volume()).recip();
    let mut max_res = 0.0f64;
    let mut max_ratio = 0.0f64;
    for g in &polys {
        // coefficient vector of g in the Galerkin basis
        let mut coef = vec![0.0; n];
        for (i, alpha) in g.set.iter().enumerate() {
            if let Some(r) = basis.row_of(alpha, 0) {
                coef[r] = g.coeffs[i];
            }
        }
        let matrix = op.apply_a0_transpose(&op.apply_a0(&coef));
        let mut proj = vec![0.0; n];
        let mut lg_sq = 0.0;
        for (qi, (p, &wu)) in grid.points.iter().zip(&grid.weights).enumerate() {
            let jet = g.jet(p);
            let cjet = CollapsedJet {
                value: jet.value,
                grad: jet.grad.clone(),
                hess_diag: (0..p.len()).map(|i| jet.hess[i][i]).collect(),
            };
            let lg = model.apply_collapsed_generator(|_| cjet.clone(), p)?;
            debug_assert!(collapse_scale > 0.0);
            lg_sq += wu * lg * lg;
            for (xi, (&x, &wx)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
                let (e, de) = model.basis_values(x);
                let mut hess_term = 0.0;
                for i in 0..e.len() {
                    for j in 0..e.len() {
                        hess_term += e[i] * jet.hess[i][j] * e[j];
                    }
                }
                let a_u_de: f64 = (0..e.len()).map(|i| model.coefficients[i] * p[i] * de[i]).sum();
                let de_grad: f64 = (0..e.len()).map(|j| de[j] * jet.grad[j]).sum();
                let f = -hess_term + a_u_de * de_grad;
                let w = wu * wx / period * f;
                for h in 0..basis.hermite.len() {
                    let hv = herm_vals[qi][h] * w;
                    if hv == 0.0 {
                        continue;
                    }
                    for pos in 0..nf {
                        proj[h * nf + pos] += hv * four_vals[xi][pos];
                    }
                }
            }
        }
        for (a, b) in matrix.iter().zip(&proj) {
            max_res = max_res.max((a - b).abs());
        }
        let norm = dot(&matrix, &matrix).sqrt();
        max_ratio = max_ratio.max(norm / lg_sq.sqrt());
    }
    Ok(LstarLReport {
        n_polys,
        degree,
        max_residual: max_res,
        max_ratio,
    })
}

/// `-½ (A0 P)ᵀ(A0 P)` on pure-`u` functions: the generator of the collapse,
/// in the Hermite basis (rows ordered as the multi-index set).
pub fn collapse_matrix(op: &GalerkinOperator) -> DMatrix<f64> {
    let basis = &op.basis;
    let nh = basis.hermite.len();
    let images: Vec<Vec<f64>> = (0..nh)
        .map(|h| op.apply_a0(&unit(op.len(), basis.row(h, 0))))
        .collect();
    DMatrix::from_fn(nh, nh, |i, j| -0.5 * dot(&images[i], &images[j]))
}
