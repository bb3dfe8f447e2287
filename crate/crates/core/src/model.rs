//! Spectral interaction model on `T_L`, the lifted state `(u, x)`, its
//! invariant law, and pointwise application of the lifted and collapsed
//! generators.
//!
//! A torus model is given by frequencies `k_1..k_n` and coefficients
//! `a_1..a_n`. It expands into `d = 2n` basis members ordered
//! `[cos k_1, sin k_1, cos k_2, sin k_2, ...]`, each pair sharing `a_k` and
//! `λ_k = -k²/L²`. Everything downstream indexes the expanded members.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::torus_basis::{circumference, reduce_to_circle, BasisFunction, TrigKind};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralModel<T> {
    pub circumference_param: T,
    /// User-level frequencies, one per cos/sin pair.
    pub frequencies: Vec<u32>,
    /// User-level coefficients `a_k`, one per frequency.
    pub frequency_coefficients: Vec<T>,
    pub basis: Vec<BasisFunction<T>>,
    pub coefficients: Vec<T>,
    pub eigenvalues: Vec<T>,
}

impl<T: Scalar> SpectralModel<T> {
    /// Builds the doubled cos/sin model for `V(x,y) = W(x-y)` with
    /// `W(z) = (πL)^{-1} Σ a_k cos(kz/L)`.
    pub fn torus(l: T, frequencies: &[u32], coefficients: &[T]) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(Error::InvalidModel("no frequencies given".into()));
        }
        if frequencies.len() != coefficients.len() {
            return Err(Error::InvalidModel(format!(
                "{} frequencies but {} coefficients",
                frequencies.len(),
                coefficients.len()
            )));
        }
        if !(l > T::zero()) || !l.is_finite() {
            return Err(Error::InvalidModel(format!("L must be positive, got {l}")));
        }
        let mut seen = frequencies.to_vec();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidModel("frequencies must be distinct".into()));
        }
        if let Some(a) = coefficients.iter().find(|a| !(**a >= T::zero()) || !a.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "coefficients must be finite and nonnegative, got {a}"
            )));
        }
        let mut basis = Vec::with_capacity(2 * frequencies.len());
        let mut coeffs = Vec::with_capacity(2 * frequencies.len());
        let mut eigs = Vec::with_capacity(2 * frequencies.len());
        for (&k, &a) in frequencies.iter().zip(coefficients) {
            for kind in [TrigKind::Cosine, TrigKind::Sine] {
                let f = BasisFunction::new(kind, k, l)?;
                eigs.push(f.eigenvalue());
                basis.push(f);
                coeffs.push(a);
            }
        }
        Ok(Self {
            circumference_param: l,
            frequencies: frequencies.to_vec(),
            frequency_coefficients: coefficients.to_vec(),
            basis,
            coefficients: coeffs,
            eigenvalues: eigs,
        })
    }

    /// Number of expanded basis members `d`.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn n_frequencies(&self) -> usize {
        self.frequencies.len()
    }

    /// `ν(M) = 2πL`.
    pub fn total_volume(&self) -> T {
        circumference(self.circumference_param)
    }

    /// `a_j |λ_j|` for member `j`.
    pub fn stiffness(&self, j: usize) -> T {
        self.coefficients[j] * self.eigenvalues[j].abs()
    }

    pub fn stiffnesses(&self) -> Vec<T> {
        (0..self.dim()).map(|j| self.stiffness(j)).collect()
    }

    pub fn max_frequency(&self) -> u32 {
        self.frequencies.iter().copied().max().unwrap_or(0)
    }

    /// `(e(x), e'(x))` over all members.
    pub fn basis_values(&self, x: T) -> (Vec<T>, Vec<T>) {
        self.basis.iter().map(|b| b.eval(x)).unzip()
    }

    /// `V(x, y) = Σ_j a_j e_j(x) e_j(y)`.
    pub fn kernel(&self, x: T, y: T) -> T {
        self.basis
            .iter()
            .zip(&self.coefficients)
            .map(|(b, &a)| a * b.eval(x).0 * b.eval(y).0)
            .sum()
    }

    fn check_dim(&self, u: &[T]) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: u.len(),
            });
        }
        Ok(())
    }

    /// `Φ(u) = ½ Σ_j a_j |λ_j| u_j²`.
    pub fn potential_phi(&self, u: &[T]) -> Result<T> {
        self.check_dim(u)?;
        let half = T::lit(0.5);
        Ok(u.iter()
            .enumerate()
            .map(|(j, &uj)| half * self.stiffness(j) * uj * uj)
            .sum())
    }

    /// `∇Φ(u)`.
    pub fn grad_phi(&self, u: &[T]) -> Result<Vec<T>> {
        self.check_dim(u)?;
        Ok(u.iter()
            .enumerate()
            .map(|(j, &uj)| self.stiffness(j) * uj)
            .collect())
    }

    /// Drift of the lifted system: `du_j = e_j(x)`, `dx = -Σ_j a_j u_j e_j'(x)`.
    pub fn drift(&self, state: &SystemState<T>) -> (Vec<T>, T) {
        let (e, de) = self.basis_values(state.x);
        let dx = -state
            .u
            .iter()
            .zip(&self.coefficients)
            .zip(&de)
            .map(|((&u, &a), &d)| a * u * d)
            .sum::<T>();
        (e, dx)
    }

    /// Position drift alone, `-Σ_j a_j u_j e_j'(x)`.
    pub fn position_drift(&self, u: &[T], x: T) -> T {
        -self
            .basis
            .iter()
            .zip(&self.coefficients)
            .zip(u)
            .map(|((b, &a), &uj)| a * uj * b.eval(x).1)
            .sum::<T>()
    }

    /// `L̂^(σ) f = Σ_j (e_j ∂_{u_j} f - a_j u_j e_j' ∂_x f) + σ²/2 ∂²_x f`.
    pub fn apply_lifted_generator<F>(&self, f: F, sigma: T, state: &SystemState<T>) -> T
    where
        F: Fn(&[T], T) -> LiftedJet<T>,
    {
        let jet = f(&state.u, state.x);
        let (e, de) = self.basis_values(state.x);
        let transport: T = (0..self.dim())
            .map(|j| e[j] * jet.grad_u[j] - self.coefficients[j] * state.u[j] * de[j] * jet.d_x)
            .sum();
        transport + T::lit(0.5) * sigma * sigma * jet.d_xx
    }

    /// `L g = -(2ν)^{-1} ∇Φ·∇g + (2ν)^{-1} Δg` (Ornstein–Uhlenbeck collapse).
    pub fn apply_collapsed_generator<G>(&self, g: G, u: &[T]) -> Result<T>
    where
        G: Fn(&[T]) -> CollapsedJet<T>,
    {
        let grad_phi = self.grad_phi(u)?;
        let jet = g(u);
        let scale = (T::lit(2.0) * self.total_volume()).recip();
        let drift: T = grad_phi.iter().zip(&jet.grad).map(|(&p, &q)| p * q).sum();
        let lap: T = jet.hess_diag.iter().copied().sum();
        Ok(scale * (lap - drift))
    }

    /// Gaussian ⊗ uniform invariant law; fails on a degenerate mode.
    pub fn invariant_law(&self) -> Result<InvariantLaw<T>> {
        let mut variances = Vec::with_capacity(self.dim());
        for j in 0..self.dim() {
            let s = self.stiffness(j);
            if !(s > T::zero()) {
                return Err(Error::DegenerateMode { index: j });
            }
            variances.push(s.recip());
        }
        Ok(InvariantLaw {
            gaussian_variances: variances,
            uniform_mass: self.total_volume(),
        })
    }

    /// Standard deviations of the Gaussian factor.
    pub fn std_devs(&self) -> Result<Vec<T>> {
        Ok(self
            .invariant_law()?
            .gaussian_variances
            .iter()
            .map(|v| v.sqrt())
            .collect())
    }
}

/// Point `(u, x)` of the lifted dynamics, with `x ∈ [0, 2πL)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemState<T> {
    pub u: Vec<T>,
    pub x: T,
}

impl<T: Scalar> SystemState<T> {
    pub fn new(u: Vec<T>, x: T, l: T) -> Self {
        Self {
            u,
            x: reduce_to_circle(x, l),
        }
    }
}

/// `μ̂ = μ ⊗ κ`: centred Gaussian with the given variances, times the
/// normalised volume measure of total mass `uniform_mass` before
/// normalisation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantLaw<T> {
    pub gaussian_variances: Vec<T>,
    pub uniform_mass: T,
}

/// Pointwise data of a test function on `R^d × T_L`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedJet<T> {
    pub value: T,
    pub grad_u: Vec<T>,
    pub d_x: T,
    pub d_xx: T,
}

/// Pointwise data of a test function on `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapsedJet<T> {
    pub value: T,
    pub grad: Vec<T>,
    pub hess_diag: Vec<T>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn pair(a: f64, k: u32, l: f64) -> SpectralModel<f64> {
        SpectralModel::torus(l, &[k], &[a]).unwrap()
    }

    #[test]
    fn torus_expansion_doubles_members() {
        let m = SpectralModel::torus(1.5, &[1, 3], &[0.5, 2.0]).unwrap();
        assert_eq!(m.dim(), 4);
        assert_eq!(m.coefficients, vec![0.5, 0.5, 2.0, 2.0]);
        assert_eq!(m.basis[1].kind, TrigKind::Sine);
        assert_abs_diff_eq!(m.eigenvalues[2], -9.0 / 2.25, epsilon = 1e-15);
        assert_abs_diff_eq!(m.total_volume(), 3.0 * PI, epsilon = 1e-15);
    }

    #[test]
    fn construction_errors() {
        assert!(SpectralModel::<f64>::torus(1.0, &[], &[]).is_err());
        assert!(SpectralModel::torus(1.0, &[1, 2], &[1.0]).is_err());
        assert!(SpectralModel::torus(1.0, &[1, 1], &[1.0, 1.0]).is_err());
        assert!(SpectralModel::torus(1.0, &[0], &[1.0]).is_err());
        assert!(SpectralModel::torus(1.0, &[1], &[-1.0]).is_err());
        assert!(SpectralModel::torus(0.0, &[1], &[1.0]).is_err());
    }

    #[test]
    fn potential_examples() {
        assert_eq!(pair(1.0, 1, 1.0).potential_phi(&[0.0, 0.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(pair(1.0, 1, 1.0).potential_phi(&[1.0, 1.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(pair(2.0, 2, 1.0).potential_phi(&[1.0, 0.0]).unwrap(), 4.0);
        assert_eq!(
            pair(1.0, 1, 1.0).potential_phi(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        );
    }

    #[test]
    fn drift_examples() {
        let m = pair(1.0, 1, 1.0);
        let inv = PI.sqrt().recip();
        let s = SystemState::new(vec![0.0, 0.0], 1.2, 1.0);
        let (du, dx) = m.drift(&s);
        assert_eq!(dx, 0.0);
        assert_abs_diff_eq!(du[0], inv * 1.2f64.cos(), epsilon = 1e-15);

        let (du, dx) = m.drift(&SystemState::new(vec![1.0, 0.0], 0.0, 1.0));
        assert_abs_diff_eq!(dx, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(du[0], inv, epsilon = 1e-15);
        assert_abs_diff_eq!(du[1], 0.0, epsilon = 1e-15);

        let (_, dx) = m.drift(&SystemState::new(vec![1.0, 0.0], PI / 2.0, 1.0));
        assert_abs_diff_eq!(dx, inv, epsilon = 1e-15);
    }

    #[test]
    fn drift_equals_grad_phi_form() {
        // -∇Φᵀ Λ⁻¹ ∇e(x)
        let m: SpectralModel<f64> = SpectralModel::torus(1.3, &[1, 2], &[0.7, 1.9]).unwrap();
        let u = vec![0.3, -1.1, 0.8, 0.25];
        let x = 2.2;
        let gp = m.grad_phi(&u).unwrap();
        let (_, de) = m.basis_values(x);
        let alt: f64 = -(0..4).map(|j| gp[j] / m.eigenvalues[j].abs() * de[j]).sum::<f64>();
        let (_, dx) = m.drift(&SystemState::new(u, x, 1.3));
        assert_abs_diff_eq!(dx, alt, epsilon = 1e-14);
    }

    #[test]
    fn lifted_generator_examples() {
        let m = pair(1.0, 1, 1.0);
        let st = SystemState::new(vec![0.7, -0.4], 0.9, 1.0);
        let constant = |_: &[f64], _: f64| LiftedJet {
            value: 3.0,
            grad_u: vec![0.0, 0.0],
            d_x: 0.0,
            d_xx: 0.0,
        };
        assert_eq!(m.apply_lifted_generator(constant, 1.0, &st), 0.0);

        // g(u) = u_1² + u_2: only transport
        let g = |u: &[f64], _: f64| LiftedJet {
            value: u[0] * u[0] + u[1],
            grad_u: vec![2.0 * u[0], 1.0],
            d_x: 0.0,
            d_xx: 0.0,
        };
        let (e, _) = m.basis_values(st.x);
        let expect = e[0] * 2.0 * 0.7 + e[1];
        assert_abs_diff_eq!(m.apply_lifted_generator(g, 5.0, &st), expect, epsilon = 1e-14);

        // f(u, x) = u_1 e_1(x), σ = 1
        let f = |u: &[f64], x: f64| {
            let b = BasisFunction::cosine(1, 1.0).unwrap();
            let (v, d, dd) = b.eval2(x);
            LiftedJet {
                value: u[0] * v,
                grad_u: vec![v, 0.0],
                d_x: u[0] * d,
                d_xx: u[0] * dd,
            }
        };
        let b = BasisFunction::cosine(1, 1.0).unwrap();
        let (e1, de1) = b.eval(st.x);
        let u1 = st.u[0];
        // symbolic: e1² - u1² e1'² - ½ u1 e1 (e1'' = -e1 at k = L = 1)
        let expect = e1 * e1 - u1 * u1 * de1 * de1 - 0.5 * u1 * e1;
        // the sine member contributes -a u_2 e_2' ∂_x f
        let (_, de2) = m.basis[1].eval(st.x);
        let expect = expect - st.u[1] * de2 * u1 * de1;
        assert_abs_diff_eq!(m.apply_lifted_generator(f, 1.0, &st), expect, epsilon = 1e-14);
    }

    #[test]
    fn lifted_generator_single_member_example() {
        // at u_2 = 0 the printed closed form applies verbatim
        let m = pair(1.0, 1, 1.0);
        let st = SystemState::new(vec![1.3, 0.0], 0.4, 1.0);
        let b = BasisFunction::cosine(1, 1.0).unwrap();
        let f = |u: &[f64], x: f64| {
            let (v, d, dd) = b.eval2(x);
            LiftedJet {
                value: u[0] * v,
                grad_u: vec![v, 0.0],
                d_x: u[0] * d,
                d_xx: u[0] * dd,
            }
        };
        let (e1, de1) = b.eval(0.4);
        let expect = e1 * e1 - 1.3 * 1.3 * de1 * de1 - 0.5 * 1.3 * e1;
        assert_abs_diff_eq!(m.apply_lifted_generator(f, 1.0, &st), expect, epsilon = 1e-14);
    }

    #[test]
    fn collapsed_generator_examples() {
        let m = pair(1.0, 1, 1.0);
        let u = [0.8, -0.3];
        let c = |_: &[f64]| CollapsedJet {
            value: 1.0,
            grad: vec![0.0, 0.0],
            hess_diag: vec![0.0, 0.0],
        };
        assert_eq!(m.apply_collapsed_generator(c, &u).unwrap(), 0.0);
        let lin = |_: &[f64]| CollapsedJet {
            value: u[0],
            grad: vec![1.0, 0.0],
            hess_diag: vec![0.0, 0.0],
        };
        assert_abs_diff_eq!(
            m.apply_collapsed_generator(lin, &u).unwrap(),
            -u[0] / (4.0 * PI),
            epsilon = 1e-15
        );
        let sq = |v: &[f64]| CollapsedJet {
            value: v[0] * v[0],
            grad: vec![2.0 * v[0], 0.0],
            hess_diag: vec![2.0, 0.0],
        };
        assert_abs_diff_eq!(
            m.apply_collapsed_generator(sq, &u).unwrap(),
            (-2.0 * u[0] * u[0] + 2.0) / (4.0 * PI),
            epsilon = 1e-15
        );
    }

    #[test]
    fn invariant_law_examples() {
        assert_abs_diff_eq!(pair(1.0, 1, 1.0).invariant_law().unwrap().gaussian_variances[0], 1.0);
        assert_abs_diff_eq!(
            pair(2.0, 2, 1.0).invariant_law().unwrap().gaussian_variances[1],
            0.125
        );
        assert_abs_diff_eq!(pair(1.0, 1, 2.0).invariant_law().unwrap().gaussian_variances[0], 4.0);
        assert_eq!(
            SpectralModel::torus(1.0, &[1, 2], &[1.0, 0.0]).unwrap().invariant_law(),
            Err(Error::DegenerateMode { index: 2 })
        );
    }

    #[test]
    fn kernel_is_convolution() {
        let m = SpectralModel::torus(1.2, &[1, 3], &[0.4, 1.1]).unwrap();
        for &(x, y) in &[(0.1, 2.0), (3.3, 0.7), (5.0, 5.0)] {
            let z: f64 = x - y;
            let w = (0.4 * (z / 1.2).cos() + 1.1 * (3.0 * z / 1.2).cos()) / (PI * 1.2);
            assert_abs_diff_eq!(m.kernel(x, y), w, epsilon = 1e-14);
            assert_abs_diff_eq!(m.kernel(x, y), m.kernel(y, x), epsilon = 1e-15);
        }
    }
}
