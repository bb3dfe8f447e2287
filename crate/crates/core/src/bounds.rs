//! Closed-form relaxation-time bounds: OU gap, manifold gap, the lower bound
//! on `t_rel`, the constants `C₁²`, `C₂²`, the convergence rate `ν(σ, T)`,
//! the optimal diffusivity, and an older comparison bound for the torus.
//!
//! Sums over the spectrum are reported two ways. `PerFrequency` sums over
//! the `n` distinct frequencies; `PerBasisMember` sums over all `d = 2n`
//! members, which doubles every sum on the torus.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::SpectralModel;
use crate::scalar::Scalar;
use crate::tensors::ChiTensors;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SumConvention {
    PerFrequency,
    PerBasisMember,
}

impl SumConvention {
    pub const BOTH: [SumConvention; 2] = [SumConvention::PerFrequency, SumConvention::PerBasisMember];

    pub fn label(self) -> &'static str {
        match self {
            SumConvention::PerFrequency => "per_frequency",
            SumConvention::PerBasisMember => "per_basis_member",
        }
    }
}

/// `m = min_j a_j|λ_j| / (2ν(M))`; zero when some mode has no stiffness.
pub fn ou_gap<T: Scalar>(model: &SpectralModel<T>) -> T {
    min_stiffness(model) / (T::lit(2.0) * model.total_volume())
}

/// `η = 1/L²`, the lowest nonzero Laplace eigenvalue magnitude on `T_L`.
pub fn manifold_gap<T: Scalar>(l: T) -> Result<T> {
    if !(l > T::zero()) || !l.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "circumference parameter must be positive, got {l}"
        )));
    }
    Ok((l * l).recip())
}

fn min_stiffness<T: Scalar>(model: &SpectralModel<T>) -> T {
    model
        .stiffnesses()
        .into_iter()
        .fold(T::infinity(), |acc, s| acc.min(s))
}

fn stiffness_sum<T: Scalar>(model: &SpectralModel<T>, convention: SumConvention) -> T {
    let all: T = model.stiffnesses().into_iter().sum();
    match convention {
        SumConvention::PerBasisMember => all,
        // members come in cos/sin pairs of equal stiffness
        SumConvention::PerFrequency => all / T::lit(2.0),
    }
}

/// `sqrt(ν(M) / (4 min_j a_j|λ_j|))`; infinite when some stiffness vanishes.
pub fn lower_bound_trel<T: Scalar>(model: &SpectralModel<T>) -> T {
    let s = min_stiffness(model);
    if s <= T::zero() {
        return T::infinity();
    }
    (model.total_volume() / (T::lit(4.0) * s)).sqrt()
}

/// `sqrt(πL³ / (2 min_k a_k k²))`, the torus specialisation of
/// [`lower_bound_trel`].
pub fn lower_bound_trel_torus<T: Scalar>(l: T, frequencies: &[u32], coefficients: &[T]) -> T {
    let min = frequencies
        .iter()
        .zip(coefficients)
        .map(|(&k, &a)| {
            let k = T::from_u32(k).unwrap();
            a * k * k
        })
        .fold(T::infinity(), |acc, v| acc.min(v));
    if min <= T::zero() {
        return T::infinity();
    }
    (T::PI() * l * l * l / (T::lit(2.0) * min)).sqrt()
}

/// `C₁² = 8ν(M)(χ + 4χ̃ + 2χ̃ Σ a|λ| / min a|λ|)` from given tensor norms.
pub fn c1_squared_from_norms<T: Scalar>(
    model: &SpectralModel<T>,
    chi: T,
    chi_tilde: T,
    convention: SumConvention,
) -> T {
    let min = min_stiffness(model);
    let ratio = if min > T::zero() {
        stiffness_sum(model, convention) / min
    } else {
        T::infinity()
    };
    T::lit(8.0)
        * model.total_volume()
        * (chi + T::lit(4.0) * chi_tilde + T::lit(2.0) * chi_tilde * ratio)
}

pub fn c1_squared<T: Scalar>(
    model: &SpectralModel<T>,
    tensors: &ChiTensors<T>,
    convention: SumConvention,
) -> T {
    c1_squared_from_norms(model, tensors.chi, tensors.chi_tilde, convention)
}

/// `C₂² = 4ν(M) / min_j a_j`; infinite if some `a_j = 0`.
pub fn c2_squared<T: Scalar>(model: &SpectralModel<T>) -> T {
    let min_a = model
        .frequency_coefficients
        .iter()
        .fold(T::infinity(), |acc, &a| acc.min(a));
    if min_a <= T::zero() {
        return T::infinity();
    }
    T::lit(4.0) * model.total_volume() / min_a
}

/// `C σ² / (σ⁴C₂² + C₁² + (1/η)(1 + 1/(mT²)))`.
pub fn rate_nu_from<T: Scalar>(c1_sq: T, c2_sq: T, eta: T, m: T, sigma: T, horizon: T, c_universal: T) -> T {
    let s2 = sigma * sigma;
    let denom = s2 * s2 * c2_sq + c1_sq + eta.recip() * (T::one() + (m * horizon * horizon).recip());
    c_universal * s2 / denom
}

/// `σ*⁴ = (C₁² + 1/η) / C₂²`; returns `σ*²`.
pub fn sigma_star_sq_from<T: Scalar>(c1_sq: T, c2_sq: T, eta: T) -> T {
    ((c1_sq + eta.recip()) / c2_sq).sqrt()
}

/// Values depending on the sum convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConventionBounds<T> {
    pub convention: SumConvention,
    pub c1_sq: T,
    pub sigma_star_sq: T,
    pub sigma_star: T,
    /// `σ*²C₂² + σ*⁻²(C₁² + 1/η) = 2 sqrt(C₂²(C₁² + 1/η))`
    pub upper_shape_at_sigma_star: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport<T> {
    pub circumference_param: T,
    pub frequencies: Vec<u32>,
    pub coefficients: Vec<T>,
    pub volume: T,
    pub m: T,
    pub eta: T,
    pub c2_sq: T,
    pub t_rel_lower: T,
    pub chi: T,
    pub chi_tilde: T,
    /// Some stiffness `a_j|λ_j|` vanishes: `m = 0` and the lower bound is infinite.
    pub degenerate: bool,
    pub per_frequency: ConventionBounds<T>,
    pub per_basis_member: ConventionBounds<T>,
    /// The convention used where a single value is asked for.
    pub primary: SumConvention,
}

impl<T: Scalar> BoundsReport<T> {
    pub fn new(model: &SpectralModel<T>, tensors: &ChiTensors<T>) -> Result<Self> {
        Self::from_norms(model, tensors.chi, tensors.chi_tilde)
    }

    /// Report built from arbitrary tensor norms, e.g. printed reference values.
    pub fn from_norms(model: &SpectralModel<T>, chi: T, chi_tilde: T) -> Result<Self> {
        let eta = manifold_gap(model.circumference_param)?;
        let m = ou_gap(model);
        let c2_sq = c2_squared(model);
        let conv = |convention| {
            let c1_sq = c1_squared_from_norms(model, chi, chi_tilde, convention);
            let sigma_star_sq = sigma_star_sq_from(c1_sq, c2_sq, eta);
            ConventionBounds {
                convention,
                c1_sq,
                sigma_star_sq,
                sigma_star: sigma_star_sq.sqrt(),
                upper_shape_at_sigma_star: T::lit(2.0) * (c2_sq * (c1_sq + eta.recip())).sqrt(),
            }
        };
        Ok(Self {
            circumference_param: model.circumference_param,
            frequencies: model.frequencies.clone(),
            coefficients: model.frequency_coefficients.clone(),
            volume: model.total_volume(),
            m,
            eta,
            c2_sq,
            t_rel_lower: lower_bound_trel(model),
            chi,
            chi_tilde,
            degenerate: !(m > T::zero()),
            per_frequency: conv(SumConvention::PerFrequency),
            per_basis_member: conv(SumConvention::PerBasisMember),
            primary: SumConvention::PerFrequency,
        })
    }

    pub fn convention(&self, convention: SumConvention) -> &ConventionBounds<T> {
        match convention {
            SumConvention::PerFrequency => &self.per_frequency,
            SumConvention::PerBasisMember => &self.per_basis_member,
        }
    }

    pub fn c1_sq(&self, convention: SumConvention) -> T {
        self.convention(convention).c1_sq
    }

    /// `T = m^{-1/2}`.
    pub fn default_horizon(&self) -> T {
        self.m.sqrt().recip()
    }

    pub fn rate_nu(&self, convention: SumConvention, sigma: T, horizon: T, c_universal: T) -> Result<T> {
        if !(sigma > T::zero() && horizon > T::zero() && c_universal > T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "rate needs σ, T, C > 0, got σ={sigma}, T={horizon}, C={c_universal}"
            )));
        }
        Ok(rate_nu_from(
            self.c1_sq(convention),
            self.c2_sq,
            self.eta,
            self.m,
            sigma,
            horizon,
            c_universal,
        ))
    }

    /// `T + 1/ν`: the time after which `e^{-ν(t-T)} ≤ e^{-1}`.
    pub fn upper_bound_trel(&self, convention: SumConvention, sigma: T, horizon: T, c_universal: T) -> Result<T> {
        Ok(horizon + self.rate_nu(convention, sigma, horizon, c_universal)?.recip())
    }

    /// `σ²C₂² + σ⁻²(C₁² + 1/η)`, the σ-dependent shape of the upper bound.
    pub fn upper_bound_shape(&self, convention: SumConvention, sigma: T) -> T {
        let s2 = sigma * sigma;
        s2 * self.c2_sq + (self.c1_sq(convention) + self.eta.recip()) / s2
    }

    pub fn sigma_star(&self, convention: SumConvention) -> T {
        self.convention(convention).sigma_star
    }
}

/// Tensor norm `√26/(4πL)` printed for the single-frequency torus, used for
/// both `χ` and `χ̃`.
pub fn printed_single_frequency_norm<T: Scalar>(l: T) -> T {
    T::lit(26.0).sqrt() / (T::lit(4.0) * T::PI() * l)
}

/// Comparison bound for a torus model.
///
/// Single frequency (`λ = k²/L²`):
/// `C L² (1+aλ)²/(a²λ²) (σ²λ² + λB + σ⁻²B²)`, `B = 1 + sqrt(1+aλ)/L`.
///
/// Several frequencies: see [`comparison_bound_multi`].
pub fn comparison_bound<T: Scalar>(model: &SpectralModel<T>, sigma: T, c_universal: T) -> Result<T> {
    let (pre, a, b, c) = comparison_terms(model)?;
    let s2 = sigma * sigma;
    Ok(c_universal * pre * (a * s2 + b + c / s2))
}

/// Minimum over σ of [`comparison_bound`] and the minimising `σ²`.
///
/// The bracket is `Aσ² + B + Cσ⁻²`, minimised at `σ² = sqrt(C/A)`.
pub fn comparison_bound_minimized<T: Scalar>(model: &SpectralModel<T>, c_universal: T) -> Result<(T, T)> {
    let (pre, a, b, c) = comparison_terms(model)?;
    Ok((
        c_universal * pre * (b + T::lit(2.0) * (a * c).sqrt()),
        (c / a).sqrt(),
    ))
}

/// Multi-frequency form with `Λ₀ = min a_k k²/L²`, `Λ₁ = Σ a_k k²/L²`:
/// `C L² (1+Λ₀)²/Λ₀² (σ²Λ₁² + Λ₁B + σ⁻²B²)`, `B = n + n³ sqrt(1+Λ₁)/L`.
///
/// At `n = 1` this differs from the single-frequency form unless `a = 1`.
pub fn comparison_bound_multi<T: Scalar>(model: &SpectralModel<T>, sigma: T, c_universal: T) -> Result<T> {
    let (pre, a, b, c) = multi_terms(model)?;
    let s2 = sigma * sigma;
    Ok(c_universal * pre * (a * s2 + b + c / s2))
}

fn comparison_terms<T: Scalar>(model: &SpectralModel<T>) -> Result<(T, T, T, T)> {
    if model.n_frequencies() > 1 {
        return multi_terms(model);
    }
    let l = model.circumference_param;
    let a = model.frequency_coefficients[0];
    if !(a > T::zero()) {
        return Err(Error::InvalidModel("comparison bound needs a > 0".into()));
    }
    let k = T::from_u32(model.frequencies[0]).unwrap();
    let lam = k * k / (l * l);
    let al = a * lam;
    let pre = l * l * (T::one() + al).powi(2) / (al * al);
    let b = T::one() + (T::one() + al).sqrt() / l;
    Ok((pre, lam * lam, lam * b, b * b))
}

fn multi_terms<T: Scalar>(model: &SpectralModel<T>) -> Result<(T, T, T, T)> {
    let l = model.circumference_param;
    let n = T::from_usize_lossy(model.n_frequencies());
    let per: Vec<T> = model
        .frequencies
        .iter()
        .zip(&model.frequency_coefficients)
        .map(|(&k, &a)| {
            let k = T::from_u32(k).unwrap();
            a * k * k / (l * l)
        })
        .collect();
    let lam0 = per.iter().fold(T::infinity(), |acc, &v| acc.min(v));
    if !(lam0 > T::zero()) {
        return Err(Error::InvalidModel("comparison bound needs every a_k > 0".into()));
    }
    let lam1: T = per.iter().copied().sum();
    let pre = l * l * (T::one() + lam0).powi(2) / (lam0 * lam0);
    let b = n + n * n * n * (T::one() + lam1).sqrt() / l;
    Ok((pre, lam1 * lam1, lam1 * b, b * b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensors::compute_chi;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::PI;

    fn pair(l: f64, k: u32, a: f64) -> SpectralModel<f64> {
        SpectralModel::<f64>::torus(l, &[k], &[a]).unwrap()
    }

    fn printed(l: f64, a: f64) -> BoundsReport<f64> {
        let n = printed_single_frequency_norm(l);
        BoundsReport::from_norms(&pair(l, 1, a), n, n).unwrap()
    }

    #[test]
    fn ou_gap_examples() {
        assert_abs_diff_eq!(ou_gap(&pair(1.0, 1, 1.0)), 1.0 / (4.0 * PI), epsilon = 1e-15);
        assert_abs_diff_eq!(ou_gap(&pair(1.0, 1, 2.0)), 1.0 / (2.0 * PI), epsilon = 1e-15);
        let zero = SpectralModel::<f64>::torus(1.0, &[1, 2], &[1.0, 0.0]).unwrap();
        assert_eq!(ou_gap(&zero), 0.0);
        assert!(lower_bound_trel(&zero).is_infinite());
    }

    #[test]
    fn manifold_gap_examples() {
        assert_eq!(manifold_gap(1.0).unwrap(), 1.0);
        assert_eq!(manifold_gap(2.0).unwrap(), 0.25);
        for &l in &[0.3, 1.7] {
            let lam = crate::torus_basis::eigenvalue::<f64>(1, l).unwrap();
            assert_abs_diff_eq!(manifold_gap(l).unwrap(), lam.abs(), epsilon = 1e-15);
        }
        assert!(manifold_gap(0.0).is_err());
    }

    #[test]
    fn lower_bound_examples() {
        assert_abs_diff_eq!(lower_bound_trel(&pair(1.0, 1, 1.0)), (PI / 2.0).sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(
            lower_bound_trel(&pair(4.0, 1, 1.0)),
            8.0 * (PI / 2.0).sqrt(),
            epsilon = 1e-13
        );
    }

    #[test]
    fn printed_constants() {
        let r = printed(1.0, 1.0);
        assert_relative_eq!(r.per_frequency.c1_sq, 28.0 * 26f64.sqrt(), max_relative = 1e-12);
        assert!(r.per_frequency.c1_sq < 143.0);
        assert_relative_eq!(r.per_basis_member.c1_sq, 2.0 * 26f64.sqrt() * 18.0, max_relative = 1e-12);
        assert_relative_eq!(r.c2_sq, 8.0 * PI, max_relative = 1e-15);
        let s2 = ((28.0 * 26f64.sqrt() + 1.0) / (8.0 * PI)).sqrt();
        assert_relative_eq!(r.per_frequency.sigma_star_sq, s2, max_relative = 1e-12);
        assert_abs_diff_eq!(s2, 2.392, epsilon = 1e-3);
    }

    #[test]
    fn printed_rate_example() {
        let r = printed(1.0, 1.0);
        let nu = r
            .rate_nu(SumConvention::PerFrequency, 1.0, r.default_horizon(), 1.0)
            .unwrap();
        let expected = 1.0 / (8.0 * PI + 28.0 * 26f64.sqrt() + 2.0);
        assert_relative_eq!(nu, expected, max_relative = 1e-12);
        assert_abs_diff_eq!(nu, 5.89e-3, epsilon = 1e-5);
    }

    #[test]
    fn rate_limits_and_linearity() {
        let r = printed(1.0, 1.0);
        let t = r.default_horizon();
        let pf = SumConvention::PerFrequency;
        assert!(r.rate_nu(pf, 1e-4, t, 1.0).unwrap() < 1e-6);
        assert!(r.rate_nu(pf, 1e4, t, 1.0).unwrap() < 1e-6);
        assert_relative_eq!(
            r.rate_nu(pf, 1.3, t, 3.0).unwrap(),
            3.0 * r.rate_nu(pf, 1.3, t, 1.0).unwrap(),
            max_relative = 1e-14
        );
        assert!(r.rate_nu(pf, 0.0, t, 1.0).is_err());
    }

    #[test]
    fn sigma_star_maximises_rate() {
        let r = BoundsReport::new(&pair(2.0, 1, 0.7), &compute_chi(&pair(2.0, 1, 0.7)).unwrap()).unwrap();
        for conv in SumConvention::BOTH {
            let s = r.sigma_star(conv);
            let t = r.default_horizon();
            let at = r.rate_nu(conv, s, t, 1.0).unwrap();
            assert!(r.rate_nu(conv, 1.5 * s, t, 1.0).unwrap() < at);
            assert!(r.rate_nu(conv, s / 1.5, t, 1.0).unwrap() < at);
            let shape = r.upper_bound_shape(conv, s);
            assert_relative_eq!(shape, r.convention(conv).upper_shape_at_sigma_star, max_relative = 1e-12);
        }
    }

    #[test]
    fn c1_is_length_independent_for_single_pair() {
        let base = BoundsReport::new(&pair(1.0, 1, 1.0), &compute_chi(&pair(1.0, 1, 1.0)).unwrap()).unwrap();
        for &l in &[2.0, 4.0] {
            let m = pair(l, 1, 1.0);
            let r = BoundsReport::new(&m, &compute_chi(&m).unwrap()).unwrap();
            for conv in SumConvention::BOTH {
                assert_relative_eq!(r.c1_sq(conv), base.c1_sq(conv), max_relative = 1e-12);
            }
        }
        // quadrature tensors: 28·(χ·4πL) = 28√24
        assert_relative_eq!(base.per_frequency.c1_sq, 28.0 * 24f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn c2_examples() {
        assert_relative_eq!(c2_squared(&pair(2.0, 1, 0.5)), 32.0 * PI, max_relative = 1e-15);
        let m1 = SpectralModel::<f64>::torus(1.5, &[1, 3], &[0.4, 2.0]).unwrap();
        let m2 = SpectralModel::<f64>::torus(1.5, &[1, 3], &[1.2, 6.0]).unwrap();
        assert_relative_eq!(c2_squared(&m2), c2_squared(&m1) / 3.0, max_relative = 1e-14);
        let zero = SpectralModel::<f64>::torus(1.0, &[1], &[0.0]).unwrap();
        assert!(c2_squared(&zero).is_infinite());
    }

    #[test]
    fn general_and_torus_lower_bounds_agree() {
        let cases = [(0.3, 1, 0.2), (1.0, 2, 1.0), (3.7, 5, 2.5), (0.05, 1, 9.0)];
        for (l, k, a) in cases {
            let m = pair(l, k, a);
            let g = lower_bound_trel(&m);
            let t = lower_bound_trel_torus(l, &[k], &[a]);
            assert_relative_eq!(g, t, max_relative = 1e-14);
        }
    }

    #[test]
    fn monotonicity_in_constants() {
        let (c1, c2, eta, m, s, t) = (100.0, 25.0, 1.0, 0.08, 1.2, 3.5);
        let base = rate_nu_from(c1, c2, eta, m, s, t, 1.0);
        assert!(rate_nu_from(c1 * 1.1, c2, eta, m, s, t, 1.0) < base);
        assert!(rate_nu_from(c1, c2 * 1.1, eta, m, s, t, 1.0) < base);
        assert!(rate_nu_from(c1, c2, eta * 1.1, m, s, t, 1.0) > base);
        assert!(rate_nu_from(c1, c2, eta, m * 1.1, s, t, 1.0) > base);
    }

    #[test]
    fn comparison_bound_minimum_is_a_minimum() {
        let m = pair(1.7, 2, 0.6);
        let (best, s2) = comparison_bound_minimized(&m, 1.0).unwrap();
        let s = s2.sqrt();
        assert_relative_eq!(comparison_bound(&m, s, 1.0).unwrap(), best, max_relative = 1e-12);
        assert!(comparison_bound(&m, 1.2 * s, 1.0).unwrap() > best);
        assert!(comparison_bound(&m, s / 1.2, 1.0).unwrap() > best);
    }

    #[test]
    fn comparison_multi_matches_single_at_unit_coefficient() {
        let m = pair(2.3, 3, 1.0);
        for &s in &[0.4, 1.0, 2.5] {
            assert_relative_eq!(
                comparison_bound(&m, s, 1.0).unwrap(),
                comparison_bound_multi(&m, s, 1.0).unwrap(),
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn comparison_bound_orders() {
        let best = |l: f64| comparison_bound_minimized(&pair(l, 1, 1.0), 1.0).unwrap().0;
        let r64 = best(64.0) / 64f64.powi(4);
        let r128 = best(128.0) / 128f64.powi(4);
        assert!((r128 / r64 - 1.0).abs() < 0.1);
        let small = |l: f64| best(l) * l * l;
        let r1 = small(1.0 / 64.0);
        let r2 = small(1.0 / 128.0);
        assert!((r2 / r1 - 1.0).abs() < 0.1);
    }
}
