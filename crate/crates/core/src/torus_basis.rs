//! Laplace–Beltrami eigenbasis of the flat circle `T_L = R / (2πL Z)` and
//! uniform trapezoid quadrature, which is exact on trigonometric polynomials
//! of bounded frequency.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TrigKind {
    Cosine,
    Sine,
}

impl TrigKind {
    pub fn label(self) -> &'static str {
        match self {
            TrigKind::Cosine => "cos",
            TrigKind::Sine => "sin",
        }
    }
}

/// One member `(πL)^{-1/2} cos(kx/L)` or `(πL)^{-1/2} sin(kx/L)` of the
/// orthonormal eigenbasis of `T_L` with respect to the volume measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BasisFunction<T> {
    pub kind: TrigKind,
    pub frequency: u32,
    pub circumference_param: T,
}

impl<T: Scalar> BasisFunction<T> {
    pub fn new(kind: TrigKind, frequency: u32, circumference_param: T) -> Result<Self> {
        check_basis_params(frequency, circumference_param)?;
        Ok(Self {
            kind,
            frequency,
            circumference_param,
        })
    }

    pub fn cosine(frequency: u32, circumference_param: T) -> Result<Self> {
        Self::new(TrigKind::Cosine, frequency, circumference_param)
    }

    pub fn sine(frequency: u32, circumference_param: T) -> Result<Self> {
        Self::new(TrigKind::Sine, frequency, circumference_param)
    }

    /// Laplace–Beltrami eigenvalue `-k²/L²`.
    pub fn eigenvalue(&self) -> T {
        let k = T::from_u32(self.frequency).unwrap();
        -(k * k) / (self.circumference_param * self.circumference_param)
    }

    /// Angular wavenumber `k / L`.
    pub fn wavenumber(&self) -> T {
        T::from_u32(self.frequency).unwrap() / self.circumference_param
    }

    /// Normalisation `(πL)^{-1/2}`.
    pub fn amplitude(&self) -> T {
        (T::PI() * self.circumference_param).sqrt().recip()
    }

    /// Value and first derivative at `x`.
    pub fn eval(&self, x: T) -> (T, T) {
        let (v, d, _) = self.eval2(x);
        (v, d)
    }

    /// Value, first and second derivative at `x`.
    pub fn eval2(&self, x: T) -> (T, T, T) {
        let w = self.wavenumber();
        let amp = self.amplitude();
        let (s, c) = (w * x).sin_cos();
        match self.kind {
            TrigKind::Cosine => (amp * c, -amp * w * s, -amp * w * w * c),
            TrigKind::Sine => (amp * s, amp * w * c, -amp * w * w * s),
        }
    }
}

fn check_basis_params<T: Scalar>(frequency: u32, circumference_param: T) -> Result<()> {
    if frequency == 0 {
        return Err(Error::DegenerateBasis(
            "frequency k = 0 is the constant mode, not part of the basis".into(),
        ));
    }
    if !(circumference_param > T::zero()) || !circumference_param.is_finite() {
        return Err(Error::DegenerateBasis(format!(
            "circumference parameter L must be positive, got {circumference_param}"
        )));
    }
    Ok(())
}

/// Eigenvalue `-k²/L²` of the Laplace–Beltrami operator on `T_L`.
pub fn eigenvalue<T: Scalar>(k: u32, l: T) -> Result<T> {
    check_basis_params(k, l)?;
    let k = T::from_u32(k).unwrap();
    Ok(-(k * k) / (l * l))
}

/// Value and derivative of `f` at `x`; `x` is reduced onto `[0, 2πL)` first.
pub fn eval_basis<T: Scalar>(f: &BasisFunction<T>, x: T) -> (T, T) {
    f.eval(reduce_to_circle(x, f.circumference_param))
}

/// Circumference `2πL` of `T_L`.
pub fn circumference<T: Scalar>(l: T) -> T {
    T::TAU() * l
}

/// Reduces `x` onto `[0, 2πL)`.
pub fn reduce_to_circle<T: Scalar>(x: T, l: T) -> T {
    let period = circumference(l);
    let mut r = x % period;
    if r < T::zero() {
        r += period;
    }
    // r + period can round up to exactly period for tiny negative r
    if r >= period {
        r = T::zero();
    }
    r
}

/// Uniform trapezoid rule on `T_L`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureRule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
    /// Largest frequency `F` for which `cos(jx/L)`, `j ≤ F`, integrates exactly.
    pub max_frequency: usize,
}

impl<T: Scalar> QuadratureRule<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(T) -> T>(&self, mut f: F) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Trapezoid rule exact for trigonometric polynomials up to `max_frequency`.
///
/// The node count is `2F + 1` rounded up to a power of two, so products of
/// two factors with frequencies up to `F` each are still integrated exactly.
pub fn make_quadrature<T: Scalar>(max_frequency: usize, l: T) -> Result<QuadratureRule<T>> {
    if !(l > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "circumference parameter must be positive, got {l}"
        )));
    }
    let f = max_frequency.max(1);
    let n = (2 * f + 1).next_power_of_two();
    let period = circumference(l);
    let h = period / T::from_usize_lossy(n);
    let nodes = (0..n).map(|i| T::from_usize_lossy(i) * h).collect();
    let weights = vec![h; n];
    Ok(QuadratureRule {
        nodes,
        weights,
        // a uniform n-point rule integrates cos(jx/L) exactly for j < n
        max_frequency: n - 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn eigenvalue_examples() {
        assert_eq!(eigenvalue(1, 1.0).unwrap(), -1.0);
        assert_eq!(eigenvalue(2, 0.5).unwrap(), -16.0);
        assert_eq!(eigenvalue(3, 2.0).unwrap(), -2.25);
    }

    #[test]
    fn eigenvalue_rejects_degenerate_input() {
        assert!(matches!(eigenvalue(0, 1.0), Err(Error::DegenerateBasis(_))));
        assert!(matches!(eigenvalue(1, 0.0), Err(Error::DegenerateBasis(_))));
        assert!(matches!(eigenvalue(1, -2.0), Err(Error::DegenerateBasis(_))));
        assert!(BasisFunction::cosine(0, 1.0).is_err());
    }

    #[test]
    fn eval_at_origin() {
        let c = BasisFunction::cosine(1, 1.0).unwrap();
        let s = BasisFunction::sine(1, 1.0).unwrap();
        let inv_sqrt_pi = PI.sqrt().recip();
        let (v, d) = eval_basis(&c, 0.0);
        assert_abs_diff_eq!(v, inv_sqrt_pi, epsilon = 1e-15);
        assert_abs_diff_eq!(d, 0.0, epsilon = 1e-15);
        let (v, d) = eval_basis(&s, 0.0);
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d, inv_sqrt_pi, epsilon = 1e-15);
    }

    #[test]
    fn eval_is_periodic() {
        let l = 1.7;
        for f in [
            BasisFunction::cosine(3, l).unwrap(),
            BasisFunction::sine(2, l).unwrap(),
        ] {
            for &x in &[0.0, 0.3, 2.9, 7.5] {
                let a = eval_basis(&f, x);
                let b = eval_basis(&f, x + circumference(l));
                assert_abs_diff_eq!(a.0, b.0, epsilon = 1e-12);
                assert_abs_diff_eq!(a.1, b.1, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn reduction_lands_in_half_open_interval() {
        let l = 0.8;
        let p = circumference(l);
        for &x in &[-1e-18, -p, -3.0 * p - 0.1, 0.0, p, 5.5 * p, 1e6] {
            let r = reduce_to_circle(x, l);
            assert!((0.0..p).contains(&r), "{x} -> {r}");
        }
    }

    #[test]
    fn quadrature_examples() {
        let l = 1.3;
        let q = make_quadrature(4, l).unwrap();
        assert!(q.len() >= 5);
        assert!(q.len().is_power_of_two());
        assert_abs_diff_eq!(q.integrate(|_| 1.0), 2.0 * PI * l, epsilon = 1e-12);
        assert_abs_diff_eq!(q.integrate(|x| (x / l).cos().powi(2)), PI * l, epsilon = 1e-12);
        assert_abs_diff_eq!(q.integrate(|x| (x / l).cos() * (x / l).sin()), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn quadrature_exact_up_to_declared_frequency() {
        for &l in &[0.5, 1.0, 3.0] {
            let q = make_quadrature(6, l).unwrap();
            assert_abs_diff_eq!(q.integrate(|_| 1.0), 2.0 * PI * l, epsilon = 1e-12);
            for j in 1..=q.max_frequency {
                let v = q.integrate(|x| (j as f64 * x / l).cos());
                assert_abs_diff_eq!(v, 0.0, epsilon = 1e-11);
            }
        }
    }

    fn members(max_k: u32, l: f64) -> Vec<BasisFunction<f64>> {
        (1..=max_k)
            .flat_map(|k| {
                [
                    BasisFunction::cosine(k, l).unwrap(),
                    BasisFunction::sine(k, l).unwrap(),
                ]
            })
            .collect()
    }

    #[test]
    fn orthonormality_and_eigenrelation() {
        let l = 1.9;
        let q = make_quadrature(8, l).unwrap();
        let fs = members(4, l);
        for (i, f) in fs.iter().enumerate() {
            for (j, g) in fs.iter().enumerate() {
                let ip = q.integrate(|x| f.eval(x).0 * g.eval(x).0);
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(ip, expected, epsilon = 1e-12);
                let lam = f.eigenvalue();
                let res = q.integrate(|x| {
                    let (v, _, dd) = f.eval2(x);
                    (dd - lam * v) * g.eval(x).0
                });
                assert_abs_diff_eq!(res, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn single_precision_instantiation() {
        let f = BasisFunction::<f32>::cosine(2, 0.5).unwrap();
        assert_eq!(f.eigenvalue(), -16.0f32);
        let q = make_quadrature::<f32>(4, 1.0).unwrap();
        assert!((q.integrate(|_| 1.0) - std::f32::consts::TAU).abs() < 1e-5);
    }
}
