use std::f64::consts::PI;

use proptest::prelude::*;
use selfrepel::bounds::{
    c2_squared, comparison_bound, comparison_bound_minimized, lower_bound_trel, manifold_gap, ou_gap, BoundsReport,
    SumConvention,
};
use selfrepel::tensors::compute_chi;
use selfrepel::SpectralModel64;

fn model_strategy() -> impl Strategy<Value = SpectralModel64> {
    (0.3f64..5.0, prop::collection::btree_set(1u32..5, 1..3))
        .prop_flat_map(|(l, freqs)| {
            let n = freqs.len();
            (Just(l), Just(freqs), prop::collection::vec(0.2f64..4.0, n))
        })
        .prop_map(|(l, freqs, a)| {
            let f: Vec<u32> = freqs.into_iter().collect();
            SpectralModel64::torus(l, &f, &a).unwrap()
        })
}

fn scaled_coefficients(m: &SpectralModel64, c: f64) -> SpectralModel64 {
    let a: Vec<f64> = m.frequency_coefficients.iter().map(|a| a * c).collect();
    SpectralModel64::torus(m.circumference_param, &m.frequencies, &a).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn homogeneity_in_the_coefficients(model in model_strategy(), c in 0.2f64..5.0) {
        // a → c·a: m and ν·T scale by c, C₂² by 1/c, lower bound by c^{-1/2};
        // χ, χ̃ and the ratio Σ/min in C₁² do not change
        let s = scaled_coefficients(&model, c);
        prop_assert!((ou_gap(&s) - c * ou_gap(&model)).abs() < 1e-12 * ou_gap(&s));
        prop_assert!((c2_squared(&s) * c - c2_squared(&model)).abs() < 1e-12 * c2_squared(&model));
        prop_assert!((lower_bound_trel(&s) * c.sqrt() - lower_bound_trel(&model)).abs() < 1e-12 * lower_bound_trel(&model));
        let r0 = BoundsReport::new(&model, &compute_chi(&model).unwrap()).unwrap();
        let r1 = BoundsReport::new(&s, &compute_chi(&s).unwrap()).unwrap();
        for conv in SumConvention::BOTH {
            prop_assert!((r0.c1_sq(conv) - r1.c1_sq(conv)).abs() < 1e-10 * r0.c1_sq(conv));
        }
    }

    #[test]
    fn sigma_star_minimises_the_upper_shape(model in model_strategy(), ratio in 0.5f64..2.0) {
        let r = BoundsReport::new(&model, &compute_chi(&model).unwrap()).unwrap();
        for conv in SumConvention::BOTH {
            let s = r.sigma_star(conv);
            let at = r.upper_bound_shape(conv, s);
            prop_assert!(at <= r.upper_bound_shape(conv, s * ratio) * (1.0 + 1e-12));
            prop_assert!((at - r.convention(conv).upper_shape_at_sigma_star).abs() < 1e-9 * at);
        }
        prop_assert!(r.c1_sq(SumConvention::PerBasisMember) >= r.c1_sq(SumConvention::PerFrequency));
    }

    #[test]
    fn rate_is_positive_and_peaks_in_sigma(model in model_strategy(), sigma in 0.05f64..5.0) {
        let r = BoundsReport::new(&model, &compute_chi(&model).unwrap()).unwrap();
        let conv = SumConvention::PerFrequency;
        let t = r.default_horizon();
        let nu = r.rate_nu(conv, sigma, t, 1.0).unwrap();
        prop_assert!(nu > 0.0 && nu.is_finite());
        // ν ∝ σ²/(σ⁴C₂² + K) peaks at σ⁴ = K/C₂²
        let k = r.c1_sq(conv) + (1.0 + 1.0 / (r.m * t * t)) / r.eta;
        let peak = (k / r.c2_sq).powf(0.25);
        prop_assert!(r.rate_nu(conv, peak, t, 1.0).unwrap() >= nu * (1.0 - 1e-12));
        let ub = r.upper_bound_trel(conv, sigma, t, 1.0).unwrap();
        prop_assert!((ub - (t + 1.0 / nu)).abs() < 1e-9 * ub);
    }

    #[test]
    fn comparison_minimum_is_a_minimum(l in 0.1f64..20.0, a in 0.2f64..4.0, f in 0.3f64..3.0) {
        let m = SpectralModel64::torus(l, &[1], &[a]).unwrap();
        let (v, s2) = comparison_bound_minimized(&m, 1.0).unwrap();
        prop_assert!((comparison_bound(&m, s2.sqrt(), 1.0).unwrap() - v).abs() < 1e-10 * v);
        prop_assert!(comparison_bound(&m, (s2 * f).sqrt(), 1.0).unwrap() >= v * (1.0 - 1e-12));
    }
}

#[test]
fn torus_closed_forms() {
    for &l in &[0.5, 1.0, 3.0] {
        let m = SpectralModel64::torus(l, &[1], &[2.0]).unwrap();
        assert!((ou_gap(&m) - 2.0 / (l * l) / (4.0 * PI * l)).abs() < 1e-15);
        assert!((manifold_gap(l).unwrap() - 1.0 / (l * l)).abs() < 1e-15);
        assert!((c2_squared(&m) - 4.0 * PI * l).abs() < 1e-12);
    }
    assert!(manifold_gap(0.0).is_err());
    let degenerate = SpectralModel64::torus(1.0, &[1], &[0.0]).unwrap();
    assert!(lower_bound_trel(&degenerate).is_infinite());
    assert!(c2_squared(&degenerate).is_infinite());
}
