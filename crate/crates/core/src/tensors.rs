//! Rank-4 interaction tensors
//!
//! ```text
//! χ_ijkl  = ∫ e_i e_j e_k e_l dν
//! χ̃_ijkl = ∫ ⟨∇e_i, ∇e_j⟩⟨∇e_k, ∇e_l⟩ |λ_i|⁻¹ |λ_k|⁻¹ dν
//! ```
//!
//! computed by trapezoid quadrature (exact for these trigonometric
//! integrands), together with the frequency selection rule and an exact
//! rational enumeration of every entry that serves as an independent check.

use num_rational::Ratio;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::SpectralModel;
use crate::scalar::Scalar;
use crate::torus_basis::{make_quadrature, QuadratureRule, TrigKind};

/// Which of the two tensors an entry belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorKind {
    Chi,
    ChiTilde,
}

impl TensorKind {
    pub fn label(self) -> &'static str {
        match self {
            TensorKind::Chi => "chi",
            TensorKind::ChiTilde => "chi_tilde",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiTensors<T> {
    pub dim: usize,
    pub chi_entries: Vec<T>,
    pub chi_tilde_entries: Vec<T>,
    pub chi: T,
    pub chi_tilde: T,
}

impl<T: Scalar> ChiTensors<T> {
    #[inline]
    pub fn flat_index(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.dim + j) * self.dim + k) * self.dim + l
    }

    pub fn chi_at(&self, i: usize, j: usize, k: usize, l: usize) -> T {
        self.chi_entries[self.flat_index(i, j, k, l)]
    }

    pub fn chi_tilde_at(&self, i: usize, j: usize, k: usize, l: usize) -> T {
        self.chi_tilde_entries[self.flat_index(i, j, k, l)]
    }

    pub fn entries(&self, kind: TensorKind) -> &[T] {
        match kind {
            TensorKind::Chi => &self.chi_entries,
            TensorKind::ChiTilde => &self.chi_tilde_entries,
        }
    }

    /// Entries with `|value| ≥ threshold`, in row-major `(i, j, k, l)` order.
    pub fn nonzero_entries(&self, threshold: T) -> Vec<TensorEntry<T>> {
        let d = self.dim;
        let mut out = Vec::new();
        for kind in [TensorKind::Chi, TensorKind::ChiTilde] {
            let data = self.entries(kind);
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        for l in 0..d {
                            let v = data[self.flat_index(i, j, k, l)];
                            if v.abs() >= threshold {
                                out.push(TensorEntry {
                                    i,
                                    j,
                                    k,
                                    l,
                                    kind,
                                    value: v,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TensorEntry<T> {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub l: usize,
    pub kind: TensorKind,
    pub value: T,
}

/// Quadrature evaluation of both tensors with a rule exact up to four times
/// the largest model frequency.
pub fn compute_chi<T: Scalar>(model: &SpectralModel<T>) -> Result<ChiTensors<T>> {
    let f = 4 * model.max_frequency() as usize;
    let rule = make_quadrature(f, model.circumference_param)?;
    compute_chi_with_rule(model, &rule)
}

pub fn compute_chi_with_rule<T: Scalar>(
    model: &SpectralModel<T>,
    rule: &QuadratureRule<T>,
) -> Result<ChiTensors<T>> {
    let needed = 4 * model.max_frequency() as usize;
    if rule.max_frequency < needed {
        return Err(Error::InvalidArgument(format!(
            "quadrature exact to frequency {} but quartic products reach {needed}",
            rule.max_frequency
        )));
    }
    let d = model.dim();
    let nq = rule.len();
    // vals[j][q] = e_j(x_q), grads[j][q] = e_j'(x_q)
    let mut vals = vec![vec![T::zero(); nq]; d];
    let mut grads = vec![vec![T::zero(); nq]; d];
    for (j, b) in model.basis.iter().enumerate() {
        for (q, &x) in rule.nodes.iter().enumerate() {
            let (v, g) = b.eval(x);
            vals[j][q] = v;
            grads[j][q] = g;
        }
    }
    let inv_lam: Vec<T> = model.eigenvalues.iter().map(|l| l.abs().recip()).collect();
    let mut chi_entries = vec![T::zero(); d * d * d * d];
    let mut chi_tilde_entries = vec![T::zero(); d * d * d * d];
    let mut pair_v = vec![T::zero(); nq];
    let mut pair_g = vec![T::zero(); nq];
    for i in 0..d {
        for j in 0..d {
            for q in 0..nq {
                pair_v[q] = vals[i][q] * vals[j][q] * rule.weights[q];
                pair_g[q] = grads[i][q] * grads[j][q] * rule.weights[q] * inv_lam[i];
            }
            for k in 0..d {
                for l in 0..d {
                    let mut sv = T::zero();
                    let mut sg = T::zero();
                    for q in 0..nq {
                        sv += pair_v[q] * vals[k][q] * vals[l][q];
                        sg += pair_g[q] * grads[k][q] * grads[l][q];
                    }
                    let idx = ((i * d + j) * d + k) * d + l;
                    chi_entries[idx] = sv;
                    chi_tilde_entries[idx] = sg * inv_lam[k];
                }
            }
        }
    }
    let frob = |v: &[T]| v.iter().map(|&x| x * x).sum::<T>().sqrt();
    Ok(ChiTensors {
        dim: d,
        chi: frob(&chi_entries),
        chi_tilde: frob(&chi_tilde_entries),
        chi_entries,
        chi_tilde_entries,
    })
}

/// Whether `∫ Π_m trig_m(k_m x / L) dx` can be nonzero: the frequencies
/// must split into two groups of equal sum, and the number of sines must be
/// even (otherwise the integrand is odd).
pub fn selection_rule_nonzero(frequencies: [u32; 4], kinds: [TrigKind; 4]) -> bool {
    let sines = kinds.iter().filter(|k| **k == TrigKind::Sine).count();
    if sines % 2 == 1 {
        return false;
    }
    let total: u32 = frequencies.iter().sum();
    if total % 2 == 1 {
        return false;
    }
    // subset with sum total/2; the partition may be uneven in size
    (0u32..16).any(|mask| {
        let s: u32 = (0..4)
            .filter(|b| mask & (1 << b) != 0)
            .map(|b| frequencies[b])
            .sum();
        2 * s == total
    })
}

/// Mean over the circle of `Π_m trig_m(k_m θ)`, exactly.
///
/// Each factor is expanded into exponentials, `cos = (e⁺ + e⁻)/2` and
/// `sin = (e⁺ - e⁻)/(2i)`, and the constant term is collected.
pub fn quartic_mean_exact(frequencies: [u32; 4], kinds: [TrigKind; 4]) -> Ratio<i64> {
    let sines = kinds.iter().filter(|k| **k == TrigKind::Sine).count();
    if sines % 2 == 1 {
        return Ratio::from_integer(0);
    }
    // (1/i)^p = (-1)^{p/2} for even p
    let phase: i64 = if (sines / 2) % 2 == 0 { 1 } else { -1 };
    let mut acc: i64 = 0;
    for mask in 0u32..16 {
        let sign = |m: usize| -> i64 {
            if mask & (1 << m) != 0 {
                -1
            } else {
                1
            }
        };
        let freq_sum: i64 = (0..4).map(|m| sign(m) * frequencies[m] as i64).sum();
        if freq_sum != 0 {
            continue;
        }
        let sine_signs: i64 = (0..4)
            .filter(|&m| kinds[m] == TrigKind::Sine)
            .map(sign)
            .product();
        acc += phase * sine_signs;
    }
    Ratio::new(acc, 16)
}

/// Exact entries in units of `1/(4πL)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactEntry {
    pub chi: Ratio<i64>,
    pub chi_tilde: Ratio<i64>,
}

fn derivative_kind(kind: TrigKind) -> (TrigKind, i64) {
    match kind {
        TrigKind::Cosine => (TrigKind::Sine, -1),
        TrigKind::Sine => (TrigKind::Cosine, 1),
    }
}

/// Exact `χ_ijkl` and `χ̃_ijkl` in units of `1/(4πL)`.
///
/// `χ_ijkl = (πL)^{-2} · 2πL · mean = 8·mean / (4πL)`. For `χ̃` each
/// gradient contributes `±(k/L)` and swaps cos/sin; the two `|λ|⁻¹` factors
/// leave `k_j k_l / (k_i k_k)`.
pub fn exact_entry<T: Scalar>(model: &SpectralModel<T>, idx: [usize; 4]) -> ExactEntry {
    let freqs = idx.map(|m| model.basis[m].frequency);
    let kinds = idx.map(|m| model.basis[m].kind);
    let chi = quartic_mean_exact(freqs, kinds) * 8;
    let mut dkinds = kinds;
    let mut sign = 1i64;
    for m in 0..4 {
        let (k, s) = derivative_kind(kinds[m]);
        dkinds[m] = k;
        sign *= s;
    }
    let weight = Ratio::new(
        freqs[1] as i64 * freqs[3] as i64,
        freqs[0] as i64 * freqs[2] as i64,
    );
    let chi_tilde = quartic_mean_exact(freqs, dkinds) * 8 * sign * weight;
    ExactEntry { chi, chi_tilde }
}

/// Both tensors from the exact enumeration, as floating point.
pub fn compute_chi_exact<T: Scalar>(model: &SpectralModel<T>) -> ChiTensors<T> {
    let d = model.dim();
    let unit = (T::lit(4.0) * T::PI() * model.circumference_param).recip();
    let to_t = |r: Ratio<i64>| T::lit(*r.numer() as f64 / *r.denom() as f64) * unit;
    let mut chi_entries = Vec::with_capacity(d.pow(4));
    let mut chi_tilde_entries = Vec::with_capacity(d.pow(4));
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let e = exact_entry(model, [i, j, k, l]);
                    chi_entries.push(to_t(e.chi));
                    chi_tilde_entries.push(to_t(e.chi_tilde));
                }
            }
        }
    }
    let frob = |v: &[T]| v.iter().map(|&x| x * x).sum::<T>().sqrt();
    ChiTensors {
        dim: d,
        chi: frob(&chi_entries),
        chi_tilde: frob(&chi_tilde_entries),
        chi_entries,
        chi_tilde_entries,
    }
}

/// Entry-level agreement between quadrature and the selection rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionAudit {
    /// Entries (over both tensors) the rule declares possibly nonzero.
    pub rule_nonzero: usize,
    /// Entries with quadrature magnitude above the threshold.
    pub quadrature_nonzero: usize,
    /// Quadrature-nonzero entries the rule declares zero (must be 0).
    pub rule_violations: usize,
    /// Rule-nonzero entries that vanish by cancellation.
    pub cancellations: usize,
}

pub fn audit_selection_rule<T: Scalar>(
    model: &SpectralModel<T>,
    tensors: &ChiTensors<T>,
    threshold: T,
) -> SelectionAudit {
    let d = model.dim();
    let mut audit = SelectionAudit {
        rule_nonzero: 0,
        quadrature_nonzero: 0,
        rule_violations: 0,
        cancellations: 0,
    };
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let idx = [i, j, k, l];
                    let freqs = idx.map(|m| model.basis[m].frequency);
                    let kinds = idx.map(|m| model.basis[m].kind);
                    let rule = selection_rule_nonzero(freqs, kinds);
                    for kind in [TensorKind::Chi, TensorKind::ChiTilde] {
                        let v = tensors.entries(kind)[tensors.flat_index(i, j, k, l)];
                        let nonzero = v.abs() >= threshold;
                        audit.rule_nonzero += rule as usize;
                        audit.quadrature_nonzero += nonzero as usize;
                        if nonzero && !rule {
                            audit.rule_violations += 1;
                        }
                        if rule && !nonzero {
                            audit.cancellations += 1;
                        }
                    }
                }
            }
        }
    }
    audit
}

/// Side-by-side Frobenius aggregates for a single-frequency model: the
/// quadrature value against the `2·(3u)² + 8·u²` figure (`√26·u`) and the
/// `2·(3u)² + 6·u²` count (`√24·u`), with `u = 1/(4πL)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateComparison<T> {
    pub unit: T,
    pub quadrature_chi: T,
    pub quadrature_chi_tilde: T,
    pub printed_chi: T,
    pub six_arrangement_chi: T,
    /// Mixed (two-cos, two-sin) entries with nonzero quadrature.
    pub mixed_arrangements: usize,
    /// Which arrangement count the quadrature reproduces: 6 or 8 (0 if neither).
    pub supported_count: u32,
}

pub fn compare_single_frequency_aggregate<T: Scalar>(
    model: &SpectralModel<T>,
    tensors: &ChiTensors<T>,
) -> Result<AggregateComparison<T>> {
    if model.n_frequencies() != 1 {
        return Err(Error::InvalidArgument(
            "aggregate comparison needs a single-frequency model".into(),
        ));
    }
    let unit = (T::lit(4.0) * T::PI() * model.circumference_param).recip();
    let printed = T::lit(26.0).sqrt() * unit;
    let six = T::lit(24.0).sqrt() * unit;
    let mut mixed = 0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    if i + j + k + l == 2 && tensors.chi_at(i, j, k, l).abs() > T::lit(1e-12) * unit {
                        mixed += 1;
                    }
                }
            }
        }
    }
    let tol = T::lit(1e-10) * unit;
    let supported_count = if (tensors.chi - six).abs() < tol {
        6
    } else if (tensors.chi - printed).abs() < tol {
        8
    } else {
        0
    };
    Ok(AggregateComparison {
        unit,
        quadrature_chi: tensors.chi,
        quadrature_chi_tilde: tensors.chi_tilde,
        printed_chi: printed,
        six_arrangement_chi: six,
        mixed_arrangements: mixed,
        supported_count,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow<T> {
    pub n: usize,
    pub chi: T,
    pub chi_tilde: T,
    /// `χ · L / n^{3/2}`
    pub chi_scaled: T,
    /// `χ̃ · L / n³`
    pub chi_tilde_scaled: T,
    pub running_max_chi_scaled: T,
    pub running_max_chi_tilde_scaled: T,
}

/// `χ(n)` and `χ̃(n)` for frequencies `1..=n`, `n = 1..=n_max`, unit coefficients.
pub fn scaling_probe<T: Scalar>(n_max: usize, l: T) -> Result<Vec<ScalingRow<T>>> {
    if n_max == 0 || n_max > 8 {
        return Err(Error::InvalidArgument(format!(
            "scaling probe supports 1 ≤ n_max ≤ 8, got {n_max}"
        )));
    }
    let mut rows = Vec::with_capacity(n_max);
    let mut max_c = T::zero();
    let mut max_ct = T::zero();
    for n in 1..=n_max {
        let freqs: Vec<u32> = (1..=n as u32).collect();
        let model = SpectralModel::torus(l, &freqs, &vec![T::one(); n])?;
        let t = compute_chi(&model)?;
        let nf = T::from_usize_lossy(n);
        let cs = t.chi * l / nf.powf(T::lit(1.5));
        let cts = t.chi_tilde * l / nf.powi(3);
        max_c = max_c.max(cs);
        max_ct = max_ct.max(cts);
        rows.push(ScalingRow {
            n,
            chi: t.chi,
            chi_tilde: t.chi_tilde,
            chi_scaled: cs,
            chi_tilde_scaled: cts,
            running_max_chi_scaled: max_c,
            running_max_chi_tilde_scaled: max_ct,
        });
    }
    Ok(rows)
}
