//! Normalised probabilists' Hermite polynomials, Gauss–Hermite quadrature for
//! centred Gaussians, and total-degree multi-index sets.
//!
//! With `y = u / s`, the family `h_n(y) = He_n(y) / sqrt(n!)` is orthonormal in
//! `L²(N(0, s²))` and satisfies the ladder relations
//!
//! ```text
//! d/du h_n(u/s) = sqrt(n) / s · h_{n-1}(u/s)
//! u · h_n(u/s)  = s · (sqrt(n+1) h_{n+1}(u/s) + sqrt(n) h_{n-1}(u/s))
//! ```

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};

/// `[h_0(y), ..., h_n(y)]`.
pub fn hermite_normalized(n: usize, y: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n >= 1 {
        out.push(y);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = (y * out[k] - kf.sqrt() * out[k - 1]) / (kf + 1.0).sqrt();
        out.push(next);
    }
    out
}

/// Gauss–Hermite rule for the standard normal law: exact for polynomials of
/// degree `2n - 1`, weights sum to one.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Golub–Welsch on the Jacobi matrix of the probabilists' recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss–Hermite rule needs at least one node");
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            let b = (i as f64).sqrt();
            jac[(i, i - 1)] = b;
            jac[(i - 1, i)] = b;
        }
        let eig = SymmetricEigen::new(jac);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                (eig.eigenvalues[i], v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // symmetrise to remove the eigensolver's tiny asymmetry
        let mut nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let mut weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let x = 0.5 * (nodes[j] - nodes[i]);
            nodes[i] = -x;
            nodes[j] = x;
            let w = 0.5 * (weights[i] + weights[j]);
            weights[i] = w;
            weights[j] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Self { nodes, weights }
    }
}

/// Tensor-product Gauss–Hermite grid for `N(0, diag(s²))` on `R^d`.
#[derive(Debug, Clone)]
pub struct GaussianGrid {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl GaussianGrid {
    pub fn new(std_devs: &[f64], nodes_per_dim: usize) -> Self {
        let rule = GaussHermite::new(nodes_per_dim);
        let d = std_devs.len();
        let total = nodes_per_dim.pow(d as u32);
        let mut points = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            let p: Vec<f64> = idx
                .iter()
                .zip(std_devs)
                .map(|(&i, &s)| s * rule.nodes[i])
                .collect();
            let w: f64 = idx.iter().map(|&i| rule.weights[i]).product();
            points.push(p);
            weights.push(w);
            for slot in idx.iter_mut() {
                *slot += 1;
                if *slot < nodes_per_dim {
                    break;
                }
                *slot = 0;
            }
        }
        Self { points, weights }
    }

    pub fn integrate<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, &w)| w * f(p))
            .sum()
    }
}

/// All multi-indices `α ∈ N^d` with `|α| ≤ max_degree`, ordered by total
/// degree and then lexicographically. Index 0 is the zero multi-index.
#[derive(Debug, Clone)]
pub struct MultiIndexSet {
    pub dim: usize,
    pub max_degree: u32,
    indices: Vec<Vec<u32>>,
    lookup: HashMap<Vec<u32>, usize>,
}

impl MultiIndexSet {
    pub fn total_degree(dim: usize, max_degree: u32) -> Self {
        let mut indices = Vec::new();
        for deg in 0..=max_degree {
            let mut cur = vec![0u32; dim];
            push_compositions(&mut indices, &mut cur, 0, deg);
        }
        let lookup = indices
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();
        Self {
            dim,
            max_degree,
            indices,
            lookup,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn get(&self, i: usize) -> &[u32] {
        &self.indices[i]
    }

    pub fn index_of(&self, alpha: &[u32]) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> {
        self.indices.iter().map(|v| v.as_slice())
    }
}

fn push_compositions(out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>, pos: usize, remaining: u32) {
    if pos + 1 == cur.len() {
        cur[pos] = remaining;
        out.push(cur.clone());
        cur[pos] = 0;
        return;
    }
    if cur.is_empty() {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for v in (0..=remaining).rev() {
        cur[pos] = v;
        push_compositions(out, cur, pos + 1, remaining - v);
    }
    cur[pos] = 0;
}

/// Binomial coefficient as `usize`.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// `g(u) = Σ_α c_α Π_j h_{α_j}(u_j / s_j)`.
#[derive(Debug, Clone)]
pub struct HermitePoly {
    pub set: MultiIndexSet,
    pub coeffs: Vec<f64>,
    pub std_devs: Vec<f64>,
}

/// Value, gradient and Hessian of a function on `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyJet {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<Vec<f64>>,
}

impl HermitePoly {
    pub fn new(set: MultiIndexSet, coeffs: Vec<f64>, std_devs: Vec<f64>) -> Self {
        assert_eq!(set.len(), coeffs.len());
        assert_eq!(set.dim, std_devs.len());
        Self {
            set,
            coeffs,
            std_devs,
        }
    }

    pub fn jet(&self, u: &[f64]) -> PolyJet {
        let d = self.set.dim;
        let deg = self.set.max_degree as usize;
        let tables: Vec<Vec<f64>> = u
            .iter()
            .zip(&self.std_devs)
            .map(|(&ui, &s)| hermite_normalized(deg, ui / s))
            .collect();
        // h_{n-m} with the ladder prefactor sqrt(n!/(n-m)!) / s^m
        let lowered = |j: usize, n: u32, m: u32| -> f64 {
            if n < m {
                return 0.0;
            }
            let mut f = 1.0;
            for t in 0..m {
                f *= ((n - t) as f64).sqrt() / self.std_devs[j];
            }
            f * tables[j][(n - m) as usize]
        };
        let mut value = 0.0;
        let mut grad = vec![0.0; d];
        let mut hess = vec![vec![0.0; d]; d];
        for (alpha, &c) in self.set.iter().zip(&self.coeffs) {
            if c == 0.0 {
                continue;
            }
            let base: Vec<f64> = (0..d).map(|j| tables[j][alpha[j] as usize]).collect();
            let prod_except = |skip: &[usize]| -> f64 {
                (0..d)
                    .filter(|j| !skip.contains(j))
                    .map(|j| base[j])
                    .product()
            };
            value += c * prod_except(&[]);
            for i in 0..d {
                grad[i] += c * lowered(i, alpha[i], 1) * prod_except(&[i]);
                hess[i][i] += c * lowered(i, alpha[i], 2) * prod_except(&[i]);
                for k in (i + 1)..d {
                    let v = c * lowered(i, alpha[i], 1) * lowered(k, alpha[k], 1) * prod_except(&[i, k]);
                    hess[i][k] += v;
                    hess[k][i] += v;
                }
            }
        }
        PolyJet { value, grad, hess }
    }
}
