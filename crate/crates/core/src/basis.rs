//! Velocity basis: multi-indices, normalized Hermite functions and Gauss–Hermite
//! quadrature for the Gaussian measure `dμ = exp(-|v|²/2) dv`.
//!
//! Hermite functions are the normalized probabilists' polynomials
//! `ψ_k = h_k / Z_k` with `Z_k² = k! √(2π)`, so that `(ψ_k, ψ_l)_μ = δ_kl`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{KfpError, Result};

/// Largest supported quadrature size per dimension.
pub const MAX_QUADRATURE: usize = 200;

/// `(2π)^{-1/4}`, the constant value of `ψ_0`.
pub fn psi0() -> f64 {
    (2.0 * PI).powf(-0.25)
}

/// A velocity multi-index `α = (α_1, …, α_d)`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(alpha: Vec<u32>) -> Self {
        MultiIndex(alpha)
    }

    pub fn zeros(d: usize) -> Self {
        MultiIndex(vec![0; d])
    }

    /// `|α| = Σ α_i`.
    pub fn degree(&self) -> usize {
        self.0.iter().map(|&a| a as usize).sum()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn get(&self, i: usize) -> u32 {
        self.0[i]
    }

    /// `α + e_i`.
    pub fn raised(&self, i: usize) -> MultiIndex {
        let mut a = self.0.clone();
        a[i] += 1;
        MultiIndex(a)
    }

    /// `α - e_i`, or `None` when `α_i = 0`.
    pub fn lowered(&self, i: usize) -> Option<MultiIndex> {
        if self.0[i] == 0 {
            return None;
        }
        let mut a = self.0.clone();
        a[i] -= 1;
        Some(MultiIndex(a))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, a) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        MultiIndex(v)
    }
}

/// `binomial(m + d, d)` with overflow detection.
pub fn basis_size(d: usize, m: usize) -> Option<usize> {
    let mut c: usize = 1;
    for i in 1..=d {
        // c == binomial(m + i - 1, i - 1) here, so the division is exact.
        c = c.checked_mul(m.checked_add(i)?)? / i;
    }
    Some(c)
}

/// Graded enumeration of all multi-indices with `|α| ≤ m`.
///
/// Within one degree the order is reverse lexicographic (larger leading
/// entries first), which for `d = 2, m = 1` gives `(0,0), (1,0), (0,1)`.
/// Because the order is graded, every ladder matrix `B_i` is strictly upper
/// triangular.
#[derive(Clone, Debug)]
pub struct BasisIndexer {
    dim: usize,
    degree: usize,
    order: Vec<MultiIndex>,
    position: HashMap<MultiIndex, usize>,
    raise: Vec<Option<usize>>,
    lower: Vec<Option<usize>>,
    degree_start: Vec<usize>,
}

impl BasisIndexer {
    pub fn new(d: usize, m: usize) -> Result<Self> {
        if d == 0 {
            return Err(KfpError::InvalidArgument("dimension d must be at least 1".into()));
        }
        let n = basis_size(d, m).ok_or(KfpError::BasisOverflow { d, m })?;
        // ladder triplets store rows as u32
        if n > u32::MAX as usize {
            return Err(KfpError::BasisOverflow { d, m });
        }

        let mut order = Vec::with_capacity(n);
        let mut degree_start = Vec::with_capacity(m + 2);
        let mut scratch = vec![0u32; d];
        for deg in 0..=m {
            degree_start.push(order.len());
            push_compositions(&mut scratch, 0, deg as u32, &mut order);
        }
        degree_start.push(order.len());
        debug_assert_eq!(order.len(), n);

        let position: HashMap<MultiIndex, usize> =
            order.iter().enumerate().map(|(j, a)| (a.clone(), j)).collect();

        let mut raise = vec![None; n * d];
        let mut lower = vec![None; n * d];
        for (j, alpha) in order.iter().enumerate() {
            for i in 0..d {
                if alpha.degree() < m {
                    raise[j * d + i] = position.get(&alpha.raised(i)).copied();
                }
                if let Some(b) = alpha.lowered(i) {
                    lower[j * d + i] = position.get(&b).copied();
                }
            }
        }

        Ok(BasisIndexer { dim: d, degree: m, order, position, raise, lower, degree_start })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Truncation degree `m`.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn order(&self) -> &[MultiIndex] {
        &self.order
    }

    pub fn index(&self, j: usize) -> &MultiIndex {
        &self.order[j]
    }

    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.position.get(alpha).copied()
    }

    /// Array index of `α^j + e_i`, or `None` if that exceeds degree `m`.
    ///
    /// Panics if `j` or `i` is out of range.
    pub fn raise(&self, j: usize, i: usize) -> Option<usize> {
        assert!(j < self.len() && i < self.dim, "raise: index out of range (j={j}, i={i})");
        self.raise[j * self.dim + i]
    }

    /// Array index of `α^j - e_i`, or `None` if `α^j_i = 0`.
    pub fn lower(&self, j: usize, i: usize) -> Option<usize> {
        assert!(j < self.len() && i < self.dim, "lower: index out of range (j={j}, i={i})");
        self.lower[j * self.dim + i]
    }

    /// Contiguous range of array indices with `|α| = k`.
    pub fn degree_range(&self, k: usize) -> std::ops::Range<usize> {
        if k > self.degree {
            return self.len()..self.len();
        }
        self.degree_start[k]..self.degree_start[k + 1]
    }

    /// Values `Ψ_α(v)` for every basis element, in array order.
    pub fn eval_all(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim);
        let tables: Vec<Vec<f64>> = v.iter().map(|&vi| hermite_table(self.degree, vi)).collect();
        self.order
            .iter()
            .map(|alpha| {
                alpha
                    .as_slice()
                    .iter()
                    .zip(&tables)
                    .map(|(&a, t)| t[a as usize])
                    .product()
            })
            .collect()
    }
}

fn push_compositions(scratch: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<MultiIndex>) {
    if pos + 1 == scratch.len() {
        scratch[pos] = remaining;
        out.push(MultiIndex(scratch.to_vec()));
        return;
    }
    for a in (0..=remaining).rev() {
        scratch[pos] = a;
        push_compositions(scratch, pos + 1, remaining - a, out);
    }
}

/// `ψ_k(v)`, evaluated by the normalized three-term recurrence
/// `ψ_{k+1} = (v ψ_k - √k ψ_{k-1}) / √(k+1)`.
///
/// Stable for k in the hundreds at moderate |v|; the polynomial growth
/// overflows only for extreme `k·v²`.
pub fn eval_hermite(k: usize, v: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = psi0();
    for j in 0..k {
        let next = (v * cur - (j as f64).sqrt() * prev) / ((j + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// `ψ_0(v), …, ψ_kmax(v)`.
pub fn hermite_table(kmax: usize, v: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(kmax + 1);
    out.push(psi0());
    let mut prev = 0.0;
    for j in 0..kmax {
        let cur = out[j];
        let next = (v * cur - (j as f64).sqrt() * prev) / ((j + 1) as f64).sqrt();
        prev = cur;
        out.push(next);
    }
    out
}

/// `ψ_k'(v) = √k ψ_{k-1}(v)`.
pub fn eval_hermite_derivative(k: usize, v: f64) -> f64 {
    if k == 0 {
        0.0
    } else {
        (k as f64).sqrt() * eval_hermite(k - 1, v)
    }
}

/// One-dimensional Gauss quadrature for `dμ = exp(-v²/2) dv`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ w_i f(v_i)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&v, &w)| w * f(v)).sum()
    }
}

/// Gauss–Hermite rule with `q` nodes for the weight `exp(-v²/2)`.
///
/// Exact for polynomials of degree `≤ 2q - 1`. Nodes come from the symmetric
/// Jacobi matrix of the monic probabilists' polynomials (off-diagonal `√k`),
/// are polished by Newton on `ψ_q`, and the weights are Christoffel numbers
/// `1 / Σ_{k<q} ψ_k(v_i)²`.
pub fn gauss_rule(q: usize) -> Result<QuadratureRule> {
    if q == 0 {
        return Err(KfpError::InvalidArgument("quadrature size must be positive".into()));
    }
    if q > MAX_QUADRATURE {
        return Err(KfpError::InvalidArgument(format!(
            "quadrature size {q} exceeds the supported maximum {MAX_QUADRATURE}"
        )));
    }
    let jacobi = DMatrix::from_fn(q, q, |r, c| {
        if r + 1 == c {
            (c as f64).sqrt()
        } else if c + 1 == r {
            (r as f64).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.total_cmp(b));

    for v in nodes.iter_mut() {
        for _ in 0..3 {
            let t = hermite_table(q, *v);
            let dpsi = (q as f64).sqrt() * t[q - 1];
            if dpsi == 0.0 {
                break;
            }
            let step = t[q] / dpsi;
            *v -= step;
            if step.abs() <= 1e-16 * v.abs().max(1.0) {
                break;
            }
        }
    }
    // symmetric rule: enforce exact antisymmetry of the nodes
    for i in 0..q / 2 {
        let s = 0.5 * (nodes[q - 1 - i] - nodes[i]);
        nodes[i] = -s;
        nodes[q - 1 - i] = s;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.0;
    }

    let weights = nodes
        .iter()
        .map(|&v| 1.0 / hermite_table(q - 1, v).iter().map(|p| p * p).sum::<f64>())
        .collect();
    Ok(QuadratureRule { nodes, weights })
}

/// Tensor-product rule on `R^d` built from a one-dimensional rule.
#[derive(Clone, Debug)]
pub struct TensorRule {
    dim: usize,
    /// Flat `len × dim` node coordinates.
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl TensorRule {
    pub fn new(rule: &QuadratureRule, d: usize) -> Self {
        let q = rule.len();
        let total = q.pow(d as u32);
        let mut points = Vec::with_capacity(total * d);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            let mut w = 1.0;
            for &k in &idx {
                points.push(rule.nodes[k]);
                w *= rule.weights[k];
            }
            weights.push(w);
            for slot in idx.iter_mut().rev() {
                *slot += 1;
                if *slot < q {
                    break;
                }
                *slot = 0;
            }
        }
        TensorRule { dim: d, points, weights }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.dim..(k + 1) * self.dim]
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}
