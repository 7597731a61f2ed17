//! Projection of initial data and sources onto the Hermite span, pointwise
//! reconstruction of `u_m`, and Gibbs-weighted Sobolev norms in `v`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::basis::{gauss_rule, BasisIndexer, QuadratureRule, TensorRule};
use crate::error::{KfpError, Result};
use crate::gibbs_torus::{weighted_dot, PotentialField, TorusGrid};
use crate::hierarchy::CoefficientField;

pub type InitialFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
pub type SourceFn = Arc<dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync>;
pub type PotentialFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Initial data `g(x, v)`, optional source `f(t, x, v)`, potential `U(x)` and
/// the discretization parameters of one run.
#[derive(Clone)]
pub struct ProblemData {
    pub initial: InitialFn,
    pub source: Option<SourceFn>,
    pub potential: PotentialFn,
    pub truncation: usize,
    pub grid: TorusGrid,
    /// Quadrature nodes per velocity dimension.
    pub quadrature: usize,
}

impl fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemData")
            .field("truncation", &self.truncation)
            .field("grid", &self.grid)
            .field("quadrature", &self.quadrature)
            .field("has_source", &self.source.is_some())
            .finish()
    }
}

impl ProblemData {
    /// Data on the standard torus with the default quadrature size `m + 8`.
    pub fn new(initial: InitialFn, potential: PotentialFn, truncation: usize, grid: TorusGrid) -> Self {
        ProblemData {
            initial,
            source: None,
            potential,
            truncation,
            grid,
            quadrature: truncation + 8,
        }
    }

    pub fn with_source(mut self, source: SourceFn) -> Self {
        self.source = Some(source);
        self
    }

    pub fn with_truncation(&self, m: usize) -> Self {
        // keep the same quadrature padding above the truncation degree
        let mut out = self.clone();
        out.truncation = m;
        out.quadrature = (self.quadrature.saturating_sub(self.truncation) + m).max(m + 1);
        out
    }

    pub fn indexer(&self) -> Result<Arc<BasisIndexer>> {
        Ok(Arc::new(BasisIndexer::new(self.grid.dim(), self.truncation)?))
    }

    pub fn potential_field(&self) -> Result<PotentialField> {
        PotentialField::sample(&self.grid, |x| (self.potential)(x))
    }

    pub fn rule(&self) -> Result<QuadratureRule> {
        gauss_rule(self.quadrature)
    }
}

/// Precomputed `w_k Ψ_α(v_k)` table for repeated projections.
#[derive(Clone, Debug)]
pub struct Projector {
    indexer: Arc<BasisIndexer>,
    grid: TorusGrid,
    rule: TensorRule,
    /// `rule.len() × n` weighted basis values.
    table: Vec<f64>,
}

impl Projector {
    pub fn new(indexer: &Arc<BasisIndexer>, grid: &TorusGrid, rule: &QuadratureRule) -> Result<Self> {
        let m = indexer.degree();
        if rule.len() < m + 1 {
            return Err(KfpError::Precondition(format!(
                "quadrature size {} is below m + 1 = {}",
                rule.len(),
                m + 1
            )));
        }
        if indexer.dim() != grid.dim() {
            return Err(KfpError::ShapeMismatch("velocity and spatial dimensions differ".into()));
        }
        let tensor = TensorRule::new(rule, indexer.dim());
        let n = indexer.len();
        let mut table = Vec::with_capacity(tensor.len() * n);
        for k in 0..tensor.len() {
            let w = tensor.weight(k);
            table.extend(indexer.eval_all(tensor.point(k)).into_iter().map(|p| p * w));
        }
        Ok(Projector { indexer: Arc::clone(indexer), grid: grid.clone(), rule: tensor, table })
    }

    pub fn indexer(&self) -> &Arc<BasisIndexer> {
        &self.indexer
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    /// Coefficients `(h(x, ·), Ψ_α)_μ` at every node, coefficient-major.
    pub fn project<F>(&self, what: &'static str, h: F) -> Result<Vec<f64>>
    where
        F: Fn(&[f64], &[f64]) -> f64 + Sync,
    {
        let n = self.indexer.len();
        let npts = self.grid.len();
        let q = self.rule.len();
        // node-major first, transposed afterwards
        let per_node: Vec<Result<Vec<f64>>> = (0..npts)
            .into_par_iter()
            .map(|idx| {
                let x = self.grid.node(idx);
                let mut coeffs = vec![0.0; n];
                for k in 0..q {
                    let val = h(&x, self.rule.point(k));
                    if !val.is_finite() {
                        return Err(KfpError::NonFiniteSample { what, node: x });
                    }
                    let row = &self.table[k * n..(k + 1) * n];
                    for (c, p) in coeffs.iter_mut().zip(row) {
                        *c += val * p;
                    }
                }
                Ok(coeffs)
            })
            .collect();
        let mut out = vec![0.0; n * npts];
        for (idx, coeffs) in per_node.into_iter().enumerate() {
            for (j, c) in coeffs?.into_iter().enumerate() {
                out[j * npts + idx] = c;
            }
        }
        Ok(out)
    }

    pub fn project_field<F>(&self, what: &'static str, h: F) -> Result<CoefficientField>
    where
        F: Fn(&[f64], &[f64]) -> f64 + Sync,
    {
        let data = self.project(what, h)?;
        CoefficientField::from_data(Arc::clone(&self.indexer), self.grid.clone(), data)
    }
}

/// `project_data`: `g^α(x) = Σ_k w_k g(x, v_k) Ψ_α(v_k)` on every node.
pub fn project_data(
    data: &ProblemData,
    indexer: &Arc<BasisIndexer>,
    grid: &TorusGrid,
    rule: &QuadratureRule,
) -> Result<CoefficientField> {
    let p = Projector::new(indexer, grid, rule)?;
    let g = &data.initial;
    p.project_field("initial data", |x, v| g(x, v))
}

/// `u_m(x, v) = Σ_α c^α(x) Ψ_α(v)`; off-grid `x` uses trigonometric interpolation.
pub fn reconstruct(c: &CoefficientField, x: &[f64], v: &[f64]) -> f64 {
    let psi = c.indexer().eval_all(v);
    let values = coefficient_values_at(c, x);
    values.iter().zip(&psi).map(|(a, b)| a * b).sum()
}

/// `c^α(x)` for every α, exact at grid nodes.
pub fn coefficient_values_at(c: &CoefficientField, x: &[f64]) -> Vec<f64> {
    let grid = c.grid();
    match node_index(grid, x) {
        Some(idx) => (0..c.n_coeffs()).map(|j| c.row(j)[idx]).collect(),
        None => (0..c.n_coeffs()).map(|j| grid.interpolate(c.row(j), x)).collect(),
    }
}

/// Flat index of the grid node at `x` (modulo the period), if `x` is one.
pub fn node_index(grid: &TorusGrid, x: &[f64]) -> Option<usize> {
    let h = grid.spacing();
    let n = grid.points_per_dim() as i64;
    let mut idx = 0usize;
    for &xa in x {
        let s = (xa + grid.half_period()) / h;
        let r = s.round();
        if (s - r).abs() > 1e-9 {
            return None;
        }
        idx = idx * n as usize + (r as i64).rem_euclid(n) as usize;
    }
    Some(idx)
}

/// `(Σ_α (1+|α|)^k ‖c^α‖²_η)^{1/2}`; with `grad_in_x` the rows are replaced
/// by their spatial gradients (summed over directions).
pub fn sobolev_norm_mu(c: &CoefficientField, pot: &PotentialField, k: f64, grad_in_x: bool) -> f64 {
    sobolev_norm_mu_sq(c, pot, k, grad_in_x).sqrt()
}

pub fn sobolev_norm_mu_sq(c: &CoefficientField, pot: &PotentialField, k: f64, grad_in_x: bool) -> f64 {
    let grid = c.grid();
    let eta = pot.eta_weights();
    let mut s = grid.scratch();
    let mut tmp = vec![0.0; grid.len()];
    let mut total = 0.0;
    for j in 0..c.n_coeffs() {
        let weight = (1.0 + c.indexer().index(j).degree() as f64).powf(k);
        let row = c.row(j);
        let norm = if grad_in_x {
            (0..grid.dim())
                .map(|i| {
                    grid.derivative_into(row, &mut tmp, i, &mut s);
                    weighted_dot(&tmp, &tmp, eta)
                })
                .sum::<f64>()
        } else {
            weighted_dot(row, row, eta)
        };
        total += weight * norm;
    }
    total * grid.cell_volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{eval_hermite, psi0};
    use std::f64::consts::PI;

    fn setup(d: usize, m: usize, n: usize) -> (Arc<BasisIndexer>, TorusGrid, QuadratureRule) {
        (
            Arc::new(BasisIndexer::new(d, m).unwrap()),
            TorusGrid::torus(d, n).unwrap(),
            gauss_rule(m + 8).unwrap(),
        )
    }

    #[test]
    fn project_constant_one() {
        let (ix, grid, rule) = setup(1, 4, 8);
        let p = Projector::new(&ix, &grid, &rule).unwrap();
        let c = p.project_field("g", |_, _| 1.0).unwrap();
        let z0 = (2.0 * PI).powf(0.25);
        assert!((z0 - 1.5833).abs() < 1e-4);
        assert!(c.row(0).iter().all(|v| (v - z0).abs() < 1e-12));
        for j in 1..ix.len() {
            assert!(c.row(j).iter().all(|v| v.abs() < 1e-12));
        }
        let (ix, grid, rule) = setup(2, 2, 4);
        let c = Projector::new(&ix, &grid, &rule).unwrap().project_field("g", |_, _| 1.0).unwrap();
        assert!(c.row(0).iter().all(|v| (v - (2.0 * PI).sqrt()).abs() < 1e-12));
    }

    #[test]
    fn project_single_mode_and_velocity() {
        let (ix, grid, rule) = setup(1, 5, 16);
        let p = Projector::new(&ix, &grid, &rule).unwrap();
        let c = p.project_field("g", |x, v| eval_hermite(1, v[0]) * x[0].cos()).unwrap();
        let cos = grid.sample(|x| x[0].cos());
        for j in 0..ix.len() {
            let expect: Vec<f64> = if j == 1 { cos.clone() } else { vec![0.0; 16] };
            assert!(c.row(j).iter().zip(&expect).all(|(a, b)| (a - b).abs() < 1e-12));
        }
        let c = p.project_field("g", |_, v| v[0]).unwrap();
        let z1 = (2.0 * PI).powf(0.25);
        assert!(c.row(1).iter().all(|v| (v - z1).abs() < 1e-12));
        assert!(c.row(0).iter().chain(c.row(2)).all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn projection_rejects_small_rule_and_bad_samples() {
        let ix = Arc::new(BasisIndexer::new(1, 6).unwrap());
        let grid = TorusGrid::torus(1, 8).unwrap();
        assert!(Projector::new(&ix, &grid, &gauss_rule(6).unwrap()).is_err());
        let p = Projector::new(&ix, &grid, &gauss_rule(7).unwrap()).unwrap();
        let err = p.project("initial data", |x, _| if x[0] > 1.0 { f64::NAN } else { 0.0 });
        assert!(matches!(err, Err(KfpError::NonFiniteSample { .. })));
    }

    #[test]
    fn reconstruct_values() {
        let (ix, grid, _) = setup(2, 3, 8);
        let mut c = CoefficientField::zeros(Arc::clone(&ix), grid.clone());
        c.row_mut(0).fill(1.0);
        let expect = psi0() * psi0();
        for (x, v) in [([0.1, 0.2], [0.5, -1.0]), ([-3.0, 1.0], [2.0, 0.0])] {
            assert!((reconstruct(&c, &x, &v) - expect).abs() < 1e-14);
        }
        // odd modes only vanish at v = 0
        let mut c = CoefficientField::zeros(Arc::clone(&ix), grid.clone());
        for (j, a) in ix.order().iter().enumerate() {
            if a.degree() % 2 == 1 {
                c.row_mut(j).copy_from_slice(&grid.sample(|x| 1.0 + x[0].sin()));
            }
        }
        assert!(reconstruct(&c, &[0.3, -0.4], &[0.0, 0.0]).abs() < 1e-14);
    }

    #[test]
    fn round_trip_in_span() {
        let (ix, grid, rule) = setup(1, 4, 16);
        let g = |x: &[f64], v: &[f64]| (1.0 + 0.5 * x[0].cos()) * (v[0].powi(4) - 2.0 * v[0] + 0.3);
        let p = Projector::new(&ix, &grid, &rule).unwrap();
        let c = p.project_field("g", g).unwrap();
        for (x, v) in [([0.0], [1.3]), ([1.1], [-0.7]), ([grid.coord(3)], [2.2])] {
            assert!((reconstruct(&c, &x, &v) - g(&x, &v)).abs() < 1e-10);
        }
    }

    #[test]
    fn sobolev_weights() {
        let (ix, grid, _) = setup(2, 3, 8);
        let pot = PotentialField::zero(&grid);
        let j = ix.position(&vec![1u32, 1].into()).unwrap();
        let mut c = CoefficientField::zeros(Arc::clone(&ix), grid.clone());
        let unit = 1.0 / ((2.0 * PI) * (2.0 * PI)).sqrt();
        c.row_mut(j).fill(unit);
        assert!((sobolev_norm_mu(&c, &pot, 0.0, false) - 1.0).abs() < 1e-12);
        assert!((sobolev_norm_mu(&c, &pot, 3.0, false) - 27f64.sqrt()).abs() < 1e-12);
        assert!(sobolev_norm_mu(&c, &pot, 2.0, true).abs() < 1e-12);
        assert!((27f64.sqrt() - 5.196).abs() < 1e-3);
    }

    #[test]
    fn node_detection() {
        let grid = TorusGrid::torus(2, 8).unwrap();
        assert_eq!(node_index(&grid, &grid.node(13)), Some(13));
        assert_eq!(node_index(&grid, &[0.1, 0.0]), None);
        let x = grid.node(9);
        assert_eq!(node_index(&grid, &[x[0] + 2.0 * PI, x[1]]), Some(9));
    }
}
