//! The truncated Brinkman hierarchy
//! `H = A - Σ_i B_i ∂_i* + Σ_i B_iᵀ ∂_i` acting on Hermite coefficient fields,
//! and the degree-(m+1) truncation defect `E_m`.
//!
//! `A = diag(|α|)`; `B_i` has one entry `√(α^l_i)` in row `j`, column `l`
//! whenever `α^l = α^j + e_i`. Everything is applied matrix-free: ladder
//! weights act across coefficient rows, derivatives act along the grid.

use std::sync::Arc;

use rayon::prelude::*;

use crate::basis::{BasisIndexer, MultiIndex};
use crate::error::{KfpError, Result};
use crate::gibbs_torus::{
    weighted_dot, GibbsDerivative, PotentialField, Representation, Scratch, TorusGrid,
};

/// Rows are processed in parallel once a field has at least this many values.
const PAR_THRESHOLD: usize = 1 << 14;

/// One nonzero of a ladder matrix: `B_i[source, target] = weight`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LadderEntry {
    pub source: u32,
    pub target: u32,
    pub weight: f64,
}

/// The diagonal `A` and the sparse raising matrices `B_i`.
#[derive(Clone, Debug)]
pub struct LadderOperators {
    indexer: Arc<BasisIndexer>,
    a_diag: Vec<f64>,
    ladders: Vec<Vec<LadderEntry>>,
}

impl LadderOperators {
    pub fn new(indexer: Arc<BasisIndexer>) -> Self {
        let d = indexer.dim();
        let a_diag = indexer.order().iter().map(|a| a.degree() as f64).collect();
        let ladders = (0..d)
            .map(|i| {
                (0..indexer.len())
                    .filter_map(|j| {
                        indexer.raise(j, i).map(|l| LadderEntry {
                            source: j as u32,
                            target: l as u32,
                            weight: (indexer.index(l).get(i) as f64).sqrt(),
                        })
                    })
                    .collect()
            })
            .collect();
        LadderOperators { indexer, a_diag, ladders }
    }

    pub fn indexer(&self) -> &Arc<BasisIndexer> {
        &self.indexer
    }

    pub fn a_diag(&self) -> &[f64] {
        &self.a_diag
    }

    /// Nonzeros of `B_i`.
    pub fn ladder(&self, i: usize) -> &[LadderEntry] {
        &self.ladders[i]
    }

    /// Dense copy of `B_i`, for tests and small diagnostics.
    pub fn dense_ladder(&self, i: usize) -> Vec<Vec<f64>> {
        let n = self.indexer.len();
        let mut b = vec![vec![0.0; n]; n];
        for e in &self.ladders[i] {
            b[e.source as usize][e.target as usize] = e.weight;
        }
        b
    }
}

/// `assemble_ladder`: build `A` and `B_i` for an indexer.
pub fn assemble_ladder(indexer: &Arc<BasisIndexer>) -> LadderOperators {
    LadderOperators::new(Arc::clone(indexer))
}

/// Hermite coefficient fields `c^α(x)` for `|α| ≤ m` on a periodic grid.
///
/// Stored coefficient-major: row `j` holds the grid samples of `c^{α^j}`.
#[derive(Clone, Debug)]
pub struct CoefficientField {
    indexer: Arc<BasisIndexer>,
    grid: TorusGrid,
    data: Vec<f64>,
}

impl CoefficientField {
    pub fn zeros(indexer: Arc<BasisIndexer>, grid: TorusGrid) -> Self {
        let len = indexer.len() * grid.len();
        CoefficientField { indexer, grid, data: vec![0.0; len] }
    }

    pub fn from_data(indexer: Arc<BasisIndexer>, grid: TorusGrid, data: Vec<f64>) -> Result<Self> {
        if data.len() != indexer.len() * grid.len() {
            return Err(KfpError::ShapeMismatch(format!(
                "{} values for {} coefficients on {} nodes",
                data.len(),
                indexer.len(),
                grid.len()
            )));
        }
        if indexer.dim() != grid.dim() {
            return Err(KfpError::ShapeMismatch(format!(
                "velocity dimension {} differs from spatial dimension {}",
                indexer.dim(),
                grid.dim()
            )));
        }
        Ok(CoefficientField { indexer, grid, data })
    }

    pub fn indexer(&self) -> &Arc<BasisIndexer> {
        &self.indexer
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn n_coeffs(&self) -> usize {
        self.indexer.len()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let n = self.grid.len();
        &self.data[j * n..(j + 1) * n]
    }

    pub fn row_mut(&mut self, j: usize) -> &mut [f64] {
        let n = self.grid.len();
        &mut self.data[j * n..(j + 1) * n]
    }

    /// Row of a given multi-index, if it is part of the basis.
    pub fn mode(&self, alpha: &MultiIndex) -> Option<&[f64]> {
        self.indexer.position(alpha).map(|j| self.row(j))
    }

    /// `(c, w)_η = Σ_α (c^α, w^α)_η`.
    pub fn inner_eta(&self, other: &CoefficientField, pot: &PotentialField) -> f64 {
        let vol = self.grid.cell_volume();
        self.data
            .chunks(self.grid.len())
            .zip(other.data.chunks(self.grid.len()))
            .map(|(a, b)| weighted_dot(a, b, pot.eta_weights()))
            .sum::<f64>()
            * vol
    }

    pub fn norm_eta_sq(&self, pot: &PotentialField) -> f64 {
        self.inner_eta(self, pot)
    }

    /// `‖A^{1/2} c‖²_η`.
    pub fn dissipation_eta(&self, pot: &PotentialField) -> f64 {
        let vol = self.grid.cell_volume();
        self.data
            .chunks(self.grid.len())
            .enumerate()
            .map(|(j, a)| self.indexer.index(j).degree() as f64 * weighted_dot(a, a, pot.eta_weights()))
            .sum::<f64>()
            * vol
    }

    /// Copy into a field with a larger (or equal) truncation degree, padding
    /// the new modes with zeros.
    pub fn padded_to(&self, target: &Arc<BasisIndexer>) -> Result<CoefficientField> {
        if target.dim() != self.indexer.dim() || target.degree() < self.indexer.degree() {
            return Err(KfpError::ShapeMismatch("cannot pad to a smaller basis".into()));
        }
        let mut out = CoefficientField::zeros(Arc::clone(target), self.grid.clone());
        for (j, alpha) in self.indexer.order().iter().enumerate() {
            let l = target.position(alpha).expect("smaller basis is a subset");
            out.row_mut(l).copy_from_slice(self.row(j));
        }
        Ok(out)
    }
}

/// The hierarchy operator bound to a grid, a potential and a representation.
#[derive(Clone, Debug)]
pub struct HierarchyOperator {
    ladder: LadderOperators,
    gibbs: GibbsDerivative,
}

impl HierarchyOperator {
    pub fn new(ladder: LadderOperators, gibbs: GibbsDerivative) -> Result<Self> {
        if ladder.indexer.dim() != gibbs.grid().dim() {
            return Err(KfpError::ShapeMismatch(
                "ladder dimension differs from grid dimension".into(),
            ));
        }
        Ok(HierarchyOperator { ladder, gibbs })
    }

    pub fn conjugated(indexer: &Arc<BasisIndexer>, grid: &TorusGrid, pot: &PotentialField) -> Result<Self> {
        Self::new(
            assemble_ladder(indexer),
            GibbsDerivative::new(grid, pot, Representation::Conjugated)?,
        )
    }

    pub fn ladder(&self) -> &LadderOperators {
        &self.ladder
    }

    pub fn gibbs(&self) -> &GibbsDerivative {
        &self.gibbs
    }

    fn npts(&self) -> usize {
        self.gibbs.grid().len()
    }

    pub fn state_len(&self) -> usize {
        self.ladder.indexer.len() * self.npts()
    }

    /// Apply `op` to every row of `src`, writing the matching row of `dst`.
    fn map_rows<F>(&self, src: &[f64], dst: &mut [f64], op: F)
    where
        F: Fn(&[f64], &mut [f64], &mut Scratch, &mut Vec<f64>) + Sync,
    {
        let npts = self.npts();
        let grid = self.gibbs.grid();
        if src.len() >= PAR_THRESHOLD {
            dst.par_chunks_mut(npts).zip(src.par_chunks(npts)).for_each_init(
                || (grid.scratch(), vec![0.0; npts]),
                |(s, tmp), (out, row)| op(row, out, s, tmp),
            );
        } else {
            let mut s = grid.scratch();
            let mut tmp = vec![0.0; npts];
            for (out, row) in dst.chunks_mut(npts).zip(src.chunks(npts)) {
                op(row, out, &mut s, &mut tmp);
            }
        }
    }

    /// `out = (H - A) state = -Σ B_i D_i* state + Σ B_iᵀ D_i state`.
    pub fn transport_into(&self, state: &[f64], out: &mut [f64], ws: &mut Workspace) {
        assert_eq!(state.len(), self.state_len());
        assert_eq!(out.len(), self.state_len());
        ws.ensure(self.state_len());
        let npts = self.npts();
        out.fill(0.0);
        for i in 0..self.gibbs.grid().dim() {
            let gibbs = &self.gibbs;
            self.map_rows(state, &mut ws.deriv, |row, o, s, _| gibbs.derivative(row, o, i, s));
            self.map_rows(state, &mut ws.adjoint, |row, o, s, _| gibbs.adjoint(row, o, i, s));
            for e in &self.ladder.ladders[i] {
                let (j, l) = (e.source as usize, e.target as usize);
                let w = e.weight;
                // row j: -w D*_i c^l ; row l: +w D_i c^j
                let adj = &ws.adjoint[l * npts..(l + 1) * npts];
                for (o, a) in out[j * npts..(j + 1) * npts].iter_mut().zip(adj) {
                    *o -= w * a;
                }
                let der = &ws.deriv[j * npts..(j + 1) * npts];
                for (o, dv) in out[l * npts..(l + 1) * npts].iter_mut().zip(der) {
                    *o += w * dv;
                }
            }
        }
    }

    /// `out = H state`.
    pub fn apply_into(&self, state: &[f64], out: &mut [f64], ws: &mut Workspace) {
        self.transport_into(state, out, ws);
        let npts = self.npts();
        for (j, &a) in self.ladder.a_diag.iter().enumerate() {
            if a != 0.0 {
                for (o, c) in out[j * npts..(j + 1) * npts].iter_mut().zip(&state[j * npts..]) {
                    *o += a * c;
                }
            }
        }
    }

    /// `out = Σ_i D_i* D_i state` (the viscous operator without `ε`).
    pub fn viscous_into(&self, state: &[f64], out: &mut [f64], ws: &mut Workspace) {
        assert_eq!(state.len(), self.state_len());
        ws.ensure(self.state_len());
        out.fill(0.0);
        let gibbs = &self.gibbs;
        for i in 0..gibbs.grid().dim() {
            self.map_rows(state, &mut ws.deriv, |row, o, s, tmp| {
                gibbs.derivative(row, tmp, i, s);
                gibbs.adjoint(tmp, o, i, s);
            });
            for (o, v) in out.iter_mut().zip(&ws.deriv) {
                *o += v;
            }
        }
    }

    /// `Σ_i ‖D_i state‖²` in the state inner product.
    pub fn gradient_norm_sq(&self, state: &[f64], ws: &mut Workspace) -> f64 {
        ws.ensure(self.state_len());
        let npts = self.npts();
        let gibbs = &self.gibbs;
        let mut total = 0.0;
        for i in 0..gibbs.grid().dim() {
            self.map_rows(state, &mut ws.deriv, |row, o, s, _| gibbs.derivative(row, o, i, s));
            total += ws.deriv.chunks(npts).map(|r| gibbs.inner(r, r)).sum::<f64>();
        }
        total
    }

    /// `(a, b)` in the state inner product, summed over coefficients.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let npts = self.npts();
        a.chunks(npts).zip(b.chunks(npts)).map(|(x, y)| self.gibbs.inner(x, y)).sum()
    }

    /// `(A a, a)` in the state inner product.
    pub fn dissipation(&self, a: &[f64]) -> f64 {
        let npts = self.npts();
        a.chunks(npts)
            .zip(&self.ladder.a_diag)
            .map(|(x, &k)| k * self.gibbs.inner(x, x))
            .sum()
    }
}

/// Scratch buffers for hierarchy applications.
#[derive(Default, Clone, Debug)]
pub struct Workspace {
    deriv: Vec<f64>,
    adjoint: Vec<f64>,
}

impl Workspace {
    fn ensure(&mut self, len: usize) {
        if self.deriv.len() != len {
            self.deriv = vec![0.0; len];
            self.adjoint = vec![0.0; len];
        }
    }
}

/// `apply_H` in the conjugated representation.
pub fn apply_h(
    c: &CoefficientField,
    ops: &LadderOperators,
    grid: &TorusGrid,
    pot: &PotentialField,
) -> Result<CoefficientField> {
    check_shapes(c, ops, grid)?;
    let h = HierarchyOperator::new(ops.clone(), GibbsDerivative::new(grid, pot, Representation::Conjugated)?)?;
    let mut out = vec![0.0; c.data.len()];
    h.apply_into(&c.data, &mut out, &mut Workspace::default());
    CoefficientField::from_data(Arc::clone(&c.indexer), grid.clone(), out)
}

fn check_shapes(c: &CoefficientField, ops: &LadderOperators, grid: &TorusGrid) -> Result<()> {
    if c.indexer.len() != ops.indexer.len() || c.indexer.dim() != ops.indexer.dim() {
        return Err(KfpError::ShapeMismatch("coefficient field and ladder disagree".into()));
    }
    if &c.grid != grid {
        return Err(KfpError::ShapeMismatch("coefficient field lives on another grid".into()));
    }
    Ok(())
}

/// `E_m` re-expanded in `Ψ_β`, `|β| = m + 1`.
#[derive(Clone, Debug)]
pub struct ErrorTerm {
    pub indices: Vec<MultiIndex>,
    /// Row-major: one grid field per entry of `indices`.
    pub fields: Vec<f64>,
    npts: usize,
}

impl ErrorTerm {
    pub fn field(&self, k: usize) -> &[f64] {
        &self.fields[k * self.npts..(k + 1) * self.npts]
    }

    pub fn get(&self, beta: &MultiIndex) -> Option<&[f64]> {
        self.indices.iter().position(|b| b == beta).map(|k| self.field(k))
    }

    /// `‖E_m‖²_{L²_η(L²_μ)}` by Parseval over the `Ψ_β`.
    pub fn norm_eta_sq(&self, grid: &TorusGrid, pot: &PotentialField) -> f64 {
        self.fields
            .chunks(self.npts)
            .map(|f| weighted_dot(f, f, pot.eta_weights()))
            .sum::<f64>()
            * grid.cell_volume()
    }
}

/// `(E_m)^β = Σ_i √β_i ∂_i c^{β - e_i}` for every `|β| = m + 1`.
pub fn error_term_coeffs(c: &CoefficientField) -> Result<ErrorTerm> {
    let d = c.indexer.dim();
    let m = c.indexer.degree();
    let grid = &c.grid;
    let npts = grid.len();
    let top = BasisIndexer::new(d, m + 1)?;
    let indices: Vec<MultiIndex> = top.degree_range(m + 1).map(|k| top.index(k).clone()).collect();

    // spatial derivatives of the top-degree rows only
    let mut s = grid.scratch();
    let top_rows: Vec<usize> = c.indexer.degree_range(m).collect();
    let derivs: Vec<Vec<Vec<f64>>> = top_rows
        .iter()
        .map(|&j| {
            (0..d)
                .map(|i| {
                    let mut out = vec![0.0; npts];
                    grid.derivative_into(c.row(j), &mut out, i, &mut s);
                    out
                })
                .collect()
        })
        .collect();

    let mut fields = vec![0.0; indices.len() * npts];
    for (k, beta) in indices.iter().enumerate() {
        let target = &mut fields[k * npts..(k + 1) * npts];
        for i in 0..d {
            let Some(lower) = beta.lowered(i) else { continue };
            let j = c.indexer.position(&lower).expect("degree m index present");
            let t = top_rows.iter().position(|&r| r == j).expect("top row");
            let w = (beta.get(i) as f64).sqrt();
            for (o, v) in target.iter_mut().zip(&derivs[t][i]) {
                *o += w * v;
            }
        }
    }
    Ok(ErrorTerm { indices, fields, npts })
}
