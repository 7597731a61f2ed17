//! Convergence studies, error-term bounds, pointwise PDE residuals and the
//! structural property checks behind `kfp verify`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::basis::{gauss_rule, hermite_table, BasisIndexer, MultiIndex, TensorRule};
use crate::error::{KfpError, Result};
use crate::gibbs_torus::{GibbsDerivative, PotentialField, Representation, TorusGrid};
use crate::hierarchy::{assemble_ladder, error_term_coeffs, CoefficientField, HierarchyOperator, Workspace};
use crate::integrator::{solve, SolverConfig, Trajectory};
use crate::projection::{sobolev_norm_mu_sq, ProblemData, Projector};

/// Least-squares slope of `ys` against `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// `(∫_0^T ‖a(t) - b(t)‖²_η dt)^{1/2}` by the trapezoid rule over logged times.
///
/// `a` may have a smaller basis than `b`; it is padded with zeros.
pub fn trajectory_distance(a: &Trajectory, b: &Trajectory, pot: &PotentialField) -> Result<f64> {
    if a.times.len() != b.times.len() || a.times.iter().zip(&b.times).any(|(s, t)| (s - t).abs() > 1e-12) {
        return Err(KfpError::ShapeMismatch("trajectories are logged at different times".into()));
    }
    let target = Arc::clone(b.states[0].indexer());
    let sq: Vec<f64> = a
        .states
        .iter()
        .zip(&b.states)
        .map(|(sa, sb)| {
            let mut diff = sa.padded_to(&target)?;
            for (d, r) in diff.data_mut().iter_mut().zip(sb.data()) {
                *d -= r;
            }
            Ok(diff.norm_eta_sq(pot))
        })
        .collect::<Result<_>>()?;
    let mut total = 0.0;
    for k in 1..sq.len() {
        total += 0.5 * (a.times[k] - a.times[k - 1]) * (sq[k] + sq[k - 1]);
    }
    Ok(total.sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub degrees: Vec<usize>,
    pub reference_degree: usize,
    pub errors: Vec<f64>,
    /// Least-squares slope of `log error` against `log(1 + m)`.
    pub slope: f64,
    /// `C` in `error(m) ≤ C (1 + m)^{-1/2}`, fitted at the smallest degree.
    pub envelope_constant: f64,
    pub monotone: bool,
    pub within_envelope: bool,
}

impl ConvergenceReport {
    /// Errors strictly decrease and the fitted slope is at most `-1/2`.
    pub fn passes(&self) -> bool {
        self.monotone && self.slope <= -0.5
    }
}

/// Truncation error in `m` against a high-degree reference solve with the same
/// time step, grid and quadrature padding.
pub fn convergence_study(data: &ProblemData, degrees: &[usize], reference: usize, cfg: &SolverConfig) -> Result<ConvergenceReport> {
    if degrees.len() < 2 {
        return Err(KfpError::InvalidArgument("a convergence study needs at least two degrees".into()));
    }
    if let Some(&m) = degrees.iter().find(|&&m| m >= reference) {
        return Err(KfpError::InvalidArgument(format!(
            "degree {m} is not below the reference degree {reference}"
        )));
    }
    let mut sorted = degrees.to_vec();
    sorted.sort_unstable();
    sorted.dedup();

    let pot = data.potential_field()?;
    let reference_traj = solve(&data.with_truncation(reference), cfg)?;
    let errors: Vec<f64> = sorted
        .par_iter()
        .map(|&m| {
            let traj = solve(&data.with_truncation(m), cfg)?;
            trajectory_distance(&traj, &reference_traj, &pot)
        })
        .collect::<Result<_>>()?;

    let xs: Vec<f64> = sorted.iter().map(|&m| (1.0 + m as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let slope = least_squares_slope(&xs, &ys);
    let envelope_constant = errors[0] * (1.0 + sorted[0] as f64).sqrt();
    let within_envelope = sorted
        .iter()
        .zip(&errors)
        .all(|(&m, &e)| e <= envelope_constant / (1.0 + m as f64).sqrt() * (1.0 + 1e-9));
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);
    Ok(ConvergenceReport { degrees: sorted, reference_degree: reference, errors, slope, envelope_constant, monotone, within_envelope })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorTermBound {
    /// `‖E_m‖²_η`
    pub lhs: f64,
    /// `d (1+m)^{-k} Σ_α (1+|α|)^{k+1} ‖∇_x c^α‖²_η`
    pub rhs: f64,
}

impl ErrorTermBound {
    pub fn ratio(&self) -> f64 {
        if self.rhs == 0.0 {
            if self.lhs == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.lhs / self.rhs
        }
    }
}

/// Both sides of the error-term bound for a coefficient field in the
/// conjugated representation.
pub fn em_decay_check(c: &CoefficientField, pot: &PotentialField, k: f64) -> Result<ErrorTermBound> {
    let grid = c.grid();
    let d = grid.dim() as f64;
    let m = c.indexer().degree() as f64;
    let lhs = error_term_coeffs(c)?.norm_eta_sq(grid, pot);
    let rhs = d * (1.0 + m).powf(-k) * sobolev_norm_mu_sq(c, pot, k + 1.0, true);
    Ok(ErrorTermBound { lhs, rhs })
}

/// Exact solution when `U` is constant and data and source do not depend on `x`:
/// `c^α(t) = e^{-|α|t} g^α + ∫_0^t e^{-|α|(t-s)} f^α(s) ds`.
///
/// The source is given as projected coefficients `s ↦ f(s)` in the layout of
/// `g`; its time integral uses composite Simpson with `panels` panels.
pub fn oracle_decoupled(
    g: &CoefficientField,
    t: f64,
    source: Option<&dyn Fn(f64) -> Vec<f64>>,
    panels: usize,
) -> Result<CoefficientField> {
    let npts = g.grid().len();
    let ix = g.indexer();
    let mut out = g.clone();
    for (j, row) in out.data_mut().chunks_mut(npts).enumerate() {
        let decay = (-(ix.index(j).degree() as f64) * t).exp();
        row.iter_mut().for_each(|v| *v *= decay);
    }
    if let Some(f) = source {
        let panels = panels.max(2) + panels % 2;
        let h = t / panels as f64;
        for p in 0..=panels {
            let s = p as f64 * h;
            let w = if p == 0 || p == panels {
                1.0
            } else if p % 2 == 1 {
                4.0
            } else {
                2.0
            } * h
                / 3.0;
            let fs = f(s);
            if fs.len() != out.data().len() {
                return Err(KfpError::ShapeMismatch("source coefficients have the wrong length".into()));
            }
            for (j, (row, frow)) in out.data_mut().chunks_mut(npts).zip(fs.chunks(npts)).enumerate() {
                let decay = (-(ix.index(j).degree() as f64) * (t - s)).exp();
                for (o, fv) in row.iter_mut().zip(frow) {
                    *o += w * decay * fv;
                }
            }
        }
    }
    Ok(out)
}

/// Where to sample the pointwise residual.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSpec {
    pub velocities: Vec<Vec<f64>>,
    /// Flat grid-node indices.
    pub nodes: Vec<usize>,
    /// Interior indices into the logged trajectory; time derivatives are
    /// central differences over the neighbouring logged states.
    pub time_indices: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualReport {
    pub max_abs: f64,
    /// Largest `|∂_t u_m|` seen, for scale.
    pub max_time_derivative: f64,
    pub samples: usize,
}

/// Per-dimension Hermite values and first and second velocity derivatives.
struct VelocityTables {
    value: Vec<Vec<f64>>,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl VelocityTables {
    fn new(kmax: usize, v: &[f64]) -> Self {
        let mut value = vec![];
        let mut first = vec![];
        let mut second = vec![];
        for &vi in v {
            let h = hermite_table(kmax, vi);
            let d1: Vec<f64> = (0..=kmax).map(|k| if k == 0 { 0.0 } else { (k as f64).sqrt() * h[k - 1] }).collect();
            let d2: Vec<f64> = (0..=kmax)
                .map(|k| if k < 2 { 0.0 } else { ((k * (k - 1)) as f64).sqrt() * h[k - 2] })
                .collect();
            value.push(h);
            first.push(d1);
            second.push(d2);
        }
        VelocityTables { value, first, second }
    }

    fn psi(&self, alpha: &MultiIndex) -> f64 {
        alpha.as_slice().iter().enumerate().map(|(i, &a)| self.value[i][a as usize]).product()
    }

    /// `Ψ_α` with the `i`-th factor replaced by `table[i]`.
    fn replaced(&self, alpha: &MultiIndex, i: usize, table: &[Vec<f64>]) -> f64 {
        alpha
            .as_slice()
            .iter()
            .enumerate()
            .map(|(j, &a)| if j == i { table[j][a as usize] } else { self.value[j][a as usize] })
            .product()
    }
}

/// Pointwise `(∂_t - 𝓛) u_m - f_m - E_m` with
/// `𝓛 = Δ_v - v·∇_v + ∇U·∇_v - v·∇_x`, applied directly to the reconstructed
/// `u_m = Σ c^α Ψ_α`. Vanishes up to time-discretization error.
pub fn pde_residual(traj: &Trajectory, data: &ProblemData, spec: &SampleSpec) -> Result<ResidualReport> {
    let grid = &data.grid;
    let pot = data.potential_field()?;
    let ix = data.indexer()?;
    let d = grid.dim();
    let m = ix.degree();
    let top = BasisIndexer::new(d, m + 1)?;
    let top_range: Vec<usize> = top.degree_range(m + 1).collect();
    let projector = match &data.source {
        Some(_) => Some(Projector::new(&ix, grid, &data.rule()?)?),
        None => None,
    };
    let npts = grid.len();
    if spec.nodes.iter().any(|&n| n >= npts) {
        return Err(KfpError::InvalidArgument("sample node outside the grid".into()));
    }
    let tables: Vec<VelocityTables> = spec
        .velocities
        .iter()
        .map(|v| {
            if v.len() != d {
                Err(KfpError::ShapeMismatch("sample velocity has the wrong dimension".into()))
            } else {
                Ok(VelocityTables::new(m + 1, v))
            }
        })
        .collect::<Result<_>>()?;

    let mut report = ResidualReport { max_abs: 0.0, max_time_derivative: 0.0, samples: 0 };
    let mut s = grid.scratch();
    for &k in &spec.time_indices {
        if k == 0 || k + 1 >= traj.states.len() {
            return Err(KfpError::InvalidArgument(format!("time index {k} has no logged neighbours")));
        }
        let t = traj.times[k];
        let span = traj.times[k + 1] - traj.times[k - 1];
        let (prev, cur, next) = (&traj.states[k - 1], &traj.states[k], &traj.states[k + 1]);
        let grads: Vec<Vec<f64>> = (0..ix.len())
            .flat_map(|j| (0..d).map(move |i| (j, i)))
            .map(|(j, i)| {
                let mut out = vec![0.0; npts];
                grid.derivative_into(cur.row(j), &mut out, i, &mut s);
                out
            })
            .collect();
        let em = error_term_coeffs(cur)?;
        let source = match (&data.source, &projector) {
            (Some(f), Some(p)) => Some(p.project("source", |x, v| f(t, x, v))?),
            _ => None,
        };

        for &node in &spec.nodes {
            for (v, tab) in spec.velocities.iter().zip(&tables) {
                let mut dudt = 0.0;
                let mut lu = 0.0;
                let mut fm = 0.0;
                for (j, alpha) in ix.order().iter().enumerate() {
                    let psi = tab.psi(alpha);
                    let c = cur.row(j)[node];
                    dudt += (next.row(j)[node] - prev.row(j)[node]) / span * psi;
                    for i in 0..d {
                        let dv = tab.replaced(alpha, i, &tab.first);
                        let dvv = tab.replaced(alpha, i, &tab.second);
                        lu += c * (dvv - v[i] * dv);
                        lu += pot.gradient(i)[node] * c * dv;
                        lu -= v[i] * grads[j * d + i][node] * psi;
                    }
                    if let Some(f) = &source {
                        fm += f[j * npts + node] * psi;
                    }
                }
                let e: f64 = top_range
                    .iter()
                    .enumerate()
                    .map(|(kk, &b)| em.field(kk)[node] * tab.psi(top.index(b)))
                    .sum();
                let r = dudt - lu - fm - e;
                report.max_abs = report.max_abs.max(r.abs());
                report.max_time_derivative = report.max_time_derivative.max(dudt.abs());
                report.samples += 1;
            }
        }
    }
    Ok(report)
}

/// `max_{α,β} |Σ_k w_k Ψ_α(v_k) Ψ_β(v_k) - δ_αβ|` over `|α|, |β| ≤ m` with a
/// `q`-point rule per dimension.
pub fn orthonormality_defect(d: usize, m: usize, q: usize) -> Result<f64> {
    let ix = BasisIndexer::new(d, m)?;
    let rule = TensorRule::new(&gauss_rule(q)?, d);
    let n = ix.len();
    let mut gram = vec![0.0; n * n];
    for k in 0..rule.len() {
        let psi = ix.eval_all(rule.point(k));
        let w = rule.weight(k);
        for a in 0..n {
            for b in a..n {
                gram[a * n + b] += w * psi[a] * psi[b];
            }
        }
    }
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in a..n {
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((gram[a * n + b] - target).abs());
        }
    }
    Ok(worst)
}

/// Largest defect of the three-term recurrence `v ψ_k = √(k+1) ψ_{k+1} + √k ψ_{k-1}`
/// and of the eigenrelation `ψ_k'' - v ψ_k' = -k ψ_k` at the given points.
pub fn recurrence_defect(kmax: usize, points: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for &v in points {
        let h = hermite_table(kmax + 1, v);
        let scale = h.iter().fold(1.0f64, |a, b| a.max(b.abs()));
        for k in 0..=kmax {
            let below = if k == 0 { 0.0 } else { (k as f64).sqrt() * h[k - 1] };
            let rec = v * h[k] - ((k + 1) as f64).sqrt() * h[k + 1] - below;
            let d1 = below;
            let d2 = if k < 2 { 0.0 } else { ((k * (k - 1)) as f64).sqrt() * h[k - 2] };
            let eig = d2 - v * d1 + k as f64 * h[k];
            worst = worst.max(rec.abs() / scale).max(eig.abs() / scale);
        }
    }
    worst
}

/// `|(H c, c)_η - (A c, c)_η| / ‖c‖²_η` for one field.
pub fn skew_defect(c: &CoefficientField, pot: &PotentialField) -> Result<f64> {
    let op = HierarchyOperator::conjugated(c.indexer(), c.grid(), pot)?;
    let mut hc = vec![0.0; c.data().len()];
    op.apply_into(c.data(), &mut hc, &mut Workspace::default());
    let lhs = op.inner(&hc, c.data());
    let rhs = op.dissipation(c.data());
    let norm = op.inner(c.data(), c.data());
    Ok((lhs - rhs).abs() / norm)
}

/// `max_i |(∂_i u, w)_η - (u, ∂_i* w)_η| / (‖u‖_η ‖w‖_η)`.
pub fn adjointness_defect(u: &[f64], w: &[f64], grid: &TorusGrid, pot: &PotentialField, repr: Representation) -> Result<f64> {
    if u.len() != grid.len() || w.len() != grid.len() {
        return Err(KfpError::ShapeMismatch("field length does not match the grid".into()));
    }
    let gibbs = GibbsDerivative::new(grid, pot, repr)?;
    let mut s = grid.scratch();
    let mut du = vec![0.0; grid.len()];
    let mut dw = vec![0.0; grid.len()];
    let norm = (gibbs.inner(u, u) * gibbs.inner(w, w)).sqrt();
    let mut worst: f64 = 0.0;
    for i in 0..grid.dim() {
        gibbs.derivative(u, &mut du, i, &mut s);
        gibbs.adjoint(w, &mut dw, i, &mut s);
        worst = worst.max((gibbs.inner(&du, w) - gibbs.inner(u, &dw)).abs() / norm);
    }
    Ok(worst)
}

/// Ladder structure: `B_i` has exactly one `√(α_i + 1)` per raisable row.
pub fn ladder_defect(d: usize, m: usize) -> Result<f64> {
    let ix = Arc::new(BasisIndexer::new(d, m)?);
    let ladder = assemble_ladder(&ix);
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for e in ladder.ladder(i) {
            let alpha = ix.index(e.source as usize);
            let raised = ix.index(e.target as usize);
            if raised != &alpha.raised(i) {
                return Ok(f64::INFINITY);
            }
            worst = worst.max((e.weight - (raised.get(i) as f64).sqrt()).abs());
        }
        let expected = ix.order().iter().filter(|a| a.degree() < m).count();
        if ladder.ladder(i).len() != expected {
            return Ok(f64::INFINITY);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::eval_hermite;
    use crate::integrator::Scheme;

    #[test]
    fn slope_of_power_law() {
        let xs: Vec<f64> = [1.0f64, 2.0, 4.0, 8.0].iter().map(|x| x.ln()).collect();
        let ys: Vec<f64> = [1.0f64, 2.0, 4.0, 8.0].iter().map(|x| (3.0 * x.powf(-0.75)).ln()).collect();
        assert!((least_squares_slope(&xs, &ys) + 0.75).abs() < 1e-12);
    }

    #[test]
    fn basic_property_checks() {
        assert!(orthonormality_defect(2, 6, 10).unwrap() < 1e-12);
        assert!(recurrence_defect(12, &[-3.0, -0.2, 0.0, 1.1, 4.5]) < 1e-12);
        assert_eq!(ladder_defect(3, 4).unwrap(), 0.0);
    }

    #[test]
    fn oracle_matches_closed_form_with_constant_source() {
        let grid = TorusGrid::torus(1, 4).unwrap();
        let ix = Arc::new(BasisIndexer::new(1, 2).unwrap());
        let g = CoefficientField::from_data(Arc::clone(&ix), grid.clone(), vec![1.0; 12]).unwrap();
        let f = |_s: f64| vec![0.5; 12];
        let out = oracle_decoupled(&g, 0.7, Some(&f), 200).unwrap();
        for j in 0..3 {
            let k = j as f64;
            let exact = if j == 0 { 1.0 + 0.5 * 0.7 } else { (-k * 0.7f64).exp() + 0.5 * (1.0 - (-k * 0.7f64).exp()) / k };
            assert!(out.row(j).iter().all(|v| (v - exact).abs() < 1e-10));
        }
    }

    #[test]
    fn bound_is_tight_for_single_top_mode_in_one_dimension() {
        let grid = TorusGrid::torus(1, 16).unwrap();
        let pot = PotentialField::sample(&grid, |x| 0.3 * x[0].cos()).unwrap();
        let ix = Arc::new(BasisIndexer::new(1, 5).unwrap());
        let mut c = CoefficientField::zeros(Arc::clone(&ix), grid.clone());
        c.row_mut(5).copy_from_slice(&grid.sample(|x| (2.0 * x[0]).sin()));
        for k in [1.0, 2.0] {
            let b = em_decay_check(&c, &pot, k).unwrap();
            assert!((b.ratio() - 1.0).abs() < 1e-12, "ratio {}", b.ratio());
        }
    }

    #[test]
    fn residual_vanishes_for_smooth_solution() {
        let grid = TorusGrid::torus(1, 16).unwrap();
        let data = ProblemData::new(
            Arc::new(|x, v| x[0].cos() * (-v[0] * v[0] / 4.0).exp()),
            Arc::new(|x| 0.5 * x[0].cos()),
            6,
            grid,
        )
        .with_source(Arc::new(|t, x, v| (t.cos() + x[0].sin()) * eval_hermite(1, v[0])));
        let cfg = SolverConfig { dt: 2e-3, horizon: 0.1, scheme: Scheme::Rk4IntegratingFactor, ..Default::default() };
        let traj = solve(&data, &cfg).unwrap();
        let spec = SampleSpec { velocities: vec![vec![-1.3], vec![0.4], vec![2.0]], nodes: vec![0, 3, 9], time_indices: vec![10, 25, 40] };
        let r = pde_residual(&traj, &data, &spec).unwrap();
        assert_eq!(r.samples, 27);
        assert!(r.max_abs < 1e-4 * r.max_time_derivative.max(1.0), "{r:?}");
    }
}
