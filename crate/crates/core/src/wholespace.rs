//! Whole-space problems through periodization: a confining potential
//! `U = a|x|² + bump` is cut off to `U_R = φ_R U` on the torus `[-R, R]^d` and
//! solutions for growing `R` are compared on a fixed window.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{KfpError, Result};
use crate::gibbs_torus::{PotentialField, Representation, TorusGrid};
use crate::hierarchy::CoefficientField;
use crate::integrator::{solve_with_potential, SolverConfig, Trajectory};
use crate::projection::{InitialFn, ProblemData, SourceFn};

fn smooth_step_kernel(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Smooth radial cutoff: `χ = 1` on `[0, 1]`, `χ = 0` on `[2, ∞)`, `C^∞` in between.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CutoffProfile;

impl CutoffProfile {
    pub fn eval(&self, r: f64) -> f64 {
        let a = smooth_step_kernel(2.0 - r);
        let b = smooth_step_kernel(r - 1.0);
        a / (a + b)
    }
}

/// `U(x) = a|x|² + amp · b(|x| / radius)` with the bump
/// `b(s) = exp(1 - 1/(1 - s²))` for `s < 1`, zero otherwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WholeSpacePotential {
    pub a: f64,
    pub bump_amp: f64,
    pub bump_radius: f64,
}

impl WholeSpacePotential {
    pub fn new(a: f64, bump_amp: f64, bump_radius: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(KfpError::InvalidArgument(format!("confinement a must be positive, got {a}")));
        }
        if !(bump_amp >= 0.0 && bump_amp.is_finite()) {
            return Err(KfpError::InvalidArgument(format!("bump amplitude must be nonnegative, got {bump_amp}")));
        }
        if !(bump_radius > 0.0 && bump_radius.is_finite()) {
            return Err(KfpError::InvalidArgument(format!("bump radius must be positive, got {bump_radius}")));
        }
        Ok(WholeSpacePotential { a, bump_amp, bump_radius })
    }

    /// Radius outside which `U = a|x|²` exactly.
    pub fn support_radius(&self) -> f64 {
        self.bump_radius
    }

    /// Smallest admissible half-period `R_0 = max(4 r_P, 1)`.
    pub fn min_radius(&self) -> f64 {
        (4.0 * self.support_radius()).max(1.0)
    }

    fn bump(&self, r: f64) -> f64 {
        let s = r / self.bump_radius;
        if s >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - s * s)).exp()
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        self.a * r2 + self.bump_amp * self.bump(r2.sqrt())
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let s2 = r2 / (self.bump_radius * self.bump_radius);
        // d/dx_i b(|x|/ρ) = b · (-2 x_i / ρ²) / (1 - s²)²
        let radial = if s2 < 1.0 {
            let b = self.bump(r2.sqrt());
            -2.0 * b / (self.bump_radius * self.bump_radius * (1.0 - s2) * (1.0 - s2))
        } else {
            0.0
        };
        x.iter().map(|&xi| 2.0 * self.a * xi + self.bump_amp * radial * xi).collect()
    }

    /// `φ_R(x) = χ(2|x| / R)`: one on `B_{R/2}`, zero outside `B_R`.
    pub fn cutoff(&self, r: f64, x: &[f64]) -> f64 {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        CutoffProfile.eval(2.0 * norm / r)
    }

    /// `U_R = φ_R U`.
    pub fn periodized_value(&self, r: f64, x: &[f64]) -> f64 {
        self.cutoff(r, x) * self.value(x)
    }
}

/// Torus `[-R, R]^d` with node spacing `h`; `R/h` must be an integer.
pub fn whole_space_grid(dim: usize, r: f64, spacing: f64) -> Result<TorusGrid> {
    let half = r / spacing;
    if !(spacing > 0.0) || (half - half.round()).abs() > 1e-9 * half.max(1.0) {
        return Err(KfpError::InvalidArgument(format!(
            "half-period {r} is not a multiple of the spacing {spacing}"
        )));
    }
    TorusGrid::new(dim, 2 * half.round() as usize, r)
}

pub fn build_periodized_potential(pot: &WholeSpacePotential, r: f64, grid: &TorusGrid) -> Result<PotentialField> {
    if r < pot.min_radius() {
        return Err(KfpError::Precondition(format!(
            "half-period R = {r} is below the admissible bound R0 = {}",
            pot.min_radius()
        )));
    }
    PotentialField::sample(grid, |x| pot.periodized_value(r, x))
}

/// Pointwise comparison of `U_R` with `U` on the grid nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialBounds {
    pub r: f64,
    /// `max (U_R - U)`; nonpositive when `U_R ≤ U`.
    pub max_excess: f64,
    /// `max |∇² U_R|` (Frobenius), spectral derivatives.
    pub max_hessian: f64,
    /// `max |∇³ U_R|` (Frobenius), spectral derivatives.
    pub max_third: f64,
    /// `max |∇(U - U_R)| / |∇U|` over nodes outside `B_{R0}`.
    pub gradient_ratio: f64,
}

pub fn check_potential_bounds(pot: &WholeSpacePotential, r: f64, grid: &TorusGrid) -> Result<PotentialBounds> {
    let field = build_periodized_potential(pot, r, grid)?;
    let d = grid.dim();
    let n = grid.len();
    let r0 = pot.min_radius();

    let mut max_excess = f64::NEG_INFINITY;
    let mut gradient_ratio: f64 = 0.0;
    let mut x = vec![0.0; d];
    for idx in 0..n {
        grid.node_into(idx, &mut x);
        max_excess = max_excess.max(field.values()[idx] - pot.value(&x));
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm >= r0 {
            let g = pot.gradient(&x);
            let diff: f64 = (0..d).map(|i| (g[i] - field.gradient(i)[idx]).powi(2)).sum::<f64>().sqrt();
            let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            gradient_ratio = gradient_ratio.max(diff / gn);
        }
    }

    let hess: Vec<Vec<f64>> = (0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .map(|(i, j)| grid.derivative(field.gradient(i), j))
        .collect();
    let third: Vec<Vec<f64>> = hess.iter().flat_map(|h| (0..d).map(move |k| grid.derivative(h, k))).collect();
    let frob = |parts: &[Vec<f64>]| {
        (0..n)
            .map(|idx| parts.iter().map(|p| p[idx] * p[idx]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    };
    Ok(PotentialBounds { r, max_excess, max_hessian: frob(&hess), max_third: frob(&third), gradient_ratio })
}

/// A whole-space problem swept over half-periods.
#[derive(Clone)]
pub struct RSweepConfig {
    pub potential: WholeSpacePotential,
    pub radii: Vec<f64>,
    pub spacing: f64,
    pub dim: usize,
    pub truncation: usize,
    /// Initial data; should be supported inside the comparison window.
    pub initial: InitialFn,
    pub source: Option<SourceFn>,
    pub solver: SolverConfig,
}

#[derive(Clone, Debug)]
pub struct RSweepReport {
    pub r0: f64,
    pub radii: Vec<f64>,
    pub bounds: Vec<PotentialBounds>,
    /// `‖u_{R_k} - u_{R_{k+1}}‖` in `L²(0,T)` of the `e^{-U}`-weighted norm
    /// on the window `[-R0, R0)^d`, trapezoid rule over logged times.
    pub window_differences: Vec<f64>,
    /// Per radius, the largest ratio over logged times of the window norm to
    /// the full-torus `e^{-U_R}` norm. Logged only.
    pub window_norm_ratio: Vec<f64>,
    /// `½‖c(T)‖²_η` on each torus.
    pub final_energy: Vec<f64>,
    pub max_energy_residual: Vec<f64>,
}

impl RSweepReport {
    pub fn window_nonincreasing(&self) -> bool {
        self.window_differences.windows(2).all(|w| w[1] <= w[0])
    }

    /// `(max - min) / max` of the Hessian bound across radii.
    pub fn hessian_variation(&self) -> f64 {
        let hs: Vec<f64> = self.bounds.iter().map(|b| b.max_hessian).collect();
        let max = hs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = hs.iter().cloned().fold(f64::INFINITY, f64::min);
        (max - min) / max
    }

    pub fn below_potential(&self, tol: f64) -> bool {
        self.bounds.iter().all(|b| b.max_excess <= tol)
    }
}

fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2).zip(y.windows(2)).map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1])).sum()
}

/// Flat node indices of `grid` lying in `[-w, w)^d`, in window order.
fn window_nodes(grid: &TorusGrid, w: f64) -> Vec<usize> {
    let d = grid.dim();
    let mut x = vec![0.0; d];
    (0..grid.len())
        .filter(|&idx| {
            grid.node_into(idx, &mut x);
            x.iter().all(|&v| v >= -w - 1e-9 && v < w - 1e-9)
        })
        .collect()
}

pub fn r_sweep(cfg: &RSweepConfig) -> Result<RSweepReport> {
    let pot = &cfg.potential;
    let r0 = pot.min_radius();
    if cfg.radii.is_empty() {
        return Err(KfpError::InvalidArgument("no radii given".into()));
    }
    if let Some(&r) = cfg.radii.iter().find(|&&r| r < r0) {
        return Err(KfpError::Precondition(format!(
            "half-period R = {r} is below the admissible bound R0 = {r0}"
        )));
    }
    let mut radii = cfg.radii.clone();
    radii.sort_by(f64::total_cmp);
    let solver = SolverConfig { representation: Representation::Symmetrized, ..cfg.solver.clone() };

    let runs: Vec<(PotentialBounds, Trajectory, TorusGrid, PotentialField)> = radii
        .par_iter()
        .map(|&r| {
            let grid = whole_space_grid(cfg.dim, r, cfg.spacing)?;
            let bounds = check_potential_bounds(pot, r, &grid)?;
            let field = build_periodized_potential(pot, r, &grid)?;
            let p = *pot;
            let mut data = ProblemData::new(
                Arc::clone(&cfg.initial),
                Arc::new(move |x| p.periodized_value(r, x)),
                cfg.truncation,
                grid.clone(),
            );
            if let Some(f) = &cfg.source {
                data = data.with_source(Arc::clone(f));
            }
            let traj = solve_with_potential(&data, &field, &solver)?;
            Ok((bounds, traj, grid, field))
        })
        .collect::<Result<_>>()?;

    // window values with the weight of the true potential
    let windows: Vec<(Vec<usize>, Vec<f64>)> = runs
        .iter()
        .map(|(_, _, grid, _)| {
            let nodes = window_nodes(grid, r0);
            let weights = nodes.iter().map(|&i| (-pot.value(&grid.node(i))).exp()).collect();
            (nodes, weights)
        })
        .collect();
    let vol = cfg.spacing.powi(cfg.dim as i32);
    let window_sq = |a: &CoefficientField, na: &[usize], b: Option<(&CoefficientField, &[usize])>, w: &[f64]| {
        let mut total = 0.0;
        for j in 0..a.n_coeffs() {
            let ra = a.row(j);
            match b {
                Some((b, nb)) => {
                    let rb = b.row(j);
                    for ((&ia, &ib), &wk) in na.iter().zip(nb).zip(w) {
                        total += wk * (ra[ia] - rb[ib]).powi(2);
                    }
                }
                None => {
                    for (&ia, &wk) in na.iter().zip(w) {
                        total += wk * ra[ia].powi(2);
                    }
                }
            }
        }
        total * vol
    };

    let mut window_differences = vec![];
    for k in 0..runs.len().saturating_sub(1) {
        let (ta, tb) = (&runs[k].1, &runs[k + 1].1);
        let (na, wa) = &windows[k];
        let (nb, _) = &windows[k + 1];
        if na.len() != nb.len() {
            return Err(KfpError::ShapeMismatch("window nodes do not align across radii".into()));
        }
        if ta.times.len() != tb.times.len() {
            return Err(KfpError::ShapeMismatch("runs are logged at different times".into()));
        }
        let sq: Vec<f64> =
            ta.states.iter().zip(&tb.states).map(|(a, b)| window_sq(a, na, Some((b, nb)), wa)).collect();
        window_differences.push(trapezoid(&ta.times, &sq).sqrt());
    }

    let window_norm_ratio = runs
        .iter()
        .zip(&windows)
        .map(|((_, traj, _, field), (nodes, weights))| {
            traj.states
                .iter()
                .map(|c| {
                    let full = c.norm_eta_sq(field);
                    if full > 0.0 {
                        (window_sq(c, nodes, None, weights) / full).sqrt()
                    } else {
                        0.0
                    }
                })
                .fold(0.0, f64::max)
        })
        .collect();

    Ok(RSweepReport {
        r0,
        radii,
        final_energy: runs.iter().map(|(_, t, _, _)| t.records.last().map_or(0.0, |r| r.half_l2_eta_sq)).collect(),
        max_energy_residual: runs.iter().map(|(_, t, _, _)| t.max_residual()).collect(),
        bounds: runs.into_iter().map(|(b, _, _, _)| b).collect(),
        window_differences,
        window_norm_ratio,
    })
}
