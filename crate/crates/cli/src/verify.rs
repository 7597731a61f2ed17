//! The property battery behind `kfp verify`.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use kfp_core::basis::{eval_hermite, psi0};
use kfp_core::diagnostics::{
    adjointness_defect, em_decay_check, ladder_defect, orthonormality_defect, recurrence_defect, skew_defect,
};
use kfp_core::{
    solve, BasisIndexer, CoefficientField, MultiIndex, PotentialField, PotentialPreset, ProblemData, Representation, SolverConfig,
    TorusGrid,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::commands::Context;
use crate::config::RunConfig;
use crate::output::{self, num};
use crate::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    /// `value ≤ limit` unless a two-sided band is given.
    pub lower: Option<f64>,
    pub pass: bool,
}

fn upper(name: &'static str, value: f64, limit: f64) -> Check {
    Check { name, value, limit, lower: None, pass: value <= limit }
}

fn band(name: &'static str, value: f64, lower: f64, limit: f64) -> Check {
    Check { name, value, limit, lower: Some(lower), pass: value >= lower && value <= limit }
}

fn random_field(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn run_checks(cfg: &RunConfig) -> Result<Vec<Check>, CliError> {
    cfg.validate()?;
    let scale = cfg.verify.tolerance_scale;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = cfg.dimension;
    let m = cfg.truncation;
    let trials = cfg.verify.trials.max(1);
    let grid = cfg.grid_for(cfg.half_period())?;
    let data = cfg.problem()?;
    let pot = data.potential_field()?;
    let ix = Arc::new(BasisIndexer::new(d, m)?);
    let mut checks = vec![];

    checks.push(upper("hermite_orthonormality", orthonormality_defect(d, m.min(10), cfg.quadrature_points())?, 1e-10 * scale));

    let points: Vec<f64> = (0..100).map(|_| rng.random_range(-6.0..6.0)).collect();
    checks.push(upper("hermite_recurrence", recurrence_defect(m.max(10), &points), 1e-9 * scale));

    checks.push(upper("ladder_structure", ladder_defect(d, m)?, 1e-15 * scale));

    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let c = CoefficientField::from_data(Arc::clone(&ix), grid.clone(), random_field(&mut rng, ix.len() * grid.len()))?;
        worst = worst.max(skew_defect(&c, &pot)?);
    }
    checks.push(upper("skew_identity", worst, 1e-12 * scale));

    let r = cfg.half_period();
    let mut potentials = vec![
        PotentialPreset::Zero,
        PotentialPreset::Cosine { amp: 1.0 },
        PotentialPreset::QuadraticBump { a: 0.5, bump_amp: 1.0, bump_radius: 1.0 },
    ];
    potentials.push(cfg.potential_preset());
    let mut worst: f64 = 0.0;
    for preset in &potentials {
        let p = PotentialField::sample(&grid, |x| (preset.function(r).expect("valid preset"))(x))?;
        for _ in 0..trials {
            let u = random_field(&mut rng, grid.len());
            let w = random_field(&mut rng, grid.len());
            for repr in [Representation::Conjugated, Representation::Symmetrized] {
                worst = worst.max(adjointness_defect(&u, &w, &grid, &p, repr)?);
            }
        }
    }
    checks.push(upper("derivative_adjointness", worst, 1e-12 * scale));

    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let c = CoefficientField::from_data(Arc::clone(&ix), grid.clone(), random_field(&mut rng, ix.len() * grid.len()))?;
        for k in [1.0, 2.0] {
            worst = worst.max(em_decay_check(&c, &pot, k)?.ratio());
        }
    }
    checks.push(upper("error_term_bound_ratio", worst, 1.0 + 1e-9 * scale));

    checks.push(upper("decoupled_oracle", decoupled_oracle_error(d)?, 1e-8 * scale));
    checks.push(upper("stationary_drift", stationary_drift(cfg)?, 1e-12 * scale));
    let ratio = energy_residual_ratio()?;
    checks.push(band("energy_residual_order", ratio, 8.0, 32.0));
    Ok(checks)
}

/// `g = Ψ_{2e_1}` with `U = 0`: exact solution `e^{-2t} g`.
fn decoupled_oracle_error(d: usize) -> Result<f64, CliError> {
    let grid = TorusGrid::torus(d, 4)?;
    let data = ProblemData::new(
        Arc::new(|_, v| eval_hermite(2, v[0]) * psi0().powi(v.len() as i32 - 1)),
        Arc::new(|_| 0.0),
        3,
        grid,
    );
    let cfg = SolverConfig { dt: 1e-3, horizon: 1.0, log_every: 100, ..Default::default() };
    let traj = solve(&data, &cfg)?;
    let target = {
        let mut a = vec![0u32; d];
        a[0] = 2;
        traj.states[0].indexer().position(&MultiIndex::new(a)).expect("mode in basis")
    };
    let mut worst: f64 = 0.0;
    for (state, &t) in traj.states.iter().zip(&traj.times) {
        let exact_mode = (-2.0 * t).exp();
        for j in 0..state.n_coeffs() {
            let exact = if j == target { exact_mode } else { 0.0 };
            for v in state.row(j) {
                worst = worst.max((v - exact).abs() / exact_mode);
            }
        }
    }
    Ok(worst)
}

/// `u ≡ 1` under the configured potential.
fn stationary_drift(cfg: &RunConfig) -> Result<f64, CliError> {
    let mut data = cfg.problem()?;
    data.initial = Arc::new(|_, _| 1.0);
    data.source = None;
    let mut solver = cfg.solver_config()?;
    solver.horizon = (100.0 * solver.dt).min(solver.horizon);
    solver.epsilon = 0.0;
    let traj = solve(&data, &solver)?;
    let c0 = &traj.states[0];
    let scale = c0.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(c0
        .data()
        .iter()
        .zip(traj.final_state().data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / scale)
}

/// Ratio of the largest energy residual at `dt` and `dt/2` on a forced problem.
fn energy_residual_ratio() -> Result<f64, CliError> {
    let grid = TorusGrid::torus(1, 16)?;
    let data = ProblemData::new(Arc::new(|x, v| x[0].cos() * v[0].cos()), Arc::new(|x| x[0].cos()), 6, grid)
        .with_source(Arc::new(|t, x, v| (2.0 * t).cos() * x[0].sin() * eval_hermite(1, v[0])));
    let run = |dt: f64| -> Result<f64, CliError> {
        let cfg = SolverConfig { dt, horizon: 1.0, epsilon: 0.1, ..Default::default() };
        Ok(solve(&data, &cfg)?.max_residual())
    };
    Ok(run(0.01)? / run(0.005)?)
}

pub fn verify(cfg: &RunConfig, ctx: &Context) -> Result<String, CliError> {
    let start = Instant::now();
    let checks = run_checks(cfg)?;
    output::create_dir(&ctx.out)?;
    let mut csv = String::from("check,value,lower,limit,status\n");
    let mut msg = String::new();
    for c in &checks {
        let status = if c.pass { "pass" } else { "FAIL" };
        let lower = c.lower.map_or(String::new(), num);
        let _ = writeln!(csv, "{},{},{},{},{}", c.name, num(c.value), lower, num(c.limit), status);
        let range = match c.lower {
            Some(l) => format!("in [{l}, {}]", c.limit),
            None => format!("<= {:e}", c.limit),
        };
        let _ = writeln!(msg, "{status:>4}  {:<24} {:.3e} (need {range})", c.name, c.value);
    }
    output::write_file(&ctx.out.join("verify.csv"), csv)?;
    ctx.metadata(cfg, start, json!({ "checks": checks }))?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
    if failed.is_empty() {
        let _ = write!(msg, "all {} checks passed", checks.len());
        Ok(msg)
    } else {
        print!("{msg}");
        Err(CliError::Verify(format!("failed checks: {}", failed.join(", "))))
    }
}
