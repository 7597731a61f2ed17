use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use kfp_core::diagnostics::convergence_study;
use kfp_core::wholespace::{r_sweep, RSweepConfig};
use kfp_core::{cfl_bound, solve, Representation};
use serde_json::json;

use crate::config::{Geometry, RunConfig};
use crate::output::{self, num, Metadata, SnapshotFormat};
use crate::CliError;

/// Shared command-line context.
pub struct Context {
    pub out: PathBuf,
    pub format: SnapshotFormat,
    pub threads: usize,
    pub command: &'static str,
}

impl Context {
    pub fn metadata(&self, cfg: &RunConfig, start: Instant, details: serde_json::Value) -> Result<(), CliError> {
        let meta = Metadata {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            seed: cfg.seed,
            threads: self.threads,
            wall_time_seconds: start.elapsed().as_secs_f64(),
            config: toml::Value::try_from(cfg).expect("config converts to toml"),
            details,
        };
        output::write_file(&self.out.join("config.toml"), cfg.to_toml())?;
        output::write_metadata(&self.out, &meta)
    }
}

pub fn simulate(cfg: &RunConfig, ctx: &Context) -> Result<String, CliError> {
    let start = Instant::now();
    cfg.validate()?;
    let data = cfg.problem()?;
    let mut solver = cfg.solver_config()?;
    if cfg.geometry == Geometry::Wholespace {
        solver.representation = Representation::Symmetrized;
    }
    let pot = data.potential_field()?;
    let bound = cfl_bound(&data.grid, &pot, data.truncation, solver.epsilon, solver.cfl_safety);
    let traj = solve(&data, &solver)?;

    output::create_dir(&ctx.out)?;
    output::write_file(&ctx.out.join("trajectory.csv"), output::trajectory_csv(&traj.records))?;
    let first = &traj.states[0];
    output::write_file(&ctx.out.join("basis_order.csv"), output::basis_order_csv(first))?;
    output::write_file(&ctx.out.join("grid.csv"), output::grid_csv(first))?;

    let snap_dir = ctx.out.join("snapshots");
    output::create_dir(&snap_dir)?;
    let every = cfg.output.snapshot_every;
    let last = traj.states.len() - 1;
    let mut snapshots = vec![];
    for (k, (state, &t)) in traj.states.iter().zip(&traj.times).enumerate() {
        let step = (t / traj.dt).round() as usize;
        let wanted = k == 0 || k == last || every.is_some_and(|e| step.is_multiple_of(e));
        if wanted {
            let path = output::write_snapshot(&snap_dir, step, state, ctx.format)?;
            snapshots.push(json!({ "step": step, "t": t, "file": path.strip_prefix(&ctx.out).unwrap_or(&path) }));
        }
    }

    let grid = &data.grid;
    ctx.metadata(
        cfg,
        start,
        json!({
            "dt_used": traj.dt,
            "steps": traj.steps,
            "cfl_bound": bound,
            "half_period": grid.half_period(),
            "grid_points_per_dim": grid.points_per_dim(),
            "basis_size": first.n_coeffs(),
            "representation": format!("{:?}", solver.representation),
            "snapshot_format": ctx.format,
            "snapshot_layout": "coefficient index major, grid node minor; basis order in basis_order.csv, node coordinates in grid.csv",
            "snapshots": snapshots,
            "max_energy_residual": traj.max_residual(),
        }),
    )?;
    let final_record = traj.records.last().expect("at least one record");
    Ok(format!(
        "simulated {} steps of dt = {} to T = {}: ½‖c‖² = {}, max energy residual = {}; output in {}",
        traj.steps,
        num(traj.dt),
        num(final_record.t),
        num(final_record.half_l2_eta_sq),
        num(traj.max_residual()),
        ctx.out.display()
    ))
}

pub fn sweep_m(cfg: &RunConfig, ctx: &Context) -> Result<String, CliError> {
    let start = Instant::now();
    cfg.validate_sweep_m()?;
    let data = cfg.problem()?;
    let solver = cfg.solver_config()?;
    let report = convergence_study(&data, &cfg.sweep_m.m_list, cfg.sweep_m.m_star, &solver)?;

    output::create_dir(&ctx.out)?;
    let mut csv = String::from("m,error\n");
    for (m, e) in report.degrees.iter().zip(&report.errors) {
        let _ = writeln!(csv, "{m},{}", num(*e));
    }
    output::write_file(&ctx.out.join("convergence.csv"), csv)?;
    let summary = format!(
        "quantity,value\nreference_degree,{}\nslope,{}\nenvelope_constant,{}\nmonotone,{}\nwithin_envelope,{}\n",
        report.reference_degree,
        num(report.slope),
        num(report.envelope_constant),
        report.monotone,
        report.within_envelope
    );
    output::write_file(&ctx.out.join("convergence_summary.csv"), summary)?;
    ctx.metadata(
        cfg,
        start,
        json!({
            "degrees": report.degrees,
            "errors": report.errors,
            "slope": report.slope,
            "error_norm": "time-integrated Gibbs-weighted L2 distance to the reference degree",
        }),
    )?;
    let mut msg = String::new();
    for (m, e) in report.degrees.iter().zip(&report.errors) {
        let _ = writeln!(msg, "m = {m:>3}: error {}", num(*e));
    }
    let _ = write!(
        msg,
        "slope {:.3} vs log(1+m); monotone: {}; reference m* = {}",
        report.slope, report.monotone, report.reference_degree
    );
    Ok(msg)
}

pub fn sweep_r(cfg: &RunConfig, ctx: &Context) -> Result<String, CliError> {
    let start = Instant::now();
    cfg.validate_sweep_r()?;
    let potential = cfg.whole_space_potential()?;
    let r = cfg.half_period();
    let sweep = RSweepConfig {
        potential,
        radii: cfg.sweep_r.radii.clone(),
        spacing: cfg.wholespace.spacing,
        dim: cfg.dimension,
        truncation: cfg.truncation,
        initial: cfg.data_preset().function(cfg.dimension, r)?,
        source: cfg.forcing_preset().function(cfg.dimension, r)?,
        solver: cfg.solver_config()?,
    };
    let report = r_sweep(&sweep)?;

    output::create_dir(&ctx.out)?;
    let mut csv = String::from(
        "R,max_excess,max_hessian,max_third,gradient_ratio,final_half_l2_eta_sq,max_energy_residual,window_norm_ratio,window_difference_to_next\n",
    );
    for (k, b) in report.bounds.iter().enumerate() {
        let diff = report.window_differences.get(k).map_or(String::new(), |d| num(*d));
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            num(b.r),
            num(b.max_excess),
            num(b.max_hessian),
            num(b.max_third),
            num(b.gradient_ratio),
            num(report.final_energy[k]),
            num(report.max_energy_residual[k]),
            num(report.window_norm_ratio[k]),
            diff
        );
    }
    output::write_file(&ctx.out.join("sweep_r.csv"), csv)?;
    let summary = format!(
        "quantity,value\nR0,{}\nhessian_variation,{}\nwindow_nonincreasing,{}\nbelow_potential,{}\n",
        num(report.r0),
        num(report.hessian_variation()),
        report.window_nonincreasing(),
        report.below_potential(1e-12)
    );
    output::write_file(&ctx.out.join("sweep_r_summary.csv"), summary)?;
    ctx.metadata(
        cfg,
        start,
        json!({
            "R0": report.r0,
            "radii": report.radii,
            "window": "[-R0, R0)^d, weighted by exp(-U), L2 in time",
            "window_differences": report.window_differences,
        }),
    )?;
    Ok(format!(
        "R0 = {}; Hessian bound variation {:.1}%; window differences {:?}; nonincreasing: {}",
        report.r0,
        100.0 * report.hessian_variation(),
        report.window_differences,
        report.window_nonincreasing()
    ))
}
