//! Time integration of `∂_t c + H c + ε ∇*∇ c = f_m` with the energy budget
//! `½ d/dt ‖c‖²_η = -‖A^{1/2} c‖²_η - ε ‖∇c‖²_η + (c, f_m)_η` logged along the way.

use std::sync::Arc;

use crate::basis::BasisIndexer;
use crate::error::{KfpError, Result};
use crate::gibbs_torus::{GibbsDerivative, PotentialField, Representation, TorusGrid};
use crate::hierarchy::{assemble_ladder, CoefficientField, HierarchyOperator, Workspace};
use crate::projection::{ProblemData, Projector, SourceFn};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Classical RK4 on `e^{At} c`: the diagonal `A` is integrated exactly.
    #[default]
    Rk4IntegratingFactor,
    Rk4Plain,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Rk4IntegratingFactor => "rk4_integrating_factor",
            Scheme::Rk4Plain => "rk4_plain",
        }
    }

    pub fn parse(s: &str) -> Option<Scheme> {
        match s {
            "rk4_integrating_factor" => Some(Scheme::Rk4IntegratingFactor),
            "rk4_plain" => Some(Scheme::Rk4Plain),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub horizon: f64,
    pub epsilon: f64,
    pub cfl_safety: f64,
    pub scheme: Scheme,
    /// Record a snapshot every `log_every` steps (the final step is always recorded).
    pub log_every: usize,
    pub representation: Representation,
    /// Reject step sizes above [`cfl_bound`]; disabling lets unstable runs
    /// proceed until they produce non-finite values.
    pub enforce_cfl: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 1e-3,
            horizon: 1.0,
            epsilon: 0.0,
            cfl_safety: 0.9,
            scheme: Scheme::default(),
            log_every: 1,
            representation: Representation::default(),
            enforce_cfl: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(KfpError::InvalidArgument(msg));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return bad(format!("horizon T must be positive, got {}", self.horizon));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return bad(format!("epsilon must be nonnegative, got {}", self.epsilon));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return bad(format!("cfl_safety must lie in (0, 1], got {}", self.cfl_safety));
        }
        if self.log_every == 0 {
            return bad("log_every must be at least 1".into());
        }
        Ok(())
    }

    /// Number of steps and the step actually used so that `steps * dt = T`.
    pub fn step_plan(&self) -> (usize, f64) {
        let steps = ((self.horizon / self.dt) - 1e-9).ceil().max(1.0) as usize;
        (steps, self.horizon / steps as f64)
    }
}

/// `dt_max = safety / (k_max √(m+1) (1 + max|∇U|) + m + ε k_max²)`.
///
/// An engineering bound, validated empirically: ladder entries are O(√m),
/// transport speed scales with the wavenumber, `A` adds stiffness `m` and the
/// viscous term `ε k²`.
pub fn cfl_bound(grid: &TorusGrid, pot: &PotentialField, m: usize, epsilon: f64, cfl_safety: f64) -> f64 {
    let k = grid.k_max();
    let rate = k * ((m + 1) as f64).sqrt() * (1.0 + pot.max_gradient_norm()) + m as f64 + epsilon * k * k;
    cfl_safety / rate
}

/// One logged line of the energy budget.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyRecord {
    pub t: f64,
    /// `½ ‖c‖²_η`
    pub half_l2_eta_sq: f64,
    /// `‖A^{1/2} c‖²_η`
    pub dissipation_a: f64,
    /// `ε ‖∇_x c‖²_η`
    pub dissipation_visc: f64,
    /// `(c, f_m)_η`
    pub forcing_power: f64,
    /// Simpson-rule defect of the energy identity over the last two steps;
    /// zero before two steps have been taken.
    pub energy_residual: f64,
}

/// Logged states and energy records of one solve.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CoefficientField>,
    pub records: Vec<EnergyRecord>,
    /// Step size actually used.
    pub dt: f64,
    pub steps: usize,
}

impl Trajectory {
    pub fn final_state(&self) -> &CoefficientField {
        self.states.last().expect("trajectory has at least the initial state")
    }

    pub fn max_residual(&self) -> f64 {
        self.records.iter().map(|r| r.energy_residual).fold(0.0, f64::max)
    }
}

/// Stateful stepper for one hierarchy on one grid.
pub struct Integrator {
    op: HierarchyOperator,
    forcing: Option<(SourceFn, Projector)>,
    epsilon: f64,
    scheme: Scheme,
    dt: f64,
    decay_full: Vec<f64>,
    decay_half: Vec<f64>,
    ws: Workspace,
    visc: Vec<f64>,
    buf: StageBuffers,
}

#[derive(Default)]
struct StageBuffers {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    stage: Vec<f64>,
    tmp: Vec<f64>,
    f0: Vec<f64>,
    fh: Vec<f64>,
    f1: Vec<f64>,
}

impl Integrator {
    pub fn new(op: HierarchyOperator, forcing: Option<(SourceFn, Projector)>, epsilon: f64, scheme: Scheme, dt: f64) -> Self {
        let a = op.ladder().a_diag();
        let decay_full = a.iter().map(|&k| (-k * dt).exp()).collect();
        let decay_half = a.iter().map(|&k| (-k * 0.5 * dt).exp()).collect();
        let len = op.state_len();
        let z = || vec![0.0; len];
        let buf = StageBuffers {
            k1: z(),
            k2: z(),
            k3: z(),
            k4: z(),
            stage: z(),
            tmp: z(),
            f0: z(),
            fh: z(),
            f1: z(),
        };
        Integrator { op, forcing, epsilon, scheme, dt, decay_full, decay_half, ws: Workspace::default(), visc: z(), buf }
    }

    pub fn operator(&self) -> &HierarchyOperator {
        &self.op
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn npts(&self) -> usize {
        self.op.gibbs().grid().len()
    }

    /// Projected source at time `t`, in the state representation.
    pub fn forcing_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        match &self.forcing {
            None => out.fill(0.0),
            Some((f, proj)) => {
                let vals = proj.project("source", |x, v| f(t, x, v))?;
                out.copy_from_slice(&vals);
                let npts = self.npts();
                for row in out.chunks_mut(npts) {
                    self.op.gibbs().to_state(row);
                }
            }
        }
        Ok(())
    }

    pub fn has_forcing(&self) -> bool {
        self.forcing.is_some()
    }

    /// `out = -(L c) + f` where `L` is the transport (and, for the plain
    /// scheme, also `A`) plus `ε ∇*∇`.
    fn rhs(&mut self, state: &[f64], forcing: &[f64], out: &mut [f64]) {
        match self.scheme {
            Scheme::Rk4IntegratingFactor => self.op.transport_into(state, out, &mut self.ws),
            Scheme::Rk4Plain => self.op.apply_into(state, out, &mut self.ws),
        }
        if self.epsilon > 0.0 {
            self.op.viscous_into(state, &mut self.visc, &mut self.ws);
            for (o, v) in out.iter_mut().zip(&self.visc) {
                *o += self.epsilon * v;
            }
        }
        for (o, f) in out.iter_mut().zip(forcing) {
            *o = f - *o;
        }
    }

    fn scale_rows(&self, data: &mut [f64], factors: &[f64]) {
        for (row, &s) in data.chunks_mut(self.npts()).zip(factors) {
            if s != 1.0 {
                row.iter_mut().for_each(|v| *v *= s);
            }
        }
    }

    /// Advance `state` (state representation) from `t` to `t + dt`.
    pub fn step(&mut self, state: &mut [f64], t: f64) -> Result<()> {
        let dt = self.dt;
        let mut b = std::mem::take(&mut self.buf);
        self.forcing_into(t, &mut b.f0)?;
        if self.forcing.is_some() {
            self.forcing_into(t + 0.5 * dt, &mut b.fh)?;
            self.forcing_into(t + dt, &mut b.f1)?;
        } else {
            b.fh.fill(0.0);
            b.f1.fill(0.0);
        }

        match self.scheme {
            Scheme::Rk4Plain => {
                self.rhs(state, &b.f0, &mut b.k1);
                axpy_into(&mut b.stage, state, 0.5 * dt, &b.k1);
                self.rhs(&b.stage, &b.fh, &mut b.k2);
                axpy_into(&mut b.stage, state, 0.5 * dt, &b.k2);
                self.rhs(&b.stage, &b.fh, &mut b.k3);
                axpy_into(&mut b.stage, state, dt, &b.k3);
                self.rhs(&b.stage, &b.f1, &mut b.k4);
                for i in 0..state.len() {
                    state[i] += dt / 6.0 * (b.k1[i] + 2.0 * b.k2[i] + 2.0 * b.k3[i] + b.k4[i]);
                }
            }
            Scheme::Rk4IntegratingFactor => {
                // Lawson RK4 with E(s) = exp(-A s)
                self.rhs(state, &b.f0, &mut b.k1);
                axpy_into(&mut b.stage, state, 0.5 * dt, &b.k1);
                self.scale_rows(&mut b.stage, &self.decay_half);
                self.rhs(&b.stage, &b.fh, &mut b.k2);

                b.tmp.copy_from_slice(state);
                self.scale_rows(&mut b.tmp, &self.decay_half);
                axpy_into(&mut b.stage, &b.tmp, 0.5 * dt, &b.k2);
                self.rhs(&b.stage, &b.fh, &mut b.k3);

                // stage 4: E(dt) c + dt E(dt/2) k3
                b.stage.copy_from_slice(&b.k3);
                self.scale_rows(&mut b.stage, &self.decay_half);
                b.tmp.copy_from_slice(state);
                self.scale_rows(&mut b.tmp, &self.decay_full);
                for i in 0..state.len() {
                    b.stage[i] = b.tmp[i] + dt * b.stage[i];
                }
                self.rhs(&b.stage, &b.f1, &mut b.k4);

                // c_new = E(dt) (c + dt/6 k1) + dt/3 E(dt/2)(k2 + k3) + dt/6 k4
                for i in 0..state.len() {
                    b.k1[i] = state[i] + dt / 6.0 * b.k1[i];
                    b.k2[i] = dt / 3.0 * (b.k2[i] + b.k3[i]);
                }
                self.scale_rows(&mut b.k1, &self.decay_full);
                self.scale_rows(&mut b.k2, &self.decay_half);
                for i in 0..state.len() {
                    state[i] = b.k1[i] + b.k2[i] + dt / 6.0 * b.k4[i];
                }
            }
        }
        self.buf = b;
        Ok(())
    }

    /// Energy budget terms at `t` for a state: `(½‖c‖², ‖A^{1/2}c‖², ε‖∇c‖², (c, f))`.
    pub fn budget(&mut self, state: &[f64], t: f64) -> Result<[f64; 4]> {
        let half = 0.5 * self.op.inner(state, state);
        let diss = self.op.dissipation(state);
        let visc = if self.epsilon > 0.0 {
            self.epsilon * self.op.gradient_norm_sq(state, &mut self.ws)
        } else {
            0.0
        };
        let power = if self.forcing.is_some() {
            let mut f = std::mem::take(&mut self.buf.f0);
            self.forcing_into(t, &mut f)?;
            let p = self.op.inner(state, &f);
            self.buf.f0 = f;
            p
        } else {
            0.0
        };
        Ok([half, diss, visc, power])
    }
}

fn axpy_into(out: &mut [f64], x: &[f64], a: f64, y: &[f64]) {
    for ((o, xi), yi) in out.iter_mut().zip(x).zip(y) {
        *o = xi + a * yi;
    }
}

/// `step` for a conjugated-representation coefficient field.
#[allow(clippy::too_many_arguments)]
pub fn step(
    state: &CoefficientField,
    grid: &TorusGrid,
    pot: &PotentialField,
    forcing: Option<(SourceFn, &crate::basis::QuadratureRule)>,
    t: f64,
    dt: f64,
    epsilon: f64,
    scheme: Scheme,
) -> Result<CoefficientField> {
    let ix = Arc::clone(state.indexer());
    let op = HierarchyOperator::conjugated(&ix, grid, pot)?;
    let forcing = match forcing {
        Some((f, rule)) => Some((f, Projector::new(&ix, grid, rule)?)),
        None => None,
    };
    let mut integ = Integrator::new(op, forcing, epsilon, scheme, dt);
    let mut data = state.data().to_vec();
    integ.step(&mut data, t)?;
    if data.iter().any(|v| !v.is_finite()) {
        return Err(KfpError::NonFinite { step: 1, time: t + dt });
    }
    CoefficientField::from_data(ix, grid.clone(), data)
}

/// Solve the hierarchy for `data` with its own potential.
pub fn solve(data: &ProblemData, cfg: &SolverConfig) -> Result<Trajectory> {
    let pot = data.potential_field()?;
    solve_with_potential(data, &pot, cfg)
}

/// Solve with an already sampled potential on `data.grid`.
pub fn solve_with_potential(data: &ProblemData, pot: &PotentialField, cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let grid = &data.grid;
    let indexer: Arc<BasisIndexer> = data.indexer()?;
    let bound = cfl_bound(grid, pot, data.truncation, cfg.epsilon, cfg.cfl_safety);
    if cfg.enforce_cfl && cfg.dt > bound {
        return Err(KfpError::CflViolation { dt: cfg.dt, bound });
    }
    let (steps, dt) = cfg.step_plan();

    let rule = data.rule()?;
    let projector = Projector::new(&indexer, grid, &rule)?;
    let gibbs = GibbsDerivative::new(grid, pot, cfg.representation)?;
    let op = HierarchyOperator::new(assemble_ladder(&indexer), gibbs.clone())?;
    let forcing = data.source.clone().map(|f| (f, projector.clone()));
    let mut integ = Integrator::new(op, forcing, cfg.epsilon, cfg.scheme, dt);

    let initial = &data.initial;
    let mut state = projector.project("initial data", |x, v| initial(x, v))?;
    let npts = grid.len();
    for row in state.chunks_mut(npts) {
        gibbs.to_state(row);
    }

    let to_field = |s: &[f64]| -> Result<CoefficientField> {
        let mut c = s.to_vec();
        for row in c.chunks_mut(npts) {
            gibbs.from_state(row);
        }
        CoefficientField::from_data(Arc::clone(&indexer), grid.clone(), c)
    };

    let mut traj = Trajectory { times: vec![], states: vec![], records: vec![], dt, steps };
    // rolling window of (energy, power) for the Simpson residual
    let mut window: Vec<(f64, f64)> = Vec::with_capacity(3);
    let log = |traj: &mut Trajectory, n: usize, state: &[f64], b: [f64; 4], residual: f64| -> Result<()> {
        let t = n as f64 * dt;
        traj.times.push(t);
        traj.states.push(to_field(state)?);
        traj.records.push(EnergyRecord {
            t,
            half_l2_eta_sq: b[0],
            dissipation_a: b[1],
            dissipation_visc: b[2],
            forcing_power: b[3],
            energy_residual: residual,
        });
        Ok(())
    };

    let b0 = integ.budget(&state, 0.0)?;
    window.push((b0[0], b0[3] - b0[1] - b0[2]));
    log(&mut traj, 0, &state, b0, 0.0)?;

    for n in 1..=steps {
        let t = (n - 1) as f64 * dt;
        integ.step(&mut state, t)?;
        if state.iter().any(|v| !v.is_finite()) {
            return Err(KfpError::NonFinite { step: n, time: n as f64 * dt });
        }
        let b = integ.budget(&state, n as f64 * dt)?;
        if window.len() == 3 {
            window.remove(0);
        }
        window.push((b[0], b[3] - b[1] - b[2]));
        let residual = if window.len() == 3 {
            let (e0, p0) = window[0];
            let (_, p1) = window[1];
            let (e2, p2) = window[2];
            ((e2 - e0) / (2.0 * dt) - (p0 + 4.0 * p1 + p2) / 6.0).abs()
        } else {
            0.0
        };
        if n % cfg.log_every == 0 || n == steps {
            log(&mut traj, n, &state, b, residual)?;
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{eval_hermite, gauss_rule};
    use std::f64::consts::PI;

    #[test]
    fn cfl_bound_limits() {
        let g = TorusGrid::torus(1, 32).unwrap();
        let zero = PotentialField::zero(&g);
        assert!((cfl_bound(&g, &zero, 0, 0.0, 0.8) - 0.8 / 16.0).abs() < 1e-15);
        let g2 = TorusGrid::torus(1, 64).unwrap();
        let z2 = PotentialField::zero(&g2);
        let ratio = cfl_bound(&g, &zero, 0, 0.0, 1.0) / cfl_bound(&g2, &z2, 0, 0.0, 1.0);
        assert!((ratio - 2.0).abs() < 1e-12);
        let big = cfl_bound(&g, &zero, 2, 1e6, 1.0);
        assert!((big * 1e6 * 256.0 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn config_validation() {
        let ok = SolverConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            SolverConfig { dt: 0.0, ..ok.clone() },
            SolverConfig { horizon: -1.0, ..ok.clone() },
            SolverConfig { epsilon: -0.1, ..ok.clone() },
            SolverConfig { cfl_safety: 1.5, ..ok.clone() },
            SolverConfig { log_every: 0, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
        let cfg = SolverConfig { dt: 0.3, horizon: 1.0, ..ok };
        let (steps, dt) = cfg.step_plan();
        assert_eq!(steps, 4);
        assert!((dt - 0.25).abs() < 1e-15);
    }

    #[test]
    fn zero_state_stays_zero() {
        let grid = TorusGrid::torus(1, 16).unwrap();
        let pot = PotentialField::sample(&grid, |x| x[0].cos()).unwrap();
        let ix = Arc::new(BasisIndexer::new(1, 4).unwrap());
        let c = CoefficientField::zeros(ix, grid.clone());
        for scheme in [Scheme::Rk4IntegratingFactor, Scheme::Rk4Plain] {
            let out = step(&c, &grid, &pot, None, 0.0, 1e-2, 0.1, scheme).unwrap();
            assert!(out.data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn decoupled_one_step() {
        let grid = TorusGrid::torus(1, 8).unwrap();
        let pot = PotentialField::sample(&grid, |_| 0.4).unwrap();
        let ix = Arc::new(BasisIndexer::new(1, 5).unwrap());
        let mut c = CoefficientField::zeros(Arc::clone(&ix), grid.clone());
        for j in 0..ix.len() {
            c.row_mut(j).fill(1.0 + 0.1 * j as f64);
        }
        let dt = 0.05;
        let exact = |j: usize| (1.0 + 0.1 * j as f64) * (-(j as f64) * dt).exp();
        let out = step(&c, &grid, &pot, None, 0.0, dt, 0.0, Scheme::Rk4IntegratingFactor).unwrap();
        for j in 0..ix.len() {
            assert!(out.row(j).iter().all(|v| (v - exact(j)).abs() < 1e-14));
        }
        let out = step(&c, &grid, &pot, None, 0.0, dt, 0.0, Scheme::Rk4Plain).unwrap();
        for j in 0..ix.len() {
            // local error of RK4 on y' = -k y: (k dt)^5 / 120
            let bound = 2.0 * (j as f64 * dt).powi(5) / 120.0 + 1e-15;
            assert!(out.row(j).iter().all(|v| (v - exact(j)).abs() < bound));
        }
    }

    #[test]
    fn m0_is_static_without_forcing_and_integrates_forcing() {
        let grid = TorusGrid::torus(1, 16).unwrap();
        let pot = PotentialField::sample(&grid, |x| x[0].cos()).unwrap();
        let ix = Arc::new(BasisIndexer::new(1, 0).unwrap());
        let c = CoefficientField::from_data(Arc::clone(&ix), grid.clone(), grid.sample(|x| x[0].sin())).unwrap();
        let out = step(&c, &grid, &pot, None, 0.0, 0.01, 0.0, Scheme::Rk4IntegratingFactor).unwrap();
        assert_eq!(out.data(), c.data());
        // f = t Ψ_0: c(t+dt) - c(t) = ((t+dt)² - t²)/2
        let rule = gauss_rule(4).unwrap();
        let f: SourceFn = Arc::new(|t, _x, v| t * eval_hermite(0, v[0]));
        let out = step(&c, &grid, &pot, Some((f, &rule)), 0.5, 0.1, 0.0, Scheme::Rk4IntegratingFactor).unwrap();
        let inc = (0.6f64 * 0.6 - 0.25) / 2.0;
        for (a, b) in out.data().iter().zip(c.data()) {
            assert!((a - b - inc).abs() < 1e-14);
        }
    }

    #[test]
    fn viscosity_damps_fourier_mode() {
        // m = 0, U = 0: ∂_t c = -ε ∂_x*∂_x c, so cos(2x) decays like e^{-4εt}
        let grid = TorusGrid::torus(1, 16).unwrap();
        let data = ProblemData::new(Arc::new(|x, _| (2.0 * x[0]).cos()), Arc::new(|_| 0.0), 0, grid.clone());
        let cfg = SolverConfig { dt: 1e-2, horizon: 0.5, epsilon: 0.3, ..Default::default() };
        let traj = solve(&data, &cfg).unwrap();
        let decay = (-4.0f64 * 0.3 * 0.5).exp();
        let expected = grid.sample(|x| decay * (2.0 * x[0]).cos() / crate::basis::psi0());
        for (a, b) in traj.final_state().data().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn solve_rejects_cfl_violation() {
        let grid = TorusGrid::torus(1, 32).unwrap();
        let data = ProblemData::new(Arc::new(|_, _| 1.0), Arc::new(|_| 0.0), 4, grid);
        let cfg = SolverConfig { dt: 0.5, horizon: 1.0, ..Default::default() };
        match solve(&data, &cfg) {
            Err(KfpError::CflViolation { bound, .. }) => assert!(bound < 0.5),
            other => panic!("expected CFL violation, got {other:?}"),
        }
    }

    #[test]
    fn unstable_step_reports_failing_step() {
        let grid = TorusGrid::torus(1, 32).unwrap();
        let data = ProblemData::new(Arc::new(|x, v| x[0].cos() * (1.0 + v[0])), Arc::new(|x| x[0].cos()), 8, grid);
        let cfg = SolverConfig { dt: 0.5, horizon: 200.0, enforce_cfl: false, ..Default::default() };
        match solve(&data, &cfg) {
            Err(KfpError::NonFinite { step, .. }) => assert!(step > 1 && step < 400),
            other => panic!("expected a non-finite failure, got {other:?}"),
        }
    }

    #[test]
    fn energy_decreases_without_forcing() {
        let grid = TorusGrid::torus(1, 16).unwrap();
        let data = ProblemData::new(
            Arc::new(|x, v| (x[0].cos() + 0.5 * (2.0 * x[0]).sin()) * (-v[0] * v[0] / 4.0).exp() * (1.0 + v[0])),
            Arc::new(|x| x[0].cos()),
            6,
            grid,
        );
        let cfg = SolverConfig { dt: 5e-3, horizon: 0.5, ..Default::default() };
        let traj = solve(&data, &cfg).unwrap();
        for w in traj.records.windows(2) {
            assert!(w[1].half_l2_eta_sq <= w[0].half_l2_eta_sq * (1.0 + 20.0 * f64::EPSILON));
        }
        assert_eq!(traj.times.len(), 101);
        assert!((traj.times.last().unwrap() - 0.5).abs() < 1e-12);
        let _ = PI;
    }
}
