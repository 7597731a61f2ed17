//! Run configuration: a single TOML file, every key optional.

use std::f64::consts::PI;
use std::path::Path;

use kfp_core::basis::{basis_size, MAX_QUADRATURE};
use kfp_core::wholespace::{whole_space_grid, WholeSpacePotential};
use kfp_core::{
    DataPreset, ForcingPreset, KfpError, MultiIndex, PotentialPreset, ProblemData, Scheme, SolverConfig, SpatialProfile,
    TorusGrid,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Upper limit on `basis size × grid nodes` accepted before allocating.
const MAX_STATE_LEN: usize = 1 << 28;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    #[default]
    Torus,
    Wholespace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialSpec {
    Zero,
    Cosine {
        #[serde(default = "one")]
        amp: f64,
    },
    QuadraticBump {
        #[serde(default = "half")]
        a: f64,
        #[serde(default = "one")]
        bump_amp: f64,
        #[serde(default = "one")]
        bump_radius: f64,
    },
}

impl Default for PotentialSpec {
    fn default() -> Self {
        PotentialSpec::Cosine { amp: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileSpec {
    Constant,
    Cos {
        #[serde(default = "one")]
        k: f64,
    },
    Sin {
        #[serde(default = "one")]
        k: f64,
    },
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec::Cos { k: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSpec {
    HermiteMode {
        alpha: Vec<u32>,
        #[serde(default)]
        profile: ProfileSpec,
    },
    GaussianInV {
        #[serde(default)]
        profile: ProfileSpec,
    },
    Product {
        #[serde(default)]
        profile: ProfileSpec,
    },
    CompactGaussian {
        #[serde(default = "one")]
        radius: f64,
    },
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec::GaussianInV { profile: ProfileSpec::default() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ForcingSpec {
    #[default]
    None,
    OscillatingMode {
        #[serde(default = "one")]
        amp: f64,
        #[serde(default = "one")]
        omega: f64,
        alpha: Vec<u32>,
        #[serde(default)]
        profile: ProfileSpec,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub dt: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub epsilon: f64,
    pub cfl_safety: f64,
    pub scheme: String,
    pub log_every: usize,
    pub enforce_cfl: bool,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverSpec {
            dt: d.dt,
            horizon: d.horizon,
            epsilon: d.epsilon,
            cfl_safety: d.cfl_safety,
            scheme: d.scheme.name().to_string(),
            log_every: 10,
            enforce_cfl: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WholespaceSpec {
    /// Half-period `R` used by `simulate`.
    pub half_period: f64,
    /// Node spacing shared by every torus of a sweep.
    pub spacing: f64,
}

impl Default for WholespaceSpec {
    fn default() -> Self {
        WholespaceSpec { half_period: 8.0, spacing: 0.125 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepMSpec {
    pub m_list: Vec<usize>,
    pub m_star: usize,
}

impl Default for SweepMSpec {
    fn default() -> Self {
        SweepMSpec { m_list: vec![2, 4, 8], m_star: 16 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepRSpec {
    pub radii: Vec<f64>,
}

impl Default for SweepRSpec {
    fn default() -> Self {
        SweepRSpec { radii: vec![4.0, 8.0, 16.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySpec {
    /// Random fields per structural check.
    pub trials: usize,
    /// Multiplier on the one-sided tolerances; 0 demands exact results.
    pub tolerance_scale: f64,
}

impl Default for VerifySpec {
    fn default() -> Self {
        VerifySpec { trials: 20, tolerance_scale: 1.0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    /// Write a coefficient snapshot every this many steps (a multiple of
    /// `log_every`); the initial and final states are always written.
    pub snapshot_every: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: Geometry,
    pub dimension: usize,
    pub truncation: usize,
    pub grid_points: usize,
    /// Gauss–Hermite points per velocity dimension; `truncation + 8` if unset.
    pub quadrature: Option<usize>,
    pub seed: u64,
    pub potential: PotentialSpec,
    pub data: DataSpec,
    pub forcing: ForcingSpec,
    pub solver: SolverSpec,
    pub wholespace: WholespaceSpec,
    pub sweep_m: SweepMSpec,
    pub sweep_r: SweepRSpec,
    pub verify: VerifySpec,
    pub output: OutputSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            geometry: Geometry::Torus,
            dimension: 1,
            truncation: 8,
            grid_points: 32,
            quadrature: None,
            seed: 0,
            potential: PotentialSpec::default(),
            data: DataSpec::default(),
            forcing: ForcingSpec::default(),
            solver: SolverSpec::default(),
            wholespace: WholespaceSpec::default(),
            sweep_m: SweepMSpec::default(),
            sweep_r: SweepRSpec::default(),
            verify: VerifySpec::default(),
            output: OutputSpec::default(),
        }
    }
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config file {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| config_err(format!("cannot parse config file {}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Half-period of the torus the problem is solved on.
    pub fn half_period(&self) -> f64 {
        match self.geometry {
            Geometry::Torus => PI,
            Geometry::Wholespace => self.wholespace.half_period,
        }
    }

    pub fn quadrature_points(&self) -> usize {
        self.quadrature.unwrap_or(self.truncation + 8)
    }

    pub fn scheme(&self) -> Result<Scheme, CliError> {
        Scheme::parse(&self.solver.scheme).ok_or_else(|| {
            config_err(format!(
                "unknown scheme '{}' (expected rk4_integrating_factor or rk4_plain)",
                self.solver.scheme
            ))
        })
    }

    pub fn solver_config(&self) -> Result<SolverConfig, CliError> {
        Ok(SolverConfig {
            dt: self.solver.dt,
            horizon: self.solver.horizon,
            epsilon: self.solver.epsilon,
            cfl_safety: self.solver.cfl_safety,
            scheme: self.scheme()?,
            log_every: self.solver.log_every,
            enforce_cfl: self.solver.enforce_cfl,
            ..SolverConfig::default()
        })
    }

    pub fn whole_space_potential(&self) -> Result<WholeSpacePotential, CliError> {
        match self.potential {
            PotentialSpec::QuadraticBump { a, bump_amp, bump_radius } => {
                Ok(WholeSpacePotential::new(a, bump_amp, bump_radius)?)
            }
            _ => Err(config_err("the wholespace geometry needs [potential] kind = \"quadratic-bump\"")),
        }
    }

    /// Grid for a torus of half-period `r` under this configuration.
    pub fn grid_for(&self, r: f64) -> Result<TorusGrid, CliError> {
        Ok(match self.geometry {
            Geometry::Torus => TorusGrid::new(self.dimension, self.grid_points, r)?,
            Geometry::Wholespace => whole_space_grid(self.dimension, r, self.wholespace.spacing)?,
        })
    }

    /// Node count per dimension for a torus of half-period `r`.
    fn points_for(&self, r: f64) -> usize {
        match self.geometry {
            Geometry::Torus => self.grid_points,
            Geometry::Wholespace => (2.0 * r / self.wholespace.spacing).round() as usize,
        }
    }

    pub fn potential_preset(&self) -> PotentialPreset {
        match self.potential {
            PotentialSpec::Zero => PotentialPreset::Zero,
            PotentialSpec::Cosine { amp } => PotentialPreset::Cosine { amp },
            PotentialSpec::QuadraticBump { a, bump_amp, bump_radius } => {
                PotentialPreset::QuadraticBump { a, bump_amp, bump_radius }
            }
        }
    }

    pub fn data_preset(&self) -> DataPreset {
        match &self.data {
            DataSpec::HermiteMode { alpha, profile } => {
                DataPreset::HermiteMode { alpha: MultiIndex::new(alpha.clone()), profile: profile.preset() }
            }
            DataSpec::GaussianInV { profile } => DataPreset::GaussianInV { profile: profile.preset() },
            DataSpec::Product { profile } => DataPreset::Product { profile: profile.preset() },
            DataSpec::CompactGaussian { radius } => DataPreset::CompactGaussian { radius: *radius },
        }
    }

    pub fn forcing_preset(&self) -> ForcingPreset {
        match &self.forcing {
            ForcingSpec::None => ForcingPreset::None,
            ForcingSpec::OscillatingMode { amp, omega, alpha, profile } => ForcingPreset::OscillatingMode {
                amp: *amp,
                omega: *omega,
                alpha: MultiIndex::new(alpha.clone()),
                profile: profile.preset(),
            },
        }
    }

    /// Problem on the torus of half-period `r` with truncation degree `m`.
    pub fn problem_for(&self, r: f64, m: usize) -> Result<ProblemData, CliError> {
        let grid = self.grid_for(r)?;
        let potential = self.potential_preset().function(r)?;
        let initial = self.data_preset().function(self.dimension, r)?;
        let mut data = ProblemData::new(initial, potential, m, grid);
        data.quadrature = self.quadrature_points() - self.truncation + m;
        if let Some(f) = self.forcing_preset().function(self.dimension, r)? {
            data = data.with_source(f);
        }
        Ok(data)
    }

    pub fn problem(&self) -> Result<ProblemData, CliError> {
        self.problem_for(self.half_period(), self.truncation)
    }

    fn check_size(&self, m: usize, points: usize) -> Result<(), CliError> {
        let basis = basis_size(self.dimension, m)
            .ok_or_else(|| config_err(format!("basis for d = {}, m = {m} is too large", self.dimension)))?;
        let nodes = points.checked_pow(self.dimension as u32).unwrap_or(usize::MAX);
        if basis.saturating_mul(nodes) > MAX_STATE_LEN {
            return Err(config_err(format!(
                "state size {basis} x {nodes} exceeds the supported limit {MAX_STATE_LEN}"
            )));
        }
        Ok(())
    }

    fn check_mode(&self, what: &str, alpha: &[u32]) -> Result<(), CliError> {
        if alpha.len() != self.dimension {
            return Err(config_err(format!(
                "{what} mode {alpha:?} has {} components but dimension is {}",
                alpha.len(),
                self.dimension
            )));
        }
        Ok(())
    }

    /// Range checks that need no allocation.
    pub fn validate(&self) -> Result<(), CliError> {
        if !(1..=3).contains(&self.dimension) {
            return Err(config_err(format!("dimension must be 1, 2 or 3, got {}", self.dimension)));
        }
        if self.geometry == Geometry::Torus && (self.grid_points < 4 || self.grid_points % 2 == 1) {
            return Err(config_err(format!("grid_points must be even and at least 4, got {}", self.grid_points)));
        }
        let q = self.quadrature_points();
        if q <= self.truncation || q > MAX_QUADRATURE {
            return Err(config_err(format!(
                "quadrature must lie in [{}, {MAX_QUADRATURE}], got {q}",
                self.truncation + 1
            )));
        }
        self.solver_config()?.validate()?;
        let scale = self.verify.tolerance_scale;
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(config_err(format!("verify.tolerance_scale must be nonnegative, got {scale}")));
        }
        if let Some(every) = self.output.snapshot_every {
            if every == 0 || every % self.solver.log_every != 0 {
                return Err(config_err(format!(
                    "snapshot_every = {every} must be a positive multiple of log_every = {}",
                    self.solver.log_every
                )));
            }
        }
        match &self.potential {
            PotentialSpec::Cosine { amp } if !amp.is_finite() => {
                return Err(config_err("cosine amplitude must be finite"));
            }
            PotentialSpec::QuadraticBump { a, bump_amp, bump_radius } => {
                WholeSpacePotential::new(*a, *bump_amp, *bump_radius)?;
            }
            _ => {}
        }
        if let DataSpec::HermiteMode { alpha, .. } = &self.data {
            self.check_mode("data", alpha)?;
        }
        if let DataSpec::CompactGaussian { radius } = &self.data {
            if !(*radius > 0.0) {
                return Err(config_err(format!("data radius must be positive, got {radius}")));
            }
        }
        if let ForcingSpec::OscillatingMode { alpha, amp, omega, .. } = &self.forcing {
            self.check_mode("forcing", alpha)?;
            if !amp.is_finite() || !omega.is_finite() {
                return Err(config_err("forcing amplitude and frequency must be finite"));
            }
        }
        if self.geometry == Geometry::Wholespace {
            let pot = self.whole_space_potential()?;
            let h = self.wholespace.spacing;
            if !(h > 0.0 && h.is_finite()) {
                return Err(config_err(format!("wholespace spacing must be positive, got {h}")));
            }
            let r = self.wholespace.half_period;
            if r < pot.min_radius() {
                return Err(config_err(format!(
                    "half_period R = {r} is below the admissible bound R0 = {}",
                    pot.min_radius()
                )));
            }
        }
        self.check_size(self.truncation, self.points_for(self.half_period()))?;
        Ok(())
    }

    pub fn validate_sweep_m(&self) -> Result<(), CliError> {
        self.validate()?;
        let s = &self.sweep_m;
        if s.m_list.len() < 2 {
            return Err(config_err("sweep_m.m_list needs at least two degrees"));
        }
        if let Some(m) = s.m_list.iter().find(|&&m| m >= s.m_star) {
            return Err(config_err(format!("sweep_m.m_list entry {m} is not below m_star = {}", s.m_star)));
        }
        let q = self.quadrature_points() - self.truncation + s.m_star;
        if q > MAX_QUADRATURE {
            return Err(config_err(format!("m_star = {} needs {q} quadrature points", s.m_star)));
        }
        self.check_size(s.m_star, self.points_for(self.half_period()))
    }

    pub fn validate_sweep_r(&self) -> Result<(), CliError> {
        if self.geometry != Geometry::Wholespace {
            return Err(config_err("sweep-R needs geometry = \"wholespace\""));
        }
        self.validate()?;
        let pot = self.whole_space_potential()?;
        if self.sweep_r.radii.is_empty() {
            return Err(config_err("sweep_r.radii is empty"));
        }
        for &r in &self.sweep_r.radii {
            if r < pot.min_radius() {
                return Err(config_err(format!(
                    "sweep_r radius R = {r} is below the admissible bound R0 = {}",
                    pot.min_radius()
                )));
            }
            self.check_size(self.truncation, self.points_for(r))?;
        }
        Ok(())
    }
}

impl ProfileSpec {
    fn preset(&self) -> SpatialProfile {
        match *self {
            ProfileSpec::Constant => SpatialProfile::Constant,
            ProfileSpec::Cos { k } => SpatialProfile::Cos { k },
            ProfileSpec::Sin { k } => SpatialProfile::Sin { k },
        }
    }
}

impl From<KfpError> for CliError {
    fn from(e: KfpError) -> Self {
        if e.is_numerical() || matches!(e, KfpError::ShapeMismatch(_)) {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}
