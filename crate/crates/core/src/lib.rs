//! Hermite-moment hierarchy solver for the kinetic Fokker–Planck equation
//! `∂_t u = Δ_v u - v·∇_v u + ∇U·∇_v u - v·∇_x u + f` on a periodic box.
//!
//! The velocity dependence is expanded in normalized Hermite functions, the
//! resulting first-order system in `x` is discretized with Fourier collocation
//! and advanced with an integrating-factor RK4 scheme.

pub mod basis;
pub mod diagnostics;
pub mod error;
pub mod gibbs_torus;
pub mod hierarchy;
pub mod integrator;
pub mod presets;
pub mod projection;
pub mod wholespace;

pub use basis::{gauss_rule, BasisIndexer, MultiIndex, QuadratureRule, TensorRule};
pub use diagnostics::{convergence_study, em_decay_check, pde_residual, ConvergenceReport, ResidualReport, SampleSpec};
pub use error::{KfpError, Result};
pub use gibbs_torus::{GibbsDerivative, PotentialField, Representation, ScalarField, TorusGrid};
pub use hierarchy::{assemble_ladder, CoefficientField, ErrorTerm, HierarchyOperator, LadderOperators};
pub use integrator::{cfl_bound, solve, solve_with_potential, EnergyRecord, Scheme, SolverConfig, Trajectory};
pub use presets::{DataPreset, ForcingPreset, PotentialPreset, SpatialProfile};
pub use projection::{InitialFn, PotentialFn, ProblemData, Projector, SourceFn};
pub use wholespace::{r_sweep, RSweepConfig, RSweepReport, WholeSpacePotential};
