//! Periodic spatial grid, Fourier-collocation derivatives and the
//! Gibbs-weighted adjoint `∂_i* = -∂_i + ∂_i U`.
//!
//! The grid covers the cube `[-R, R)^d` with `N` nodes per dimension; fields
//! are stored flat with dimension 0 slowest. Spectral derivatives zero the
//! Nyquist mode, which makes the discrete derivative exactly antisymmetric in
//! the unweighted discrete product.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::{KfpError, Result};

struct FftPlans {
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

/// Uniform periodic grid on `[-R, R)^d`.
#[derive(Clone)]
pub struct TorusGrid {
    dim: usize,
    half_period: f64,
    points: usize,
    fft: Arc<FftPlans>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("dim", &self.dim)
            .field("half_period", &self.half_period)
            .field("points", &self.points)
            .finish()
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.half_period == other.half_period && self.points == other.points
    }
}

impl TorusGrid {
    /// Grid with `points` nodes per dimension on a cube of side `2 * half_period`.
    pub fn new(dim: usize, points: usize, half_period: f64) -> Result<Self> {
        if dim == 0 {
            return Err(KfpError::InvalidArgument("grid dimension must be at least 1".into()));
        }
        if points < 4 || !points.is_multiple_of(2) {
            return Err(KfpError::InvalidArgument(format!(
                "points per dimension must be even and at least 4, got {points}"
            )));
        }
        if !(half_period.is_finite() && half_period > 0.0) {
            return Err(KfpError::InvalidArgument(format!(
                "half period must be positive, got {half_period}"
            )));
        }
        points
            .checked_pow(dim as u32)
            .ok_or_else(|| KfpError::InvalidArgument("grid size overflows".into()))?;
        let mut planner = RealFftPlanner::<f64>::new();
        let fft = Arc::new(FftPlans {
            forward: planner.plan_fft_forward(points),
            inverse: planner.plan_fft_inverse(points),
        });
        Ok(TorusGrid { dim, half_period, points, fft })
    }

    /// The standard torus `[-π, π)^d`.
    pub fn torus(dim: usize, points: usize) -> Result<Self> {
        Self::new(dim, points, PI)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_period(&self) -> f64 {
        self.half_period
    }

    pub fn points_per_dim(&self) -> usize {
        self.points
    }

    /// Total number of nodes `N^d`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_period / self.points as f64
    }

    /// Volume element `h^d` of the rectangle rule.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Largest resolved wavenumber `π N / (2R)`.
    pub fn k_max(&self) -> f64 {
        PI * self.points as f64 / (2.0 * self.half_period)
    }

    /// One-dimensional node coordinate `-R + j h`.
    pub fn coord(&self, j: usize) -> f64 {
        -self.half_period + j as f64 * self.spacing()
    }

    /// Coordinates of the flat node `idx`.
    pub fn node(&self, idx: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        self.node_into(idx, &mut x);
        x
    }

    pub fn node_into(&self, mut idx: usize, x: &mut [f64]) {
        for a in (0..self.dim).rev() {
            x[a] = self.coord(idx % self.points);
            idx /= self.points;
        }
    }

    /// Sample a function at every node.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        (0..self.len())
            .map(|idx| {
                self.node_into(idx, &mut x);
                f(&x)
            })
            .collect()
    }

    pub fn scratch(&self) -> Scratch {
        Scratch {
            line: vec![0.0; self.points],
            spectrum: vec![Complex::new(0.0, 0.0); self.points / 2 + 1],
            fwd: self.fft.forward.make_scratch_vec(),
            inv: self.fft.inverse.make_scratch_vec(),
            field: vec![0.0; self.len()],
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(KfpError::ShapeMismatch(format!(
                "field has {len} values, grid has {} nodes",
                self.len()
            )));
        }
        Ok(())
    }

    fn check_dim(&self, i: usize) -> Result<()> {
        if i >= self.dim {
            return Err(KfpError::InvalidArgument(format!(
                "dimension {i} out of range for a {}-dimensional grid",
                self.dim
            )));
        }
        Ok(())
    }

    /// Fourier-collocation derivative along dimension `i`, written to `out`.
    ///
    /// Panics on length mismatch; use [`spectral_derivative`] for a checked call.
    pub fn derivative_into(&self, field: &[f64], out: &mut [f64], i: usize, s: &mut Scratch) {
        assert_eq!(field.len(), self.len());
        assert_eq!(out.len(), self.len());
        assert!(i < self.dim);
        let n = self.points;
        let stride = n.pow((self.dim - 1 - i) as u32);
        let blocks = self.len() / (n * stride);
        let kscale = PI / self.half_period;
        let norm = 1.0 / n as f64;
        for b in 0..blocks {
            for o in 0..stride {
                let base = b * n * stride + o;
                for k in 0..n {
                    s.line[k] = field[base + k * stride];
                }
                self.fft
                    .forward
                    .process_with_scratch(&mut s.line, &mut s.spectrum, &mut s.fwd)
                    .expect("forward fft buffer sizes");
                for (k, c) in s.spectrum.iter_mut().enumerate() {
                    if k == n / 2 {
                        *c = Complex::new(0.0, 0.0);
                    } else {
                        let kk = k as f64 * kscale * norm;
                        *c = Complex::new(-c.im * kk, c.re * kk);
                    }
                }
                // the imaginary part of the zero mode must vanish for c2r
                s.spectrum[0].im = 0.0;
                self.fft
                    .inverse
                    .process_with_scratch(&mut s.spectrum, &mut s.line, &mut s.inv)
                    .expect("inverse fft buffer sizes");
                for k in 0..n {
                    out[base + k * stride] = s.line[k];
                }
            }
        }
    }

    /// Allocating variant of [`TorusGrid::derivative_into`].
    pub fn derivative(&self, field: &[f64], i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.derivative_into(field, &mut out, i, &mut self.scratch());
        out
    }

    /// Band-limited trigonometric interpolation of a grid field at `x`.
    ///
    /// Uses the even-`N` Dirichlet kernel (Nyquist mode as a cosine), so the
    /// interpolant reproduces node values exactly.
    pub fn interpolate(&self, field: &[f64], x: &[f64]) -> f64 {
        assert_eq!(field.len(), self.len());
        assert_eq!(x.len(), self.dim);
        let n = self.points;
        let kernels: Vec<Vec<f64>> = x.iter().map(|&xa| self.kernel(xa)).collect();
        // contract one dimension at a time, starting from the fastest
        let mut cur: Vec<f64> = field.to_vec();
        for a in (0..self.dim).rev() {
            let ker = &kernels[a];
            let outer = cur.len() / n;
            cur = (0..outer)
                .map(|o| (0..n).map(|k| cur[o * n + k] * ker[k]).sum())
                .collect();
        }
        cur[0]
    }

    fn kernel(&self, x: f64) -> Vec<f64> {
        let n = self.points;
        let h = self.spacing();
        (0..n)
            .map(|j| {
                // scaled offset in [-π, π)
                let y = (x - self.coord(j)) * PI / self.half_period;
                let half = 0.5 * y;
                let sh = half.sin();
                if sh.abs() < 1e-13 {
                    // at a node (mod period) the kernel equals cos(N y / 2) = ±1
                    if ((x - self.coord(j)) / h).round() as i64 % n as i64 == 0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    (n as f64 * half).sin() * half.cos() / (n as f64 * sh)
                }
            })
            .collect()
    }
}

/// Reusable FFT work buffers for one thread.
pub struct Scratch {
    line: Vec<f64>,
    spectrum: Vec<Complex<f64>>,
    fwd: Vec<Complex<f64>>,
    inv: Vec<Complex<f64>>,
    field: Vec<f64>,
}

/// Grid samples of a scalar quantity.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField(pub Vec<f64>);

impl ScalarField {
    pub fn sample(grid: &TorusGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        ScalarField(grid.sample(f))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Sampled potential `U`, its spectral gradient and the Gibbs weights `exp(-U)`.
#[derive(Clone, Debug)]
pub struct PotentialField {
    u: Vec<f64>,
    grad: Vec<Vec<f64>>,
    eta: Vec<f64>,
    exp_u: Vec<f64>,
}

impl PotentialField {
    pub fn from_samples(grid: &TorusGrid, u: Vec<f64>) -> Result<Self> {
        grid.check_len(u.len())?;
        if let Some(idx) = u.iter().position(|v| !v.is_finite()) {
            return Err(KfpError::NonFiniteSample { what: "potential", node: grid.node(idx) });
        }
        let eta: Vec<f64> = u.iter().map(|&v| (-v).exp()).collect();
        if let Some(idx) = eta.iter().position(|&e| !(e > 0.0) || !e.is_finite()) {
            return Err(KfpError::InvalidArgument(format!(
                "Gibbs weight exp(-U) not representable at node {:?}",
                grid.node(idx)
            )));
        }
        let exp_u = u.iter().map(|&v| v.exp()).collect();
        let mut s = grid.scratch();
        let grad = (0..grid.dim())
            .map(|i| {
                let mut g = vec![0.0; grid.len()];
                grid.derivative_into(&u, &mut g, i, &mut s);
                g
            })
            .collect();
        Ok(PotentialField { u, grad, eta, exp_u })
    }

    pub fn sample(grid: &TorusGrid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        Self::from_samples(grid, grid.sample(f))
    }

    /// `U ≡ 0`.
    pub fn zero(grid: &TorusGrid) -> Self {
        Self::from_samples(grid, vec![0.0; grid.len()]).expect("zero potential is valid")
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn gradient(&self, i: usize) -> &[f64] {
        &self.grad[i]
    }

    /// Gibbs weights `exp(-U)` at the nodes.
    pub fn eta_weights(&self) -> &[f64] {
        &self.eta
    }

    pub fn exp_values(&self) -> &[f64] {
        &self.exp_u
    }

    /// `max_x |∇U(x)|` (Euclidean norm of the sampled gradient).
    pub fn max_gradient_norm(&self) -> f64 {
        (0..self.u.len())
            .map(|k| self.grad.iter().map(|g| g[k] * g[k]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn is_constant(&self) -> bool {
        self.u.iter().all(|&v| v == self.u[0])
    }
}

/// Checked Fourier-collocation derivative along dimension `i`.
pub fn spectral_derivative(field: &ScalarField, grid: &TorusGrid, i: usize) -> Result<ScalarField> {
    grid.check_len(field.0.len())?;
    grid.check_dim(i)?;
    Ok(ScalarField(grid.derivative(&field.0, i)))
}

/// Gibbs-weighted adjoint `-exp(U) D_i (exp(-U) field)` of the spectral derivative.
///
/// Satisfies `(D u, w)_η = (u, D* w)_η` for the discrete η-product up to rounding.
pub fn adjoint_derivative(
    field: &ScalarField,
    grid: &TorusGrid,
    pot: &PotentialField,
    i: usize,
) -> Result<ScalarField> {
    grid.check_len(field.0.len())?;
    grid.check_len(pot.u.len())?;
    grid.check_dim(i)?;
    let mut out = vec![0.0; grid.len()];
    conjugated_adjoint(grid, pot, &field.0, &mut out, i, &mut grid.scratch());
    Ok(ScalarField(out))
}

fn conjugated_adjoint(
    grid: &TorusGrid,
    pot: &PotentialField,
    field: &[f64],
    out: &mut [f64],
    i: usize,
    s: &mut Scratch,
) {
    let mut tmp = std::mem::take(&mut s.field);
    for ((t, f), e) in tmp.iter_mut().zip(field).zip(&pot.eta) {
        *t = f * e;
    }
    grid.derivative_into(&tmp, out, i, s);
    for (o, e) in out.iter_mut().zip(&pot.exp_u) {
        *o = -*o * e;
    }
    s.field = tmp;
}

/// `(u, w)_η = h^d Σ u w exp(-U)`.
pub fn inner_eta(u: &ScalarField, w: &ScalarField, grid: &TorusGrid, pot: &PotentialField) -> Result<f64> {
    grid.check_len(u.0.len())?;
    grid.check_len(w.0.len())?;
    grid.check_len(pot.u.len())?;
    Ok(weighted_dot(&u.0, &w.0, &pot.eta) * grid.cell_volume())
}

pub(crate) fn weighted_dot(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    a.iter().zip(b).zip(w).map(|((x, y), z)| x * y * z).sum()
}

/// How coefficient fields are represented while the hierarchy is applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Representation {
    /// State is `c` itself; `D` is spectral and `D* = -exp(U) D exp(-U)`.
    #[default]
    Conjugated,
    /// State is `w = exp(-U/2) c`; `D = ∂ + ½∂U` and `D* = -∂ + ½∂U`
    /// with the plain discrete product. Avoids the `exp(±U)` dynamic range
    /// when `U` varies by tens of units across the grid.
    Symmetrized,
}

/// A discrete derivative/adjoint pair that is exactly adjoint in the discrete
/// Gibbs product of its representation.
#[derive(Clone, Debug)]
pub struct GibbsDerivative {
    grid: TorusGrid,
    pot: PotentialField,
    repr: Representation,
    weights: Vec<f64>,
    half_exp_u: Vec<f64>,
}

impl GibbsDerivative {
    pub fn new(grid: &TorusGrid, pot: &PotentialField, repr: Representation) -> Result<Self> {
        grid.check_len(pot.u.len())?;
        let vol = grid.cell_volume();
        let weights = match repr {
            Representation::Conjugated => pot.eta.iter().map(|e| e * vol).collect(),
            Representation::Symmetrized => vec![vol; grid.len()],
        };
        let half_exp_u = pot.u.iter().map(|u| (0.5 * u).exp()).collect();
        Ok(GibbsDerivative { grid: grid.clone(), pot: pot.clone(), repr, weights, half_exp_u })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn potential(&self) -> &PotentialField {
        &self.pot
    }

    pub fn representation(&self) -> Representation {
        self.repr
    }

    /// Per-node quadrature weights of the state inner product.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        weighted_dot(a, b, &self.weights)
    }

    pub fn derivative(&self, field: &[f64], out: &mut [f64], i: usize, s: &mut Scratch) {
        self.grid.derivative_into(field, out, i, s);
        if self.repr == Representation::Symmetrized {
            for ((o, f), g) in out.iter_mut().zip(field).zip(&self.pot.grad[i]) {
                *o += 0.5 * g * f;
            }
        }
    }

    pub fn adjoint(&self, field: &[f64], out: &mut [f64], i: usize, s: &mut Scratch) {
        match self.repr {
            Representation::Conjugated => conjugated_adjoint(&self.grid, &self.pot, field, out, i, s),
            Representation::Symmetrized => {
                self.grid.derivative_into(field, out, i, s);
                for ((o, f), g) in out.iter_mut().zip(field).zip(&self.pot.grad[i]) {
                    *o = -*o + 0.5 * g * f;
                }
            }
        }
    }

    /// Convert a field of `c` values into the state representation in place.
    pub fn to_state(&self, field: &mut [f64]) {
        if self.repr == Representation::Symmetrized {
            for (f, e) in field.iter_mut().zip(&self.half_exp_u) {
                *f /= e;
            }
        }
    }

    /// Convert a state field back to `c` values in place.
    pub fn from_state(&self, field: &mut [f64]) {
        if self.repr == Representation::Symmetrized {
            for (f, e) in field.iter_mut().zip(&self.half_exp_u) {
                *f *= e;
            }
        }
    }
}
