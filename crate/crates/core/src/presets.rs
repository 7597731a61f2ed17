//! Built-in potentials, initial data and sources.

use std::sync::Arc;

use crate::basis::{eval_hermite, MultiIndex};
use crate::error::{KfpError, Result};
use crate::projection::{InitialFn, PotentialFn, SourceFn};
use crate::wholespace::{CutoffProfile, WholeSpacePotential};

#[derive(Clone, Debug, PartialEq)]
pub enum PotentialPreset {
    Zero,
    /// `amp Π_i cos(π x_i / R)`
    Cosine { amp: f64 },
    /// `a|x|² + bump`, cut off to the torus of half-period `R`.
    QuadraticBump { a: f64, bump_amp: f64, bump_radius: f64 },
}

impl PotentialPreset {
    pub fn name(&self) -> &'static str {
        match self {
            PotentialPreset::Zero => "zero",
            PotentialPreset::Cosine { .. } => "cosine",
            PotentialPreset::QuadraticBump { .. } => "quadratic-bump",
        }
    }

    pub fn function(&self, half_period: f64) -> Result<PotentialFn> {
        Ok(match *self {
            PotentialPreset::Zero => Arc::new(|_| 0.0),
            PotentialPreset::Cosine { amp } => {
                let k = std::f64::consts::PI / half_period;
                Arc::new(move |x| amp * x.iter().map(|xi| (k * xi).cos()).product::<f64>())
            }
            PotentialPreset::QuadraticBump { a, bump_amp, bump_radius } => {
                let p = WholeSpacePotential::new(a, bump_amp, bump_radius)?;
                Arc::new(move |x| p.periodized_value(half_period, x))
            }
        })
    }
}

/// Spatial factor `S(x)` of the built-in data and sources.
#[derive(Clone, Debug, PartialEq)]
pub enum SpatialProfile {
    Constant,
    /// `Π_i cos(k π x_i / R)`
    Cos { k: f64 },
    /// `Π_i sin(k π x_i / R)`
    Sin { k: f64 },
}

impl SpatialProfile {
    fn function(&self, half_period: f64) -> Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> {
        let scale = std::f64::consts::PI / half_period;
        match *self {
            SpatialProfile::Constant => Arc::new(|_| 1.0),
            SpatialProfile::Cos { k } => Arc::new(move |x| x.iter().map(|xi| (k * scale * xi).cos()).product()),
            SpatialProfile::Sin { k } => Arc::new(move |x| x.iter().map(|xi| (k * scale * xi).sin()).product()),
        }
    }
}

fn hermite_product(alpha: &[u32], v: &[f64]) -> f64 {
    alpha.iter().zip(v).map(|(&a, &vi)| eval_hermite(a as usize, vi)).product()
}

fn check_mode(alpha: &MultiIndex, dim: usize) -> Result<()> {
    if alpha.dim() != dim {
        return Err(KfpError::InvalidArgument(format!(
            "mode {alpha:?} has {} components, expected {dim}",
            alpha.dim()
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataPreset {
    /// `S(x) Ψ_α(v)`
    HermiteMode { alpha: MultiIndex, profile: SpatialProfile },
    /// `S(x) e^{-|v|²/4}`
    GaussianInV { profile: SpatialProfile },
    /// `S(x) Π_i cos(v_i)`
    Product { profile: SpatialProfile },
    /// `χ(|x|/ρ) e^{-|x|²} e^{-|v|²/4}`, supported in `B_{2ρ}`.
    CompactGaussian { radius: f64 },
}

impl DataPreset {
    pub fn name(&self) -> &'static str {
        match self {
            DataPreset::HermiteMode { .. } => "hermite-mode",
            DataPreset::GaussianInV { .. } => "gaussian-in-v",
            DataPreset::Product { .. } => "product",
            DataPreset::CompactGaussian { .. } => "compact-gaussian",
        }
    }

    pub fn function(&self, dim: usize, half_period: f64) -> Result<InitialFn> {
        Ok(match self {
            DataPreset::HermiteMode { alpha, profile } => {
                check_mode(alpha, dim)?;
                let s = profile.function(half_period);
                let alpha = alpha.as_slice().to_vec();
                Arc::new(move |x, v| s(x) * hermite_product(&alpha, v))
            }
            DataPreset::GaussianInV { profile } => {
                let s = profile.function(half_period);
                Arc::new(move |x, v| s(x) * (-v.iter().map(|w| w * w).sum::<f64>() / 4.0).exp())
            }
            DataPreset::Product { profile } => {
                let s = profile.function(half_period);
                Arc::new(move |x, v| s(x) * v.iter().map(|w| w.cos()).product::<f64>())
            }
            DataPreset::CompactGaussian { radius } => {
                let rho = *radius;
                if !(rho > 0.0) {
                    return Err(KfpError::InvalidArgument(format!("data radius must be positive, got {rho}")));
                }
                Arc::new(move |x, v| {
                    let r2: f64 = x.iter().map(|w| w * w).sum();
                    let v2: f64 = v.iter().map(|w| w * w).sum();
                    CutoffProfile.eval(r2.sqrt() / rho) * (-r2).exp() * (-v2 / 4.0).exp()
                })
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ForcingPreset {
    None,
    /// `amp cos(ω t) S(x) Ψ_α(v)`
    OscillatingMode { amp: f64, omega: f64, alpha: MultiIndex, profile: SpatialProfile },
}

impl ForcingPreset {
    pub fn name(&self) -> &'static str {
        match self {
            ForcingPreset::None => "none",
            ForcingPreset::OscillatingMode { .. } => "oscillating-mode",
        }
    }

    pub fn function(&self, dim: usize, half_period: f64) -> Result<Option<SourceFn>> {
        Ok(match self {
            ForcingPreset::None => None,
            ForcingPreset::OscillatingMode { amp, omega, alpha, profile } => {
                check_mode(alpha, dim)?;
                let (amp, omega) = (*amp, *omega);
                let s = profile.function(half_period);
                let alpha = alpha.as_slice().to_vec();
                Some(Arc::new(move |t, x, v| amp * (omega * t).cos() * s(x) * hermite_product(&alpha, v)))
            }
        })
    }
}
