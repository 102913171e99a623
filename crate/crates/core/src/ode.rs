//! Right-hand sides of the benchmark ODEs `x' = f(x)`.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::math;

/// An autonomous vector field `f: R^d -> R^d`.
///
/// Integration and training are generic over this trait so that test stubs
/// and new systems plug in without touching the registry below.
pub trait VectorField {
    fn dim(&self) -> usize;

    /// Writes `f(x)` into `out`. Both slices have length `dim()`.
    fn eval_into(&self, x: &[f64], out: &mut [f64]);

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(x.len(), self.dim(), "state vector")?;
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, &mut out);
        Ok(out)
    }
}

/// The three registered benchmark systems.
///
/// Parameters default to the canonical values but may be overridden. The
/// Lotka-Volterra predator death rate is `d_rate` so it does not collide
/// with the state dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum OdeSystem {
    /// Undamped spring `x'' + k x = 0` as the first-order system
    /// `[x2, -k x1]`.
    Spring { k: f64 },
    /// Predator-prey dynamics `[a x1 - b x1 x2, c x1 x2 - d_rate x2]`.
    LotkaVolterra { a: f64, b: f64, c: f64, d_rate: f64 },
    /// Lorenz-63 `[σ(x2 - x1), x1(ρ - x3) - x2, x1 x2 - β x3]`.
    Lorenz { sigma: f64, rho: f64, beta: f64 },
}

impl OdeSystem {
    pub const NAMES: [&'static str; 3] = ["spring", "lotka_volterra", "lorenz"];

    pub const fn spring() -> Self {
        OdeSystem::Spring { k: 3.0 }
    }

    pub const fn lotka_volterra() -> Self {
        OdeSystem::LotkaVolterra {
            a: 0.25,
            b: 1.0,
            c: 0.5,
            d_rate: 0.125,
        }
    }

    pub const fn lorenz() -> Self {
        OdeSystem::Lorenz {
            sigma: 10.0,
            rho: 28.0,
            beta: 8.0 / 3.0,
        }
    }

    /// Looks a system up by its registry name with canonical parameters.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "spring" => Ok(Self::spring()),
            "lotka_volterra" => Ok(Self::lotka_volterra()),
            "lorenz" => Ok(Self::lorenz()),
            other => Err(Error::InvalidArgument(alloc::format!(
                "unknown system `{other}` (expected one of spring, lotka_volterra, lorenz)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OdeSystem::Spring { .. } => "spring",
            OdeSystem::LotkaVolterra { .. } => "lotka_volterra",
            OdeSystem::Lorenz { .. } => "lorenz",
        }
    }

    /// Canonical initial condition `x(0)`.
    pub fn initial_state(&self) -> Vec<f64> {
        match *self {
            OdeSystem::Spring { k } => vec![0.0, math::sqrt(k)],
            OdeSystem::LotkaVolterra { .. } => vec![1.0, 0.25],
            OdeSystem::Lorenz { .. } => vec![-3.0, -3.0, 28.0],
        }
    }

    pub fn eval_f(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.eval(x)
    }

    /// Closed-form spring solution; `None` for systems without one.
    pub fn exact_solution(&self, t: f64) -> Option<Vec<f64>> {
        match *self {
            OdeSystem::Spring { k } => Some(exact_spring(k, t).to_vec()),
            _ => None,
        }
    }
}

impl VectorField for OdeSystem {
    fn dim(&self) -> usize {
        match self {
            OdeSystem::Lorenz { .. } => 3,
            _ => 2,
        }
    }

    #[inline]
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match *self {
            OdeSystem::Spring { k } => {
                out[0] = x[1];
                out[1] = -k * x[0];
            }
            OdeSystem::LotkaVolterra { a, b, c, d_rate } => {
                let prod = x[0] * x[1];
                out[0] = a * x[0] - b * prod;
                out[1] = c * prod - d_rate * x[1];
            }
            OdeSystem::Lorenz { sigma, rho, beta } => {
                out[0] = sigma * (x[1] - x[0]);
                out[1] = x[0] * (rho - x[2]) - x[1];
                out[2] = x[0] * x[1] - beta * x[2];
            }
        }
    }
}

/// `x(t) = [sin(√k t), √k cos(√k t)]`, the spring solution with
/// `x(0) = 0`, `x'(0) = √k`.
pub fn exact_spring(k: f64, t: f64) -> [f64; 2] {
    let omega = math::sqrt(k);
    [math::sin(omega * t), omega * math::cos(omega * t)]
}
