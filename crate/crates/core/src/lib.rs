//! Physics-informed nonlinear vector autoregression (piNVAR).
//!
//! An NVAR model advances a trajectory with the integration update
//! `x_{k+1} = x_k + W h(y_k)`, where `y_k` is a delay embedding of the most
//! recent states and `h` a fixed nonlinear state function. Differentiating
//! that update in time gives a companion update for the right-hand side of
//! the ODE, `f(x_{k+1}) = f(x_k) + W ∇h(y_k) F(y_k)`, which shares the same
//! weights. Training fits `W` by linear least squares against both updates.
//!
//! This crate is the algorithmic core and is `no_std` (it needs `alloc`).
//! File formats, the experiment harness and the command line live in the
//! `pinvar` crate.
//!
//! Indices are 0-based throughout this crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod error;
pub mod integrate;
pub mod linalg;
pub mod metrics;
pub mod nvar;
pub mod ode;
pub mod state_function;
pub mod train;

pub(crate) mod math;

pub use error::{Error, Result};
pub use integrate::{generate_dataset, generate_exact_spring_dataset, rk4_step, Dataset};
pub use metrics::{discrete_energy, valid_time, EnergyReport, MetricReport};
pub use nvar::{NvarModel, Rollout};
pub use ode::{OdeSystem, VectorField};
pub use state_function::{Basis, EmbeddingSpec, SupportParams, StateFunctionSpec};
pub use train::{build_training_problem, solve_weights, Solution, TrainingProblem, TrainingWeights};
