//! Physics-informed least-squares training of the NVAR weights.
//!
//! The objective is
//!
//! ```text
//! w_d ‖W H − Z‖² + w_o ‖W dH − dZ‖² + r ‖W‖²
//! ```
//!
//! where column `k` of `H` is `h(y_k)`, of `Z` is `x_{k+1} − x_k`, of `dH`
//! is `∇h(y_k) F(y_k)` and of `dZ` is `f(x_{k+1}) − f(x_k)`. It is solved
//! as one stacked least-squares problem
//! `min ‖[√w_d Hᵀ; √w_o dHᵀ; √r I] Wᵀ − [√w_d Zᵀ; √w_o dZᵀ; 0]‖` by
//! Householder QR, without forming the Gram matrix.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::integrate::Dataset;
use crate::linalg::{lstsq, ColMatrix};
use crate::math;
use crate::ode::VectorField;
use crate::state_function::{build_embedding_into, StateFunctionSpec};

/// Data-fit, ODE-fit and ridge weights `(w_d, w_o, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingWeights {
    pub data: f64,
    pub ode: f64,
    pub ridge: f64,
}

impl TrainingWeights {
    pub fn new(data: f64, ode: f64, ridge: f64) -> Result<Self> {
        let w = TrainingWeights { data, ode, ridge };
        w.validate()?;
        Ok(w)
    }

    fn validate(&self) -> Result<()> {
        let all = [self.data, self.ode, self.ridge];
        if all.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!(
                "training weights must be finite and nonnegative: {self:?}"
            )));
        }
        if all.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidArgument("at least one training weight must be positive".into()));
        }
        Ok(())
    }
}

/// Assembled training matrices. `H` and `dH` are stored row-major as
/// `m × T`, `Z` and `dZ` as `d × T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingProblem {
    pub m: usize,
    pub d: usize,
    pub t: usize,
    pub h: Vec<f64>,
    pub z: Vec<f64>,
    pub dh: Vec<f64>,
    pub dz: Vec<f64>,
    pub weights: TrainingWeights,
}

/// Builds the training matrices from rows `start .. start + count` of the
/// dataset (0-based; the targets also consume row `start + count`).
///
/// `start` must leave `(p − 1) s` rows of history.
pub fn build_training_problem<F: VectorField + ?Sized>(
    dataset: &Dataset,
    system: &F,
    spec: &StateFunctionSpec,
    start: usize,
    count: usize,
    weights: TrainingWeights,
) -> Result<TrainingProblem> {
    weights.validate()?;
    let d = dataset.dim();
    check_len(system.dim(), d, "system dimension vs dataset")?;
    check_len(spec.embedding.dim, d, "state function dimension vs dataset")?;
    let history = spec.embedding.history();
    if count == 0 {
        return Err(Error::IndexRange("training window is empty".into()));
    }
    if start < history {
        return Err(Error::InsufficientHistory {
            index: start,
            required: history,
            available: start,
        });
    }
    if start + count >= dataset.len() {
        return Err(Error::IndexRange(alloc::format!(
            "training rows {start}..{} need target row {} but the dataset has {} rows",
            start + count,
            start + count,
            dataset.len()
        )));
    }

    let m = spec.m();
    let n = spec.input_len();
    let first = start - history;
    let last = start + count; // inclusive
    let mut fvals = vec![0.0; (last - first + 1) * d];
    for (row, out) in (first..=last).zip(fvals.chunks_exact_mut(d)) {
        system.eval_into(dataset.point(row), out);
    }
    let frow = |row: usize| &fvals[(row - first) * d..(row - first + 1) * d];

    let mut problem = TrainingProblem {
        m,
        d,
        t: count,
        h: vec![0.0; m * count],
        z: vec![0.0; d * count],
        dh: vec![0.0; m * count],
        dz: vec![0.0; d * count],
        weights,
    };
    let mut ws = spec.workspace();
    let mut y = vec![0.0; n];
    let mut fstack = vec![0.0; n];
    let mut col = vec![0.0; m];
    let emb = spec.embedding;
    let points = dataset.as_flat();
    for k in 0..count {
        let row = start + k;
        build_embedding_into(points, row, &emb, &mut y);
        for (lag, chunk) in fstack.chunks_exact_mut(d).enumerate() {
            chunk.copy_from_slice(frow(row - lag * emb.stride));
        }
        spec.eval_state_into(&y, &mut ws, &mut col);
        for (i, v) in col.iter().enumerate() {
            problem.h[i * count + k] = *v;
        }
        spec.eval_directional_into(&y, &fstack, &mut ws, &mut col);
        for (i, v) in col.iter().enumerate() {
            problem.dh[i * count + k] = *v;
        }
        let (x0, x1) = (dataset.point(row), dataset.point(row + 1));
        let (f0, f1) = (frow(row), frow(row + 1));
        for i in 0..d {
            problem.z[i * count + k] = x1[i] - x0[i];
            problem.dz[i * count + k] = f1[i] - f0[i];
        }
    }
    Ok(problem)
}

/// Trained weights, row-major `d × m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub weights: Vec<f64>,
    /// Only ever set when `r = 0`: the stacked matrix was numerically rank
    /// deficient and the minimum-norm minimiser was returned.
    pub rank_deficient: bool,
}

pub fn solve_weights(problem: &TrainingProblem) -> Result<Solution> {
    let TrainingProblem { m, d, t, .. } = *problem;
    let w = problem.weights;
    w.validate()?;
    let blocks = [(w.data, &problem.h, &problem.z), (w.ode, &problem.dh, &problem.dz)];
    let active: Vec<_> = blocks.iter().filter(|(wt, _, _)| *wt > 0.0).collect();
    let ridge_rows = if w.ridge > 0.0 { m } else { 0 };
    let rows = (active.len() * t + ridge_rows).max(m);

    let mut a = ColMatrix::zeros(rows, m);
    let mut b = ColMatrix::zeros(rows, d);
    let mut offset = 0;
    for (wt, feat, target) in &active {
        let s = math::sqrt(*wt);
        for j in 0..m {
            let dst = &mut a.col_mut(j)[offset..offset + t];
            for (x, v) in dst.iter_mut().zip(&feat[j * t..(j + 1) * t]) {
                *x = s * v;
            }
        }
        for i in 0..d {
            let dst = &mut b.col_mut(i)[offset..offset + t];
            for (x, v) in dst.iter_mut().zip(&target[i * t..(i + 1) * t]) {
                *x = s * v;
            }
        }
        offset += t;
    }
    if ridge_rows > 0 {
        let s = math::sqrt(w.ridge);
        for j in 0..m {
            a.set(offset + j, j, s);
        }
    }

    let sol = lstsq(a, b, w.ridge == 0.0);
    // column i of X (m × d, column-major) is row i of W
    Ok(Solution {
        weights: sol.x.data,
        rank_deficient: sol.rank_deficient,
    })
}

/// The three objective terms and their weighted sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub data_fit: f64,
    pub ode_fit: f64,
    pub ridge: f64,
    pub total: f64,
}

fn residual_norm_sq(w: &[f64], feat: &[f64], target: &[f64], d: usize, m: usize, t: usize) -> f64 {
    let mut acc = 0.0;
    let mut row = vec![0.0; t];
    for i in 0..d {
        row.copy_from_slice(&target[i * t..(i + 1) * t]);
        for j in 0..m {
            let wij = w[i * m + j];
            if wij == 0.0 {
                continue;
            }
            for (r, f) in row.iter_mut().zip(&feat[j * t..(j + 1) * t]) {
                *r -= wij * f;
            }
        }
        acc += row.iter().map(|v| v * v).sum::<f64>();
    }
    acc
}

pub fn training_objective(problem: &TrainingProblem, w: &[f64]) -> Result<Objective> {
    let TrainingProblem { m, d, t, .. } = *problem;
    check_len(w.len(), d * m, "weight matrix entries")?;
    let data_fit = residual_norm_sq(w, &problem.h, &problem.z, d, m, t);
    let ode_fit = residual_norm_sq(w, &problem.dh, &problem.dz, d, m, t);
    let ridge = w.iter().map(|v| v * v).sum::<f64>();
    let ww = problem.weights;
    Ok(Objective {
        data_fit,
        ode_fit,
        ridge,
        total: ww.data * data_fit + ww.ode * ode_fit + ww.ridge * ridge,
    })
}

/// `‖L(W)‖²_F` evaluated from the explicitly stacked matrices.
pub fn stacked_objective(problem: &TrainingProblem, w: &[f64]) -> Result<f64> {
    let TrainingProblem { m, d, t, .. } = *problem;
    check_len(w.len(), d * m, "weight matrix entries")?;
    let ww = problem.weights;
    let (sd, so, sr) = (math::sqrt(ww.data), math::sqrt(ww.ode), math::sqrt(ww.ridge));
    let cols = 2 * t + m;
    let mut total = 0.0;
    for i in 0..d {
        for c in 0..cols {
            let (lhs, rhs) = if c < t {
                let s: f64 = (0..m).map(|j| w[i * m + j] * sd * problem.h[j * t + c]).sum();
                (s, sd * problem.z[i * t + c])
            } else if c < 2 * t {
                let k = c - t;
                let s: f64 = (0..m).map(|j| w[i * m + j] * so * problem.dh[j * t + k]).sum();
                (s, so * problem.dz[i * t + k])
            } else {
                (w[i * m + (c - 2 * t)] * sr, 0.0)
            };
            total += (lhs - rhs) * (lhs - rhs);
        }
    }
    Ok(total)
}
