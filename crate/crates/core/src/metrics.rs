//! Valid time against reference data and the reference-free discrete
//! energy of a rollout.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::nvar::{NvarModel, Rollout};
use crate::ode::VectorField;

/// First 1-based step `j` with `‖y_j − x_j‖² / ‖x_j‖² ≥ threshold`, or the
/// number of rows when the threshold is never reached. Rows with
/// `‖x_j‖ = 0` compare the absolute squared error instead.
pub fn valid_time(pred: &[f64], reference: &[f64], dim: usize, threshold: f64) -> Result<usize> {
    check_len(pred.len(), reference.len(), "prediction vs reference entries")?;
    if dim == 0 || pred.len() % dim != 0 {
        return Err(Error::InvalidArgument(alloc::format!("{} entries are not rows of width {dim}", pred.len())));
    }
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!("threshold must be positive, got {threshold}")));
    }
    let rows = pred.len() / dim;
    for (j, (y, x)) in pred.chunks_exact(dim).zip(reference.chunks_exact(dim)).enumerate() {
        let err: f64 = y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        let norm: f64 = x.iter().map(|v| v * v).sum();
        let rel = if norm > 0.0 { err / norm } else { err };
        // negated comparison so a NaN error counts as a breach
        if !(rel < threshold) {
            return Ok(j + 1);
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub energy: f64,
    pub steps_evaluated: usize,
}

/// Streams the discrete energy
///
/// ```text
/// E_h = h/2 Σ_k ‖f(x_{k+1}) − (f(x_k) + W ∇h(y_k) F(y_k))‖²
/// ```
///
/// over a trajectory fed one state at a time. The first `(p − 1) s + 1`
/// states form the seed window; every later state closes one summand.
/// Summation runs in ascending `k`.
pub struct EnergyAccumulator<'a, F: VectorField + ?Sized> {
    model: &'a NvarModel,
    system: &'a F,
    h: f64,
    window: VecDeque<(Vec<f64>, Vec<f64>)>,
    capacity: usize,
    sum: f64,
    steps: usize,
    ws: crate::state_function::Workspace,
    y: Vec<f64>,
    fstack: Vec<f64>,
    scratch: Vec<f64>,
    inc: Vec<f64>,
}

impl<'a, F: VectorField + ?Sized> EnergyAccumulator<'a, F> {
    pub fn new(model: &'a NvarModel, system: &'a F, h: f64) -> Result<Self> {
        check_len(system.dim(), model.dim(), "system vs model dimension")?;
        if !(h > 0.0) {
            return Err(Error::InvalidArgument(alloc::format!("time step must be positive, got {h}")));
        }
        let emb = model.spec().embedding;
        Ok(EnergyAccumulator {
            model,
            system,
            h,
            window: VecDeque::with_capacity(emb.history() + 2),
            capacity: emb.history() + 1,
            sum: 0.0,
            steps: 0,
            ws: model.spec().workspace(),
            y: vec![0.0; emb.len()],
            fstack: vec![0.0; emb.len()],
            scratch: vec![0.0; model.m()],
            inc: vec![0.0; model.dim()],
        })
    }

    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        let d = self.model.dim();
        check_len(x.len(), d, "state")?;
        let fx = self.system.eval(x)?;
        if self.window.len() == self.capacity {
            let emb = self.model.spec().embedding;
            let newest = self.capacity - 1;
            for lag in 0..emb.lookback {
                let (px, pf) = &self.window[newest - lag * emb.stride];
                self.y[lag * d..(lag + 1) * d].copy_from_slice(px);
                self.fstack[lag * d..(lag + 1) * d].copy_from_slice(pf);
            }
            self.model
                .derivative_increment_into(&self.y, &self.fstack, &mut self.ws, &mut self.scratch, &mut self.inc);
            let defect: f64 = (0..d)
                .map(|i| {
                    let e = fx[i] - (self.fstack[i] + self.inc[i]);
                    e * e
                })
                .sum();
            self.sum += defect;
            self.steps += 1;
            self.window.pop_front();
        }
        self.window.push_back((x.to_vec(), fx));
        Ok(())
    }

    pub fn finish(&self) -> EnergyReport {
        EnergyReport {
            energy: 0.5 * self.h * self.sum,
            steps_evaluated: self.steps,
        }
    }
}

/// Discrete energy of a rollout started from `seed` (the same window passed
/// to [`NvarModel::recursive_predict`]). Only the finite prefix of a
/// diverged rollout contributes.
pub fn discrete_energy<F: VectorField + ?Sized>(
    model: &NvarModel,
    system: &F,
    seed: &[f64],
    pred: &[f64],
    h: f64,
) -> Result<EnergyReport> {
    let d = model.dim();
    let window = model.spec().embedding.history() + 1;
    check_len(seed.len(), window * d, "seed window entries")?;
    if pred.len() % d != 0 {
        return Err(Error::InvalidArgument(alloc::format!("{} entries are not rows of width {d}", pred.len())));
    }
    let mut acc = EnergyAccumulator::new(model, system, h)?;
    for x in seed.chunks_exact(d).chain(pred.chunks_exact(d)) {
        acc.push(x)?;
    }
    Ok(acc.finish())
}

/// Both metrics for one rollout of a requested length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub valid_time: usize,
    pub energy: f64,
    pub steps_evaluated: usize,
    pub diverged_at: Option<usize>,
}

impl MetricReport {
    /// `reference` holds the reference states aligned with the requested
    /// prediction steps (at least as many rows as the rollout). A diverged
    /// rollout is scored on its finite prefix, so its valid time is at most
    /// the prefix length.
    pub fn evaluate<F: VectorField + ?Sized>(
        model: &NvarModel,
        system: &F,
        seed: &[f64],
        rollout: &Rollout,
        reference: &[f64],
        threshold: f64,
    ) -> Result<Self> {
        let d = model.dim();
        let n = rollout.len();
        if reference.len() < n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                actual: reference.len(),
                context: "reference entries for rollout",
            });
        }
        let vt = valid_time(&rollout.points, &reference[..n * d], d, threshold)?;
        let energy = discrete_energy(model, system, seed, &rollout.points, model.h)?;
        Ok(MetricReport {
            valid_time: vt,
            energy: energy.energy,
            steps_evaluated: energy.steps_evaluated,
            diverged_at: rollout.diverged_at,
        })
    }
}
