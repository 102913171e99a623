//! The trained model: integration update, recursive rollout and the
//! propagated-derivative update that shares its weights.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::state_function::{build_embedding_into, StateFunctionSpec, Workspace};

#[derive(Debug, Clone, PartialEq)]
pub struct NvarModel {
    /// Row-major `d × m`.
    weights: Vec<f64>,
    spec: StateFunctionSpec,
    /// Sample spacing the model was trained at.
    pub h: f64,
}

/// Output of a recursive rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    /// Finite predictions, row-major; row `j` is prediction `j + 1`.
    pub points: Vec<f64>,
    /// 1-based step whose prediction was non-finite, if any. Rollouts stop
    /// there; `points` holds the finite prefix.
    pub diverged_at: Option<usize>,
    pub dim: usize,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }
}

impl NvarModel {
    pub fn new(weights: Vec<f64>, spec: StateFunctionSpec, h: f64) -> Result<Self> {
        check_len(weights.len(), spec.embedding.dim * spec.m(), "weight matrix entries")?;
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("weight matrix has non-finite entries".into()));
        }
        if !(h > 0.0) {
            return Err(Error::InvalidArgument(alloc::format!("time step must be positive, got {h}")));
        }
        Ok(NvarModel { weights, spec, h })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn spec(&self) -> &StateFunctionSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.embedding.dim
    }

    pub fn m(&self) -> usize {
        self.spec.m()
    }

    /// `out = W v` for a length-`m` vector.
    #[inline]
    fn apply_weights(&self, v: &[f64], out: &mut [f64]) {
        let m = self.m();
        for (o, row) in out.iter_mut().zip(self.weights.chunks_exact(m)) {
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    /// `x_{k+1} = x_k + W h(y_k)`; the leading `d` entries of `y` are `x_k`.
    pub fn predict_next(&self, y: &[f64]) -> Result<Vec<f64>> {
        let hv = self.spec.eval_state(y)?;
        let d = self.dim();
        let mut out = vec![0.0; d];
        self.apply_weights(&hv, &mut out);
        for (o, x) in out.iter_mut().zip(&y[..d]) {
            *o += x;
        }
        Ok(out)
    }

    /// `f(x_{k+1}) ≈ f(x_k) + W ∇h(y_k) F(y_k)`, with `f_stack = F(y_k)` the
    /// right-hand side evaluated at every state of the embedding.
    pub fn derivative_update(&self, y: &[f64], f_stack: &[f64]) -> Result<Vec<f64>> {
        let jv = self.spec.eval_directional(y, f_stack)?;
        let d = self.dim();
        let mut out = vec![0.0; d];
        self.apply_weights(&jv, &mut out);
        for (o, f) in out.iter_mut().zip(&f_stack[..d]) {
            *o += f;
        }
        Ok(out)
    }

    /// `W ∇h(y) v` into `out` (length `d`) using caller-owned buffers.
    pub(crate) fn derivative_increment_into(
        &self,
        y: &[f64],
        v: &[f64],
        ws: &mut Workspace,
        scratch: &mut [f64],
        out: &mut [f64],
    ) {
        self.spec.eval_directional_into(y, v, ws, scratch);
        self.apply_weights(scratch, out);
    }

    /// Iterates the integration update from a seed window.
    ///
    /// `seed` holds exactly `(p − 1) s + 1` rows, oldest first; its last row
    /// is the state the first prediction advances. Predictions are fed back
    /// into the window, so the first `(p − 1) s` steps mix seed and predicted
    /// states.
    pub fn recursive_predict(&self, seed: &[f64], steps: usize) -> Result<Rollout> {
        let d = self.dim();
        let emb = self.spec.embedding;
        let window = emb.history() + 1;
        check_len(seed.len(), window * d, "seed window entries")?;

        let mut traj = Vec::with_capacity((window + steps) * d);
        traj.extend_from_slice(seed);
        let mut ws = self.spec.workspace();
        let mut y = vec![0.0; emb.len()];
        let mut hv = vec![0.0; self.m()];
        let mut next = vec![0.0; d];
        let mut diverged_at = None;
        for step in 1..=steps {
            let k = traj.len() / d - 1;
            build_embedding_into(&traj, k, &emb, &mut y);
            self.spec.eval_state_into(&y, &mut ws, &mut hv);
            self.apply_weights(&hv, &mut next);
            for (n, x) in next.iter_mut().zip(&y[..d]) {
                *n += x;
            }
            if next.iter().any(|v| !v.is_finite()) {
                diverged_at = Some(step);
                break;
            }
            traj.extend_from_slice(&next);
        }
        Ok(Rollout {
            points: traj.split_off(window * d),
            diverged_at,
            dim: d,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state_function::{Basis, EmbeddingSpec, SupportParams};

    fn scalar_model(w: [f64; 3]) -> NvarModel {
        let spec = StateFunctionSpec::new(Basis::H2, EmbeddingSpec::new(1, 1, 1).unwrap(), SupportParams::Identity).unwrap();
        NvarModel::new(w.to_vec(), spec, 0.1).unwrap()
    }

    #[test]
    fn zero_weights_hold_state() {
        let m = scalar_model([0.0; 3]);
        assert_eq!(m.predict_next(&[1.7]).unwrap(), vec![1.7]);
        let r = m.recursive_predict(&[1.7], 5).unwrap();
        assert_eq!(r.points, vec![1.7; 5]);
        assert_eq!(m.derivative_update(&[1.7], &[0.3]).unwrap(), vec![0.3]);
    }

    #[test]
    fn constant_drift() {
        let m = scalar_model([0.1, 0.0, 0.0]);
        assert_eq!(m.predict_next(&[2.0]).unwrap(), vec![2.1]);
        assert_eq!(m.recursive_predict(&[2.0], 1).unwrap().points, vec![2.1]);
    }

    #[test]
    fn derivative_update_by_hand() {
        let (w0, w1, w2) = (0.5, -0.25, 0.125);
        let m = scalar_model([w0, w1, w2]);
        let u = 0.7;
        let got = m.derivative_update(&[2.0], &[u]).unwrap()[0];
        assert!((got - (u + (w1 + 4.0 * w2) * u)).abs() < 1e-15);
    }

    #[test]
    fn divergence_truncates() {
        // x_{k+1} = x + x² blows up from x = 2 within a few dozen steps
        let m = scalar_model([0.0, 0.0, 1.0]);
        let r = m.recursive_predict(&[2.0], 100).unwrap();
        let at = r.diverged_at.expect("should diverge");
        assert_eq!(r.len(), at - 1);
        assert!(r.points.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn seed_window_length_checked() {
        let spec = StateFunctionSpec::new(Basis::H2, EmbeddingSpec::new(3, 2, 1).unwrap(), SupportParams::Identity).unwrap();
        let m = NvarModel::new(vec![0.0; spec.m()], spec, 1.0).unwrap();
        assert!(m.recursive_predict(&[0.0; 4], 3).is_err());
        assert_eq!(m.recursive_predict(&[0.0, 1.0, 2.0, 3.0, 4.0], 3).unwrap().points, vec![4.0; 3]);
    }

    #[test]
    fn rejects_bad_weights() {
        let spec = StateFunctionSpec::new(Basis::H2, EmbeddingSpec::new(1, 1, 1).unwrap(), SupportParams::Identity).unwrap();
        assert!(NvarModel::new(vec![0.0; 2], spec.clone(), 1.0).is_err());
        assert!(NvarModel::new(vec![f64::NAN, 0.0, 0.0], spec, 1.0).is_err());
    }
}
