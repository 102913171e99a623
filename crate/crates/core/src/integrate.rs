//! Reference trajectories: fixed-step classical RK4 with down-sampling, and
//! sampling of the closed-form spring solution.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::ode::{exact_spring, VectorField};

/// A uniformly spaced trajectory. Row `i` (0-based) is the state at
/// `t0 + i * h`; times are never accumulated by repeated addition.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub system_name: String,
    pub t0: f64,
    pub h: f64,
    dim: usize,
    points: Vec<f64>,
}

impl Dataset {
    /// `points` is row-major with `dim` columns.
    pub fn new(system_name: impl Into<String>, t0: f64, h: f64, dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dataset dimension must be positive".into()));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidArgument(alloc::format!("time step must be positive, got {h}")));
        }
        if points.is_empty() || points.len() % dim != 0 {
            return Err(Error::InvalidArgument(alloc::format!(
                "{} values do not form a non-empty {dim}-column matrix",
                points.len()
            )));
        }
        if let Some(pos) = points.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!(
                "non-finite value in row {}",
                pos / dim
            )));
        }
        Ok(Dataset {
            system_name: system_name.into(),
            t0,
            h,
            dim,
            points,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.h
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.points
    }

    /// Rows `start..end` as a flat row-major slice.
    pub fn rows(&self, start: usize, end: usize) -> &[f64] {
        &self.points[start * self.dim..end * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }
}

/// Stage buffers for repeated RK4 steps.
struct Rk4Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Workspace {
    fn new(dim: usize) -> Self {
        Rk4Workspace {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    fn step<F: VectorField + ?Sized>(&mut self, f: &F, x: &mut [f64], h: f64) {
        let half = 0.5 * h;
        f.eval_into(x, &mut self.k1);
        for ((t, &xi), &k) in self.tmp.iter_mut().zip(x.iter()).zip(&self.k1) {
            *t = xi + half * k;
        }
        f.eval_into(&self.tmp, &mut self.k2);
        for ((t, &xi), &k) in self.tmp.iter_mut().zip(x.iter()).zip(&self.k2) {
            *t = xi + half * k;
        }
        f.eval_into(&self.tmp, &mut self.k3);
        for ((t, &xi), &k) in self.tmp.iter_mut().zip(x.iter()).zip(&self.k3) {
            *t = xi + h * k;
        }
        f.eval_into(&self.tmp, &mut self.k4);
        let sixth = h / 6.0;
        for i in 0..x.len() {
            x[i] += sixth * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// One classical RK4 step of size `h_fine`.
pub fn rk4_step<F: VectorField + ?Sized>(f: &F, x: &[f64], h_fine: f64) -> Result<Vec<f64>> {
    check_len(x.len(), f.dim(), "state vector")?;
    if !(h_fine > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!("step must be positive, got {h_fine}")));
    }
    let mut out = x.to_vec();
    Rk4Workspace::new(x.len()).step(f, &mut out, h_fine);
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::Overflow { step: 1 })
    }
}

/// Integrates from `x0` with RK4 at `h_fine`, keeping every `downsample`-th
/// state, until `n_points` states are stored. The stored step is
/// `h_fine * downsample`.
///
/// Overflow errors report the 1-based fine step that produced the first
/// non-finite state.
pub fn generate_dataset<F: VectorField + ?Sized>(
    system_name: &str,
    f: &F,
    x0: &[f64],
    h_fine: f64,
    downsample: usize,
    n_points: usize,
) -> Result<Dataset> {
    let dim = f.dim();
    check_len(x0.len(), dim, "initial state")?;
    if downsample == 0 || n_points == 0 {
        return Err(Error::InvalidArgument("downsample and n_points must be positive".into()));
    }
    if !(h_fine > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!("step must be positive, got {h_fine}")));
    }
    let mut points = Vec::with_capacity(n_points * dim);
    points.extend_from_slice(x0);
    let mut state = x0.to_vec();
    let mut ws = Rk4Workspace::new(dim);
    let mut fine_step = 0usize;
    for _ in 1..n_points {
        for _ in 0..downsample {
            ws.step(f, &mut state, h_fine);
            fine_step += 1;
        }
        if !state.iter().all(|v| v.is_finite()) {
            return Err(Error::Overflow { step: fine_step });
        }
        points.extend_from_slice(&state);
    }
    Dataset::new(system_name.to_string(), 0.0, h_fine * downsample as f64, dim, points)
}

/// Samples the closed-form spring solution on `t = j h`, `j = 0..n_points`.
pub fn generate_exact_spring_dataset(k: f64, h: f64, n_points: usize) -> Result<Dataset> {
    if !(k > 0.0) || !(h > 0.0) || n_points == 0 {
        return Err(Error::InvalidArgument(
            "spring constant, step and point count must be positive".into(),
        ));
    }
    let mut points = Vec::with_capacity(2 * n_points);
    for j in 0..n_points {
        points.extend_from_slice(&exact_spring(k, j as f64 * h));
    }
    Dataset::new("spring", 0.0, h, 2, points)
}
