//! Delay embeddings and the degree-2 state functions with their Jacobians.
//!
//! Three bases are provided:
//!
//! * `h1`: bias, linear and quadratic monomials of `φ(y) ⊙ y` with a smooth
//!   tanh bump as support coefficient,
//! * `h2`: the same monomials with a piecewise linear (trapezoid) support,
//! * `h3`: the multivariate Chebyshev basis of total degree ≤ 2 evaluated at
//!   `Λ_ab(y)`, the clamped and rescaled input.
//!
//! All three share one layout. Each embedding coordinate `y_i` is first
//! mapped through a scalar transform `u_i = τ_i(y_i)` (`φ_i(y_i) y_i` for
//! the monomial bases, `Λ_i(y_i)` for Chebyshev), and the feature vector is
//!
//! ```text
//! [1, u_1, …, u_n, q_11, q_12, …, q_1n, q_22, …, q_nn]
//! ```
//!
//! with `q_ij = u_i u_j` for `i < j`, and `q_ii = u_i²` (monomial) or
//! `T_2(u_i) = 2u_i² − 1` (Chebyshev). For `h3` this is the graded
//! lexicographic order of exponent tuples. The length is
//! `m = 1 + n + n(n+1)/2 = (n+1)(n+2)/2` with `n = p d`.

mod embedding;
pub mod support;

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::integrate::Dataset;

pub use embedding::{build_embedding, build_embedding_into, EmbeddingSpec};
pub use support::{
    lambda_ab, lambda_ab_derivative, piecewise_support, piecewise_support_derivative, smooth_support,
    smooth_support_derivative, ClampInterval, PiecewiseBump, SmoothBump,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    H1,
    H2,
    H3,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::H1, Basis::H2, Basis::H3];

    pub fn name(self) -> &'static str {
        match self {
            Basis::H1 => "h1",
            Basis::H2 => "h2",
            Basis::H3 => "h3",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "h1" => Ok(Basis::H1),
            "h2" => Ok(Basis::H2),
            "h3" => Ok(Basis::H3),
            other => Err(Error::InvalidArgument(alloc::format!(
                "unknown basis `{other}` (expected h1, h2 or h3)"
            ))),
        }
    }
}

impl core::fmt::Display for Basis {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-coordinate parameters of the input transform, one entry per state
/// coordinate (shared across lags).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum SupportParams {
    /// No support: `φ ≡ 1`, giving the plain monomial basis.
    Identity,
    Smooth(Vec<SmoothBump>),
    Piecewise(Vec<PiecewiseBump>),
    ChebyshevClamp(Vec<ClampInterval>),
}

impl SupportParams {
    /// The default parameters for `basis` given per-coordinate radii:
    /// `(5, r, 0)` for `h1`, `(−r, −0.95r, 0.95r, r)` for `h2` and the clamp
    /// `[−r, r]` for `h3`.
    pub fn for_basis(basis: Basis, radii: &[f64]) -> Self {
        match basis {
            Basis::H1 => SupportParams::Smooth(
                radii
                    .iter()
                    .map(|&r| SmoothBump {
                        sharpness: 5,
                        radius: r,
                        center: 0.0,
                    })
                    .collect(),
            ),
            Basis::H2 => SupportParams::Piecewise(
                radii
                    .iter()
                    .map(|&r| PiecewiseBump {
                        a: -r,
                        b: -0.95 * r,
                        c: 0.95 * r,
                        d: r,
                    })
                    .collect(),
            ),
            Basis::H3 => SupportParams::ChebyshevClamp(radii.iter().map(|&r| ClampInterval { a: -r, b: r }).collect()),
        }
    }

    fn coordinate_count(&self) -> Option<usize> {
        match self {
            SupportParams::Identity => None,
            SupportParams::Smooth(v) => Some(v.len()),
            SupportParams::Piecewise(v) => Some(v.len()),
            SupportParams::ChebyshevClamp(v) => Some(v.len()),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            SupportParams::Identity => true,
            SupportParams::Smooth(v) => v.iter().all(SmoothBump::is_valid),
            SupportParams::Piecewise(v) => v.iter().all(PiecewiseBump::is_valid),
            SupportParams::ChebyshevClamp(v) => v.iter().all(ClampInterval::is_valid),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(alloc::format!("invalid support parameters: {self:?}")))
        }
    }

    /// `(τ(x), τ'(x))` for state coordinate `coord`.
    #[inline]
    fn transform(&self, coord: usize, x: f64) -> (f64, f64) {
        match self {
            SupportParams::Identity => (x, 1.0),
            SupportParams::Smooth(v) => {
                let s = v[coord];
                let phi = smooth_support(x, s.sharpness, s.radius, s.center);
                let dphi = smooth_support_derivative(x, s.sharpness, s.radius, s.center);
                (phi * x, phi + x * dphi)
            }
            SupportParams::Piecewise(v) => {
                let s = v[coord];
                let phi = piecewise_support(x, s.a, s.b, s.c, s.d);
                let dphi = piecewise_support_derivative(x, s.a, s.b, s.c, s.d);
                (phi * x, phi + x * dphi)
            }
            SupportParams::ChebyshevClamp(v) => {
                let s = v[coord];
                (lambda_ab(x, s.a, s.b), lambda_ab_derivative(x, s.a, s.b))
            }
        }
    }
}

/// A complete state function: basis, embedding and support parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFunctionSpec {
    pub basis: Basis,
    pub embedding: EmbeddingSpec,
    pub support: SupportParams,
}

/// Reusable buffers for repeated evaluation at the same spec.
#[derive(Debug, Clone)]
pub struct Workspace {
    u: Vec<f64>,
    du: Vec<f64>,
}

impl StateFunctionSpec {
    pub fn new(basis: Basis, embedding: EmbeddingSpec, support: SupportParams) -> Result<Self> {
        support.validate()?;
        if let Some(n) = support.coordinate_count() {
            check_len(n, embedding.dim, "support parameters per coordinate")?;
        }
        let compatible = matches!(
            (basis, &support),
            (Basis::H1, SupportParams::Smooth(_) | SupportParams::Identity)
                | (Basis::H2, SupportParams::Piecewise(_) | SupportParams::Identity)
                | (Basis::H3, SupportParams::ChebyshevClamp(_))
        );
        if !compatible {
            return Err(Error::InvalidArgument(alloc::format!(
                "basis {basis} cannot use support {support:?}"
            )));
        }
        Ok(StateFunctionSpec {
            basis,
            embedding,
            support,
        })
    }

    /// Spec with the default support parameters derived from `radii`.
    pub fn with_radii(basis: Basis, embedding: EmbeddingSpec, radii: &[f64]) -> Result<Self> {
        Self::new(basis, embedding, SupportParams::for_basis(basis, radii))
    }

    /// Embedding length `n = p d`.
    pub fn input_len(&self) -> usize {
        self.embedding.len()
    }

    /// Feature count `m`.
    pub fn m(&self) -> usize {
        feature_count(self.input_len())
    }

    pub fn workspace(&self) -> Workspace {
        let n = self.input_len();
        Workspace {
            u: vec![0.0; n],
            du: vec![0.0; n],
        }
    }

    fn transform_all(&self, y: &[f64], ws: &mut Workspace) {
        let d = self.embedding.dim;
        for (i, &yi) in y.iter().enumerate() {
            let (u, du) = self.support.transform(i % d, yi);
            ws.u[i] = u;
            ws.du[i] = du;
        }
    }

    #[inline]
    fn diag_factor(&self) -> (f64, f64) {
        // q_ii = α u² + β, so dq_ii/du = 2α u
        match self.basis {
            Basis::H3 => (2.0, -1.0),
            _ => (1.0, 0.0),
        }
    }

    pub fn eval_state(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(y.len(), self.input_len(), "embedding")?;
        let mut out = vec![0.0; self.m()];
        self.eval_state_into(y, &mut self.workspace(), &mut out);
        Ok(out)
    }

    /// Unchecked variant for hot loops; `y` has length `p d`, `out` length `m`.
    pub fn eval_state_into(&self, y: &[f64], ws: &mut Workspace, out: &mut [f64]) {
        self.transform_all(y, ws);
        let n = y.len();
        let (alpha, beta) = self.diag_factor();
        out[0] = 1.0;
        out[1..=n].copy_from_slice(&ws.u);
        let mut idx = n + 1;
        for i in 0..n {
            let ui = ws.u[i];
            out[idx] = alpha * ui * ui + beta;
            idx += 1;
            for j in (i + 1)..n {
                out[idx] = ui * ws.u[j];
                idx += 1;
            }
        }
    }

    /// Jacobian `∇h(y)` as a row-major `m × pd` matrix; row `i` is `∇h_i(y)ᵀ`.
    pub fn eval_gradient(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(y.len(), self.input_len(), "embedding")?;
        let n = y.len();
        let mut ws = self.workspace();
        self.transform_all(y, &mut ws);
        let (alpha, _) = self.diag_factor();
        let mut grad = vec![0.0; self.m() * n];
        for i in 0..n {
            grad[(1 + i) * n + i] = ws.du[i];
        }
        let mut row = n + 1;
        for i in 0..n {
            grad[row * n + i] = 2.0 * alpha * ws.u[i] * ws.du[i];
            row += 1;
            for j in (i + 1)..n {
                grad[row * n + i] = ws.du[i] * ws.u[j];
                grad[row * n + j] = ws.u[i] * ws.du[j];
                row += 1;
            }
        }
        Ok(grad)
    }

    /// Directional derivative `∇h(y) v` without forming the Jacobian.
    pub fn eval_directional(&self, y: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        check_len(y.len(), self.input_len(), "embedding")?;
        check_len(v.len(), self.input_len(), "direction")?;
        let mut out = vec![0.0; self.m()];
        self.eval_directional_into(y, v, &mut self.workspace(), &mut out);
        Ok(out)
    }

    /// Unchecked variant of [`Self::eval_directional`]. Leaves the workspace
    /// holding the transformed inputs.
    pub fn eval_directional_into(&self, y: &[f64], v: &[f64], ws: &mut Workspace, out: &mut [f64]) {
        self.transform_all(y, ws);
        let n = y.len();
        for (w, &vi) in ws.du.iter_mut().zip(v) {
            *w *= vi;
        }
        let (alpha, _) = self.diag_factor();
        out[0] = 0.0;
        out[1..=n].copy_from_slice(&ws.du);
        let mut idx = n + 1;
        for i in 0..n {
            let (ui, wi) = (ws.u[i], ws.du[i]);
            out[idx] = 2.0 * alpha * ui * wi;
            idx += 1;
            for j in (i + 1)..n {
                out[idx] = wi * ws.u[j] + ui * ws.du[j];
                idx += 1;
            }
        }
    }
}

/// `m = 1 + n + n(n+1)/2`.
pub const fn feature_count(n: usize) -> usize {
    1 + n + n * (n + 1) / 2
}

/// The upper-triangular products `v_i v_j`, `i ≤ j`, in row-major order.
pub fn quadratic_products(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            out.push(v[i] * v[j]);
        }
    }
    out
}

/// Per-coordinate radii `1.1 max_k |x_{k,i}|` over the given rows.
pub fn compute_radii(dataset: &Dataset, rows: impl IntoIterator<Item = usize>) -> Result<Vec<f64>> {
    let d = dataset.dim();
    let mut max_abs = vec![0.0f64; d];
    let mut seen = false;
    for k in rows {
        if k >= dataset.len() {
            return Err(Error::IndexRange(alloc::format!(
                "row {k} is past the end of a {}-row dataset",
                dataset.len()
            )));
        }
        seen = true;
        for (m, &x) in max_abs.iter_mut().zip(dataset.point(k)) {
            *m = m.max(crate::math::abs(x));
        }
    }
    if !seen {
        return Err(Error::InvalidArgument("radius index set is empty".into()));
    }
    max_abs
        .iter()
        .enumerate()
        .map(|(i, &m)| if m > 0.0 { Ok(1.1 * m) } else { Err(Error::ZeroRadius { coordinate: i }) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monomial(d: usize, p: usize) -> StateFunctionSpec {
        StateFunctionSpec::new(Basis::H2, EmbeddingSpec::new(p, 1, d).unwrap(), SupportParams::Identity).unwrap()
    }

    #[test]
    fn plain_monomials_match_hand_expansion() {
        let spec = monomial(2, 1);
        assert_eq!(spec.eval_state(&[1.0, 2.0]).unwrap(), vec![1.0, 1.0, 2.0, 1.0, 2.0, 4.0]);
    }

    #[test]
    fn plain_monomial_gradient_matches_hand_substitution() {
        let spec = monomial(2, 1);
        let g = spec.eval_gradient(&[1.0, 2.0]).unwrap();
        assert_eq!(g, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 2.0, 0.0, 2.0, 1.0, 0.0, 4.0]);
    }

    #[test]
    fn chebyshev_at_origin() {
        let spec = StateFunctionSpec::with_radii(Basis::H3, EmbeddingSpec::new(1, 1, 2).unwrap(), &[1.0, 1.0]).unwrap();
        assert_eq!(spec.eval_state(&[0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0, -1.0, 0.0, -1.0]);
    }

    #[test]
    fn chebyshev_order_within_degree() {
        // (x1, x2) = (0.5, -0.25) inside [-1, 1]: T1T0, T0T1, T2T0, T1T1, T0T2
        let spec = StateFunctionSpec::with_radii(Basis::H3, EmbeddingSpec::new(1, 1, 2).unwrap(), &[1.0, 1.0]).unwrap();
        let h = spec.eval_state(&[0.5, -0.25]).unwrap();
        let t2 = |x: f64| 2.0 * x * x - 1.0;
        let expected = [1.0, 0.5, -0.25, t2(0.5), 0.5 * -0.25, t2(-0.25)];
        for (a, b) in h.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn far_outside_support_saturates() {
        let emb = EmbeddingSpec::new(1, 1, 2).unwrap();
        let y = [1e3, 0.5];
        for basis in [Basis::H1, Basis::H2] {
            let h = StateFunctionSpec::with_radii(basis, emb, &[1.0, 1.0]).unwrap().eval_state(&y).unwrap();
            assert!(h[1].abs() < 1e-12, "{basis}: {}", h[1]);
        }
        let h3 = StateFunctionSpec::with_radii(Basis::H3, emb, &[1.0, 1.0]).unwrap();
        assert_eq!(h3.eval_state(&y).unwrap()[1], 1.0);
        assert_eq!(h3.eval_state(&[-1e3, 0.5]).unwrap()[1], -1.0);
    }

    #[test]
    fn bias_row_is_zero() {
        let spec = StateFunctionSpec::with_radii(Basis::H1, EmbeddingSpec::new(2, 1, 2).unwrap(), &[2.0, 3.0]).unwrap();
        let g = spec.eval_gradient(&[0.3, -1.0, 0.2, 2.0]).unwrap();
        assert!(g[..4].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn h2_plateau_gradient_equals_unsupported() {
        let emb = EmbeddingSpec::new(2, 1, 2).unwrap();
        let supported = StateFunctionSpec::with_radii(Basis::H2, emb, &[2.0, 3.0]).unwrap();
        let plain = StateFunctionSpec::new(Basis::H2, emb, SupportParams::Identity).unwrap();
        let y = [0.3, -1.0, 1.8, 2.5];
        assert_eq!(supported.eval_gradient(&y).unwrap(), plain.eval_gradient(&y).unwrap());
        assert_eq!(supported.eval_state(&y).unwrap(), plain.eval_state(&y).unwrap());
    }

    #[test]
    fn directional_matches_gradient_product() {
        let emb = EmbeddingSpec::new(3, 2, 2).unwrap();
        let y = [0.3, -1.0, 0.9, 2.5, -0.4, 0.1];
        let v = [1.0, -2.0, 0.5, 0.25, 3.0, -1.5];
        for basis in Basis::ALL {
            let spec = StateFunctionSpec::with_radii(basis, emb, &[1.5, 3.0]).unwrap();
            let g = spec.eval_gradient(&y).unwrap();
            let jv = spec.eval_directional(&y, &v).unwrap();
            for (row, &val) in g.chunks(6).zip(&jv) {
                let dot: f64 = row.iter().zip(&v).map(|(a, b)| a * b).sum();
                assert!((dot - val).abs() <= 1e-14 * (1.0 + dot.abs()), "{basis}");
            }
        }
    }

    #[test]
    fn dimensions() {
        for p in [1, 2, 10] {
            for d in [1, 2, 3] {
                let n = p * d;
                let emb = EmbeddingSpec::new(p, 1, d).unwrap();
                let radii = vec![1.0; d];
                for basis in Basis::ALL {
                    let spec = StateFunctionSpec::with_radii(basis, emb, &radii).unwrap();
                    let y = vec![0.1; n];
                    assert_eq!(spec.eval_state(&y).unwrap().len(), spec.m());
                    assert_eq!(spec.eval_gradient(&y).unwrap().len(), spec.m() * n);
                    assert_eq!(spec.m(), (n + 1) * (n + 2) / 2);
                }
            }
        }
        assert_eq!(feature_count(20), 231);
        assert_eq!(feature_count(30), 496);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let spec = monomial(2, 2);
        assert!(spec.eval_state(&[1.0, 2.0]).is_err());
        assert!(spec.eval_gradient(&[1.0; 5]).is_err());
    }

    #[test]
    fn incompatible_support_rejected() {
        let emb = EmbeddingSpec::new(1, 1, 2).unwrap();
        assert!(StateFunctionSpec::new(Basis::H3, emb, SupportParams::Identity).is_err());
        assert!(StateFunctionSpec::new(Basis::H1, emb, SupportParams::for_basis(Basis::H2, &[1.0, 1.0])).is_err());
        assert!(StateFunctionSpec::new(Basis::H2, emb, SupportParams::for_basis(Basis::H2, &[1.0])).is_err());
        assert!(StateFunctionSpec::new(Basis::H3, emb, SupportParams::ChebyshevClamp(vec![ClampInterval { a: 1.0, b: 1.0 }; 2])).is_err());
    }

    #[test]
    fn radii_from_rows() {
        let single = Dataset::new("t", 0.0, 1.0, 2, vec![2.0, -3.0]).unwrap();
        let r = compute_radii(&single, 0..1).unwrap();
        assert!((r[0] - 2.2).abs() < 1e-15 && (r[1] - 3.3).abs() < 1e-15);

        let ds = Dataset::new("t", 0.0, 1.0, 2, vec![10.0, 1.0, 1.0, 2.0, -1.5, 0.5]).unwrap();
        let r = compute_radii(&ds, 1..3).unwrap();
        assert!((r[0] - 1.65).abs() < 1e-15 && (r[1] - 2.2).abs() < 1e-15);

        let zero = Dataset::new("t", 0.0, 1.0, 2, vec![1.0, 0.0, 2.0, 0.0]).unwrap();
        assert_eq!(compute_radii(&zero, 0..2), Err(Error::ZeroRadius { coordinate: 1 }));
        assert!(compute_radii(&ds, 0..0).is_err());
    }

    #[test]
    fn radii_for_spring_data() {
        let ds = crate::integrate::generate_exact_spring_dataset(3.0, 0.01, 5000).unwrap();
        let r = compute_radii(&ds, 2000..3500).unwrap();
        let scan = |c: usize| 1.1 * (2000..3500).map(|k| ds.point(k)[c].abs()).fold(0.0, f64::max);
        assert_eq!(r, vec![scan(0), scan(1)]);
        assert!((r[0] - 1.1).abs() < 1e-3);
        assert!((r[1] - 1.1 * 3f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn quadratic_products_order() {
        assert_eq!(quadratic_products(&[2.0, 3.0, 5.0]), vec![4.0, 6.0, 10.0, 9.0, 15.0, 25.0]);
    }
}
