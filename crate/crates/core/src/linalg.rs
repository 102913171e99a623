//! Dense least squares by Householder QR, with a Jacobi SVD of the
//! triangular factor for the rank-deficient, minimum-norm case.
//!
//! Matrices are column-major: element `(i, j)` of an `rows × cols` matrix
//! lives at `data[j * rows + i]`.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Relative cutoff below which singular values (and `R` diagonals) count
/// as zero.
pub const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ColMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl ColMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ColMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.rows + i] = v;
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstsqSolution {
    /// `cols(A) × cols(B)`, column-major.
    pub x: ColMatrix,
    /// Set when the minimum-norm SVD path was taken.
    pub rank_deficient: bool,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    // scaled to avoid overflow on large columns
    let scale = a.iter().fold(0.0f64, |m, v| m.max(math::abs(*v)));
    if scale == 0.0 {
        return 0.0;
    }
    let s: f64 = a.iter().map(|v| (v / scale) * (v / scale)).sum();
    scale * math::sqrt(s)
}

/// Minimises `‖A X − B‖_F`. `A` must have at least as many rows as
/// columns; callers pad with zero rows otherwise.
///
/// With `detect_rank` set, a factor `R` whose diagonal has an entry below
/// `RANK_TOLERANCE` times the largest is re-solved through its SVD, giving
/// the minimum-norm minimiser. Otherwise `R` is back-substituted directly.
pub fn lstsq(mut a: ColMatrix, mut b: ColMatrix, detect_rank: bool) -> LstsqSolution {
    assert_eq!(a.rows, b.rows, "row count of A and B");
    assert!(a.rows >= a.cols, "least squares needs rows >= cols");
    let (n, m) = (a.rows, a.cols);
    let mut diag = vec![0.0; m];
    let mut v = vec![0.0; n];

    for k in 0..m {
        let alpha = {
            let col = &a.col(k)[k..];
            let nrm = norm(col);
            if nrm == 0.0 {
                diag[k] = 0.0;
                continue;
            }
            if col[0] > 0.0 {
                -nrm
            } else {
                nrm
            }
        };
        let len = n - k;
        v[..len].copy_from_slice(&a.col(k)[k..]);
        v[0] -= alpha;
        let vtv = dot(&v[..len], &v[..len]);
        diag[k] = alpha;
        if vtv == 0.0 {
            continue;
        }
        let beta = 2.0 / vtv;
        {
            let col = a.col_mut(k);
            col[k] = alpha;
            for x in &mut col[k + 1..] {
                *x = 0.0;
            }
        }
        for j in (k + 1)..m {
            reflect(&mut a.col_mut(j)[k..], &v[..len], beta);
        }
        for j in 0..b.cols {
            reflect(&mut b.col_mut(j)[k..], &v[..len], beta);
        }
    }

    let dmax = diag.iter().fold(0.0f64, |acc, d| acc.max(math::abs(*d)));
    let deficient = dmax == 0.0 || diag.iter().any(|d| math::abs(*d) <= RANK_TOLERANCE * dmax);

    let mut r = ColMatrix::zeros(m, m);
    for j in 0..m {
        r.col_mut(j)[..=j].copy_from_slice(&a.col(j)[..=j]);
    }
    let mut c = ColMatrix::zeros(m, b.cols);
    for j in 0..b.cols {
        c.col_mut(j).copy_from_slice(&b.col(j)[..m]);
    }

    if detect_rank && deficient {
        LstsqSolution {
            x: min_norm_solve(r, &c),
            rank_deficient: true,
        }
    } else {
        LstsqSolution {
            x: back_substitute(&r, c),
            rank_deficient: false,
        }
    }
}

#[inline]
fn reflect(x: &mut [f64], v: &[f64], beta: f64) {
    let s = beta * dot(v, x);
    if s != 0.0 {
        for (xi, vi) in x.iter_mut().zip(v) {
            *xi -= s * vi;
        }
    }
}

fn back_substitute(r: &ColMatrix, mut c: ColMatrix) -> ColMatrix {
    let m = r.cols;
    for q in 0..c.cols {
        let rhs = c.col_mut(q);
        for i in (0..m).rev() {
            let mut s = rhs[i];
            for j in (i + 1)..m {
                s -= r.get(i, j) * rhs[j];
            }
            rhs[i] = s / r.get(i, i);
        }
    }
    c
}

/// Minimum-norm solution of `R X = C` through a one-sided Jacobi SVD of `R`.
fn min_norm_solve(r: ColMatrix, c: &ColMatrix) -> ColMatrix {
    let m = r.cols;
    let Svd { u_sigma, sigma, v } = jacobi_svd(r);
    let smax = sigma.iter().fold(0.0f64, |a, s| a.max(*s));
    let mut x = ColMatrix::zeros(m, c.cols);
    for k in 0..m {
        let s = sigma[k];
        if s <= RANK_TOLERANCE * smax || s == 0.0 {
            continue;
        }
        // column k of U Σ divided by σ² gives u_k / σ
        let uk = u_sigma.col(k);
        for q in 0..c.cols {
            let coef = dot(uk, c.col(q)) / (s * s);
            let xq = x.col_mut(q);
            for (xi, vi) in xq.iter_mut().zip(v.col(k)) {
                *xi += coef * vi;
            }
        }
    }
    x
}

pub struct Svd {
    /// `A V = U Σ`; columns are mutually orthogonal with norms `σ`.
    pub u_sigma: ColMatrix,
    pub sigma: Vec<f64>,
    pub v: ColMatrix,
}

/// One-sided Jacobi SVD of a square or tall matrix.
pub fn jacobi_svd(mut a: ColMatrix) -> Svd {
    let m = a.cols;
    let mut v = ColMatrix::zeros(m, m);
    for i in 0..m {
        v.set(i, i, 1.0);
    }
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..m {
            for q in (p + 1)..m {
                let alpha = dot(a.col(p), a.col(p));
                let beta = dot(a.col(q), a.col(q));
                let gamma = dot(a.col(p), a.col(q));
                if gamma == 0.0 || math::abs(gamma) <= f64::EPSILON * math::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (math::abs(zeta) + math::hypot(1.0, zeta));
                let cs = 1.0 / math::sqrt(1.0 + t * t);
                let sn = cs * t;
                rotate(&mut a, p, q, cs, sn);
                rotate(&mut v, p, q, cs, sn);
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma = (0..m).map(|j| norm(a.col(j))).collect();
    Svd { u_sigma: a, sigma, v }
}

fn rotate(a: &mut ColMatrix, p: usize, q: usize, cs: f64, sn: f64) {
    let rows = a.rows;
    let (lo, hi) = a.data.split_at_mut(q * rows);
    let cp = &mut lo[p * rows..(p + 1) * rows];
    let cq = &mut hi[..rows];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = cs * xp - sn * xq;
        *y = sn * xp + cs * xq;
    }
}
