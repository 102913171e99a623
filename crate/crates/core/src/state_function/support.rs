//! Per-coordinate support coefficients and the Chebyshev input transform.
//!
//! Each function comes with its analytic derivative. At the breakpoints of
//! the piecewise functions the derivative is the slope of the case that
//! contains the point, following the half-open intervals of the definitions.

use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::math;

/// Smooth bump `½(1 + tanh((ξ + ¼)π(r² − (x − t)²)))`.
///
/// Evaluated as the equivalent logistic `1 / (1 + exp(−2z))` so that the
/// tails decay to tiny positive values instead of cancelling to zero early.
pub fn smooth_support(x: f64, sharpness: u32, radius: f64, center: f64) -> f64 {
    let z = smooth_argument(x, sharpness, radius, center);
    let e = math::exp(-2.0 * math::abs(z));
    if z >= 0.0 {
        1.0 / (1.0 + e)
    } else {
        e / (1.0 + e)
    }
}

pub fn smooth_support_derivative(x: f64, sharpness: u32, radius: f64, center: f64) -> f64 {
    let c = smooth_rate(sharpness);
    let z = smooth_argument(x, sharpness, radius, center);
    // ½ sech²(z) = 2e / (1 + e)² with e = exp(−2|z|)
    let e = math::exp(-2.0 * math::abs(z));
    let half_sech2 = 2.0 * e / ((1.0 + e) * (1.0 + e));
    half_sech2 * c * (-2.0 * (x - center))
}

#[inline]
fn smooth_rate(sharpness: u32) -> f64 {
    (sharpness as f64 + 0.25) * PI
}

#[inline]
fn smooth_argument(x: f64, sharpness: u32, radius: f64, center: f64) -> f64 {
    let dx = x - center;
    smooth_rate(sharpness) * (radius * radius - dx * dx)
}

/// Trapezoid: 0 up to `a`, rising to 1 at `b`, flat to `c`, falling to 0 at
/// `d`. Requires `a < b <= c < d`.
pub fn piecewise_support(x: f64, a: f64, b: f64, c: f64, d: f64) -> f64 {
    if x <= a {
        0.0
    } else if x <= b {
        (x - a) / (b - a)
    } else if x <= c {
        1.0
    } else if x <= d {
        1.0 - (x - c) / (d - c)
    } else {
        0.0
    }
}

pub fn piecewise_support_derivative(x: f64, a: f64, b: f64, c: f64, d: f64) -> f64 {
    if x <= a {
        0.0
    } else if x <= b {
        1.0 / (b - a)
    } else if x <= c {
        0.0
    } else if x <= d {
        -1.0 / (d - c)
    } else {
        0.0
    }
}

/// Clamp to `[a, b]` followed by the affine map onto `[−1, 1]`.
pub fn lambda_ab(x: f64, a: f64, b: f64) -> f64 {
    if x < a {
        -1.0
    } else if x < b {
        (a + b - 2.0 * x) / (a - b)
    } else {
        1.0
    }
}

pub fn lambda_ab_derivative(x: f64, a: f64, b: f64) -> f64 {
    if x < a || x >= b {
        0.0
    } else {
        2.0 / (b - a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothBump {
    pub sharpness: u32,
    pub radius: f64,
    pub center: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseBump {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClampInterval {
    pub a: f64,
    pub b: f64,
}

impl SmoothBump {
    pub fn is_valid(&self) -> bool {
        self.sharpness >= 1 && self.radius > 0.0 && self.radius.is_finite() && self.center.is_finite()
    }
}

impl PiecewiseBump {
    pub fn is_valid(&self) -> bool {
        self.a < self.b && self.b <= self.c && self.c < self.d
    }
}

impl ClampInterval {
    pub fn is_valid(&self) -> bool {
        self.a < self.b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_support_at_radius_is_half() {
        assert_eq!(smooth_support(1.0, 5, 1.0, 0.0), 0.5);
        assert_eq!(smooth_support(-2.0, 3, 2.0, 0.0), 0.5);
        assert_eq!(smooth_support(3.5, 1, 1.5, 2.0), 0.5);
    }

    #[test]
    fn smooth_support_at_center_is_nearly_one() {
        let v = smooth_support(0.0, 5, 1.0, 0.0);
        let oracle = 0.5 * (1.0 + (5.25 * PI).tanh());
        assert!(1.0 - v < 1e-13 && 1.0 - v > 0.0);
        assert!((v - oracle).abs() < 1e-15);
    }

    #[test]
    fn smooth_support_vanishes_far_away() {
        assert_eq!(smooth_support(1e3, 5, 1.0, 0.0), 0.0);
        assert_eq!(smooth_support(-1e3, 5, 1.0, 0.0), 0.0);
        assert!(smooth_support(1.3, 5, 1.0, 0.0) < 1e-6);
    }

    #[test]
    fn smooth_derivative_shape() {
        assert_eq!(smooth_support_derivative(0.7, 5, 1.0, 0.7), 0.0);
        assert!(smooth_support_derivative(1.0, 5, 1.0, 0.0) < 0.0);
        assert!(smooth_support_derivative(-1.0, 5, 1.0, 0.0) > 0.0);
    }

    #[test]
    fn smooth_derivative_matches_finite_differences() {
        let (xi, r, t) = (3, 1.3, 0.4);
        let mut x = t - 2.0 * r;
        let step = 4.0 * r / 100.0;
        for _ in 0..100 {
            x += step * 0.997;
            let eps = 1e-6;
            let fd = (smooth_support(x + eps, xi, r, t) - smooth_support(x - eps, xi, r, t)) / (2.0 * eps);
            let an = smooth_support_derivative(x, xi, r, t);
            assert!((fd - an).abs() <= 1e-7 * an.abs().max(1e-2), "x={x} fd={fd} an={an}");
        }
    }

    #[test]
    fn piecewise_cases() {
        let (a, b, c, d) = (-1.0, -0.5, 0.5, 1.0);
        assert_eq!(piecewise_support(0.0, a, b, c, d), 1.0);
        assert_eq!(piecewise_support(-0.75, a, b, c, d), 0.5);
        assert_eq!(piecewise_support_derivative(-0.75, a, b, c, d), 2.0);
        assert_eq!(piecewise_support(a, a, b, c, d), 0.0);
        assert_eq!(piecewise_support(0.75, a, b, c, d), 0.5);
        assert_eq!(piecewise_support_derivative(0.75, a, b, c, d), -2.0);
        assert_eq!(piecewise_support(5.0, a, b, c, d), 0.0);
        // breakpoints take the slope of the case containing them
        assert_eq!(piecewise_support_derivative(a, a, b, c, d), 0.0);
        assert_eq!(piecewise_support_derivative(b, a, b, c, d), 2.0);
        assert_eq!(piecewise_support_derivative(c, a, b, c, d), 0.0);
        assert_eq!(piecewise_support_derivative(d, a, b, c, d), -2.0);
    }

    #[test]
    fn lambda_endpoints_and_midpoint() {
        assert_eq!(lambda_ab(2.0, 2.0, 6.0), -1.0);
        assert_eq!(lambda_ab(6.0, 2.0, 6.0), 1.0);
        assert_eq!(lambda_ab(4.0, 2.0, 6.0), 0.0);
        assert!((lambda_ab(0.3, -1.0, 1.0) - 0.3).abs() < 1e-16);
        assert_eq!(lambda_ab(-7.0, -1.0, 1.0), -1.0);
        assert_eq!(lambda_ab_derivative(4.0, 2.0, 6.0), 0.5);
        assert_eq!(lambda_ab_derivative(2.0, 2.0, 6.0), 0.5);
        assert_eq!(lambda_ab_derivative(6.0, 2.0, 6.0), 0.0);
        assert_eq!(lambda_ab_derivative(1.0, 2.0, 6.0), 0.0);
    }
}
