//! The training solver against an independent SVD pseudo-inverse of the
//! stacked system, and the optimality properties of its solution.

use nalgebra::DMatrix;
use pinvar_core::train::{stacked_objective, training_objective};
use pinvar_core::{solve_weights, TrainingProblem, TrainingWeights};
use proptest::prelude::*;

const DATA: [f64; 2] = [0.0, 1.0];
const ODE: [f64; 6] = [0.0, 1e-4, 1e-2, 1e-1, 0.5, 1.0];
const RIDGE: [f64; 5] = [1e-12, 1e-8, 1e-4, 1e-2, 1e-1];

fn problem_strategy() -> impl Strategy<Value = TrainingProblem> {
    (1usize..=3, 2usize..=30, 1usize..=100)
        .prop_flat_map(|(d, m, t)| {
            (
                Just((d, m, t)),
                prop::collection::vec(-1.0f64..1.0, m * t),
                prop::collection::vec(-1.0f64..1.0, d * t),
                prop::collection::vec(-1.0f64..1.0, m * t),
                prop::collection::vec(-1.0f64..1.0, d * t),
                prop::sample::select(ODE.to_vec()),
                prop::sample::select(RIDGE.to_vec()),
            )
        })
        .prop_map(|((d, m, t), h, z, dh, dz, ode, ridge)| TrainingProblem {
            m,
            d,
            t,
            h,
            z,
            dh,
            dz,
            weights: TrainingWeights::new(1.0, ode, ridge).unwrap(),
        })
}

/// The stacked system `A Wᵀ = B` assembled independently of the crate.
fn stacked(p: &TrainingProblem) -> (DMatrix<f64>, DMatrix<f64>) {
    let (m, d, t) = (p.m, p.d, p.t);
    let w = p.weights;
    let rows = 2 * t + m;
    let mut a = DMatrix::zeros(rows, m);
    let mut b = DMatrix::zeros(rows, d);
    for k in 0..t {
        for j in 0..m {
            a[(k, j)] = w.data.sqrt() * p.h[j * t + k];
            a[(t + k, j)] = w.ode.sqrt() * p.dh[j * t + k];
        }
        for i in 0..d {
            b[(k, i)] = w.data.sqrt() * p.z[i * t + k];
            b[(t + k, i)] = w.ode.sqrt() * p.dz[i * t + k];
        }
    }
    for j in 0..m {
        a[(2 * t + j, j)] = w.ridge.sqrt();
    }
    (a, b)
}

/// SVD pseudo-inverse solve plus two steps of iterative refinement. The
/// refinement is needed because nalgebra's SVD loses accuracy when many
/// singular values cluster at `√r` (reconstruction error ~1e−10 instead of
/// ~1e−16), which underdetermined instances with tiny ridge produce.
fn oracle(p: &TrainingProblem) -> DMatrix<f64> {
    let (a, b) = stacked(p);
    let pinv = a.clone().pseudo_inverse(1e-300).unwrap();
    let mut w = &pinv * &b;
    for _ in 0..2 {
        let residual = &b - &a * &w;
        w += &pinv * residual;
    }
    w.transpose()
}

fn as_matrix(p: &TrainingProblem, w: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(p.d, p.m, w)
}

fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn solution_matches_svd_pseudo_inverse(p in problem_strategy()) {
        let got = as_matrix(&p, &solve_weights(&p).unwrap().weights);
        let want = oracle(&p);
        let err = rel_frobenius(&got, &want);
        prop_assert!(err <= 1e-8, "relative error {err:e} for d={} m={} T={} {:?}", p.d, p.m, p.t, p.weights);
    }

    #[test]
    fn residual_satisfies_the_normal_equations(p in problem_strategy()) {
        let w = as_matrix(&p, &solve_weights(&p).unwrap().weights);
        let (a, b) = stacked(&p);
        let grad = a.transpose() * (&a * w.transpose() - &b);
        let scale = a.norm() * b.norm();
        prop_assert!(grad.norm() <= 1e-10 * scale.max(1.0), "‖Aᵀr‖ = {:e}", grad.norm());
    }

    #[test]
    fn perturbing_the_solution_never_lowers_the_objective(
        p in problem_strategy(),
        seed in prop::collection::vec(-1.0f64..1.0, 90),
        scale in prop::sample::select(vec![1e-6, 1e-3, 1e-1]),
    ) {
        let w = solve_weights(&p).unwrap().weights;
        let best = stacked_objective(&p, &w).unwrap();
        let moved: Vec<f64> = w.iter().enumerate().map(|(i, v)| v + scale * seed[i % seed.len()]).collect();
        let other = stacked_objective(&p, &moved).unwrap();
        prop_assert!(other >= best - 1e-10 * (1.0 + best), "{other:e} < {best:e}");
    }

    #[test]
    fn permuting_training_columns_leaves_the_solution_unchanged(p in problem_strategy(), rot in 0usize..100) {
        let t = p.t;
        let shift = rot % t;
        let permute = |v: &[f64], rows: usize| -> Vec<f64> {
            let mut out = vec![0.0; v.len()];
            for r in 0..rows {
                for k in 0..t {
                    out[r * t + (k + shift) % t] = v[r * t + k];
                }
            }
            out
        };
        let q = TrainingProblem {
            h: permute(&p.h, p.m),
            z: permute(&p.z, p.d),
            dh: permute(&p.dh, p.m),
            dz: permute(&p.dz, p.d),
            ..p.clone()
        };
        let a = as_matrix(&p, &solve_weights(&p).unwrap().weights);
        let b = as_matrix(&q, &solve_weights(&q).unwrap().weights);
        prop_assert!(rel_frobenius(&b, &a) <= 1e-10);
    }
}

fn fixed_problem(ode: f64, ridge: f64) -> TrainingProblem {
    let (d, m, t) = (2, 6, 40);
    let h: Vec<f64> = (0..m * t).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
    let dh: Vec<f64> = (0..m * t).map(|i| ((i * 104729) % 97) as f64 / 48.0 - 1.0).collect();
    let truth: Vec<f64> = (0..d * m).map(|i| i as f64 * 0.25 - 1.0).collect();
    let apply = |f: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; d * t];
        for i in 0..d {
            for k in 0..t {
                out[i * t + k] = (0..m).map(|j| truth[i * m + j] * f[j * t + k]).sum();
            }
        }
        out
    };
    TrainingProblem {
        m,
        d,
        t,
        z: apply(&h),
        dz: apply(&dh),
        h,
        dh,
        weights: TrainingWeights::new(1.0, ode, ridge).unwrap(),
    }
}

#[test]
fn consistent_data_is_fitted_exactly() {
    for ode in ODE {
        let p = fixed_problem(ode, 1e-12);
        let w = solve_weights(&p).unwrap().weights;
        let truth: Vec<f64> = (0..12).map(|i| i as f64 * 0.25 - 1.0).collect();
        for (a, b) in w.iter().zip(&truth) {
            assert!((a - b).abs() < 1e-9, "w_o={ode}: {a} vs {b}");
        }
        let obj = training_objective(&p, &w).unwrap();
        assert!(obj.data_fit < 1e-18 && obj.ode_fit < 1e-18);
    }
}

#[test]
fn ridge_path_shrinks_and_is_continuous() {
    let norms: Vec<f64> = [0.0, 1e-12, 1e-8, 1e-4, 1e-2, 1e-1, 1.0, 10.0]
        .iter()
        .map(|&r: &f64| {
            let p = fixed_problem(0.5, r);
            solve_weights(&p).unwrap().weights.iter().map(|v| v * v).sum::<f64>().sqrt()
        })
        .collect();
    for w in norms.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12), "{norms:?}");
    }
    // r = 0 and r = 1e-12 agree to high accuracy on a full-rank problem
    assert!((norms[0] - norms[1]).abs() <= 1e-9 * norms[0]);

    let a = solve_weights(&fixed_problem(0.5, 1e-2)).unwrap().weights;
    let b = solve_weights(&fixed_problem(0.5, 1e-2 * (1.0 + 1e-9))).unwrap().weights;
    let gap: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-8, "{gap:e}");
}

#[test]
fn rank_deficient_problem_returns_minimum_norm_solution() {
    // Two identical feature rows: any split of the weight fits, the minimum
    // norm one splits it evenly.
    let t = 5;
    let row: Vec<f64> = (0..t).map(|k| k as f64 + 1.0).collect();
    let mut h = row.clone();
    h.extend_from_slice(&row);
    let z: Vec<f64> = row.iter().map(|v| 2.0 * v).collect();
    let p = TrainingProblem {
        m: 2,
        d: 1,
        t,
        h,
        z,
        dh: vec![0.0; 2 * t],
        dz: vec![0.0; t],
        weights: TrainingWeights::new(1.0, 0.0, 0.0).unwrap(),
    };
    let sol = solve_weights(&p).unwrap();
    assert!(sol.rank_deficient);
    assert!((sol.weights[0] - 1.0).abs() < 1e-12 && (sol.weights[1] - 1.0).abs() < 1e-12);
    let want = oracle(&p);
    assert!(rel_frobenius(&as_matrix(&p, &sol.weights), &want) < 1e-12);
}

#[test]
fn data_weight_can_be_zero() {
    for data in DATA {
        let p = TrainingProblem {
            weights: TrainingWeights::new(data, 1.0, 1e-4).unwrap(),
            ..fixed_problem(1.0, 1e-4)
        };
        let got = as_matrix(&p, &solve_weights(&p).unwrap().weights);
        assert!(rel_frobenius(&got, &oracle(&p)) <= 1e-8);
    }
}
