//! Property tests for the structural invariants: stationary solves, the
//! invertibility certificate, and the resolvent matrices every model must
//! admit.

use envq::ct;
use envq::env::{Capacity, EnvironmentSpec, ModelSpec, QueueSpec};
use envq::numerics::{self, InvertibilityVerdict, Mat};
use proptest::prelude::*;

/// Random irreducible-ish generator: a cycle guarantees one closed class,
/// extra random rates decorate it.
fn generator_strategy(n: usize) -> impl Strategy<Value = Mat> {
    let entries = prop::collection::vec(0.0f64..2.0, n * n);
    entries.prop_map(move |raw| {
        let mut g = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let x = raw[i * n + j];
                    // sparsify: drop small values to exercise structure
                    g[(i, j)] = if x > 0.8 { x } else { 0.0 };
                }
            }
            g[(i, (i + 1) % n)] += 0.25; // cycle keeps it irreducible
        }
        for k in 0..n {
            let off: f64 = (0..n).filter(|&j| j != k).map(|j| g[(k, j)]).sum();
            g[(k, k)] = -off;
        }
        g
    })
}

/// Random environment with at least one working state, a stochastic jump
/// matrix, and a generator whose blocking states can always escape.
fn env_strategy(n: usize, n_blocking: usize) -> impl Strategy<Value = EnvironmentSpec> {
    let v_raw = prop::collection::vec(0.0f64..1.5, n * n);
    let r_raw = prop::collection::vec(0.01f64..1.0, n * n);
    (v_raw, r_raw).prop_map(move |(v_raw, r_raw)| {
        let mut v = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let x = v_raw[i * n + j];
                    v[(i, j)] = if x > 0.9 { x } else { 0.0 };
                }
            }
        }
        // every blocking state gets a guaranteed escape to state 0 (working)
        for b in (n - n_blocking)..n {
            v[(b, 0)] += 0.5;
        }
        for k in 0..n {
            let off: f64 = (0..n).filter(|&j| j != k).map(|j| v[(k, j)]).sum();
            v[(k, k)] = -off;
        }
        let mut r = Mat::zeros(n, n);
        for i in 0..n {
            let total: f64 = (0..n).map(|j| r_raw[i * n + j]).sum();
            for j in 0..n {
                r[(i, j)] = r_raw[i * n + j] / total;
            }
        }
        let labels: Vec<String> = (0..n).map(|k| format!("s{k}")).collect();
        let blocking: Vec<String> = ((n - n_blocking)..n).map(|k| format!("s{k}")).collect();
        EnvironmentSpec::new(labels, &blocking, v, r).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stationary_of_generator_solves_and_normalizes(g in generator_strategy(6)) {
        let pi = numerics::stationary_of_generator(&g).unwrap();
        let total: f64 = pi.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        let res = g.left_mul(&pi);
        for r in res {
            prop_assert!(r.abs() <= numerics::EPS_RES);
        }
    }

    #[test]
    fn certified_invertible_implies_solvable(env in env_strategy(6, 2), lam in 0.05f64..20.0) {
        // the working resolvent of a structurally valid environment is
        // always certified, and certification implies solvability
        let iw = env.working_projector();
        let m = iw.scale(lam).sub(env.v());
        let verdict = numerics::check_flow_invertible(&m, &env.working_mask());
        prop_assert_eq!(verdict, InvertibilityVerdict::InvertibleCertified);
        for bi in 0..3usize {
            let b: Vec<f64> = (0..6).map(|j| ((j + bi * 7) % 5) as f64 - 2.0).collect();
            let x = numerics::solve_linear(&m, &b).unwrap();
            let r = m.mul_vec(&x);
            let binf = b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            for i in 0..6 {
                prop_assert!((r[i] - b[i]).abs() <= 1e-10 * (1.0 + binf));
            }
        }
    }

    #[test]
    fn product_form_models_match_truncated_solver(env in env_strategy(5, 1), lam in 0.2f64..0.8, mu in 1.2f64..3.0) {
        // random valid environments with constant rates either factorize or
        // are rejected; when they factorize the joint law must match the
        // direct solve once the truncation discards less than 1e-9 of mass
        let queue = QueueSpec::constant(lam, mu, Capacity::Infinite).unwrap();
        let model = ModelSpec::new("random", queue, env);
        prop_assume!(envq::env::validate(&model).is_accepted());
        if let Ok(sol) = ct::solve_product_form(&model) {
            let mut n_trunc = 2 * model.queue.tail_index() + 5;
            while sol.xi.tail_mass(n_trunc + 1) >= 1e-9 {
                n_trunc += 5;
            }
            let tr = ct::direct_solve_truncated(&model, n_trunc).unwrap();
            let mut tv = 0.0;
            for n in 0..tr.n_levels() {
                for k in 0..tr.n_env() {
                    tv += (sol.pi(n, k) - tr.pi(n, k)).abs();
                }
            }
            tv /= 2.0;
            prop_assert!(tv <= 1e-6, "total variation {}", tv);
        }
    }

    #[test]
    fn embedded_law_well_formed_on_product_form_models(env in env_strategy(5, 1), lam in 0.2f64..0.9, mu in 1.0f64..3.0) {
        // wherever the continuous-time law factorizes, the departure-observed
        // law must exist, agree along both computation routes (checked inside
        // the solver), vanish outside the one-step image of the working set,
        // and transform back to the continuous-time law
        let queue = QueueSpec::constant(lam, mu, Capacity::Infinite).unwrap();
        let model = ModelSpec::new("random", queue, env);
        prop_assume!(envq::env::validate(&model).is_accepted());
        if let Ok(ctsol) = ct::solve_product_form(&model) {
            let sol = envq::embedded::solve_embedded(&model).unwrap();
            let total: f64 = sol.theta_hat.iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            for (k, &t) in sol.theta_hat.iter().enumerate() {
                if !sol.reachable_one_step[k] {
                    prop_assert!(t.abs() <= 1e-14);
                }
            }
            let back = envq::embedded::theta_from_theta_hat(&model, &sol.theta_hat).unwrap();
            for (b, t) in back.iter().zip(&ctsol.theta) {
                prop_assert!((b - t).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn stochastic_stationary_is_fixed_point(r_raw in prop::collection::vec(0.01f64..1.0, 25)) {
        let n = 5;
        let mut p = Mat::zeros(n, n);
        for i in 0..n {
            let total: f64 = (0..n).map(|j| r_raw[i * n + j]).sum();
            for j in 0..n {
                p[(i, j)] = r_raw[i * n + j] / total;
            }
        }
        let pi = numerics::stationary_of_stochastic(&p).unwrap();
        let after = p.left_mul(&pi);
        for (a, b) in pi.iter().zip(&after) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}
