//! Closed forms against the numerical solvers over parameter grids, at
//! least ten points per model family, plus the internal two-term recursion
//! of the phase-type stock law.

use envq::ct;
use envq::embedded;
use envq::models::{self, FailureRates, MaintenanceCosts, MaintenancePolicy};

fn assert_matches(name: &str, closed: &[f64], solved: &[f64]) {
    for (k, (a, b)) in closed.iter().zip(solved).enumerate() {
        assert!(
            (a - b).abs() <= 1e-10,
            "{name}: state {k}: closed form {a} vs solver {b}"
        );
    }
}

#[test]
fn replenishment_order_up_to_grid() {
    let mut points = 0;
    for (r, s) in [(0usize, 3usize), (1, 4), (2, 5), (3, 8)] {
        for lam in [0.4, 1.0, 2.3] {
            let nu: Vec<f64> = (0..=r).map(|k| 0.5 + 0.9 * k as f64).collect();
            let (model, theta) = models::build_rs(r, s, lam, &[lam * 2.0], &nu).unwrap();
            let sol = ct::solve_product_form(&model).unwrap();
            assert_matches(&model.name, &theta, &sol.theta);
            points += 1;
        }
    }
    assert!(points >= 10);
}

#[test]
fn replenishment_fixed_batch_grid() {
    let mut points = 0;
    for (r, q) in [(0usize, 2usize), (1, 3), (2, 3), (2, 5)] {
        for lam in [0.5, 1.0, 1.9] {
            let nu: Vec<f64> = (0..=r).map(|k| 0.7 + 0.6 * k as f64).collect();
            let (model, theta) = models::build_rq(r, q, lam, &[lam * 2.5], &nu).unwrap();
            let sol = ct::solve_product_form(&model).unwrap();
            assert_matches(&model.name, &theta, &sol.theta);
            points += 1;
        }
    }
    assert!(points >= 10);
}

#[test]
fn phase_lead_time_grid() {
    let mut points = 0;
    for (r, s) in [(0usize, 3usize), (1, 3), (2, 5)] {
        for weights in [vec![1.0], vec![0.5, 0.5], vec![0.2, 0.3, 0.5]] {
            for beta in [0.8, 2.4] {
                let spec = models::PhaseLeadTimeSpec {
                    beta,
                    weights: weights.clone(),
                    r,
                    s,
                };
                let (model, theta) = models::build_rs_phase(&spec, 1.0, &[2.0]).unwrap();
                let sol = ct::solve_product_form(&model).unwrap();
                assert_matches(&model.name, &theta, &sol.theta);
                points += 1;
            }
        }
    }
    assert!(points >= 10);
}

#[test]
fn phase_two_term_recursion() {
    // interior balance of the phase-type stock law: each phase weight is
    // the arrival-weighted value one stock level up plus the phase-advance
    // value one phase up
    let (lam, beta) = (0.9, 1.7);
    let b = [0.2, 0.3, 0.5];
    let (r, s, lp) = (3usize, 6usize, b.len());
    let spec = models::PhaseLeadTimeSpec {
        beta,
        weights: b.to_vec(),
        r,
        s,
    };
    let (model, theta) = models::build_rs_phase(&spec, lam, &[2.0]).unwrap();
    let at = |label: String| {
        model
            .env
            .labels()
            .iter()
            .position(|l| *l == label)
            .unwrap()
    };
    for j in 1..r {
        for l in 1..lp {
            let lhs = theta[at(format!("{j}:{l}"))] * (lam + beta);
            let rhs = theta[at(format!("{}:{l}", j + 1))] * lam
                + theta[at(format!("{j}:{}", l + 1))] * beta;
            assert!(
                (lhs - rhs).abs() <= 1e-13,
                "recursion fails at stock {j}, phase {l}: {lhs} vs {rhs}"
            );
        }
    }
}

#[test]
fn tandem_grid() {
    let mut points = 0;
    for n_buf in [0usize, 1, 2, 4] {
        for lam in [0.6, 1.0, 1.7] {
            let nus: Vec<f64> = (0..=n_buf).map(|k| 1.1 + 0.4 * k as f64).collect();
            let (model, theta) = models::build_tandem(n_buf, lam, &[lam + 1.0], &nus).unwrap();
            let sol = ct::solve_product_form(&model).unwrap();
            assert_matches(&model.name, &theta, &sol.theta);
            points += 1;
        }
    }
    assert!(points >= 10);
}

#[test]
fn maintenance_grid() {
    let mut points = 0;
    for n in [2usize, 5, 9] {
        for (nu_m, nu_r) in [(0.3, 0.1), (1.1, 0.8)] {
            for failure in [
                FailureRates::Constant(0.2),
                FailureRates::Linear(0.03),
            ] {
                let policy = MaintenancePolicy {
                    lambda: 1.0,
                    mu: vec![1.5],
                    nu_maint: nu_m,
                    nu_repair: nu_r,
                    failure: failure.clone(),
                    costs: MaintenanceCosts {
                        maintenance: 1.0,
                        repair: 2.0,
                        blocked: 1.0,
                        waiting: 1.0,
                    },
                };
                let (model, theta) = models::build_maintenance(&policy, n).unwrap();
                let sol = ct::solve_product_form(&model).unwrap();
                assert_matches(&model.name, &theta, &sol.theta);
                points += 1;
            }
        }
    }
    assert!(points >= 10);
}

#[test]
fn embedded_laws_grid() {
    let mut points = 0;
    for (r, s) in [(0usize, 3usize), (1, 4), (2, 5)] {
        for lam in [0.7, 1.3] {
            let nu: Vec<f64> = (0..=r).map(|k| 0.9 + 0.5 * k as f64).collect();
            let (model, _) = models::build_rs(r, s, lam, &[lam * 2.0], &nu).unwrap();
            let cf = models::embedded_rs_theta_hat(r, s, lam, &nu).unwrap();
            let sol = embedded::solve_embedded(&model).unwrap();
            assert_matches("embedded order-up-to", &cf, &sol.theta_hat);
            points += 1;
        }
    }
    for (r, q) in [(0usize, 2usize), (1, 3), (2, 4)] {
        for lam in [0.7, 1.3] {
            let nu: Vec<f64> = (0..=r).map(|k| 0.9 + 0.5 * k as f64).collect();
            let (model, _) = models::build_rq(r, q, lam, &[lam * 2.0], &nu).unwrap();
            let cf = models::embedded_rq_theta_hat(r, q, lam, &nu).unwrap();
            let sol = embedded::solve_embedded(&model).unwrap();
            assert_matches("embedded fixed-batch", &cf, &sol.theta_hat);
            points += 1;
        }
    }
    assert!(points >= 12);
}
