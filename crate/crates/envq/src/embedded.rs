//! The Markov chain obtained by observing the exponential model at
//! departure instants.
//!
//! For constant arrival rate the chain has a product-form stationary law
//! whose level factor coincides with the continuous-time one, while the
//! environment factor solves a fixed-point equation of the departure
//! transition matrix. The two are linked by explicit transforms in both
//! directions; the solver computes the environment factor along both routes
//! and insists that they agree.

use crate::ct::{self, LevelDist, SolveError};
use crate::env::ModelSpec;
use crate::numerics::{self, FlowGraph, Mat, NumericsError, EPS_RES};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddedError {
    #[error("departure-embedded analysis needs a constant arrival rate")]
    NonConstantArrivals,
    #[error("continuous-time precondition failed: {0}")]
    Precondition(String),
    #[error("self-check failed: {0}")]
    SelfCheck(String),
    #[error("the two environment-law routes disagree (max difference {max_diff:.3e})")]
    Disagreement { max_diff: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

fn constant_lambda(model: &ModelSpec) -> Result<f64, EmbeddedError> {
    model
        .queue
        .constant_lambda()
        .ok_or(EmbeddedError::NonConstantArrivals)
}

/// `rate * I_W - V`, the resolvent-style matrix at the heart of the
/// departure analysis. Invertible for every positive rate whenever the model
/// passes structural validation.
fn working_resolvent(model: &ModelSpec, rate: f64) -> Mat {
    let iw = model.env.working_projector();
    iw.scale(rate).sub(model.env.v())
}

fn check_stochastic(m: &Mat, what: &str) -> Result<(), EmbeddedError> {
    for k in 0..m.n_rows() {
        if (m.row_sum(k) - 1.0).abs() > EPS_RES {
            return Err(EmbeddedError::SelfCheck(format!(
                "{what} row {k} sums to {}",
                m.row_sum(k)
            )));
        }
        if m.row(k).iter().any(|&x| x < -EPS_RES) {
            return Err(EmbeddedError::SelfCheck(format!(
                "{what} row {k} has a negative entry"
            )));
        }
    }
    Ok(())
}

/// Distribution of the environment at the first admitted arrival when the
/// system starts empty: `lambda (lambda I_W - V)^{-1} I_W`. Row-stochastic
/// with zero columns on the blocking states.
pub fn w_matrix(model: &ModelSpec) -> Result<Mat, EmbeddedError> {
    let lam = constant_lambda(model)?;
    let inv = numerics::inverse(&working_resolvent(model, lam))?;
    let w = inv.scale(lam).matmul(&model.env.working_projector());
    check_stochastic(&w, "first-admission matrix")?;
    Ok(w)
}

/// Joint law of "`n` admitted arrivals during the ongoing service, and the
/// environment just before the departure", for a service starting at level
/// `i`: matrices for `n = 0..=n_max`.
pub fn u_matrices(model: &ModelSpec, i: usize, n_max: usize) -> Result<Vec<Mat>, EmbeddedError> {
    assert!(i >= 1, "service spans start at level 1");
    let lam = constant_lambda(model)?;
    let iw = model.env.working_projector();
    let q = &model.queue;
    let base = numerics::inverse(&working_resolvent(model, lam + q.mu(i)))?
        .scale(q.mu(i))
        .matmul(&iw);
    let mut out = vec![base];
    for n in 0..n_max {
        let mu_next = q.mu(n + 1 + i);
        let step = numerics::inverse(&working_resolvent(model, lam + mu_next))?
            .scale(lam / q.mu(n + i) * mu_next)
            .matmul(&iw);
        let next = out[n].matmul(&step);
        out.push(next);
    }
    for (n, u) in out.iter().enumerate() {
        for k in 0..u.n_rows() {
            for m in 0..u.n_cols() {
                let x = u[(k, m)];
                if !(-EPS_RES..=1.0 + EPS_RES).contains(&x) {
                    return Err(EmbeddedError::SelfCheck(format!(
                        "service-span matrix n={n} entry ({k},{m}) = {x} outside [0,1]"
                    )));
                }
            }
        }
    }
    Ok(out)
}

/// Like [`u_matrices`], extending until the per-row residual mass drops
/// below `tol`.
pub fn u_matrices_adaptive(
    model: &ModelSpec,
    i: usize,
    tol: f64,
) -> Result<Vec<Mat>, EmbeddedError> {
    let nk = model.env.n_states();
    let mut cum = vec![0.0; nk];
    let mut n_max = 8usize;
    loop {
        let us = u_matrices(model, i, n_max)?;
        cum.fill(0.0);
        for u in &us {
            for k in 0..nk {
                cum[k] += u.row_sum(k);
            }
        }
        if cum.iter().all(|&c| 1.0 - c < tol) {
            return Ok(us);
        }
        n_max *= 2;
        if n_max > 1 << 16 {
            return Err(EmbeddedError::SelfCheck(
                "service-span series does not exhaust its mass".to_string(),
            ));
        }
    }
}

/// Environment transition over one full departure cycle, before the
/// departure jump: `lambda (lambda I_W - V)^{-1} I_W`.
///
/// The level-`n` cycle matrices all collapse onto this one up to the level
/// weight; that identity is re-verified numerically for the first levels, so
/// a formula slip cannot pass silently.
pub fn m0_matrix(model: &ModelSpec) -> Result<Mat, EmbeddedError> {
    let lam = constant_lambda(model)?;
    let q = &model.queue;
    let m0 = w_matrix(model)?;
    check_stochastic(&m0, "departure-cycle matrix")?;

    let w = m0.clone(); // same closed form
    for n in 0..=5usize {
        // sum over the level the ongoing service started at
        let mut lhs = w.matmul(&u_matrices(model, 1, n)?[n]);
        let mut weight = 1.0;
        for i in 1..=(n + 1) {
            weight *= lam / q.mu(i);
            let u = u_matrices(model, i, n + 1 - i)?[n + 1 - i].scale(weight);
            lhs = lhs.add(&u);
        }
        let mut level_weight = 1.0;
        for i in 1..=n {
            level_weight *= lam / q.mu(i);
        }
        let rhs = m0.scale(level_weight);
        let diff = lhs.sub(&rhs).max_abs();
        if diff > 1e-9 {
            return Err(EmbeddedError::SelfCheck(format!(
                "departure-cycle identity fails at level {n} (difference {diff:.3e})"
            )));
        }
    }
    Ok(m0)
}

/// Stationary description of the departure-embedded chain.
#[derive(Debug, Clone)]
pub struct EmbeddedSolution {
    /// Environment law right after departures; zero outside the one-step
    /// image of the working set.
    pub theta_hat: Vec<f64>,
    /// `true` for states reachable from the working set by one departure
    /// jump; levels paired with the others are never revisited.
    pub reachable_one_step: Vec<bool>,
    /// Level law, identical to the continuous-time one.
    pub xi: LevelDist,
    /// States of the single recurrent class of the departure transition.
    pub closed_class: Vec<usize>,
    /// Period of that class (1 means aperiodic).
    pub period: usize,
}

impl EmbeddedSolution {
    pub fn pi_hat(&self, n: usize, k: usize) -> f64 {
        self.xi.xi(n) * self.theta_hat[k]
    }
}

fn class_period(p: &Mat, class: &[usize]) -> usize {
    if class.len() <= 1 {
        return 1;
    }
    let graph = FlowGraph::from_matrix(p);
    let in_class = {
        let mut mask = vec![false; p.n_rows()];
        for &v in class {
            mask[v] = true;
        }
        mask
    };
    let mut depth = vec![usize::MAX; p.n_rows()];
    let root = class[0];
    depth[root] = 0;
    let mut queue = std::collections::VecDeque::from([root]);
    let mut g: u64 = 0;
    while let Some(v) = queue.pop_front() {
        for &w in graph.successors(v) {
            if !in_class[w] {
                continue;
            }
            if depth[w] == usize::MAX {
                depth[w] = depth[v] + 1;
                queue.push_back(w);
            } else {
                let diff = (depth[v] as i64 + 1 - depth[w] as i64).unsigned_abs();
                g = gcd(g, diff);
            }
        }
    }
    if g == 0 {
        1
    } else {
        g as usize
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Solve the departure-embedded chain of an ergodic product-form model.
///
/// The environment law is computed twice: as the stationary vector of the
/// departure transition matrix, and as the transform of the continuous-time
/// environment law. Both routes provably give the same law for this model
/// class, so any discrepancy beyond `1e-10` is reported as an error instead
/// of picking a side. The returned law is stationary but not necessarily
/// limiting: the
/// recurrent class may be periodic, which the `period` field reports.
pub fn solve_embedded(model: &ModelSpec) -> Result<EmbeddedSolution, EmbeddedError> {
    let ctsol = ct::solve_product_form(model).map_err(|e| match e {
        SolveError::Numerics(n) => EmbeddedError::Numerics(n),
        other => EmbeddedError::Precondition(other.to_string()),
    })?;
    let env = &model.env;
    let nk = env.n_states();
    let m0r = m0_matrix(model)?.matmul(env.r());
    check_stochastic(&m0r, "departure transition matrix")?;
    let theta_hat = numerics::stationary_of_stochastic(&m0r)?;

    // transform route: push the continuous-time law through one departure
    let mut transform: Vec<f64> = ctsol.theta.clone();
    for (k, t) in transform.iter_mut().enumerate() {
        if !env.is_working(k) {
            *t = 0.0;
        }
    }
    let transform = env.r().left_mul(&transform);
    let total: f64 = transform.iter().sum();
    let transform: Vec<f64> = transform.iter().map(|x| x / total).collect();

    let max_diff = theta_hat
        .iter()
        .zip(&transform)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if max_diff > 1e-10 {
        return Err(EmbeddedError::Disagreement { max_diff });
    }

    let reachable_one_step: Vec<bool> = (0..nk)
        .map(|k| (0..env.n_working()).any(|m| env.r()[(m, k)] > 0.0))
        .collect();
    let classes = numerics::closed_classes(&m0r);
    let closed_class = classes.into_iter().next().unwrap_or_default();
    let period = class_period(&m0r, &closed_class);

    Ok(EmbeddedSolution {
        theta_hat,
        reachable_one_step,
        xi: ctsol.xi,
        closed_class,
        period,
    })
}

/// Recover the continuous-time environment law from the embedded one:
/// normalize `theta_hat (I_W - V/lambda)^{-1}`. The result is verified to
/// solve the continuous-time balance before it is returned.
pub fn theta_from_theta_hat(
    model: &ModelSpec,
    theta_hat: &[f64],
) -> Result<Vec<f64>, EmbeddedError> {
    let lam = constant_lambda(model)?;
    // (I_W - V/lambda)^{-1} = lambda (lambda I_W - V)^{-1}
    let inv = numerics::inverse(&working_resolvent(model, lam))?.scale(lam);
    let x = inv.left_mul(theta_hat);
    let total: f64 = x.iter().sum();
    let theta: Vec<f64> = x.iter().map(|v| v / total).collect();
    let balance = ct::reduced_generator(model, 0);
    let res = balance.left_mul(&theta);
    let worst = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if worst > 1e-10 {
        return Err(EmbeddedError::SelfCheck(format!(
            "recovered law violates the continuous-time balance (residual {worst:.3e})"
        )));
    }
    Ok(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Capacity, EnvironmentSpec, QueueSpec};
    use crate::models;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn label_index(model: &ModelSpec, label: &str) -> usize {
        model.env.labels().iter().position(|l| l == label).unwrap()
    }

    /// Two environment states, the second blocking; departures always move
    /// to the blocking state, the environment recovers at rate `nu`.
    fn absorbing_jump_model(lambda: f64, mu: f64, nu: f64) -> ModelSpec {
        let v = Mat::from_rows(&[vec![0.0, 0.0], vec![nu, -nu]]);
        let r = Mat::from_rows(&[vec![0.0, 1.0], vec![0.0, 1.0]]);
        let env =
            EnvironmentSpec::new(vec!["1".into(), "2".into()], &["2".into()], v, r).unwrap();
        ModelSpec::new(
            "absorbing-jump",
            QueueSpec::constant(lambda, mu, Capacity::Infinite).unwrap(),
            env,
        )
    }

    #[test]
    fn w_matrix_identity_for_trivial_environment() {
        let env = EnvironmentSpec::new(
            vec!["a".into(), "b".into()],
            &[],
            Mat::zeros(2, 2),
            Mat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]),
        )
        .unwrap();
        let model = ModelSpec::new(
            "swap",
            QueueSpec::constant(1.0, 2.0, Capacity::Infinite).unwrap(),
            env,
        );
        let w = w_matrix(&model).unwrap();
        assert!(w.sub(&Mat::identity(2)).max_abs() < 1e-12);
    }

    #[test]
    fn w_matrix_absorbing_jump_example() {
        let model = absorbing_jump_model(1.3, 2.0, 0.7);
        let w = w_matrix(&model).unwrap();
        // from either state the first admitted arrival sees the working state
        for k in 0..2 {
            assert!((w[(k, 0)] - 1.0).abs() < 1e-12);
            assert!(w[(k, 1)].abs() < 1e-12);
        }
    }

    #[test]
    fn w_matrix_replenishment_structure() {
        let (lam, nus) = (1.0, [3.0, 0.8, 1.9]);
        let (model, _) = models::build_rs(2, 5, lam, &[2.0], &nus).unwrap();
        let w = w_matrix(&model).unwrap();
        for k in 1..=2usize {
            let nu = nus[k];
            let i = label_index(&model, &k.to_string());
            assert!((w[(i, i)] - lam / (nu + lam)).abs() < 1e-12);
            assert!((w[(i, label_index(&model, "5"))] - nu / (nu + lam)).abs() < 1e-12);
        }
        // from the empty stock the next admission always sees a full shelf
        let zero = label_index(&model, "0");
        assert!((w[(zero, label_index(&model, "5"))] - 1.0).abs() < 1e-12);
        // above the reorder point nothing moves before the arrival
        for k in 3..=5usize {
            let i = label_index(&model, &k.to_string());
            assert!((w[(i, i)] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn u_matrices_single_state_geometric() {
        let env = EnvironmentSpec::new(
            vec!["only".into()],
            &[],
            Mat::zeros(1, 1),
            Mat::identity(1),
        )
        .unwrap();
        let (lam, mu) = (1.0, 2.3);
        let model = ModelSpec::new(
            "mm1",
            QueueSpec::constant(lam, mu, Capacity::Infinite).unwrap(),
            env,
        );
        let us = u_matrices(&model, 1, 6).unwrap();
        for (n, u) in us.iter().enumerate() {
            let expect = mu / (lam + mu) * (lam / (lam + mu)).powi(n as i32);
            assert!((u[(0, 0)] - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn u_matrices_total_mass_one() {
        let (model, _) = models::build_rs(2, 5, 1.0, &[2.0], &[3.0]).unwrap();
        for i in [1usize, 2, 4] {
            let us = u_matrices_adaptive(&model, i, 1e-9).unwrap();
            for k in 0..model.env.n_states() {
                let total: f64 = us.iter().map(|u| u.row_sum(k)).sum();
                assert!((total - 1.0).abs() < 1e-9, "start level {i}, state {k}");
            }
        }
    }

    #[test]
    fn u_matrices_match_monte_carlo_race() {
        // free-running environment (V = 0): the count of admitted arrivals
        // during one service is a pure race; estimate it by simulation
        let env = EnvironmentSpec::new(
            vec!["x".into(), "y".into()],
            &[],
            Mat::zeros(2, 2),
            Mat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]),
        )
        .unwrap();
        let (lam, mus) = (1.0, vec![2.0, 1.2, 3.0]);
        let model = ModelSpec::new(
            "race",
            QueueSpec::new(vec![lam, lam], mus.clone(), Capacity::Infinite).unwrap(),
            env,
        );
        let i0 = 2usize;
        let us = u_matrices(&model, i0, 4).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(20240817);
        let samples = 200_000usize;
        let mut counts = [0usize; 5];
        let mu_at = |n: usize| mus[(n - 1).min(mus.len() - 1)];
        for _ in 0..samples {
            let mut level = i0;
            let mut arrivals = 0usize;
            loop {
                let mu = mu_at(level);
                let p_service = mu / (lam + mu);
                if rng.gen::<f64>() < p_service {
                    break;
                }
                arrivals += 1;
                level += 1;
                if arrivals >= counts.len() {
                    break;
                }
            }
            if arrivals < counts.len() {
                counts[arrivals] += 1;
            }
        }
        for n in 0..=4usize {
            let p_hat = counts[n] as f64 / samples as f64;
            let p = us[n][(0, 0)];
            let se = (p * (1.0 - p) / samples as f64).sqrt();
            assert!(
                (p_hat - p).abs() < 4.0 * se + 1e-4,
                "n={n}: mc {p_hat} vs formula {p}"
            );
        }
    }

    #[test]
    fn m0_equals_w_and_is_stochastic() {
        let (model, _) = models::build_rs(2, 5, 1.0, &[2.0], &[3.0]).unwrap();
        let m0 = m0_matrix(&model).unwrap();
        let w = w_matrix(&model).unwrap();
        assert!(m0.sub(&w).max_abs() < 1e-14);
        for k in 0..m0.n_rows() {
            assert!((m0.row_sum(k) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn m0_cycle_identity_with_state_dependent_service() {
        // the embedded self-check runs across levels 0..=5 internally
        let (model, _) = models::build_rs(2, 5, 1.0, &[2.0, 1.1, 3.4, 0.9], &[3.0]).unwrap();
        assert!(m0_matrix(&model).is_ok());
    }

    #[test]
    fn embedded_absorbing_jump_concentrates() {
        for (lam, nu) in [(1.0, 3.0), (0.4, 0.9)] {
            let model = absorbing_jump_model(lam, 4.0, nu);
            let sol = solve_embedded(&model).unwrap();
            let b = label_index(&model, "2");
            let w = label_index(&model, "1");
            assert!((sol.theta_hat[b] - 1.0).abs() < 1e-12);
            assert!(sol.theta_hat[w].abs() < 1e-12);
            // while the continuous-time law spreads over both states
            let ctsol = ct::solve_product_form(&model).unwrap();
            assert!((ctsol.theta[w] - nu / (lam + nu)).abs() < 1e-12);
            assert!((ctsol.theta[b] - lam / (lam + nu)).abs() < 1e-12);
        }
    }

    #[test]
    fn embedded_swap_yields_transposed_law() {
        // no blocking, distinct recovery rates, departures swap the states
        let (nu1, nu2, lam) = (0.6, 1.9, 1.0);
        let v = Mat::from_rows(&[vec![-nu1, nu1], vec![nu2, -nu2]]);
        let r = Mat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let env = EnvironmentSpec::new(vec!["1".into(), "2".into()], &[], v, r).unwrap();
        let model = ModelSpec::new(
            "swap-recover",
            QueueSpec::constant(lam, 3.0, Capacity::Infinite).unwrap(),
            env,
        );
        let ctsol = ct::solve_product_form(&model).unwrap();
        let sol = solve_embedded(&model).unwrap();
        assert!((sol.theta_hat[0] - ctsol.theta[1]).abs() < 1e-12);
        assert!((sol.theta_hat[1] - ctsol.theta[0]).abs() < 1e-12);
        assert!((ctsol.theta[0] - ctsol.theta[1]).abs() > 1e-3);
    }

    #[test]
    fn embedded_zero_reorder_point_periodic() {
        let s = 4usize;
        let (model, _) = models::build_rs(0, s, 1.0, &[2.0], &[3.0]).unwrap();
        let sol = solve_embedded(&model).unwrap();
        let full = label_index(&model, &s.to_string());
        assert!(!sol.reachable_one_step[full]);
        assert!(sol.theta_hat[full].abs() < 1e-14);
        for k in 0..s {
            let i = label_index(&model, &k.to_string());
            assert!(sol.reachable_one_step[i]);
            assert!((sol.theta_hat[i] - 1.0 / s as f64).abs() < 1e-12);
        }
        assert_eq!(sol.period, s);
    }

    #[test]
    fn embedded_closed_forms_match_solver() {
        let (model, _) = models::build_rs(2, 5, 1.0, &[2.0], &[3.0]).unwrap();
        let sol = solve_embedded(&model).unwrap();
        let cf = models::embedded_rs_theta_hat(2, 5, 1.0, &[3.0]).unwrap();
        for k in 0..cf.len() {
            assert!((sol.theta_hat[k] - cf[k]).abs() < 1e-10);
        }
        let (model, _) = models::build_rq(2, 3, 1.0, &[2.0], &[3.0]).unwrap();
        let sol = solve_embedded(&model).unwrap();
        let cf = models::embedded_rq_theta_hat(2, 3, 1.0, &[3.0]).unwrap();
        for k in 0..cf.len() {
            assert!((sol.theta_hat[k] - cf[k]).abs() < 1e-10);
        }
        // per-state replenishment rates
        let nus = [0.7, 1.3, 2.9];
        let (model, _) = models::build_rs(2, 6, 1.1, &[2.0], &nus).unwrap();
        let sol = solve_embedded(&model).unwrap();
        let cf = models::embedded_rs_theta_hat(2, 6, 1.1, &nus).unwrap();
        for k in 0..cf.len() {
            assert!((sol.theta_hat[k] - cf[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn round_trip_between_the_two_laws() {
        let (model, _) = models::build_rs(2, 5, 1.0, &[2.0], &[3.0]).unwrap();
        let ctsol = ct::solve_product_form(&model).unwrap();
        let sol = solve_embedded(&model).unwrap();
        let recovered = theta_from_theta_hat(&model, &sol.theta_hat).unwrap();
        for k in 0..recovered.len() {
            assert!((recovered[k] - ctsol.theta[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn identity_jumps_condition_on_working_states() {
        // departures leave the environment alone: the embedded law is the
        // continuous-time law conditioned on the working states
        let model = models::build_sensor_node(1.0, 3.0, 0.5, 0.7, 0.9, 1.1).unwrap();
        let ctsol = ct::solve_product_form(&model).unwrap();
        let sol = solve_embedded(&model).unwrap();
        let mass: f64 = (0..model.env.n_working()).map(|k| ctsol.theta[k]).sum();
        for k in 0..model.env.n_states() {
            let expect = if model.env.is_working(k) {
                ctsol.theta[k] / mass
            } else {
                0.0
            };
            assert!((sol.theta_hat[k] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn free_environment_same_law() {
        // V = 0, no blocking: embedded and continuous-time laws coincide
        let r = Mat::from_rows(&[
            vec![0.1, 0.6, 0.3],
            vec![0.5, 0.2, 0.3],
            vec![0.3, 0.3, 0.4],
        ]);
        let env = EnvironmentSpec::new(
            vec!["a".into(), "b".into(), "c".into()],
            &[],
            Mat::zeros(3, 3),
            r,
        )
        .unwrap();
        let model = ModelSpec::new(
            "free",
            QueueSpec::constant(1.0, 2.0, Capacity::Infinite).unwrap(),
            env,
        );
        let ctsol = ct::solve_product_form(&model).unwrap();
        let sol = solve_embedded(&model).unwrap();
        for k in 0..3 {
            assert!((sol.theta_hat[k] - ctsol.theta[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn level_marginal_equals_continuous_time() {
        let (model, _) = models::build_rs(2, 5, 1.0, &[2.0], &[3.0]).unwrap();
        let ctsol = ct::solve_product_form(&model).unwrap();
        let sol = solve_embedded(&model).unwrap();
        for n in 0..=30 {
            let marginal: f64 = (0..model.env.n_states()).map(|k| sol.pi_hat(n, k)).sum();
            assert!((marginal - ctsol.xi.xi(n)).abs() < 1e-12);
        }
    }
}
