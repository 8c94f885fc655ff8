//! Continuous-time analysis: the reduced environment generators, the
//! product-form decision for infinite and finite waiting rooms, and a
//! truncated direct solver used as an oracle throughout.

use crate::env::{Capacity, ModelSpec};
use crate::numerics::{self, Mat, NumericsError, EPS_STOCH};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("not product form: {0}")]
    NotProductForm(String),
    #[error("not ergodic: {0}")]
    NotErgodic(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Outcome classification mirrored into CLI reports.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    ProductForm,
    NotProductForm(String),
    NotErgodic(String),
}

impl Verdict {
    pub fn from_error(e: &SolveError) -> Verdict {
        match e {
            SolveError::NotProductForm(r) => Verdict::NotProductForm(r.clone()),
            SolveError::NotErgodic(r) => Verdict::NotErgodic(r.clone()),
            other => Verdict::NotProductForm(other.to_string()),
        }
    }
}

/// Level distribution with a closed geometric tail.
///
/// `coeffs[n]` holds the unnormalized level weight for `n` up to the tail
/// index; beyond it the weights continue geometrically with `tail_ratio`
/// (zero for finite-capacity models, where `coeffs` covers all levels).
#[derive(Debug, Clone)]
pub struct LevelDist {
    coeffs: Vec<f64>,
    tail_ratio: f64,
    norm: f64,
}

impl LevelDist {
    fn new(coeffs: Vec<f64>, tail_ratio: f64) -> Self {
        let last = coeffs.len() - 1;
        let head: f64 = coeffs[..last].iter().sum();
        let norm = if tail_ratio > 0.0 {
            head + coeffs[last] / (1.0 - tail_ratio)
        } else {
            head + coeffs[last]
        };
        LevelDist {
            coeffs,
            tail_ratio,
            norm,
        }
    }

    /// Probability of level `n`.
    pub fn xi(&self, n: usize) -> f64 {
        let last = self.coeffs.len() - 1;
        if n <= last {
            self.coeffs[n] / self.norm
        } else if self.tail_ratio > 0.0 {
            self.coeffs[last] * self.tail_ratio.powi((n - last) as i32) / self.norm
        } else {
            0.0
        }
    }

    /// Normalization constant (sum of the unnormalized level weights).
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// Mass at levels `>= from`.
    pub fn tail_mass(&self, from: usize) -> f64 {
        let last = self.coeffs.len() - 1;
        if from > last {
            if self.tail_ratio > 0.0 {
                self.coeffs[last] * self.tail_ratio.powi((from - last) as i32)
                    / (1.0 - self.tail_ratio)
                    / self.norm
            } else {
                0.0
            }
        } else {
            let head: f64 = self.coeffs[from..last].iter().sum();
            let tail = if self.tail_ratio > 0.0 {
                self.coeffs[last] / (1.0 - self.tail_ratio)
            } else {
                self.coeffs[last]
            };
            (head + tail) / self.norm
        }
    }

    /// Largest level index with an explicitly stored weight.
    pub fn stored_levels(&self) -> usize {
        self.coeffs.len()
    }
}

/// Product-form steady state: level factor, environment factor, and the
/// normalization constant of the level weights.
#[derive(Debug, Clone)]
pub struct ProductFormSolution {
    pub theta: Vec<f64>,
    pub xi: LevelDist,
    pub c: f64,
}

impl ProductFormSolution {
    pub fn pi(&self, n: usize, k: usize) -> f64 {
        self.xi.xi(n) * self.theta[k]
    }
}

/// Unnormalized level weights `prod_{i<n} lambda(i)/mu(i+1)` up to the tail
/// index (or up to `N+1` for finite capacity).
fn level_coeffs(model: &ModelSpec) -> Vec<f64> {
    let q = &model.queue;
    let top = match q.capacity() {
        Capacity::Finite(n) => n + 1,
        Capacity::Infinite => q.tail_index(),
    };
    let mut coeffs = Vec::with_capacity(top + 1);
    let mut c = 1.0;
    coeffs.push(c);
    for n in 1..=top {
        c *= q.lambda(n - 1) / q.mu(n);
        coeffs.push(c);
    }
    coeffs
}

fn level_dist(model: &ModelSpec) -> Result<LevelDist, SolveError> {
    let coeffs = level_coeffs(model);
    match model.queue.capacity() {
        Capacity::Finite(_) => Ok(LevelDist::new(coeffs, 0.0)),
        Capacity::Infinite => {
            let rho = model.queue.tail_ratio();
            if rho >= 1.0 {
                return Err(SolveError::NotErgodic(format!(
                    "tail ratio lambda/mu = {rho} >= 1: level weights are not summable"
                )));
            }
            Ok(LevelDist::new(coeffs, rho))
        }
    }
}

/// Reduced generator of the environment at queue length `n`:
/// `lambda(n) * I_W (R - I) + V`, with the arrival term dropped at the cap
/// of a finite waiting room.
pub fn reduced_generator(model: &ModelSpec, n: usize) -> Mat {
    let env = &model.env;
    let nk = env.n_states();
    let arrivals_on = match model.queue.capacity() {
        Capacity::Infinite => true,
        Capacity::Finite(cap) => n <= cap,
    };
    let lam = if arrivals_on { model.queue.lambda(n) } else { 0.0 };
    let jump = env.working_jumps(); // I_W R
    let mut q = env.v().clone();
    for k in 0..nk {
        if !env.is_working(k) {
            continue;
        }
        for m in 0..nk {
            q[(k, m)] += lam * jump[(k, m)];
        }
        q[(k, k)] -= lam;
    }
    q
}

/// Decide the product-form steady state of an infinite-capacity model.
///
/// The environment factor solves the reduced-generator equation at level 0;
/// it must also solve it at every other level. Since the arrival rates are
/// constant from the tail index on, the reduced generators repeat there, so
/// checking levels `1..=tail_index` is exhaustive.
pub fn solve_product_form(model: &ModelSpec) -> Result<ProductFormSolution, SolveError> {
    if model.queue.capacity() != Capacity::Infinite {
        return Err(SolveError::Invalid(
            "solve_product_form expects an infinite waiting room; use solve_product_form_finite"
                .to_string(),
        ));
    }
    let q0 = reduced_generator(model, 0);
    let theta = match numerics::stationary_of_generator(&q0) {
        Ok(t) => t,
        Err(NumericsError::MultipleClosedClasses(c)) => {
            return Err(SolveError::NotProductForm(format!(
                "reduced environment generator has {c} closed classes; no unique solution"
            )));
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(k) = theta.iter().position(|&t| t <= 0.0) {
        return Err(SolveError::NotProductForm(format!(
            "environment solution is zero at state {}; a strictly positive solution is required",
            model.env.label(k)
        )));
    }
    for n in 1..=model.queue.tail_index() {
        let qn = reduced_generator(model, n);
        let res = qn.left_mul(&theta);
        let worst = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        if worst > EPS_STOCH {
            return Err(SolveError::NotProductForm(format!(
                "level-0 environment solution fails the balance at level {n} (residual {worst:.3e}); \
                 arrival rates are level-dependent in an incompatible way"
            )));
        }
    }
    let xi = level_dist(model)?;
    let c = xi.norm();
    Ok(ProductFormSolution { theta, xi, c })
}

/// Decide the product-form steady state of a finite-capacity model.
///
/// Three named conditions are checked: the autonomous generator `V` admits a
/// strictly positive stationary law; the working set is closed under the
/// departure jumps; and a common solution of both stationarity requirements
/// exists. A common solution solves every reduced-generator equation, cap
/// level included. If the common solution is not unique the joint chain
/// cannot be irreducible, which the model class assumes, so this is reported
/// as a failure rather than silently picking one.
pub fn solve_product_form_finite(model: &ModelSpec) -> Result<ProductFormSolution, SolveError> {
    let Capacity::Finite(_) = model.queue.capacity() else {
        return Err(SolveError::Invalid(
            "solve_product_form_finite expects a finite waiting room".to_string(),
        ));
    };
    let env = &model.env;
    let nk = env.n_states();

    // working set closed under R
    for k in 0..env.n_working() {
        for m in env.n_working()..nk {
            if env.r()[(k, m)] > EPS_STOCH {
                return Err(SolveError::NotProductForm(format!(
                    "working set not closed under departure jumps: R({}, {}) = {}",
                    env.label(k),
                    env.label(m),
                    env.r()[(k, m)]
                )));
            }
        }
    }

    // V must allow a strictly positive stationary law: no transient states
    let v_closed = numerics::closed_classes(env.v());
    let in_closed: Vec<bool> = {
        let mut mask = vec![false; nk];
        for class in &v_closed {
            for &k in class {
                mask[k] = true;
            }
        }
        mask
    };
    if let Some(k) = in_closed.iter().position(|&b| !b) {
        return Err(SolveError::NotProductForm(format!(
            "environment generator V has transient state {}; no strictly positive stationary law",
            env.label(k)
        )));
    }

    // common left null vector of the level-0 reduced generator and V
    let q0 = reduced_generator(model, 0);
    let stacked = Mat::vstack(&q0.transpose(), &env.v().transpose());
    let basis = numerics::null_space(&stacked, 1e-11);
    match basis.len() {
        0 => Err(SolveError::NotProductForm(
            "working-state restriction of the stationary law is not invariant under the \
             departure jumps"
                .to_string(),
        )),
        1 => {
            let mut theta = basis.into_iter().next().unwrap();
            let total: f64 = theta.iter().sum();
            if total < 0.0 {
                theta.iter_mut().for_each(|x| *x = -*x);
            }
            let total: f64 = theta.iter().sum();
            theta.iter_mut().for_each(|x| *x /= total);
            if let Some(k) = theta.iter().position(|&t| t <= 1e-12) {
                return Err(SolveError::NotProductForm(format!(
                    "common stationary solution is not strictly positive at state {}",
                    env.label(k)
                )));
            }
            let xi = level_dist(model)?;
            let c = xi.norm();
            Ok(ProductFormSolution { theta, xi, c })
        }
        d => Err(SolveError::NotProductForm(format!(
            "common stationary solution is not unique ({d}-dimensional); \
             the joint process cannot be irreducible"
        ))),
    }
}

/// Stationary distribution of the model truncated at level `n_trunc`.
#[derive(Debug, Clone)]
pub struct TruncatedSolution {
    probs: Vec<f64>,
    n_env: usize,
    n_levels: usize,
    /// Geometric estimate of the stationary mass the truncation discards.
    pub tail_mass_bound: f64,
}

impl TruncatedSolution {
    pub fn pi(&self, n: usize, k: usize) -> f64 {
        self.probs[n * self.n_env + k]
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    pub fn n_env(&self) -> usize {
        self.n_env
    }

    pub fn level_marginal(&self, n: usize) -> f64 {
        (0..self.n_env).map(|k| self.pi(n, k)).sum()
    }

    pub fn env_marginal(&self, k: usize) -> f64 {
        (0..self.n_levels).map(|n| self.pi(n, k)).sum()
    }
}

/// Build the truncated joint generator and solve it directly.
///
/// Arrivals are disabled at the cap, which perturbs the stationary law of
/// the infinite system by at most the discarded tail mass; the geometric
/// bound on that mass is reported alongside the solution.
pub fn direct_solve_truncated(
    model: &ModelSpec,
    n_trunc: usize,
) -> Result<TruncatedSolution, SolveError> {
    let min_levels = 2 * model.queue.tail_index() + 5;
    if n_trunc < min_levels {
        return Err(SolveError::Invalid(format!(
            "truncation level {n_trunc} too small; need at least {min_levels}"
        )));
    }
    let env = &model.env;
    let q = &model.queue;
    let nk = env.n_states();
    let cap = match q.capacity() {
        Capacity::Finite(n) => (n + 1).min(n_trunc),
        Capacity::Infinite => n_trunc,
    };
    let n_levels = cap + 1;
    let dim = n_levels * nk;
    let idx = |n: usize, k: usize| n * nk + k;
    let mut gen = Mat::zeros(dim, dim);
    for n in 0..n_levels {
        for k in 0..nk {
            let row = idx(n, k);
            if env.is_working(k) {
                if n < cap {
                    let lam = q.lambda(n);
                    gen[(row, idx(n + 1, k))] += lam;
                    gen[(row, row)] -= lam;
                }
                if n > 0 {
                    let mu = q.mu(n);
                    for m in 0..nk {
                        let p = env.r()[(k, m)];
                        if p > 0.0 {
                            gen[(row, idx(n - 1, m))] += mu * p;
                        }
                    }
                    gen[(row, row)] -= mu;
                }
            }
            for m in 0..nk {
                if m != k {
                    let rate = env.v()[(k, m)];
                    if rate > 0.0 {
                        gen[(row, idx(n, m))] += rate;
                        gen[(row, row)] -= rate;
                    }
                }
            }
        }
    }
    let probs = numerics::stationary_of_generator(&gen)?;
    let rho = q.tail_ratio();
    let tail_mass_bound = if q.capacity() == Capacity::Infinite && rho < 1.0 {
        let top: f64 = (0..nk).map(|k| probs[idx(cap, k)]).sum();
        top * rho / (1.0 - rho)
    } else {
        0.0
    };
    Ok(TruncatedSolution {
        probs,
        n_env: nk,
        n_levels,
        tail_mass_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvironmentSpec, QueueSpec};
    use crate::models;

    fn qt_entry(model: &ModelSpec, n: usize, from: &str, to: &str) -> f64 {
        let q = reduced_generator(model, n);
        let fi = model.env.labels().iter().position(|l| l == from).unwrap();
        let ti = model.env.labels().iter().position(|l| l == to).unwrap();
        q[(fi, ti)]
    }

    /// Environment of the two-state replenishment example with reorder point 1
    /// and stock 2, with level-dependent arrival rates.
    fn small_inventory_model(lambda: Vec<f64>, mu: f64, nu: f64) -> ModelSpec {
        let labels = vec!["0".to_string(), "1".to_string(), "2".to_string()];
        let v = Mat::from_rows(&[
            vec![-nu, 0.0, nu],
            vec![0.0, -nu, nu],
            vec![0.0, 0.0, 0.0],
        ]);
        let r = Mat::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ]);
        let env = EnvironmentSpec::new(labels, &["0".to_string()], v, r).unwrap();
        let queue = QueueSpec::new(lambda, vec![mu], Capacity::Infinite).unwrap();
        ModelSpec::new("small-inventory", queue, env)
    }

    #[test]
    fn reduced_generator_matches_worked_example() {
        let (lam, nu) = (1.3, 3.0);
        let model = small_inventory_model(vec![lam, lam], 2.0, nu);
        // expected rows in declared order 0,1,2:
        //   0: (-nu, 0, nu); 1: (lam, -(lam+nu), nu); 2: (0, lam, -lam)
        assert_eq!(qt_entry(&model, 0, "0", "0"), -nu);
        assert_eq!(qt_entry(&model, 0, "0", "1"), 0.0);
        assert_eq!(qt_entry(&model, 0, "0", "2"), nu);
        assert_eq!(qt_entry(&model, 0, "1", "0"), lam);
        assert_eq!(qt_entry(&model, 0, "1", "1"), -(lam + nu));
        assert_eq!(qt_entry(&model, 0, "1", "2"), nu);
        assert_eq!(qt_entry(&model, 0, "2", "0"), 0.0);
        assert_eq!(qt_entry(&model, 0, "2", "1"), lam);
        assert_eq!(qt_entry(&model, 0, "2", "2"), -lam);
    }

    #[test]
    fn reduced_generator_zero_for_identity_jumps_no_moves() {
        let env = EnvironmentSpec::new(
            vec!["a".into(), "b".into()],
            &[],
            Mat::zeros(2, 2),
            Mat::identity(2),
        )
        .unwrap();
        let model = ModelSpec::new(
            "static",
            QueueSpec::constant(1.0, 2.0, Capacity::Infinite).unwrap(),
            env,
        );
        let q = reduced_generator(&model, 0);
        assert_eq!(q.max_abs(), 0.0);
    }

    #[test]
    fn reduced_generator_rows_sum_to_zero() {
        let (model, _) = models::build_rs(2, 5, 1.0, &[2.0, 1.5, 2.5], &[3.0]).unwrap();
        for n in 0..=model.queue.tail_index() {
            let q = reduced_generator(&model, n);
            for k in 0..model.env.n_states() {
                assert!(q.row_sum(k).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn tandem_reduced_generator_is_birth_death() {
        let (model, _) = models::build_tandem(3, 1.1, &[2.0], &[0.7, 0.9, 1.3, 1.7]).unwrap();
        let q = reduced_generator(&model, 0);
        let labels = model.env.labels();
        for (i, li) in labels.iter().enumerate() {
            for (j, lj) in labels.iter().enumerate() {
                let ki: usize = li.parse().unwrap();
                let kj: usize = lj.parse().unwrap();
                let x = q[(i, j)];
                if ki == kj || ki + 1 == kj || kj + 1 == ki {
                    continue;
                }
                assert_eq!(x, 0.0, "entry ({ki},{kj}) should vanish");
            }
        }
    }

    #[test]
    fn product_form_replenishment_theta() {
        let (lam, mu, nu) = (1.0, 2.0, 3.0);
        let (model, _) = models::build_rs(2, 5, lam, &[mu], &[nu]).unwrap();
        let sol = solve_product_form(&model).unwrap();
        // expected: theta(0) ~ lam/nu, theta(k) ~ ((lam+nu)/lam)^(k-1) up to
        // the reorder point, constant above it
        let g = (lam + nu) / lam;
        let mut expect = [0.0; 6];
        for (k, e) in expect.iter_mut().enumerate() {
            *e = match k {
                0 => lam / nu,
                1..=2 => g.powi(k as i32 - 1),
                _ => g.powi(2),
            };
        }
        let tot: f64 = expect.iter().sum();
        for k in 0..6 {
            let label = k.to_string();
            let i = model.env.labels().iter().position(|l| *l == label).unwrap();
            assert!((sol.theta[i] - expect[k] / tot).abs() < 1e-12);
        }
    }

    #[test]
    fn product_form_requires_constant_arrivals_here() {
        let model = small_inventory_model(vec![1.0, 1.2], 5.0, 3.0);
        match solve_product_form(&model) {
            Err(SolveError::NotProductForm(msg)) => {
                assert!(msg.contains("level"), "{msg}");
            }
            other => panic!("expected NotProductForm, got {other:?}"),
        }
    }

    #[test]
    fn product_form_detects_unstable_queue() {
        let model = small_inventory_model(vec![2.0, 2.0], 2.0, 3.0);
        assert!(matches!(
            solve_product_form(&model),
            Err(SolveError::NotErgodic(_))
        ));
    }

    /// Reversible birth-death generator plus its uniformization jumps:
    /// the canonical construction that passes the finite-capacity test.
    fn uniformization_model(lams: &[f64], mus: &[f64], cap: usize) -> ModelSpec {
        // V: birth-death on {0,1,2,3}, reversible; blocking state 3
        let a = [0.9, 1.4, 0.6];
        let b = [1.1, 0.8, 1.2];
        let mut v = Mat::zeros(4, 4);
        for k in 0..3 {
            v[(k, k + 1)] = a[k];
            v[(k + 1, k)] = b[k];
        }
        for k in 0..4 {
            let off: f64 = (0..4).filter(|&j| j != k).map(|j| v[(k, j)]).sum();
            v[(k, k)] = -off;
        }
        // truncation of V to the working set {0,1,2}, diagonal re-closed
        let mut vw = Mat::zeros(3, 3);
        for k in 0..3 {
            for m in 0..3 {
                if k != m {
                    vw[(k, m)] = v[(k, m)];
                }
            }
        }
        for k in 0..3 {
            let off: f64 = (0..3).filter(|&j| j != k).map(|j| vw[(k, j)]).sum();
            vw[(k, k)] = -off;
        }
        let c = (0..3).fold(0.0f64, |m, k| m.max(-vw[(k, k)])) + 0.5;
        let mut r = Mat::zeros(4, 4);
        for k in 0..3 {
            for m in 0..3 {
                r[(k, m)] = if k == m { 1.0 } else { 0.0 } + vw[(k, m)] / c;
            }
        }
        r[(3, 3)] = 1.0;
        let env = EnvironmentSpec::new(
            vec!["0".into(), "1".into(), "2".into(), "3".into()],
            &["3".into()],
            v,
            r,
        )
        .unwrap();
        let queue = QueueSpec::new(lams.to_vec(), mus.to_vec(), Capacity::Finite(cap)).unwrap();
        ModelSpec::new("uniformization", queue, env)
    }

    #[test]
    fn finite_capacity_uniformization_construction_is_product_form() {
        let model = uniformization_model(&[1.0, 1.0], &[2.0], 4);
        let sol = solve_product_form_finite(&model).unwrap();
        // theta equals the stationary law of V itself
        let eta = numerics::stationary_of_generator(model.env.v()).unwrap();
        for k in 0..4 {
            assert!((sol.theta[k] - eta[k]).abs() < 1e-10);
        }
        // xi sums to one over 0..=cap+1
        let total: f64 = (0..=5).map(|n| sol.xi.xi(n)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn finite_capacity_theta_insensitive_to_rates() {
        let a = solve_product_form_finite(&uniformization_model(&[1.0, 1.0], &[2.0], 4)).unwrap();
        let b =
            solve_product_form_finite(&uniformization_model(&[0.3, 2.1, 0.7], &[1.1, 0.4], 4))
                .unwrap();
        let c = solve_product_form_finite(&uniformization_model(&[5.0, 5.0], &[0.5], 7)).unwrap();
        for k in 0..4 {
            assert!((a.theta[k] - b.theta[k]).abs() < 1e-10);
            assert!((a.theta[k] - c.theta[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn finite_capacity_rejects_replenishment_env() {
        let (infinite, _) = models::build_rs(2, 5, 1.0, &[2.0], &[3.0]).unwrap();
        let queue = QueueSpec::constant(1.0, 2.0, Capacity::Finite(3)).unwrap();
        let model = ModelSpec::new("rs-finite", queue, infinite.env);
        match solve_product_form_finite(&model) {
            Err(SolveError::NotProductForm(msg)) => {
                assert!(msg.contains("not closed"), "{msg}");
            }
            other => panic!("expected NotProductForm, got {other:?}"),
        }
    }

    #[test]
    fn truncated_solver_matches_product_form() {
        let (model, _) = models::build_rs(2, 5, 1.0, &[2.0], &[3.0]).unwrap();
        let pf = solve_product_form(&model).unwrap();
        let tr = direct_solve_truncated(&model, 60).unwrap();
        // compare on levels <= 30, both renormalized there
        let nk = model.env.n_states();
        let mass_pf: f64 = (0..=30).map(|n| pf.xi.xi(n)).sum();
        let mass_tr: f64 = (0..=30).map(|n| tr.level_marginal(n)).sum();
        let mut tv = 0.0;
        for n in 0..=30 {
            for k in 0..nk {
                tv += (pf.pi(n, k) / mass_pf - tr.pi(n, k) / mass_tr).abs();
            }
        }
        tv /= 2.0;
        assert!(tv <= 1e-8, "total variation {tv}");
    }

    #[test]
    fn truncated_solver_single_state_geometric() {
        let env = EnvironmentSpec::new(
            vec!["only".into()],
            &[],
            Mat::zeros(1, 1),
            Mat::identity(1),
        )
        .unwrap();
        let model = ModelSpec::new(
            "mm1",
            QueueSpec::constant(1.0, 2.0, Capacity::Infinite).unwrap(),
            env,
        );
        let tr = direct_solve_truncated(&model, 80).unwrap();
        let rho: f64 = 0.5;
        for n in 0..=20 {
            let expect = (1.0 - rho) * rho.powi(n);
            assert!((tr.pi(n as usize, 0) - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn truncated_solver_tandem_closed_form() {
        let lam = 1.0;
        let nus = [2.0, 1.5, 2.5];
        let (model, theta_cf) = models::build_tandem(1, lam, &[3.0], &nus[..2]).unwrap();
        let tr = direct_solve_truncated(&model, 60).unwrap();
        let pf = solve_product_form(&model).unwrap();
        for k in 0..model.env.n_states() {
            assert!((pf.theta[k] - theta_cf[k]).abs() < 1e-12);
            // joint law factorizes as xi(n) * theta(k)
            for n in 0..=10 {
                assert!((tr.pi(n, k) - pf.pi(n, k)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn theta_invariant_under_service_rate_changes() {
        let settings: [&[f64]; 3] = [&[2.0], &[1.4, 2.7], &[9.0, 0.8, 3.0]];
        let mut thetas = Vec::new();
        for mus in settings {
            let (model, _) = models::build_rs(2, 5, 1.0, mus, &[3.0]).unwrap();
            thetas.push(solve_product_form(&model).unwrap().theta);
        }
        for t in &thetas[1..] {
            for k in 0..t.len() {
                assert!((t[k] - thetas[0][k]).abs() <= 1e-10);
            }
        }
    }
}
