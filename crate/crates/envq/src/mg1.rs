//! Queues with generally distributed service observed at departures: the
//! upper-Hessenberg transition structure of the level chain, its stationary
//! recursion, the two-item inventory counterexample showing that the joint
//! law need not factorize, and the interference-free environment class for
//! which it provably does (tensor product of level and environment chains).

use crate::env::EnvironmentSpec;
use crate::numerics::{self, Mat, NumericsError, EPS_RES};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Mg1Error {
    #[error("not ergodic: {0}")]
    NotErgodic(String),
    #[error("environment constraint violated: {0}")]
    ConstraintViolated(String),
    #[error("self-check failed: {0}")]
    SelfCheck(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Service-time laws with closed-form arrival-count mixtures.
#[derive(Debug, Clone, PartialEq)]
pub enum ServiceLaw {
    /// Unit mass at `d`.
    Deterministic(f64),
    /// Exponential with the given rate.
    Exponential(f64),
    /// Sum of `stages` exponential phases of rate `rate`.
    Erlang { stages: usize, rate: f64 },
    /// Mixture over the phase count: weight `weights[l-1]` on `l` stages of
    /// rate `rate`. Dense in the distributions on the half-line.
    PhaseMixture { weights: Vec<f64>, rate: f64 },
}

impl ServiceLaw {
    pub fn mean(&self) -> f64 {
        match self {
            ServiceLaw::Deterministic(d) => *d,
            ServiceLaw::Exponential(rate) => 1.0 / rate,
            ServiceLaw::Erlang { stages, rate } => *stages as f64 / rate,
            ServiceLaw::PhaseMixture { weights, rate } => {
                weights
                    .iter()
                    .enumerate()
                    .map(|(i, w)| w * (i + 1) as f64)
                    .sum::<f64>()
                    / rate
            }
        }
    }

    pub fn validate(&self) -> Result<(), Mg1Error> {
        let bad = |msg: String| Err(Mg1Error::ConstraintViolated(msg));
        match self {
            ServiceLaw::Deterministic(d) if *d <= 0.0 => bad(format!("deterministic time {d}")),
            ServiceLaw::Exponential(r) if *r <= 0.0 => bad(format!("exponential rate {r}")),
            ServiceLaw::Erlang { stages, rate } if *stages == 0 || *rate <= 0.0 => {
                bad(format!("erlang stages {stages}, rate {rate}"))
            }
            ServiceLaw::PhaseMixture { weights, rate } => {
                if *rate <= 0.0 {
                    return bad(format!("mixture rate {rate}"));
                }
                if weights.is_empty() || weights.iter().any(|&w| w < 0.0) {
                    return bad("mixture weights must be nonnegative and nonempty".to_string());
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return bad(format!("mixture weights sum to {total}"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Draw a service time by inverse transform.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        fn exp_draw<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
            let u: f64 = rng.gen::<f64>();
            -(1.0 - u).ln() / rate
        }
        match self {
            ServiceLaw::Deterministic(d) => *d,
            ServiceLaw::Exponential(rate) => exp_draw(rng, *rate),
            ServiceLaw::Erlang { stages, rate } => {
                (0..*stages).map(|_| exp_draw(rng, *rate)).sum()
            }
            ServiceLaw::PhaseMixture { weights, rate } => {
                let u: f64 = rng.gen::<f64>();
                let mut acc = 0.0;
                let mut stages = weights.len();
                for (i, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        stages = i + 1;
                        break;
                    }
                }
                (0..stages).map(|_| exp_draw(rng, *rate)).sum()
            }
        }
    }
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

fn ln_binom(n: usize, k: usize) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Probability that a Poisson stream of rate `lambda` delivers exactly `n`
/// points during one service drawn from `law`. Closed forms: a Poisson
/// weight for deterministic times, negative-binomial weights for the
/// exponential family, accumulated in log space.
pub fn poisson_mix(law: &ServiceLaw, lambda: f64, n: usize) -> f64 {
    match law {
        ServiceLaw::Deterministic(d) => {
            let x = lambda * d;
            (-x + n as f64 * x.ln() - ln_factorial(n)).exp()
        }
        ServiceLaw::Exponential(rate) => negbin(1, *rate, lambda, n),
        ServiceLaw::Erlang { stages, rate } => negbin(*stages, *rate, lambda, n),
        ServiceLaw::PhaseMixture { weights, rate } => weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * negbin(i + 1, *rate, lambda, n))
            .sum(),
    }
}

/// Number of Poisson-`lambda` points during `stages` exponential phases of
/// `rate`: a negative binomial.
fn negbin(stages: usize, rate: f64, lambda: f64, n: usize) -> f64 {
    let ln_p = (rate / (lambda + rate)).ln();
    let ln_q = (lambda / (lambda + rate)).ln();
    (ln_binom(n + stages - 1, n) + stages as f64 * ln_p + n as f64 * ln_q).exp()
}

/// Upper-Hessenberg transition rows of the departure-observed level chain:
/// `rows[i-1][n]` is the probability of `n` admitted arrivals during a
/// service starting at level `i`; the last stored row repeats for all deeper
/// levels.
#[derive(Debug, Clone)]
pub struct HessenbergKernel {
    rows: Vec<Vec<f64>>,
}

impl HessenbergKernel {
    /// Build rows from per-level service laws (`laws[i-1]` applies at start
    /// level `i`, the last law repeats). Row length grows until every row
    /// holds all but `1e-14` of its mass; the leftover would otherwise
    /// resurface as a noise floor in the stationary recursion.
    pub fn from_laws(laws: &[ServiceLaw], lambda: f64) -> Result<Self, Mg1Error> {
        if laws.is_empty() {
            return Err(Mg1Error::ConstraintViolated(
                "need at least one service law".to_string(),
            ));
        }
        if lambda <= 0.0 {
            return Err(Mg1Error::ConstraintViolated(format!(
                "arrival rate {lambda}"
            )));
        }
        for law in laws {
            law.validate()?;
        }
        let mut n_max = 16usize;
        loop {
            let rows: Vec<Vec<f64>> = laws
                .iter()
                .map(|law| (0..=n_max).map(|n| poisson_mix(law, lambda, n)).collect())
                .collect();
            let worst: f64 = rows
                .iter()
                .map(|r: &Vec<f64>| 1.0 - r.iter().sum::<f64>())
                .fold(0.0, f64::max);
            if worst < 1e-14 {
                return Ok(HessenbergKernel { rows });
            }
            n_max *= 2;
            if n_max > 1 << 16 {
                return Err(Mg1Error::SelfCheck(
                    "arrival-count rows do not exhaust their mass".to_string(),
                ));
            }
        }
    }

    pub fn from_law(law: &ServiceLaw, lambda: f64) -> Result<Self, Mg1Error> {
        Self::from_laws(std::slice::from_ref(law), lambda)
    }

    /// `p(i, n)`: probability of `n` arrivals during a service starting at
    /// level `i >= 1`.
    pub fn p(&self, i: usize, n: usize) -> f64 {
        debug_assert!(i >= 1);
        let row = &self.rows[(i - 1).min(self.rows.len() - 1)];
        row.get(n).copied().unwrap_or(0.0)
    }

    /// Number of stored columns per row.
    pub fn n_cols(&self) -> usize {
        self.rows[0].len()
    }

    /// Level from which the rows repeat.
    pub fn i_tail(&self) -> usize {
        self.rows.len()
    }

    /// Mean number of arrivals per service in the repeating row.
    pub fn tail_drift(&self) -> f64 {
        self.rows
            .last()
            .unwrap()
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }
}

/// Stationary law of the upper-Hessenberg level chain by forward recursion:
/// each level balance releases the next unknown. Truncated once the
/// remaining geometric mass estimate drops below `1e-12`, then normalized.
pub fn hessenberg_stationary(kernel: &HessenbergKernel) -> Result<Vec<f64>, Mg1Error> {
    let drift = kernel.tail_drift();
    if drift >= 1.0 {
        return Err(Mg1Error::NotErgodic(format!(
            "mean arrivals per service {drift} >= 1"
        )));
    }
    let mut x = vec![1.0f64];
    let mut total = 1.0;
    let max_levels = 200_000usize;
    loop {
        let n = x.len() - 1;
        // balance at level n: x(n) = x(0) p(1,n) + sum_{i=1}^{n+1} x(i) p(i, n-i+1)
        let mut rhs = x[0] * kernel.p(1, n);
        for i in 1..=n {
            rhs += x[i] * kernel.p(i, n - i + 1);
        }
        let p0 = kernel.p(n + 1, 0);
        if p0 <= 0.0 {
            return Err(Mg1Error::SelfCheck(format!(
                "zero no-arrival probability at level {}",
                n + 1
            )));
        }
        // the subtraction bottoms out in a noise floor set by the kernel's
        // row residual; cut the tail there rather than tracking noise
        let raw = x[n] - rhs;
        let next = if raw < 1e-13 * total { 0.0 } else { raw / p0 };
        x.push(next);
        total += next;
        if x.len() > kernel.i_tail() + 8 {
            if next == 0.0 {
                break;
            }
            let prev = x[x.len() - 2];
            let ratio = next / prev;
            if ratio < 1.0 {
                let remaining = next * ratio / (1.0 - ratio);
                if remaining < 1e-12 * total {
                    break;
                }
            }
        }
        if x.len() > max_levels {
            return Err(Mg1Error::SelfCheck(
                "stationary recursion did not converge".to_string(),
            ));
        }
    }
    for v in &mut x {
        *v /= total;
    }
    Ok(x)
}

/// Stationary law of the departure-observed level chain for deterministic
/// unit-rate service of length `1/mu` and Poisson-`lambda` input.
pub fn md1_stationary(lambda: f64, mu: f64) -> Result<Vec<f64>, Mg1Error> {
    let kernel = HessenbergKernel::from_law(&ServiceLaw::Deterministic(1.0 / mu), lambda)?;
    hessenberg_stationary(&kernel)
}

// ---------------------------------------------------------------------------
// Deterministic service with a two-item replenishment stock: no product form
// ---------------------------------------------------------------------------

/// Outcome of the two-item inventory counterexample.
#[derive(Debug, Clone)]
pub struct CounterexampleReport {
    /// Ratio the level-0 balance forces between the blocked and single-item
    /// stock weights, were the law a product.
    pub ratio_level0: f64,
    /// Same ratio forced by the level-1 balance.
    pub ratio_level1: f64,
    pub product_form_refuted: bool,
    /// Total variation between the level marginal of the direct solve and
    /// the plain deterministic-service level law.
    pub marginal_tv: f64,
    /// Smallest L1 residual over the tested rank-one approximations of the
    /// joint law (independence product and the L2-optimal rank-one fit).
    pub rank_one_l1_residual: f64,
    /// Joint stationary law of the truncated chain, `joint[n][k]` with the
    /// stock ordered (2, 1, 0).
    pub joint: Vec<Vec<f64>>,
}

/// Deterministic-service queue with a stock of at most two items, refill
/// rate `nu`, reorder point one, lost sales. The embedded chain's stationary
/// law provably does not factorize; the two would-be defining ratios are
/// evaluated in closed form and the truncated chain is solved directly.
pub fn md1_inventory_counterexample(
    lambda: f64,
    mu: f64,
    nu: f64,
) -> Result<CounterexampleReport, Mg1Error> {
    let rho = lambda / mu;
    if rho >= 1.0 {
        return Err(Mg1Error::NotErgodic(format!("rho = {rho} >= 1")));
    }
    if nu <= 0.0 {
        return Err(Mg1Error::ConstraintViolated(format!("refill rate {nu}")));
    }
    let e_joint = (-(lambda + nu) / mu).exp();
    let e_rho = rho.exp();
    let frac = lambda / (nu + lambda);
    let ratio_level0 = e_joint * (frac + e_rho - 1.0);
    let ratio_level1 =
        e_joint * (frac * rho / (e_rho - 1.0) + rho + e_rho * (e_rho - rho - 1.0) / (e_rho - 1.0));
    let product_form_refuted = (ratio_level0 - ratio_level1).abs() > 1e-6;

    // block structure of the embedded transition matrix, stock order (2,1,0)
    let e_nu = (-nu / mu).exp();
    let a_base = Mat::from_rows(&[
        vec![0.0, 1.0, 0.0],
        vec![0.0, 1.0 - e_nu, e_nu],
        vec![0.0, 1.0, 0.0],
    ]);
    let b_base = Mat::from_rows(&[
        vec![0.0, 1.0, 0.0],
        vec![0.0, 1.0 - frac * e_nu, frac * e_nu],
        vec![0.0, 1.0, 0.0],
    ]);
    let xi_plain = md1_stationary(lambda, mu)?;
    let cap = xi_plain.len() + 20;
    let p: Vec<f64> = {
        let kernel = HessenbergKernel::from_law(&ServiceLaw::Deterministic(1.0 / mu), lambda)?;
        (0..=cap).map(|n| kernel.p(1, n)).collect()
    };
    let nk = 3usize;
    let dim = (cap + 1) * nk;
    let mut pmat = Mat::zeros(dim, dim);
    let put = |pmat: &mut Mat, from_level: usize, to_level: usize, w: f64, base: &Mat| {
        for k in 0..nk {
            for m in 0..nk {
                pmat[(from_level * nk + k, to_level * nk + m)] += w * base[(k, m)];
            }
        }
    };
    for n in 0..=cap {
        put(&mut pmat, 0, n, p[n], &b_base);
    }
    // lump the inadmissible overflow of row 0 into the top level
    let b_res: f64 = 1.0 - p.iter().sum::<f64>();
    put(&mut pmat, 0, cap, b_res, &b_base);
    for i in 1..=cap {
        let mut used = 0.0;
        for n in 0..=(cap - i + 1) {
            put(&mut pmat, i, i + n - 1, p[n], &a_base);
            used += p[n];
        }
        put(&mut pmat, i, cap, 1.0 - used, &a_base);
    }
    let stat = numerics::stationary_of_stochastic(&pmat)?;
    let joint: Vec<Vec<f64>> = (0..=cap)
        .map(|n| (0..nk).map(|k| stat[n * nk + k]).collect())
        .collect();

    let mut marginal_tv = 0.0;
    for (n, row) in joint.iter().enumerate() {
        let level: f64 = row.iter().sum();
        let plain = xi_plain.get(n).copied().unwrap_or(0.0);
        marginal_tv += (level - plain).abs();
    }
    marginal_tv /= 2.0;

    let rank_one_l1_residual = best_rank_one_l1_residual(&joint);

    Ok(CounterexampleReport {
        ratio_level0,
        ratio_level1,
        product_form_refuted,
        marginal_tv,
        rank_one_l1_residual,
        joint,
    })
}

/// L1 residual of the better of two rank-one fits: the product of the
/// marginals, and the L2-optimal rank-one approximation from a power
/// iteration on the small Gram matrix.
fn best_rank_one_l1_residual(joint: &[Vec<f64>]) -> f64 {
    let rows = joint.len();
    let cols = joint[0].len();
    let level: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let phase: Vec<f64> = (0..cols)
        .map(|k| joint.iter().map(|r| r[k]).sum())
        .collect();
    let mut l1_product = 0.0;
    for n in 0..rows {
        for k in 0..cols {
            l1_product += (joint[n][k] - level[n] * phase[k]).abs();
        }
    }

    // power iteration on J^T J for the dominant right singular vector
    let mut v = vec![1.0 / (cols as f64).sqrt(); cols];
    for _ in 0..200 {
        // w = J^T (J v)
        let jv: Vec<f64> = joint
            .iter()
            .map(|r| r.iter().zip(&v).map(|(a, b)| a * b).sum())
            .collect();
        let mut w = vec![0.0; cols];
        for (n, row) in joint.iter().enumerate() {
            for k in 0..cols {
                w[k] += row[k] * jv[n];
            }
        }
        let norm: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        v = w.iter().map(|x| x / norm).collect();
    }
    let jv: Vec<f64> = joint
        .iter()
        .map(|r| r.iter().zip(&v).map(|(a, b)| a * b).sum())
        .collect();
    let mut l1_svd = 0.0;
    for n in 0..rows {
        for k in 0..cols {
            l1_svd += (joint[n][k] - jv[n] * v[k]).abs();
        }
    }
    l1_product.min(l1_svd)
}

// ---------------------------------------------------------------------------
// Interference-free environments: tensor-product steady state
// ---------------------------------------------------------------------------

/// Environment transition per departure cycle for interference-free
/// environments: `(I_W - V)^{-1} I_W R`.
///
/// Interference-free means the environment never moves on its own while the
/// server works (`v(k, .) = 0` on working states), and every blocking state
/// has an exit rate. The inner factor `(I_W - V)^{-1} I_W` resolves a
/// blocking stretch into the working state it ends in; it is verified to be
/// idempotent, and the product to be stochastic.
pub fn h_matrix(env: &EnvironmentSpec) -> Result<Mat, Mg1Error> {
    let n = env.n_states();
    let v = env.v();
    for k in 0..env.n_working() {
        for m in 0..n {
            if k != m && v[(k, m)].abs() > 1e-12 {
                return Err(Mg1Error::ConstraintViolated(format!(
                    "environment moves autonomously in working state {}: rate to {} is {}",
                    env.label(k),
                    env.label(m),
                    v[(k, m)]
                )));
            }
        }
    }
    for k in env.n_working()..n {
        if v[(k, k)].abs() <= 0.0 {
            return Err(Mg1Error::ConstraintViolated(format!(
                "blocking state {} has no exit rate",
                env.label(k)
            )));
        }
    }
    let iw = env.working_projector();
    let core = numerics::inverse(&iw.sub(v))?.matmul(&iw);
    let idem = core.matmul(&core).sub(&core).max_abs();
    if idem > EPS_RES {
        return Err(Mg1Error::SelfCheck(format!(
            "blocking-resolution matrix is not idempotent (deviation {idem:.3e})"
        )));
    }
    let h = core.matmul(env.r());
    for k in 0..n {
        if (h.row_sum(k) - 1.0).abs() > EPS_RES {
            return Err(Mg1Error::SelfCheck(format!(
                "departure-cycle matrix row {k} sums to {}",
                h.row_sum(k)
            )));
        }
    }
    Ok(h)
}

/// Tensor-product stationary law of the departure-observed chain for an
/// interference-free environment.
#[derive(Debug, Clone)]
pub struct Mg1ProductForm {
    pub xi_hat: Vec<f64>,
    pub theta_hat: Vec<f64>,
    /// L1 residual of the tensor product under the truncated transition
    /// matrix; small by construction.
    pub residual: f64,
}

impl Mg1ProductForm {
    pub fn pi_hat(&self, n: usize, k: usize) -> f64 {
        self.xi_hat.get(n).copied().unwrap_or(0.0) * self.theta_hat[k]
    }
}

/// Solve the interference-free model: level factor from the Hessenberg
/// recursion, environment factor from the departure-cycle matrix, and an
/// explicit residual check of the tensor product on the truncated joint
/// transition matrix.
pub fn mg1_product_form(
    kernel: &HessenbergKernel,
    env: &EnvironmentSpec,
) -> Result<Mg1ProductForm, Mg1Error> {
    let h = h_matrix(env)?;
    let xi_hat = hessenberg_stationary(kernel)?;
    let theta_hat = numerics::stationary_of_stochastic(&h)?;

    // truncated joint transition: levels 0..=cap, overflow lumped at the cap
    let cap = xi_hat.len() - 1;
    let nk = env.n_states();
    let dim = (cap + 1) * nk;
    let mut pmat = Mat::zeros(dim, dim);
    for i in 0..=cap {
        let src_level = i.max(1); // level 0 behaves like level 1 after the first admission
        let lowest = i.saturating_sub(1);
        let mut used = 0.0;
        for target in lowest..=cap {
            let n = target - lowest;
            let w = kernel.p(src_level, n);
            used += w;
            for k in 0..nk {
                for m in 0..nk {
                    pmat[(i * nk + k, target * nk + m)] += w * h[(k, m)];
                }
            }
        }
        let res = 1.0 - used;
        for k in 0..nk {
            for m in 0..nk {
                pmat[(i * nk + k, cap * nk + m)] += res * h[(k, m)];
            }
        }
    }
    let mut pi: Vec<f64> = Vec::with_capacity(dim);
    for n in 0..=cap {
        for k in 0..nk {
            pi.push(xi_hat[n] * theta_hat[k]);
        }
    }
    let after = pmat.left_mul(&pi);
    let residual: f64 = pi.iter().zip(&after).map(|(a, b)| (a - b).abs()).sum();

    Ok(Mg1ProductForm {
        xi_hat,
        theta_hat,
        residual,
    })
}

// ---------------------------------------------------------------------------
// Ready-made interference-free environments
// ---------------------------------------------------------------------------

/// Stock cycling through `{r+1..s}` with instantaneous replenishment:
/// no blocking and no autonomous moves, departures step the stock down and
/// wrap from `r+1` to `s`.
pub fn zero_lead_env(r: usize, s: usize) -> EnvironmentSpec {
    assert!(r < s);
    let labels: Vec<String> = ((r + 1)..=s).map(|k| k.to_string()).collect();
    let n = labels.len();
    let mut rm = Mat::zeros(n, n);
    for (i, _) in labels.iter().enumerate() {
        if i == 0 {
            rm[(0, n - 1)] = 1.0;
        } else {
            rm[(i, i - 1)] = 1.0;
        }
    }
    EnvironmentSpec::new(labels, &[], Mat::zeros(n, n), rm).expect("valid by construction")
}

/// Stock on `{0..s}` refilled to full at rate `nu` once empty; empty stock
/// blocks. Departures step the stock down.
pub fn full_refill_env(s: usize, nu: f64) -> EnvironmentSpec {
    assert!(s >= 1 && nu > 0.0);
    let labels: Vec<String> = (0..=s).map(|k| k.to_string()).collect();
    let n = labels.len();
    let mut v = Mat::zeros(n, n);
    v[(0, s)] = nu;
    v[(0, 0)] = -nu;
    let mut rm = Mat::zeros(n, n);
    rm[(0, 0)] = 1.0;
    for k in 1..=s {
        rm[(k, k - 1)] = 1.0;
    }
    EnvironmentSpec::new(labels, &["0".to_string()], v, rm).expect("valid by construction")
}

/// Single working state; after each departure the server walks away with
/// probability `p_leave` and returns at rate `nu`.
pub fn vacation_env(p_leave: f64, nu: f64) -> EnvironmentSpec {
    assert!((0.0..1.0).contains(&p_leave) && nu > 0.0);
    let labels = vec!["busy".to_string(), "away".to_string()];
    let v = Mat::from_rows(&[vec![0.0, 0.0], vec![nu, -nu]]);
    let r = Mat::from_rows(&[vec![1.0 - p_leave, p_leave], vec![0.0, 1.0]]);
    EnvironmentSpec::new(labels, &["away".to_string()], v, r).expect("valid by construction")
}
