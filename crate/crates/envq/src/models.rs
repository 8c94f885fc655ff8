//! Builders for the application models: replenishment inventories with
//! order-up-to and fixed-batch policies (exponential or phase-type lead
//! times), unreliable servers, a sensor node, a two-stage tandem with finite
//! intermediate buffer, and a service-counter maintenance model with its
//! cost optimizer. Where a closed-form environment law is known the builder
//! returns it alongside the model, aligned with the environment's internal
//! state order.

use crate::env::{Capacity, EnvironmentSpec, ModelError, ModelSpec, QueueSpec};
use crate::numerics::Mat;
use std::collections::HashMap;
use std::ops::RangeInclusive;

fn invalid(msg: impl Into<String>) -> ModelError {
    ModelError::InvalidParameter(msg.into())
}

/// Rate at index `k` of a sequence with an eventual-constant tail.
fn rate_at(seq: &[f64], k: usize) -> f64 {
    seq[k.min(seq.len() - 1)]
}

/// Normalize a label->weight table into a probability vector in the
/// environment's internal state order.
fn theta_from_labels(env: &EnvironmentSpec, weights: HashMap<String, f64>) -> Vec<f64> {
    let mut theta: Vec<f64> = env
        .labels()
        .iter()
        .map(|l| *weights.get(l).expect("missing closed-form weight"))
        .collect();
    let total: f64 = theta.iter().sum();
    for t in &mut theta {
        *t /= total;
    }
    theta
}

fn close_generator_rows(v: &mut Mat) {
    for k in 0..v.n_rows() {
        let off: f64 = (0..v.n_cols()).filter(|&j| j != k).map(|j| v[(k, j)]).sum();
        v[(k, k)] = -off;
    }
}

fn check_positive(name: &str, value: f64) -> Result<(), ModelError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive, got {value}")))
    }
}

// ---------------------------------------------------------------------------
// Lost-sales inventories with exponential lead times
// ---------------------------------------------------------------------------

/// Order-up-to policy: reorder at or below `r`, refill to `s`. The stock is
/// the environment; stock 0 blocks. `nu[k]` is the replenishment rate while
/// the stock sits at `k` (constant tail).
pub fn build_rs(
    r: usize,
    s: usize,
    lambda: f64,
    mu: &[f64],
    nu: &[f64],
) -> Result<(ModelSpec, Vec<f64>), ModelError> {
    if r >= s {
        return Err(invalid(format!("need r < S, got r={r}, S={s}")));
    }
    check_positive("lambda", lambda)?;
    for (i, &x) in nu.iter().enumerate() {
        if x <= 0.0 {
            return Err(invalid(format!("nu[{i}] must be positive")));
        }
    }
    let n = s + 1;
    let labels: Vec<String> = (0..=s).map(|k| k.to_string()).collect();
    let mut v = Mat::zeros(n, n);
    for k in 0..=r {
        v[(k, s)] = rate_at(nu, k);
    }
    close_generator_rows(&mut v);
    let mut rm = Mat::zeros(n, n);
    rm[(0, 0)] = 1.0;
    for k in 1..=s {
        rm[(k, k - 1)] = 1.0;
    }
    let env = EnvironmentSpec::new(labels, &["0".to_string()], v, rm)?;
    let queue = QueueSpec::new(vec![lambda, lambda], mu.to_vec(), Capacity::Infinite)?;

    // stationary environment law: theta(1) = 1, theta(0) = lambda/nu_0,
    // theta(k+1) = theta(k) (lambda + nu_k)/lambda while k <= r, constant
    // above the reorder point
    let mut w = HashMap::new();
    w.insert("0".to_string(), lambda / rate_at(nu, 0));
    let mut cur = 1.0;
    w.insert("1".to_string(), cur);
    for k in 1..s {
        if k <= r {
            cur *= (lambda + rate_at(nu, k)) / lambda;
        }
        w.insert((k + 1).to_string(), cur);
    }
    let model = ModelSpec::new(format!("rs-inventory r={r} S={s}"), queue, env);
    let theta = theta_from_labels(&model.env, w);
    Ok((model, theta))
}

/// Fixed-batch policy: reorder at or below `r`, every replenishment adds
/// exactly `q` items. Stock lives on `{0..r+q}`.
pub fn build_rq(
    r: usize,
    q: usize,
    lambda: f64,
    mu: &[f64],
    nu: &[f64],
) -> Result<(ModelSpec, Vec<f64>), ModelError> {
    if r >= q {
        return Err(invalid(format!("need r < Q, got r={r}, Q={q}")));
    }
    check_positive("lambda", lambda)?;
    for (i, &x) in nu.iter().enumerate() {
        if x <= 0.0 {
            return Err(invalid(format!("nu[{i}] must be positive")));
        }
    }
    let top = r + q;
    let n = top + 1;
    let labels: Vec<String> = (0..=top).map(|k| k.to_string()).collect();
    let mut v = Mat::zeros(n, n);
    for k in 0..=r {
        v[(k, k + q)] = rate_at(nu, k);
    }
    close_generator_rows(&mut v);
    let mut rm = Mat::zeros(n, n);
    rm[(0, 0)] = 1.0;
    for k in 1..=top {
        rm[(k, k - 1)] = 1.0;
    }
    let env = EnvironmentSpec::new(labels, &["0".to_string()], v, rm)?;
    let queue = QueueSpec::new(vec![lambda, lambda], mu.to_vec(), Capacity::Infinite)?;

    // forward recursion on the balance equations; theta(1) = 1
    let mut t = vec![0.0; n];
    t[0] = lambda / rate_at(nu, 0);
    t[1] = 1.0;
    for m in 1..top {
        let own = if m <= r { lambda + rate_at(nu, m) } else { lambda };
        let feed = if m >= q && m - q <= r {
            t[m - q] * rate_at(nu, m - q)
        } else {
            0.0
        };
        t[m + 1] = (t[m] * own - feed) / lambda;
    }
    let w: HashMap<String, f64> = t
        .iter()
        .enumerate()
        .map(|(k, &x)| (k.to_string(), x))
        .collect();
    let model = ModelSpec::new(format!("rq-inventory r={r} Q={q}"), queue, env);
    let theta = theta_from_labels(&model.env, w);
    Ok((model, theta))
}

// ---------------------------------------------------------------------------
// Phase-type lead times
// ---------------------------------------------------------------------------

/// Lead time distributed as a mixture of Erlang stages: weight `b[l-1]` on
/// `l` consecutive exponential phases of rate `beta`.
#[derive(Debug, Clone)]
pub struct PhaseLeadTimeSpec {
    pub beta: f64,
    pub weights: Vec<f64>,
    pub r: usize,
    pub s: usize,
}

impl PhaseLeadTimeSpec {
    pub fn phases(&self) -> usize {
        self.weights.len()
    }

    fn check(&self) -> Result<(), ModelError> {
        check_positive("beta", self.beta)?;
        if self.r >= self.s {
            return Err(invalid(format!("need r < S, got r={}, S={}", self.r, self.s)));
        }
        if self.weights.is_empty() {
            return Err(invalid("phase weights must be nonempty"));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("phase weights sum to {total}, expected 1")));
        }
        if self.weights.iter().any(|&b| b < 0.0) {
            return Err(invalid("phase weights must be nonnegative"));
        }
        if *self.weights.last().unwrap() <= 0.0 {
            return Err(invalid("the last phase weight must be positive"));
        }
        Ok(())
    }
}

fn phase_label(j: usize, l: usize) -> String {
    format!("{j}:{l}")
}

fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * ((n - i) as f64) / ((i + 1) as f64);
    }
    acc
}

/// Order-up-to policy with a phase-type lead time. While a replenishment is
/// pending (stock at or below `r`) the environment also tracks the number of
/// remaining lead-time phases; stock 0 blocks regardless of phase.
pub fn build_rs_phase(
    spec: &PhaseLeadTimeSpec,
    lambda: f64,
    mu: &[f64],
) -> Result<(ModelSpec, Vec<f64>), ModelError> {
    spec.check()?;
    check_positive("lambda", lambda)?;
    let (r, s, lp, beta) = (spec.r, spec.s, spec.phases(), spec.beta);
    let b = &spec.weights;

    let mut labels: Vec<String> = ((r + 1)..=s).map(|k| k.to_string()).collect();
    for j in (0..=r).rev() {
        for l in (1..=lp).rev() {
            labels.push(phase_label(j, l));
        }
    }
    let blocking: Vec<String> = (1..=lp).rev().map(|l| phase_label(0, l)).collect();
    let n = labels.len();
    let pos: HashMap<&String, usize> = labels.iter().enumerate().map(|(i, l)| (l, i)).collect();
    let at = |l: &String| pos[l];

    let mut rm = Mat::zeros(n, n);
    for k in (r + 2)..=s {
        rm[(at(&k.to_string()), at(&(k - 1).to_string()))] = 1.0;
    }
    for l in 1..=lp {
        rm[(at(&(r + 1).to_string()), at(&phase_label(r, l)))] = b[l - 1];
    }
    for j in 1..=r {
        for l in 1..=lp {
            rm[(at(&phase_label(j, l)), at(&phase_label(j - 1, l)))] = 1.0;
        }
    }
    for l in 1..=lp {
        let i = at(&phase_label(0, l));
        rm[(i, i)] = 1.0;
    }
    let mut v = Mat::zeros(n, n);
    for j in 0..=r {
        for l in 2..=lp {
            v[(at(&phase_label(j, l)), at(&phase_label(j, l - 1)))] = beta;
        }
        v[(at(&phase_label(j, 1)), at(&s.to_string()))] = beta;
    }
    close_generator_rows(&mut v);

    let env = EnvironmentSpec::new(labels, &blocking, v, rm)?;
    let queue = QueueSpec::new(vec![lambda, lambda], mu.to_vec(), Capacity::Infinite)?;

    // closed-form environment law; the plain-stock states share one value
    let ratio = (lambda + beta) / lambda;
    let down = beta / (lambda + beta);
    let mut w = HashMap::new();
    for k in (r + 1)..=s {
        w.insert(k.to_string(), ratio.powi(r as i32));
    }
    if r > 0 {
        for j in 1..=r {
            for l in 1..=lp {
                let sum: f64 = (l..=lp)
                    .map(|i| b[i - 1] * down.powi((i - l) as i32) * binom(i - l + r - j, r - j))
                    .sum();
                w.insert(phase_label(j, l), ratio.powi(j as i32 - 1) * sum);
            }
        }
        for l in 1..=lp {
            let sum: f64 = (l..=lp)
                .map(|i| {
                    let tail: f64 = (i..=lp).map(|g| b[g - 1]).sum();
                    tail * down.powi((i - l) as i32) * binom(i - l + r - 1, r - 1)
                })
                .sum();
            w.insert(phase_label(0, l), lambda / beta * sum);
        }
    } else {
        for l in 1..=lp {
            let tail: f64 = (l..=lp).map(|i| b[i - 1]).sum();
            w.insert(phase_label(0, l), lambda / beta * tail);
        }
    }
    let model = ModelSpec::new(
        format!("rs-inventory-phase r={r} S={s} L={lp}"),
        queue,
        env,
    );
    let theta = theta_from_labels(&model.env, w);
    Ok((model, theta))
}

/// Fixed-batch policy with a phase-type lead time. No closed form is carried
/// here; the environment law comes from the continuous-time solver.
pub fn build_rq_phase(
    spec: &PhaseLeadTimeSpec,
    q: usize,
    lambda: f64,
    mu: &[f64],
) -> Result<ModelSpec, ModelError> {
    spec.check()?;
    check_positive("lambda", lambda)?;
    if spec.r >= q {
        return Err(invalid(format!("need r < Q, got r={}, Q={q}", spec.r)));
    }
    let (r, lp, beta) = (spec.r, spec.phases(), spec.beta);
    let b = &spec.weights;
    let top = r + q;

    let mut labels: Vec<String> = ((r + 1)..=top).map(|k| k.to_string()).collect();
    for j in (0..=r).rev() {
        for l in (1..=lp).rev() {
            labels.push(phase_label(j, l));
        }
    }
    let blocking: Vec<String> = (1..=lp).rev().map(|l| phase_label(0, l)).collect();
    let n = labels.len();
    let pos: HashMap<&String, usize> = labels.iter().enumerate().map(|(i, l)| (l, i)).collect();
    let at = |l: &String| pos[l];

    let mut rm = Mat::zeros(n, n);
    for k in (r + 2)..=top {
        rm[(at(&k.to_string()), at(&(k - 1).to_string()))] = 1.0;
    }
    for l in 1..=lp {
        rm[(at(&(r + 1).to_string()), at(&phase_label(r, l)))] = b[l - 1];
    }
    for j in 1..=r {
        for l in 1..=lp {
            rm[(at(&phase_label(j, l)), at(&phase_label(j - 1, l)))] = 1.0;
        }
    }
    for l in 1..=lp {
        let i = at(&phase_label(0, l));
        rm[(i, i)] = 1.0;
    }
    let mut v = Mat::zeros(n, n);
    for j in 0..=r {
        for l in 2..=lp {
            v[(at(&phase_label(j, l)), at(&phase_label(j, l - 1)))] = beta;
        }
        v[(at(&phase_label(j, 1)), at(&(j + q).to_string()))] = beta;
    }
    close_generator_rows(&mut v);

    let env = EnvironmentSpec::new(labels, &blocking, v, rm)?;
    let queue = QueueSpec::new(vec![lambda, lambda], mu.to_vec(), Capacity::Infinite)?;
    Ok(ModelSpec::new(
        format!("rq-inventory-phase r={r} Q={q} L={lp}"),
        queue,
        env,
    ))
}

// ---------------------------------------------------------------------------
// Unreliable server, sensor node, tandem
// ---------------------------------------------------------------------------

/// Generic unreliable-server wrapper: any environment read as availability
/// states. Whether the steady state factorizes is decided by the solver.
pub fn build_unreliable(
    env: EnvironmentSpec,
    lambda: f64,
    mu: &[f64],
) -> Result<ModelSpec, ModelError> {
    check_positive("lambda", lambda)?;
    let queue = QueueSpec::new(vec![lambda, lambda], mu.to_vec(), Capacity::Infinite)?;
    Ok(ModelSpec::new("unreliable-server", queue, env))
}

/// Wireless sensor node: the node alternates active/sleep (rates `a`, `s`),
/// its neighborhood alternates on/off (rates `alpha`, `beta`), packets flow
/// only when the node is active and the neighborhood on. Departure jumps do
/// not move the environment.
pub fn build_sensor_node(
    lambda: f64,
    mu: f64,
    alpha: f64,
    beta: f64,
    a: f64,
    s: f64,
) -> Result<ModelSpec, ModelError> {
    for (name, val) in [
        ("lambda", lambda),
        ("mu", mu),
        ("alpha", alpha),
        ("beta", beta),
        ("a", a),
        ("s", s),
    ] {
        check_positive(name, val)?;
    }
    let labels: Vec<String> = ["A1", "A0", "S1", "S0"].map(String::from).to_vec();
    let blocking: Vec<String> = ["A0", "S1", "S0"].map(String::from).to_vec();
    let at = |l: &str| labels.iter().position(|x| x == l).unwrap();
    let mut v = Mat::zeros(4, 4);
    for (mode, on) in [("A", "S"), ("S", "A")] {
        let rate = if mode == "A" { a } else { s };
        for bit in ["1", "0"] {
            v[(at(&format!("{mode}{bit}")), at(&format!("{on}{bit}")))] = rate;
        }
    }
    for (bit, other) in [("1", "0"), ("0", "1")] {
        let rate = if bit == "1" { alpha } else { beta };
        for mode in ["A", "S"] {
            v[(at(&format!("{mode}{bit}")), at(&format!("{mode}{other}")))] = rate;
        }
    }
    close_generator_rows(&mut v);
    let env = EnvironmentSpec::new(labels, &blocking, v, Mat::identity(4))?;
    let queue = QueueSpec::new(vec![lambda, lambda], vec![mu], Capacity::Infinite)?;
    Ok(ModelSpec::new("sensor-node", queue, env))
}

/// Two-stage tandem with a finite intermediate buffer of `n_buf` places:
/// the buffer content is the environment; a full buffer (content
/// `n_buf + 1`) blocks the first stage. `nus[k-1]` is the second-stage
/// service rate with `k` units present (constant tail).
pub fn build_tandem(
    n_buf: usize,
    lambda: f64,
    mu: &[f64],
    nus: &[f64],
) -> Result<(ModelSpec, Vec<f64>), ModelError> {
    check_positive("lambda", lambda)?;
    for (i, &x) in nus.iter().enumerate() {
        if x <= 0.0 {
            return Err(invalid(format!("nu[{i}] must be positive")));
        }
    }
    let top = n_buf + 1;
    let labels: Vec<String> = (0..=top).map(|k| k.to_string()).collect();
    let n = labels.len();
    let mut v = Mat::zeros(n, n);
    for k in 1..=top {
        v[(k, k - 1)] = rate_at(nus, k - 1);
    }
    close_generator_rows(&mut v);
    let mut rm = Mat::zeros(n, n);
    for k in 0..top {
        rm[(k, k + 1)] = 1.0;
    }
    rm[(top, top)] = 1.0;
    let env = EnvironmentSpec::new(labels, &[top.to_string()], v, rm)?;
    let queue = QueueSpec::new(vec![lambda, lambda], mu.to_vec(), Capacity::Infinite)?;

    let mut w = HashMap::new();
    let mut cur = 1.0;
    w.insert("0".to_string(), cur);
    for k in 1..=top {
        cur *= lambda / rate_at(nus, k - 1);
        w.insert(k.to_string(), cur);
    }
    let model = ModelSpec::new(format!("tandem buffer={n_buf}"), queue, env);
    let theta = theta_from_labels(&model.env, w);
    Ok((model, theta))
}

// ---------------------------------------------------------------------------
// Maintenance counter model and its optimizer
// ---------------------------------------------------------------------------

/// Failure rate after `k` completed services.
#[derive(Debug, Clone)]
pub enum FailureRates {
    Constant(f64),
    Linear(f64),
    Table(Vec<f64>),
}

impl FailureRates {
    pub fn rate(&self, k: usize) -> f64 {
        match self {
            FailureRates::Constant(v) => *v,
            FailureRates::Linear(slope) => slope * k as f64,
            FailureRates::Table(t) => t[k.min(t.len() - 1)],
        }
    }
}

/// Costs per unit time in the respective states.
#[derive(Debug, Clone, Copy)]
pub struct MaintenanceCosts {
    pub maintenance: f64,
    pub repair: f64,
    pub blocked: f64,
    pub waiting: f64,
}

/// Parameters of the maintenance model, everything except the threshold.
#[derive(Debug, Clone)]
pub struct MaintenancePolicy {
    pub lambda: f64,
    pub mu: Vec<f64>,
    pub nu_maint: f64,
    pub nu_repair: f64,
    pub failure: FailureRates,
    pub costs: MaintenanceCosts,
}

impl MaintenancePolicy {
    fn check(&self) -> Result<(), ModelError> {
        check_positive("lambda", self.lambda)?;
        check_positive("nu_maint", self.nu_maint)?;
        check_positive("nu_repair", self.nu_repair)?;
        for c in [
            self.costs.maintenance,
            self.costs.repair,
            self.costs.blocked,
            self.costs.waiting,
        ] {
            if c < 0.0 {
                return Err(invalid("costs must be nonnegative"));
            }
        }
        Ok(())
    }
}

pub const MAINT_LABEL: &str = "bm";
pub const REPAIR_LABEL: &str = "br";

/// Server with a wear counter: after `n_threshold` services maintenance is
/// mandatory; failures occur at counter-dependent rates and trigger repair.
/// Both repair and maintenance block the queue. The closed-form environment
/// law is returned alongside (geometric-like in the counter).
pub fn build_maintenance(
    policy: &MaintenancePolicy,
    n_threshold: usize,
) -> Result<(ModelSpec, Vec<f64>), ModelError> {
    policy.check()?;
    if n_threshold == 0 {
        return Err(invalid("maintenance threshold must be at least 1"));
    }
    let nt = n_threshold;
    let lam = policy.lambda;
    let mut labels: Vec<String> = (0..nt).map(|k| k.to_string()).collect();
    labels.push(MAINT_LABEL.to_string());
    labels.push(REPAIR_LABEL.to_string());
    let n = labels.len();
    let (bm, br) = (nt, nt + 1);
    let mut v = Mat::zeros(n, n);
    for k in 0..nt {
        v[(k, br)] = policy.failure.rate(k);
    }
    v[(bm, 0)] = policy.nu_maint;
    v[(br, 0)] = policy.nu_repair;
    close_generator_rows(&mut v);
    let mut rm = Mat::zeros(n, n);
    for k in 0..nt.saturating_sub(1) {
        rm[(k, k + 1)] = 1.0;
    }
    rm[(nt - 1, bm)] = 1.0;
    rm[(bm, bm)] = 1.0;
    rm[(br, br)] = 1.0;
    let env = EnvironmentSpec::new(
        labels,
        &[MAINT_LABEL.to_string(), REPAIR_LABEL.to_string()],
        v,
        rm,
    )?;
    let queue = QueueSpec::new(vec![lam, lam], policy.mu.clone(), Capacity::Infinite)?;

    // closed form: theta(k) carries one lambda/(nu_k + lambda) factor per
    // counter step; maintenance and repair weights follow from the balance
    // at the two blocking states and at counter 0
    let mut w = HashMap::new();
    let mut cur = 1.0;
    w.insert("0".to_string(), cur);
    for k in 1..nt {
        cur *= lam / (policy.failure.rate(k) + lam);
        w.insert(k.to_string(), cur);
    }
    let prod_full = cur; // prod_{i=1}^{N-1}
    let t_bm = lam / policy.nu_maint * prod_full;
    let t_br = ((policy.failure.rate(0) + lam) - lam * prod_full) / policy.nu_repair;
    w.insert(MAINT_LABEL.to_string(), t_bm);
    w.insert(REPAIR_LABEL.to_string(), t_br);
    let model = ModelSpec::new(format!("maintenance N={nt}"), queue, env);
    let theta = theta_from_labels(&model.env, w);
    Ok((model, theta))
}

/// Long-run cost rate of the threshold-dependent part: blocked time during
/// maintenance and repair weighted by their costs. The waiting-cost term is
/// independent of the threshold, so minimizing this decides the optimum.
pub fn maintenance_cost(policy: &MaintenancePolicy, n_threshold: usize) -> Result<f64, ModelError> {
    let (model, theta) = build_maintenance(policy, n_threshold)?;
    let at = |l: &str| model.env.labels().iter().position(|x| x == l).unwrap();
    let c = &policy.costs;
    Ok((c.blocked + c.maintenance) * theta[at(MAINT_LABEL)]
        + (c.blocked + c.repair) * theta[at(REPAIR_LABEL)])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    Increasing,
    Decreasing,
    Constant,
}

#[derive(Debug, Clone)]
pub struct MaintenanceOptimum {
    pub n_star: usize,
    pub curve: Vec<(usize, f64)>,
    /// Sign classification of the cost increments, available for constant
    /// failure rates where the increment sign does not depend on the
    /// threshold.
    pub monotonicity: Option<Monotonicity>,
}

/// Evaluate the cost curve over a threshold range and return the smallest
/// minimizer. For constant failure rates the direction of the curve is also
/// classified from the closed-form increment sign.
pub fn optimize_maintenance(
    policy: &MaintenancePolicy,
    n_range: RangeInclusive<usize>,
) -> Result<MaintenanceOptimum, ModelError> {
    if n_range.is_empty() {
        return Err(invalid("threshold range is empty"));
    }
    let mut curve = Vec::new();
    for n in n_range {
        curve.push((n, maintenance_cost(policy, n)?));
    }
    let (mut n_star, mut best) = curve[0];
    for &(n, g) in &curve[1..] {
        if g < best {
            best = g;
            n_star = n;
        }
    }
    let monotonicity = match policy.failure {
        FailureRates::Constant(nu) => Some(constant_failure_trend(policy, nu)),
        FailureRates::Linear(0.0) => Some(constant_failure_trend(policy, 0.0)),
        _ => None,
    };
    Ok(MaintenanceOptimum {
        n_star,
        curve,
        monotonicity,
    })
}

/// Sign of the cost increment for constant failure rate: the bracketed
/// expression whose sign is independent of the threshold.
fn constant_failure_trend(policy: &MaintenancePolicy, nu: f64) -> Monotonicity {
    let lam = policy.lambda;
    let (nu_m, nu_r) = (policy.nu_maint, policy.nu_repair);
    let (cm, cr, cb) = (
        policy.costs.maintenance,
        policy.costs.repair,
        policy.costs.blocked,
    );
    let a = lam / (nu + lam);
    let first = -a * a * nu + 2.0 * a * nu - nu + a * nu_r - nu_r - lam * a * a + 2.0 * lam * a
        - lam;
    let second = a * a * nu_m * nu - a * nu_m * nu + lam * a * a * nu - 2.0 * lam * a * nu
        + lam * nu
        + lam * a * a * nu_m
        - 2.0 * lam * a * nu_m
        + lam * nu_m
        + lam * lam * a * a
        - 2.0 * lam * lam * a
        + lam * lam;
    let bracket = (cb + cm) * lam * first + (cb + cr) * second;
    let scale = ((cb + cm) * lam).abs() + (cb + cr).abs();
    if bracket.abs() <= 1e-12 * scale.max(1.0) {
        Monotonicity::Constant
    } else if bracket > 0.0 {
        Monotonicity::Increasing
    } else {
        Monotonicity::Decreasing
    }
}

// ---------------------------------------------------------------------------
// Departure-embedded closed forms for the two inventory policies
// ---------------------------------------------------------------------------

/// Environment law of the departure-embedded chain for the order-up-to
/// policy, in the internal order of [`build_rs`]'s environment. The full
/// stock level is never observed right after a departure.
pub fn embedded_rs_theta_hat(
    r: usize,
    s: usize,
    lambda: f64,
    nu: &[f64],
) -> Result<Vec<f64>, ModelError> {
    if r >= s {
        return Err(invalid(format!("need r < S, got r={r}, S={s}")));
    }
    check_positive("lambda", lambda)?;
    let (model, _) = build_rs(r, s, lambda, &[1.0], nu)?;
    let mut w = HashMap::new();
    let mut cur = 1.0;
    w.insert("0".to_string(), cur);
    for k in 1..s {
        if k <= r {
            cur *= (lambda + rate_at(nu, k)) / lambda;
        }
        w.insert(k.to_string(), cur);
    }
    w.insert(s.to_string(), 0.0);
    Ok(theta_from_labels(&model.env, w))
}

/// Environment law of the departure-embedded chain for the fixed-batch
/// policy, in the internal order of [`build_rq`]'s environment.
pub fn embedded_rq_theta_hat(
    r: usize,
    q: usize,
    lambda: f64,
    nu: &[f64],
) -> Result<Vec<f64>, ModelError> {
    if r >= q {
        return Err(invalid(format!("need r < Q, got r={r}, Q={q}")));
    }
    check_positive("lambda", lambda)?;
    let (model, _) = build_rq(r, q, lambda, &[1.0], nu)?;
    let prod = |k: usize| -> f64 {
        (1..=k)
            .map(|i| (lambda + rate_at(nu, i)) / lambda)
            .product()
    };
    let mut w = HashMap::new();
    for k in 0..=(r + q) {
        let val = if k <= r {
            prod(k)
        } else if k < q {
            prod(r)
        } else if k < r + q {
            prod(r) - prod(k - q)
        } else {
            0.0
        };
        w.insert(k.to_string(), val);
    }
    Ok(theta_from_labels(&model.env, w))
}

// ---------------------------------------------------------------------------
// On-demand production (state-space builder only)
// ---------------------------------------------------------------------------

/// Production-inventory model where a second production process refills the
/// stock one item at a time while switched on; it switches off at full stock
/// and back on when the stock falls to the reorder point. The environment
/// records the stock and, in the ambiguous middle range, the on/off flag.
/// No closed form is carried: the law comes from the solver.
pub fn build_production(
    r: usize,
    s: usize,
    lambda: f64,
    mu: &[f64],
    nu: f64,
) -> Result<ModelSpec, ModelError> {
    if r >= s {
        return Err(invalid(format!("need r < S, got r={r}, S={s}")));
    }
    check_positive("lambda", lambda)?;
    check_positive("nu", nu)?;
    let mut labels: Vec<String> = (0..=r).map(|k| k.to_string()).collect();
    for j in (r + 1)..s {
        labels.push(format!("{j}:on"));
        labels.push(format!("{j}:off"));
    }
    labels.push(s.to_string());
    let n = labels.len();
    let pos: HashMap<String, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.clone(), i))
        .collect();
    let at = |l: String| pos[&l];
    let up_label = |j: usize| -> String {
        // target after one produced item, production remains on below s
        if j < r {
            (j + 1).to_string()
        } else if j + 1 < s {
            format!("{}:on", j + 1)
        } else {
            s.to_string()
        }
    };
    let down_label = |j: usize, flag: &str| -> String {
        // target after one consumed item, keeping the flag in the middle range
        if j - 1 <= r {
            (j - 1).to_string()
        } else {
            format!("{}:{flag}", j - 1)
        }
    };
    let mut v = Mat::zeros(n, n);
    for j in 0..=r {
        v[(at(j.to_string()), at(up_label(j)))] = nu;
    }
    for j in (r + 1)..s {
        v[(at(format!("{j}:on")), at(up_label(j)))] = nu;
    }
    close_generator_rows(&mut v);
    let mut rm = Mat::zeros(n, n);
    rm[(at("0".to_string()), at("0".to_string()))] = 1.0;
    for j in 1..=r {
        rm[(at(j.to_string()), at((j - 1).to_string()))] = 1.0;
    }
    for j in (r + 1)..s {
        for flag in ["on", "off"] {
            rm[(at(format!("{j}:{flag}")), at(down_label(j, flag)))] = 1.0;
        }
    }
    rm[(at(s.to_string()), at(down_label(s, "off")))] = 1.0;
    let env = EnvironmentSpec::new(labels, &["0".to_string()], v, rm)?;
    let queue = QueueSpec::new(vec![lambda, lambda], mu.to_vec(), Capacity::Infinite)?;
    Ok(ModelSpec::new(
        format!("production-inventory r={r} S={s}"),
        queue,
        env,
    ))
}
