//! Model data types: the queue, the finite environment, and how they
//! interact, plus structural validation and the JSON model-file format.
//!
//! An environment is a finite state set split into working and blocking
//! states, an autonomous transition generator `V`, and a stochastic jump
//! matrix `R` applied at every departure. Internally the states are kept in
//! working-before-blocking order; a declared ordering that mixes the two is
//! stably reordered at construction and the permutation recorded.

use crate::numerics::{FlowGraph, Mat, EPS_STOCH};
use serde::Deserialize;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("environment must have at least one state")]
    EmptyEnvironment,
    #[error("environment has no working state")]
    NoWorkingState,
    #[error("duplicate environment state label `{0}`")]
    DuplicateLabel(String),
    #[error("blocking label `{0}` is not an environment state")]
    UnknownBlockingLabel(String),
    #[error("matrix {name} has dimensions {got_rows}x{got_cols}, expected {expected}x{expected}")]
    DimensionMismatch {
        name: &'static str,
        got_rows: usize,
        got_cols: usize,
        expected: usize,
    },
    #[error("rate sequence `{name}` must have at least {min} entries")]
    RateSeqTooShort { name: &'static str, min: usize },
    #[error("rate sequence `{name}` contains a non-positive entry at index {index}")]
    NonPositiveRate { name: &'static str, index: usize },
    #[error("unknown state label `{0}` in sparse matrix entry")]
    UnknownSparseLabel(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("model file: {0}")]
    Parse(String),
}

/// Finite environment: ordered labels, blocking subset, generator `V` of
/// autonomous moves, and departure-jump matrix `R`.
#[derive(Debug, Clone)]
pub struct EnvironmentSpec {
    labels: Vec<String>,
    n_working: usize,
    v: Mat,
    r: Mat,
    /// Position of each internal index in the originally declared order.
    declared_positions: Vec<usize>,
}

impl EnvironmentSpec {
    /// Build an environment. `blocking` lists the labels of blocking states;
    /// `v` and `r` are given in the declared order of `labels` and are
    /// reordered together with the labels so that working states come first.
    pub fn new(
        labels: Vec<String>,
        blocking: &[String],
        v: Mat,
        r: Mat,
    ) -> Result<Self, ModelError> {
        let n = labels.len();
        if n == 0 {
            return Err(ModelError::EmptyEnvironment);
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(ModelError::DuplicateLabel(l.clone()));
            }
        }
        let mut is_blocking = vec![false; n];
        for b in blocking {
            let idx = labels
                .iter()
                .position(|l| l == b)
                .ok_or_else(|| ModelError::UnknownBlockingLabel(b.clone()))?;
            is_blocking[idx] = true;
        }
        if is_blocking.iter().all(|&b| b) {
            return Err(ModelError::NoWorkingState);
        }
        for (name, m) in [("V", &v), ("R", &r)] {
            if m.n_rows() != n || m.n_cols() != n {
                return Err(ModelError::DimensionMismatch {
                    name,
                    got_rows: m.n_rows(),
                    got_cols: m.n_cols(),
                    expected: n,
                });
            }
        }
        // stable reorder: working states first, blocking after
        let perm: Vec<usize> = (0..n)
            .filter(|&i| !is_blocking[i])
            .chain((0..n).filter(|&i| is_blocking[i]))
            .collect();
        let n_working = is_blocking.iter().filter(|&&b| !b).count();
        let labels_internal: Vec<String> = perm.iter().map(|&i| labels[i].clone()).collect();
        Ok(EnvironmentSpec {
            labels: labels_internal,
            n_working,
            v: v.permuted(&perm),
            r: r.permuted(&perm),
            declared_positions: perm,
        })
    }

    pub fn n_states(&self) -> usize {
        self.labels.len()
    }

    pub fn n_working(&self) -> usize {
        self.n_working
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, k: usize) -> &str {
        &self.labels[k]
    }

    /// Position of internal index `k` in the order the states were declared.
    pub fn declared_position(&self, k: usize) -> usize {
        self.declared_positions[k]
    }

    pub fn is_working(&self, k: usize) -> bool {
        k < self.n_working
    }

    /// `true` entries mark working states.
    pub fn working_mask(&self) -> Vec<bool> {
        (0..self.n_states()).map(|k| self.is_working(k)).collect()
    }

    pub fn v(&self) -> &Mat {
        &self.v
    }

    pub fn r(&self) -> &Mat {
        &self.r
    }

    /// Diagonal 0/1 projector with ones exactly on the working states.
    pub fn working_projector(&self) -> Mat {
        let d: Vec<f64> = (0..self.n_states())
            .map(|k| if self.is_working(k) { 1.0 } else { 0.0 })
            .collect();
        Mat::from_diag(&d)
    }

    /// `R` with blocking rows zeroed: the departure jumps that can actually
    /// occur (departures only happen in working states).
    pub fn working_jumps(&self) -> Mat {
        self.working_projector().matmul(&self.r)
    }
}

/// Waiting-room capacity. `Finite(n)` means the queue lives on `{0..=n+1}`:
/// `n` waiting places plus one in service.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Capacity {
    Infinite,
    Finite(usize),
}

/// Arrival and service rate sequences with eventual-constant tails.
///
/// `lambda[n]` is the arrival rate with `n` customers present, constant from
/// the tail index on; `mu[n-1]` is the service rate with `n` customers. The
/// constant tails keep the level products (and hence the normalization
/// constant) in closed form.
#[derive(Debug, Clone)]
pub struct QueueSpec {
    lambda: Vec<f64>,
    mu: Vec<f64>,
    capacity: Capacity,
}

impl QueueSpec {
    pub fn new(lambda: Vec<f64>, mu: Vec<f64>, capacity: Capacity) -> Result<Self, ModelError> {
        if lambda.len() < 2 {
            return Err(ModelError::RateSeqTooShort {
                name: "lambda",
                min: 2,
            });
        }
        if mu.is_empty() {
            return Err(ModelError::RateSeqTooShort { name: "mu", min: 1 });
        }
        for (name, seq) in [("lambda", &lambda), ("mu", &mu)] {
            if let Some(i) = seq.iter().position(|&x| !x.is_finite() || x <= 0.0) {
                return Err(ModelError::NonPositiveRate { name, index: i });
            }
        }
        Ok(QueueSpec {
            lambda,
            mu,
            capacity,
        })
    }

    /// Constant rates, the common case.
    pub fn constant(lambda: f64, mu: f64, capacity: Capacity) -> Result<Self, ModelError> {
        QueueSpec::new(vec![lambda, lambda], vec![mu], capacity)
    }

    /// Index from which both rate sequences are constant.
    pub fn tail_index(&self) -> usize {
        (self.lambda.len() - 1).max(self.mu.len())
    }

    /// Arrival rate with `n` customers present.
    pub fn lambda(&self, n: usize) -> f64 {
        self.lambda[n.min(self.lambda.len() - 1)]
    }

    /// Service rate with `n >= 1` customers present.
    pub fn mu(&self, n: usize) -> f64 {
        debug_assert!(n >= 1);
        self.mu[(n - 1).min(self.mu.len() - 1)]
    }

    pub fn capacity(&self) -> Capacity {
        self.capacity
    }

    /// `Some(lambda)` when the arrival rate does not depend on the level.
    pub fn constant_lambda(&self) -> Option<f64> {
        let l0 = self.lambda[0];
        self.lambda
            .iter()
            .all(|&l| (l - l0).abs() <= 0.0)
            .then_some(l0)
    }

    /// Ratio `lambda/mu` in the constant tail.
    pub fn tail_ratio(&self) -> f64 {
        let t = self.tail_index();
        self.lambda(t) / self.mu(t.max(1))
    }
}

/// A complete model: queue, environment, and a display name.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub name: String,
    pub queue: QueueSpec,
    pub env: EnvironmentSpec,
}

impl ModelSpec {
    pub fn new(name: impl Into<String>, queue: QueueSpec, env: EnvironmentSpec) -> Self {
        ModelSpec {
            name: name.into(),
            queue,
            env,
        }
    }
}

/// Result of structural validation; empty violation list means accepted.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_accepted(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_accepted() {
            write!(f, "model accepted")
        } else {
            writeln!(f, "model rejected:")?;
            for v in &self.violations {
                writeln!(f, "  - {v}")?;
            }
            Ok(())
        }
    }
}

/// Structural checks: `R` stochastic, `V` a generator, a nonempty working
/// set, and the flow condition (every blocking state can reach the working
/// set along positive `V`-rates, so no blocking subset traps the
/// environment).
pub fn validate(model: &ModelSpec) -> ValidationReport {
    validate_with_tolerance(model, EPS_STOCH)
}

/// [`validate`] with a caller-chosen row-sum tolerance, for inputs that
/// carry more decimal noise than the default allows.
pub fn validate_with_tolerance(model: &ModelSpec, tol: f64) -> ValidationReport {
    let mut report = ValidationReport::default();
    let env = &model.env;
    let n = env.n_states();
    let r = env.r();
    let v = env.v();

    for k in 0..n {
        let mut row_sum = 0.0;
        for m in 0..n {
            let x = r[(k, m)];
            if !(-tol..=1.0 + tol).contains(&x) {
                report.violations.push(format!(
                    "R not stochastic: entry ({}, {}) = {x} outside [0, 1]",
                    env.label(k),
                    env.label(m)
                ));
            }
            row_sum += x;
        }
        if (row_sum - 1.0).abs() > tol {
            report.violations.push(format!(
                "R not stochastic: row {} sums to {row_sum}",
                env.label(k)
            ));
        }
    }

    for k in 0..n {
        for m in 0..n {
            if k != m && v[(k, m)] < -tol {
                report.violations.push(format!(
                    "V not a generator: negative off-diagonal rate ({}, {}) = {}",
                    env.label(k),
                    env.label(m),
                    v[(k, m)]
                ));
            }
        }
        let row_sum = v.row_sum(k);
        if row_sum.abs() > tol {
            report.violations.push(format!(
                "V not a generator: row {} sums to {row_sum}",
                env.label(k)
            ));
        }
    }

    if env.n_working() == 0 {
        report
            .violations
            .push("working state set is empty".to_string());
    }

    // flow condition: every blocking state reaches the working set in the
    // directed graph of positive V-rates
    let graph = FlowGraph::from_matrix(v);
    let trapped = graph.unreachable_from(&env.working_mask());
    for k in trapped {
        if !env.is_working(k) {
            report.violations.push(format!(
                "flow condition: blocking state {} cannot reach the working set via V",
                env.label(k)
            ));
        }
    }

    report
}

// ---------------------------------------------------------------------------
// JSON model files
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(untagged)]
enum LabelJson {
    Text(String),
    Number(i64),
}

impl LabelJson {
    fn into_string(self) -> String {
        match self {
            LabelJson::Text(s) => s,
            LabelJson::Number(n) => n.to_string(),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RatesJson {
    Scalar(f64),
    Seq(Vec<f64>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CapacityJson {
    Word(String),
    Finite(usize),
}

#[derive(Deserialize)]
struct ModelFile {
    name: Option<String>,
    states: Vec<LabelJson>,
    #[serde(default)]
    blocking: Vec<LabelJson>,
    #[serde(rename = "V")]
    v: serde_json::Value,
    #[serde(rename = "R")]
    r: serde_json::Value,
    lambda: RatesJson,
    mu: RatesJson,
    capacity: Option<CapacityJson>,
}

/// Matrices come either dense (an `n x n` array of number rows) or sparse
/// (a list of `[from, to, rate]` triples or `{"from", "to", "rate"}`
/// objects, labels as in `states`). A square all-number array is read as
/// dense; for sparse input the diagonal is auto-completed to zero row sums.
fn matrix_from_json(value: &serde_json::Value, labels: &[String]) -> Result<Mat, ModelError> {
    use serde_json::Value;
    let n = labels.len();
    let rows = value
        .as_array()
        .ok_or_else(|| ModelError::Parse("matrix must be an array".to_string()))?;
    let is_dense = rows.len() == n
        && rows.iter().all(|r| {
            r.as_array()
                .is_some_and(|a| a.len() == n && a.iter().all(Value::is_number))
        });
    if is_dense {
        let dense: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                r.as_array()
                    .unwrap()
                    .iter()
                    .map(|x| x.as_f64().unwrap())
                    .collect()
            })
            .collect();
        return Ok(Mat::from_rows(&dense));
    }

    let label_of = |v: &Value| -> Result<String, ModelError> {
        match v {
            Value::String(s) => Ok(s.clone()),
            Value::Number(x) => Ok(x.to_string()),
            other => Err(ModelError::Parse(format!(
                "matrix entry label must be a string or integer, got {other}"
            ))),
        }
    };
    let mut out = Mat::zeros(n, n);
    for entry in rows {
        let (from, to, rate) = match entry {
            Value::Array(t) if t.len() == 3 => (
                label_of(&t[0])?,
                label_of(&t[1])?,
                t[2].as_f64().ok_or_else(|| {
                    ModelError::Parse("matrix triple rate must be a number".to_string())
                })?,
            ),
            Value::Object(o) => {
                let get = |key: &str| {
                    o.get(key).ok_or_else(|| {
                        ModelError::Parse(format!("matrix entry object missing `{key}`"))
                    })
                };
                (
                    label_of(get("from")?)?,
                    label_of(get("to")?)?,
                    get("rate")?.as_f64().ok_or_else(|| {
                        ModelError::Parse("matrix entry rate must be a number".to_string())
                    })?,
                )
            }
            other => {
                return Err(ModelError::Parse(format!(
                    "matrix entry must be a `[from, to, rate]` triple or an object, got {other}"
                )));
            }
        };
        let fi = labels
            .iter()
            .position(|l| *l == from)
            .ok_or(ModelError::UnknownSparseLabel(from))?;
        let ti = labels
            .iter()
            .position(|l| *l == to)
            .ok_or(ModelError::UnknownSparseLabel(to))?;
        out[(fi, ti)] += rate;
    }
    // auto-complete the diagonal to zero row sums
    for k in 0..n {
        let off: f64 = (0..n).filter(|&j| j != k).map(|j| out[(k, j)]).sum();
        out[(k, k)] = -off;
    }
    Ok(out)
}

fn rates_from_json(r: RatesJson, min_len: usize) -> Vec<f64> {
    let mut v = match r {
        RatesJson::Scalar(x) => vec![x],
        RatesJson::Seq(s) => s,
    };
    while v.len() < min_len {
        let last = *v.last().unwrap_or(&1.0);
        v.push(last);
    }
    v
}

/// Parse a model from the JSON document format described in the README.
pub fn model_from_json(text: &str) -> Result<ModelSpec, ModelError> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
    let labels: Vec<String> = file.states.into_iter().map(LabelJson::into_string).collect();
    let blocking: Vec<String> = file.blocking.into_iter().map(LabelJson::into_string).collect();
    let v = matrix_from_json(&file.v, &labels)?;
    let r = matrix_from_json(&file.r, &labels)?;
    let env = EnvironmentSpec::new(labels, &blocking, v, r)?;
    let capacity = match file.capacity {
        None => Capacity::Infinite,
        Some(CapacityJson::Finite(n)) => Capacity::Finite(n),
        Some(CapacityJson::Word(w)) if w.eq_ignore_ascii_case("infinite") => Capacity::Infinite,
        Some(CapacityJson::Word(w)) => {
            return Err(ModelError::Parse(format!("unknown capacity `{w}`")));
        }
    };
    let lambda = rates_from_json(file.lambda, 2);
    let mu = rates_from_json(file.mu, 1);
    let queue = QueueSpec::new(lambda, mu, capacity)?;
    Ok(ModelSpec::new(
        file.name.unwrap_or_else(|| "model".to_string()),
        queue,
        env,
    ))
}
