//! Event-driven simulation of the full model class, the independent
//! statistical oracle for every analytic result in this crate.
//!
//! The simulator handles the exponential model with state-dependent rates
//! and the general-service model with queue-length-dependent laws and
//! speeds. Blocking states freeze both arrivals and the service clock; for
//! general laws the residual service requirement is preserved across the
//! freeze and across autonomous environment moves. Runs are reproducible
//! from the seed.

use crate::env::{Capacity, EnvironmentSpec, ModelSpec};
use crate::mg1::ServiceLaw;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// General-service model for the simulator: Poisson arrivals, per-level
/// service-time laws (drawn when a service starts), per-level speeds.
#[derive(Debug, Clone)]
pub struct GeneralSimSpec {
    pub name: String,
    pub lambda: f64,
    /// `laws[n-1]` applies to a service starting with `n` customers present
    /// (the last law repeats).
    pub laws: Vec<ServiceLaw>,
    /// `speeds[n-1]` is the work rate with `n` customers present (the last
    /// speed repeats).
    pub speeds: Vec<f64>,
    pub env: EnvironmentSpec,
}

impl GeneralSimSpec {
    fn law(&self, n: usize) -> &ServiceLaw {
        &self.laws[(n - 1).min(self.laws.len() - 1)]
    }

    fn speed(&self, n: usize) -> f64 {
        self.speeds[(n - 1).min(self.speeds.len() - 1)]
    }
}

/// What to simulate.
#[derive(Debug, Clone, Copy)]
pub enum SimModel<'a> {
    Exponential(&'a ModelSpec),
    GeneralService(&'a GeneralSimSpec),
}

impl<'a> SimModel<'a> {
    fn env(&self) -> &'a EnvironmentSpec {
        match self {
            SimModel::Exponential(m) => &m.env,
            SimModel::GeneralService(g) => &g.env,
        }
    }
}

const BATCHES: usize = 20;
const WARMUP_FRACTION: f64 = 0.05;

/// Empirical occupancy measures with batch-means standard errors.
#[derive(Debug, Clone)]
pub struct SimEstimate {
    pub seed: u64,
    pub events: u64,
    pub departures: u64,
    n_env: usize,
    levels: usize,
    batch_time: Vec<Vec<f64>>,
    batch_dur: Vec<f64>,
    batch_dep: Vec<Vec<f64>>,
    batch_dep_total: Vec<f64>,
}

impl SimEstimate {
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn n_env(&self) -> usize {
        self.n_env
    }

    fn cell(&self, n: usize, k: usize) -> usize {
        n * self.n_env + k
    }

    /// Time-average probability of holding cells selected by `pred`,
    /// together with its batch-means standard error.
    pub fn time_aggregate(&self, pred: impl Fn(usize, usize) -> bool) -> (f64, f64) {
        let mut means = Vec::with_capacity(BATCHES);
        for (b, dur) in self.batch_dur.iter().enumerate() {
            let mut mass = 0.0;
            for n in 0..self.levels {
                for k in 0..self.n_env {
                    if pred(n, k) {
                        mass += self.batch_time[b][self.cell(n, k)];
                    }
                }
            }
            means.push(mass / dur);
        }
        mean_and_se(&means)
    }

    /// Relative frequency of departures landing in cells selected by
    /// `pred`, with its batch-means standard error.
    pub fn embedded_aggregate(&self, pred: impl Fn(usize, usize) -> bool) -> (f64, f64) {
        let mut means = Vec::with_capacity(BATCHES);
        for (b, total) in self.batch_dep_total.iter().enumerate() {
            let mut mass = 0.0;
            for n in 0..self.levels {
                for k in 0..self.n_env {
                    if pred(n, k) {
                        mass += self.batch_dep[b][self.cell(n, k)];
                    }
                }
            }
            means.push(if *total > 0.0 { mass / total } else { 0.0 });
        }
        mean_and_se(&means)
    }

    pub fn time_avg(&self, n: usize, k: usize) -> (f64, f64) {
        if n >= self.levels {
            return (0.0, 0.0);
        }
        self.time_aggregate(|a, b| (a, b) == (n, k))
    }

    pub fn embedded(&self, n: usize, k: usize) -> (f64, f64) {
        if n >= self.levels {
            return (0.0, 0.0);
        }
        self.embedded_aggregate(|a, b| (a, b) == (n, k))
    }

    /// Environment marginal of the departure-embedded frequencies.
    pub fn embedded_env_marginal(&self) -> Vec<(f64, f64)> {
        (0..self.n_env)
            .map(|k| self.embedded_aggregate(|_, kk| kk == k))
            .collect()
    }

    /// Raw departure counts per cell (summed over batches), for test
    /// statistics that need counts rather than frequencies.
    pub fn departure_counts(&self) -> Vec<Vec<f64>> {
        (0..self.levels)
            .map(|n| {
                (0..self.n_env)
                    .map(|k| {
                        self.batch_dep
                            .iter()
                            .map(|b| b[self.cell(n, k)])
                            .sum::<f64>()
                    })
                    .collect()
            })
            .collect()
    }
}

fn mean_and_se(means: &[f64]) -> (f64, f64) {
    let n = means.len() as f64;
    let mean = means.iter().sum::<f64>() / n;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

struct Collector {
    n_env: usize,
    levels: usize,
    batch_time: Vec<Vec<f64>>,
    batch_dur: Vec<f64>,
    batch_dep: Vec<Vec<f64>>,
    batch_dep_total: Vec<f64>,
}

impl Collector {
    fn new(n_env: usize) -> Self {
        Collector {
            n_env,
            levels: 1,
            batch_time: vec![vec![0.0; n_env]; BATCHES],
            batch_dur: vec![0.0; BATCHES],
            batch_dep: vec![vec![0.0; n_env]; BATCHES],
            batch_dep_total: vec![0.0; BATCHES],
        }
    }

    fn ensure_level(&mut self, n: usize) {
        if n >= self.levels {
            self.levels = n + 1;
            for grid in self.batch_time.iter_mut().chain(self.batch_dep.iter_mut()) {
                grid.resize(self.levels * self.n_env, 0.0);
            }
        }
    }

    fn hold(&mut self, batch: usize, n: usize, k: usize, dt: f64) {
        self.ensure_level(n);
        self.batch_time[batch][n * self.n_env + k] += dt;
        self.batch_dur[batch] += dt;
    }

    fn depart(&mut self, batch: usize, n: usize, k: usize) {
        self.ensure_level(n);
        self.batch_dep[batch][n * self.n_env + k] += 1.0;
        self.batch_dep_total[batch] += 1.0;
    }
}

fn exp_draw(rng: &mut ChaCha12Rng, rate: f64) -> f64 {
    debug_assert!(rate > 0.0);
    let u: f64 = rng.gen::<f64>();
    -(1.0 - u).ln() / rate
}

/// Run one replication for `horizon_events` events.
///
/// The first 5% of events are discarded as warm-up, the rest is split into
/// 20 equal-count batches for the standard errors.
pub fn simulate(model: &SimModel, horizon_events: u64, seed: u64) -> SimEstimate {
    assert!(horizon_events >= 10_000, "horizon too short for batching");
    let env = model.env();
    let nk = env.n_states();
    let v = env.v();
    let r = env.r();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut collector = Collector::new(nk);

    let warmup = (horizon_events as f64 * WARMUP_FRACTION) as u64;
    let per_batch = (horizon_events - warmup).div_ceil(BATCHES as u64);
    let batch_of = |event: u64| -> Option<usize> {
        if event < warmup {
            None
        } else {
            Some((((event - warmup) / per_batch) as usize).min(BATCHES - 1))
        }
    };

    let v_out: Vec<f64> = (0..nk)
        .map(|k| (0..nk).filter(|&m| m != k).map(|m| v[(k, m)]).sum())
        .collect();
    let pick_env = |rng: &mut ChaCha12Rng, k: usize| -> usize {
        let mut u: f64 = rng.gen::<f64>() * v_out[k];
        for m in 0..nk {
            if m == k {
                continue;
            }
            u -= v[(k, m)];
            if u < 0.0 {
                return m;
            }
        }
        nk - 1
    };
    let pick_jump = |rng: &mut ChaCha12Rng, k: usize| -> usize {
        let mut u: f64 = rng.gen::<f64>();
        for m in 0..nk {
            u -= r[(k, m)];
            if u < 0.0 {
                return m;
            }
        }
        nk - 1
    };

    // the service clock is either memoryless (a rate) or a deterministic
    // deadline set by the residual work and the current speed
    enum Service {
        Off,
        Rate(f64),
        Deadline(f64),
    }

    let mut level = 0usize;
    let mut state = 0usize;
    // residual service requirement, meaningful while level > 0 in the
    // general-service mode
    let mut residual = 0.0f64;
    let mut departures = 0u64;

    for event in 0..horizon_events {
        let batch = batch_of(event);
        let working = env.is_working(state);
        // per-state exponential rates of the competing clocks
        let arrival_rate = if !working {
            0.0
        } else {
            match model {
                SimModel::Exponential(m) => match m.queue.capacity() {
                    Capacity::Finite(cap) if level > cap => 0.0,
                    _ => m.queue.lambda(level),
                },
                SimModel::GeneralService(g) => g.lambda,
            }
        };
        let env_rate = v_out[state];

        let service = if !working || level == 0 {
            Service::Off
        } else {
            match model {
                SimModel::Exponential(m) => Service::Rate(m.queue.mu(level)),
                SimModel::GeneralService(g) => Service::Deadline(residual / g.speed(level)),
            }
        };

        let exp_rate = arrival_rate
            + env_rate
            + match service {
                Service::Rate(mu) => mu,
                _ => 0.0,
            };
        let t_exp = if exp_rate > 0.0 {
            exp_draw(&mut rng, exp_rate)
        } else {
            f64::INFINITY
        };
        let (dt, is_deadline) = match service {
            Service::Deadline(d) if d <= t_exp => (d, true),
            _ => (t_exp, false),
        };
        assert!(dt.is_finite(), "simulation stalled in an absorbing state");
        if let Some(b) = batch {
            collector.hold(b, level, state, dt);
        }
        if let SimModel::GeneralService(g) = model {
            if working && level > 0 {
                residual = (residual - dt * g.speed(level)).max(0.0);
            }
        }

        let service_completed = is_deadline || {
            // categorical pick among the exponential clocks
            if exp_rate > 0.0 {
                let u: f64 = rng.gen::<f64>() * exp_rate;
                if u < arrival_rate {
                    // arrival admitted
                    level += 1;
                    if let SimModel::GeneralService(g) = model {
                        if level == 1 {
                            residual = g.law(1).sample(&mut rng);
                        }
                    }
                    false
                } else if u < arrival_rate + env_rate {
                    state = pick_env(&mut rng, state);
                    false
                } else {
                    true
                }
            } else {
                false
            }
        };
        if service_completed {
            level -= 1;
            state = pick_jump(&mut rng, state);
            departures += 1;
            if let Some(b) = batch {
                collector.depart(b, level, state);
            }
            if let SimModel::GeneralService(g) = model {
                if level > 0 {
                    residual = g.law(level).sample(&mut rng);
                }
            }
        }
    }

    SimEstimate {
        seed,
        events: horizon_events,
        departures,
        n_env: collector.n_env,
        levels: collector.levels,
        batch_time: collector.batch_time,
        batch_dur: collector.batch_dur,
        batch_dep: collector.batch_dep,
        batch_dep_total: collector.batch_dep_total,
    }
}

/// Environment frequencies sampled at departures (after the jump), with
/// batch-means standard errors.
pub fn simulate_embedded_marginal(
    model: &SimModel,
    horizon_events: u64,
    seed: u64,
) -> Vec<(f64, f64)> {
    simulate(model, horizon_events, seed).embedded_env_marginal()
}
