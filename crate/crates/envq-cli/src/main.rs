//! Command-line front end: load or build models, dispatch the analyses, and
//! emit CSV tables plus JSON sidecars.
//!
//! Exit codes: 0 on success, 1 on model errors, 2 when `--strict` is set and
//! the analysis verdict is negative, 64 on usage errors.

use clap::{Args, Parser, Subcommand};
use envq::ct::{self, ProductFormSolution, SolveError};
use envq::embedded;
use envq::env::{self, Capacity, ModelSpec, QueueSpec};
use envq::mg1::{self, ServiceLaw};
use envq::models;
use envq::numerics::{self, InvertibilityVerdict};
use envq::sim::{self, SimModel};
use serde_json::json;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_OK: u8 = 0;
const EXIT_MODEL: u8 = 1;
const EXIT_VERDICT: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(
    name = "envq",
    version,
    about = "Steady-state analysis of loss systems in a finite random environment",
    disable_help_subcommand = true
)]
struct Cli {
    /// Directory for CSV/JSON artifacts
    #[arg(long, global = true, default_value = "envq-out")]
    out: PathBuf,
    /// Exit nonzero when the analysis verdict is negative
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Structural validation of a model
    Validate {
        #[command(flatten)]
        source: ModelSource,
        /// Row-sum tolerance for the stochastic and generator checks
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Continuous-time product-form solution (infinite waiting room)
    Solve {
        #[command(flatten)]
        source: ModelSource,
    },
    /// Continuous-time product-form solution with a finite waiting room
    SolveFinite {
        #[command(flatten)]
        source: ModelSource,
        /// Number of waiting places (queue lives on 0..=capacity+1)
        #[arg(long)]
        capacity: Option<usize>,
    },
    /// Departure-embedded chain of the exponential model
    Embedded {
        #[command(flatten)]
        source: ModelSource,
    },
    /// Departure-observed chain with general service in an
    /// interference-free environment
    Mg1 {
        #[command(flatten)]
        env_source: Mg1EnvSource,
        #[command(flatten)]
        law: LawArgs,
        /// Arrival rate
        #[arg(long)]
        lambda: f64,
    },
    /// Two-item inventory with deterministic service: the would-be
    /// product-form ratios and the direct refutation
    Counterexample {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        nu: f64,
    },
    /// Sweep the maintenance threshold and report the cost minimizer
    OptimizeMaintenance(MaintenanceArgs),
    /// Event-driven simulation with batch-means errors
    Simulate {
        #[command(flatten)]
        source: ModelSource,
        /// Number of simulated events
        #[arg(long, default_value_t = 1_000_000)]
        events: u64,
        /// RNG seed (falls back to the ENVQ_SEED environment variable)
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Certify invertibility of rate*I_W - V for a model
    CheckInvertible {
        #[command(flatten)]
        source: ModelSource,
        /// Rate multiplying the working projector
        #[arg(long, default_value_t = 1.0)]
        rate: f64,
    },
}

/// Where the model comes from: a JSON file or a named builder.
#[derive(Args)]
struct ModelSource {
    /// JSON model file
    #[arg(long, conflicts_with = "builder")]
    model: Option<PathBuf>,
    /// Builder name: rs, rq, rs-phase, rq-phase, tandem, sensor,
    /// maintenance, production
    #[arg(long)]
    builder: Option<String>,
    /// Reorder point (rs, rq, phase variants, production)
    #[arg(long)]
    r: Option<usize>,
    /// Maximal stock (rs, rs-phase, production)
    #[arg(long = "S")]
    s: Option<usize>,
    /// Batch size (rq, rq-phase)
    #[arg(long = "Q")]
    q: Option<usize>,
    /// Arrival rate
    #[arg(long)]
    lambda: Option<f64>,
    /// Service rates, comma separated for level dependence
    #[arg(long, value_delimiter = ',')]
    mu: Option<Vec<f64>>,
    /// Replenishment/second-stage rates, comma separated for state
    /// dependence
    #[arg(long, value_delimiter = ',')]
    nu: Option<Vec<f64>>,
    /// Lead-time phase rate (phase variants)
    #[arg(long)]
    beta: Option<f64>,
    /// Lead-time phase weights, comma separated (phase variants)
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    /// Intermediate buffer places (tandem)
    #[arg(long)]
    buffer: Option<usize>,
    /// Neighborhood off rate (sensor)
    #[arg(long)]
    alpha: Option<f64>,
    /// Neighborhood on rate (sensor); also the off->on recovery
    #[arg(long = "beta-on")]
    beta_on: Option<f64>,
    /// Node sleep rate (sensor)
    #[arg(long = "rate-a")]
    rate_a: Option<f64>,
    /// Node wake rate (sensor)
    #[arg(long = "rate-s")]
    rate_s: Option<f64>,
    /// Maintenance threshold (maintenance builder)
    #[arg(long = "n-threshold")]
    n_threshold: Option<usize>,
    /// Maintenance rate (maintenance builder)
    #[arg(long = "nu-m")]
    nu_m: Option<f64>,
    /// Repair rate (maintenance builder)
    #[arg(long = "nu-r")]
    nu_r: Option<f64>,
    /// Linear failure-rate slope (maintenance builder)
    #[arg(long = "nu-slope")]
    nu_slope: Option<f64>,
}

#[derive(Args)]
struct Mg1EnvSource {
    /// JSON model file providing the environment
    #[arg(long, conflicts_with = "env_builder")]
    model: Option<PathBuf>,
    /// Environment builder: zero-lead (r, S), full-refill (S, nu),
    /// vacation (p-leave, nu)
    #[arg(long = "env-builder")]
    env_builder: Option<String>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long = "S")]
    s: Option<usize>,
    #[arg(long)]
    nu: Option<f64>,
    /// Probability of walking away after a departure (vacation)
    #[arg(long = "p-leave")]
    p_leave: Option<f64>,
}

#[derive(Args)]
struct LawArgs {
    /// Service law: deterministic, exponential, erlang, mixture
    #[arg(long = "service-law", default_value = "deterministic")]
    kind: String,
    /// Mean service time (deterministic) or rate (exponential, erlang,
    /// mixture)
    #[arg(long = "service-param")]
    param: f64,
    /// Erlang stage count
    #[arg(long, default_value_t = 1)]
    stages: usize,
    /// Mixture weights over stage counts, comma separated
    #[arg(long = "law-weights", value_delimiter = ',')]
    law_weights: Option<Vec<f64>>,
}

#[derive(Args)]
struct MaintenanceArgs {
    #[arg(long)]
    lambda: f64,
    #[arg(long, value_delimiter = ',')]
    mu: Vec<f64>,
    #[arg(long = "nu-m")]
    nu_m: f64,
    #[arg(long = "nu-r")]
    nu_r: f64,
    /// Constant failure rate
    #[arg(long = "nu-const", conflicts_with = "nu_slope")]
    nu_const: Option<f64>,
    /// Linear failure rate slope (rate after k services = slope * k)
    #[arg(long = "nu-slope")]
    nu_slope: Option<f64>,
    #[arg(long = "c-m")]
    c_m: f64,
    #[arg(long = "c-r")]
    c_r: f64,
    #[arg(long = "c-b")]
    c_b: f64,
    #[arg(long = "c-w", default_value_t = 0.0)]
    c_w: f64,
    #[arg(long = "n-min", default_value_t = 1)]
    n_min: usize,
    #[arg(long = "n-max", default_value_t = 100)]
    n_max: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not usage errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_MODEL)
        }
    }
}

fn run(cli: Cli) -> Result<u8, String> {
    fs::create_dir_all(&cli.out).map_err(|e| format!("cannot create {:?}: {e}", cli.out))?;
    match cli.command {
        Command::Validate { ref source, tol } => cmd_validate(&cli, source, tol),
        Command::Solve { ref source } => cmd_solve(&cli, source),
        Command::SolveFinite {
            ref source,
            capacity,
        } => cmd_solve_finite(&cli, source, capacity),
        Command::Embedded { ref source } => cmd_embedded(&cli, source),
        Command::Mg1 {
            ref env_source,
            ref law,
            lambda,
        } => cmd_mg1(&cli, env_source, law, lambda),
        Command::Counterexample { lambda, mu, nu } => cmd_counterexample(&cli, lambda, mu, nu),
        Command::OptimizeMaintenance(ref args) => cmd_optimize(&cli, args),
        Command::Simulate {
            ref source,
            events,
            seed,
        } => cmd_simulate(&cli, source, events, seed),
        Command::CheckInvertible { ref source, rate } => {
            cmd_check_invertible(&cli, source, rate)
        }
    }
}

/// Resolved model plus the builder's closed-form environment law, if any.
struct BuiltModel {
    model: ModelSpec,
    closed_theta: Option<Vec<f64>>,
}

fn require<T: Copy>(opt: Option<T>, flag: &str) -> Result<T, String> {
    opt.ok_or_else(|| format!("missing required flag --{flag} for this builder"))
}

fn build_model(source: &ModelSource) -> Result<BuiltModel, String> {
    if let Some(path) = &source.model {
        let text = fs::read_to_string(path).map_err(|e| format!("cannot read {path:?}: {e}"))?;
        let model = env::model_from_json(&text).map_err(|e| e.to_string())?;
        return Ok(BuiltModel {
            model,
            closed_theta: None,
        });
    }
    let Some(builder) = &source.builder else {
        return Err("provide exactly one model source: --model or --builder".to_string());
    };
    let lambda = require(source.lambda, "lambda")?;
    let mu = source.mu.clone().unwrap_or_else(|| vec![1.0]);
    let err = |e: env::ModelError| e.to_string();
    let built = match builder.as_str() {
        "rs" => {
            let nu = source.nu.clone().ok_or("missing --nu")?;
            let (model, theta) = models::build_rs(
                require(source.r, "r")?,
                require(source.s, "S")?,
                lambda,
                &mu,
                &nu,
            )
            .map_err(err)?;
            BuiltModel {
                model,
                closed_theta: Some(theta),
            }
        }
        "rq" => {
            let nu = source.nu.clone().ok_or("missing --nu")?;
            let (model, theta) = models::build_rq(
                require(source.r, "r")?,
                require(source.q, "Q")?,
                lambda,
                &mu,
                &nu,
            )
            .map_err(err)?;
            BuiltModel {
                model,
                closed_theta: Some(theta),
            }
        }
        "rs-phase" => {
            let spec = models::PhaseLeadTimeSpec {
                beta: require(source.beta, "beta")?,
                weights: source.weights.clone().ok_or("missing --weights")?,
                r: require(source.r, "r")?,
                s: require(source.s, "S")?,
            };
            let (model, theta) = models::build_rs_phase(&spec, lambda, &mu).map_err(err)?;
            BuiltModel {
                model,
                closed_theta: Some(theta),
            }
        }
        "rq-phase" => {
            let spec = models::PhaseLeadTimeSpec {
                beta: require(source.beta, "beta")?,
                weights: source.weights.clone().ok_or("missing --weights")?,
                r: require(source.r, "r")?,
                s: require(source.r, "r")? + require(source.q, "Q")?,
            };
            let model = models::build_rq_phase(&spec, require(source.q, "Q")?, lambda, &mu)
                .map_err(err)?;
            BuiltModel {
                model,
                closed_theta: None,
            }
        }
        "tandem" => {
            let nu = source.nu.clone().ok_or("missing --nu")?;
            let (model, theta) =
                models::build_tandem(require(source.buffer, "buffer")?, lambda, &mu, &nu)
                    .map_err(err)?;
            BuiltModel {
                model,
                closed_theta: Some(theta),
            }
        }
        "sensor" => {
            let model = models::build_sensor_node(
                lambda,
                mu[0],
                require(source.alpha, "alpha")?,
                require(source.beta_on, "beta-on")?,
                require(source.rate_a, "rate-a")?,
                require(source.rate_s, "rate-s")?,
            )
            .map_err(err)?;
            BuiltModel {
                model,
                closed_theta: None,
            }
        }
        "maintenance" => {
            let policy = models::MaintenancePolicy {
                lambda,
                mu: mu.clone(),
                nu_maint: require(source.nu_m, "nu-m")?,
                nu_repair: require(source.nu_r, "nu-r")?,
                failure: match (source.nu_slope, source.nu.as_deref()) {
                    (Some(slope), _) => models::FailureRates::Linear(slope),
                    (None, Some([c])) => models::FailureRates::Constant(*c),
                    (None, Some(t)) => models::FailureRates::Table(t.to_vec()),
                    (None, None) => return Err("missing --nu or --nu-slope".to_string()),
                },
                costs: models::MaintenanceCosts {
                    maintenance: 0.0,
                    repair: 0.0,
                    blocked: 0.0,
                    waiting: 0.0,
                },
            };
            let (model, theta) =
                models::build_maintenance(&policy, require(source.n_threshold, "n-threshold")?)
                    .map_err(err)?;
            BuiltModel {
                model,
                closed_theta: Some(theta),
            }
        }
        "production" => {
            let nu = source.nu.clone().ok_or("missing --nu")?;
            let model = models::build_production(
                require(source.r, "r")?,
                require(source.s, "S")?,
                lambda,
                &mu,
                nu[0],
            )
            .map_err(err)?;
            BuiltModel {
                model,
                closed_theta: None,
            }
        }
        other => return Err(format!("unknown builder `{other}`")),
    };
    Ok(built)
}

fn service_law(args: &LawArgs) -> Result<ServiceLaw, String> {
    let law = match args.kind.as_str() {
        "deterministic" => ServiceLaw::Deterministic(args.param),
        "exponential" => ServiceLaw::Exponential(args.param),
        "erlang" => ServiceLaw::Erlang {
            stages: args.stages,
            rate: args.param,
        },
        "mixture" => ServiceLaw::PhaseMixture {
            weights: args
                .law_weights
                .clone()
                .ok_or("mixture law needs --law-weights")?,
            rate: args.param,
        },
        other => return Err(format!("unknown service law `{other}`")),
    };
    law.validate().map_err(|e| e.to_string())?;
    Ok(law)
}

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), String> {
    let mut w = csv::Writer::from_path(path).map_err(|e| format!("{path:?}: {e}"))?;
    w.write_record(header).map_err(|e| e.to_string())?;
    for row in rows {
        w.write_record(row).map_err(|e| e.to_string())?;
    }
    w.flush().map_err(|e| e.to_string())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), String> {
    fs::write(path, format!("{}\n", serde_json::to_string_pretty(value).unwrap()))
        .map_err(|e| format!("{path:?}: {e}"))
}

fn theta_rows(model: &ModelSpec, theta: &[f64]) -> Vec<Vec<String>> {
    model
        .env
        .labels()
        .iter()
        .zip(theta)
        .map(|(l, t)| vec![l.clone(), format!("{t}")])
        .collect()
}

/// Levels to materialize when emitting joint laws: up to a tail mass below
/// `1e-9`, capped for display sanity.
fn emit_levels(sol: &ProductFormSolution) -> usize {
    let mut n = sol.xi.stored_levels();
    while n < 400 && sol.xi.tail_mass(n) > 1e-9 {
        n += 1;
    }
    n
}

fn emit_solution(
    cli: &Cli,
    model: &ModelSpec,
    sol: &ProductFormSolution,
    stem: &str,
) -> Result<(), String> {
    let levels = emit_levels(sol);
    let mut pi_rows = Vec::new();
    for n in 0..levels {
        for (k, label) in model.env.labels().iter().enumerate() {
            pi_rows.push(vec![n.to_string(), label.clone(), format!("{}", sol.pi(n, k))]);
        }
    }
    write_csv(
        &cli.out.join(format!("{stem}_pi.csv")),
        &["level", "state", "value"],
        &pi_rows,
    )?;
    write_csv(
        &cli.out.join(format!("{stem}_theta.csv")),
        &["state", "value"],
        &theta_rows(model, &sol.theta),
    )?;
    let xi_rows: Vec<Vec<String>> = (0..levels)
        .map(|n| vec![n.to_string(), format!("{}", sol.xi.xi(n))])
        .collect();
    write_csv(
        &cli.out.join(format!("{stem}_xi.csv")),
        &["level", "value"],
        &xi_rows,
    )?;
    Ok(())
}

fn verdict_json(verdict: &ct::Verdict) -> serde_json::Value {
    match verdict {
        ct::Verdict::ProductForm => json!({"kind": "product-form"}),
        ct::Verdict::NotProductForm(r) => json!({"kind": "not-product-form", "reason": r}),
        ct::Verdict::NotErgodic(r) => json!({"kind": "not-ergodic", "reason": r}),
    }
}

fn print_theta(model: &ModelSpec, theta: &[f64], name: &str) {
    println!("{name}:");
    for (label, t) in model.env.labels().iter().zip(theta) {
        println!("  {label:>8}  {t:.12}");
    }
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_validate(cli: &Cli, source: &ModelSource, tol: Option<f64>) -> Result<u8, String> {
    let built = build_model(source)?;
    let report = env::validate_with_tolerance(
        &built.model,
        tol.unwrap_or(numerics::EPS_STOCH),
    );
    println!("{report}");
    write_json(
        &cli.out.join("validate.json"),
        &json!({
            "model": built.model.name,
            "accepted": report.is_accepted(),
            "violations": report.violations,
        }),
    )?;
    Ok(if report.is_accepted() {
        EXIT_OK
    } else {
        EXIT_MODEL
    })
}

fn negative_verdict(cli: &Cli, stem: &str, e: &SolveError) -> Result<u8, String> {
    let verdict = ct::Verdict::from_error(e);
    println!("verdict: {e}");
    write_json(
        &cli.out.join(format!("{stem}.json")),
        &json!({"verdict": verdict_json(&verdict)}),
    )?;
    Ok(if cli.strict { EXIT_VERDICT } else { EXIT_OK })
}

fn cmd_solve(cli: &Cli, source: &ModelSource) -> Result<u8, String> {
    let built = build_model(source)?;
    let report = env::validate(&built.model);
    if !report.is_accepted() {
        println!("{report}");
        return Ok(EXIT_MODEL);
    }
    match ct::solve_product_form(&built.model) {
        Ok(sol) => {
            println!("model: {}", built.model.name);
            println!("verdict: product form");
            println!("normalization constant C = {}", sol.c);
            print_theta(&built.model, &sol.theta, "environment law theta");
            if let Some(cf) = &built.closed_theta {
                let worst = cf
                    .iter()
                    .zip(&sol.theta)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                println!("closed form vs solver: max difference {worst:.3e}");
            }
            emit_solution(cli, &built.model, &sol, "solve")?;
            let levels = emit_levels(&sol);
            write_json(
                &cli.out.join("solve.json"),
                &json!({
                    "model": built.model.name,
                    "verdict": verdict_json(&ct::Verdict::ProductForm),
                    "C": sol.c,
                    "theta": theta_map(&built.model, &sol.theta),
                    "diagnostics": {
                        "emitted_levels": levels,
                        "tail_mass_beyond": sol.xi.tail_mass(levels),
                        "closed_form_max_deviation": built.closed_theta.as_ref().map(|cf| {
                            cf.iter()
                                .zip(&sol.theta)
                                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
                        }),
                    },
                }),
            )?;
            Ok(EXIT_OK)
        }
        Err(e) => negative_verdict(cli, "solve", &e),
    }
}

fn theta_map(model: &ModelSpec, theta: &[f64]) -> serde_json::Value {
    let map: serde_json::Map<String, serde_json::Value> = model
        .env
        .labels()
        .iter()
        .zip(theta)
        .map(|(l, t)| (l.clone(), json!(t)))
        .collect();
    serde_json::Value::Object(map)
}

fn cmd_solve_finite(
    cli: &Cli,
    source: &ModelSource,
    capacity: Option<usize>,
) -> Result<u8, String> {
    let built = build_model(source)?;
    let mut model = built.model;
    if let Some(cap) = capacity {
        let lambda: Vec<f64> = (0..=cap.max(1)).map(|n| model.queue.lambda(n)).collect();
        let mu: Vec<f64> = (1..=cap + 1).map(|n| model.queue.mu(n)).collect();
        let queue = QueueSpec::new(lambda, mu, Capacity::Finite(cap)).map_err(|e| e.to_string())?;
        model = ModelSpec::new(model.name.clone(), queue, model.env);
    } else if model.queue.capacity() == Capacity::Infinite {
        return Err("solve-finite needs --capacity or a finite-capacity model file".to_string());
    }
    match ct::solve_product_form_finite(&model) {
        Ok(sol) => {
            println!("model: {}", model.name);
            println!("verdict: product form (finite waiting room)");
            print_theta(&model, &sol.theta, "environment law theta");
            emit_solution(cli, &model, &sol, "solve_finite")?;
            write_json(
                &cli.out.join("solve_finite.json"),
                &json!({
                    "model": model.name,
                    "verdict": verdict_json(&ct::Verdict::ProductForm),
                    "C": sol.c,
                    "theta": theta_map(&model, &sol.theta),
                }),
            )?;
            Ok(EXIT_OK)
        }
        Err(e) => negative_verdict(cli, "solve_finite", &e),
    }
}

fn cmd_embedded(cli: &Cli, source: &ModelSource) -> Result<u8, String> {
    let built = build_model(source)?;
    let model = &built.model;
    let sol = match embedded::solve_embedded(model) {
        Ok(sol) => sol,
        Err(embedded::EmbeddedError::Precondition(reason)) => {
            println!("verdict: continuous-time law is not product form ({reason})");
            write_json(
                &cli.out.join("embedded.json"),
                &json!({"verdict": {"kind": "precondition-failed", "reason": reason}}),
            )?;
            return Ok(if cli.strict { EXIT_VERDICT } else { EXIT_OK });
        }
        Err(e) => return Err(e.to_string()),
    };
    println!("model: {}", model.name);
    print_theta(model, &sol.theta_hat, "embedded environment law theta-hat");
    let inessential: Vec<&str> = model
        .env
        .labels()
        .iter()
        .enumerate()
        .filter(|(k, _)| !sol.reachable_one_step[*k])
        .map(|(_, l)| l.as_str())
        .collect();
    println!("one-step reachable set L:");
    for (k, label) in model.env.labels().iter().enumerate() {
        if sol.reachable_one_step[k] {
            println!("  {label}");
        }
    }
    println!(
        "inessential level sets: {}",
        if inessential.is_empty() {
            "none".to_string()
        } else {
            inessential
                .iter()
                .map(|l| format!("levels x {{{l}}}"))
                .collect::<Vec<_>>()
                .join(", ")
        }
    );
    println!("recurrent class period: {}", sol.period);

    write_csv(
        &cli.out.join("embedded_theta_hat.csv"),
        &["state", "value"],
        &theta_rows(model, &sol.theta_hat),
    )?;
    let mut pi_rows = Vec::new();
    let levels = {
        let mut n = sol.xi.stored_levels();
        while n < 400 && sol.xi.tail_mass(n) > 1e-9 {
            n += 1;
        }
        n
    };
    for n in 0..levels {
        for (k, label) in model.env.labels().iter().enumerate() {
            pi_rows.push(vec![
                n.to_string(),
                label.clone(),
                format!("{}", sol.pi_hat(n, k)),
            ]);
        }
    }
    write_csv(
        &cli.out.join("embedded_pi_hat.csv"),
        &["level", "state", "value"],
        &pi_rows,
    )?;
    let report = format!(
        "embedded chain report for {}\n\
         one-step reachable set L: {}\n\
         inessential states: {}\n\
         recurrent class period: {}\n",
        model.name,
        model
            .env
            .labels()
            .iter()
            .enumerate()
            .filter(|(k, _)| sol.reachable_one_step[*k])
            .map(|(_, l)| l.clone())
            .collect::<Vec<_>>()
            .join(", "),
        if inessential.is_empty() {
            "none".to_string()
        } else {
            inessential.join(", ")
        },
        sol.period
    );
    fs::write(cli.out.join("embedded_report.txt"), report).map_err(|e| e.to_string())?;
    write_json(
        &cli.out.join("embedded.json"),
        &json!({
            "model": model.name,
            "verdict": {"kind": "product-form"},
            "theta_hat": theta_map(model, &sol.theta_hat),
            "period": sol.period,
            "inessential": inessential,
        }),
    )?;
    Ok(EXIT_OK)
}

fn cmd_mg1(cli: &Cli, env_source: &Mg1EnvSource, law: &LawArgs, lambda: f64) -> Result<u8, String> {
    let environment = if let Some(path) = &env_source.model {
        let text = fs::read_to_string(path).map_err(|e| format!("cannot read {path:?}: {e}"))?;
        env::model_from_json(&text).map_err(|e| e.to_string())?.env
    } else {
        match env_source.env_builder.as_deref() {
            Some("zero-lead") => mg1::zero_lead_env(
                require(env_source.r, "r")?,
                require(env_source.s, "S")?,
            ),
            Some("full-refill") => mg1::full_refill_env(
                require(env_source.s, "S")?,
                require(env_source.nu, "nu")?,
            ),
            Some("vacation") => mg1::vacation_env(
                require(env_source.p_leave, "p-leave")?,
                require(env_source.nu, "nu")?,
            ),
            Some(other) => return Err(format!("unknown environment builder `{other}`")),
            None => {
                return Err(
                    "provide an environment: --model or --env-builder".to_string(),
                )
            }
        }
    };
    let law = service_law(law)?;
    let kernel = mg1::HessenbergKernel::from_law(&law, lambda).map_err(|e| e.to_string())?;
    match mg1::mg1_product_form(&kernel, &environment) {
        Ok(sol) => {
            println!("verdict: product form (tensor of level and environment chains)");
            println!("tensor residual: {:.3e}", sol.residual);
            println!("environment law theta-hat:");
            for (label, t) in environment.labels().iter().zip(&sol.theta_hat) {
                println!("  {label:>8}  {t:.12}");
            }
            let xi_rows: Vec<Vec<String>> = sol
                .xi_hat
                .iter()
                .enumerate()
                .map(|(n, x)| vec![n.to_string(), format!("{x}")])
                .collect();
            write_csv(&cli.out.join("mg1_xi_hat.csv"), &["level", "value"], &xi_rows)?;
            let th_rows: Vec<Vec<String>> = environment
                .labels()
                .iter()
                .zip(&sol.theta_hat)
                .map(|(l, t)| vec![l.clone(), format!("{t}")])
                .collect();
            write_csv(
                &cli.out.join("mg1_theta_hat.csv"),
                &["state", "value"],
                &th_rows,
            )?;
            write_json(
                &cli.out.join("mg1.json"),
                &json!({
                    "verdict": {"kind": "product-form"},
                    "residual": sol.residual,
                }),
            )?;
            Ok(EXIT_OK)
        }
        Err(mg1::Mg1Error::NotErgodic(r)) => {
            println!("verdict: not ergodic ({r})");
            write_json(
                &cli.out.join("mg1.json"),
                &json!({"verdict": {"kind": "not-ergodic", "reason": r}}),
            )?;
            Ok(if cli.strict { EXIT_VERDICT } else { EXIT_OK })
        }
        Err(mg1::Mg1Error::ConstraintViolated(r)) => {
            println!("verdict: environment is not interference-free ({r})");
            write_json(
                &cli.out.join("mg1.json"),
                &json!({"verdict": {"kind": "constraint-violated", "reason": r}}),
            )?;
            Ok(if cli.strict { EXIT_VERDICT } else { EXIT_OK })
        }
        Err(e) => Err(e.to_string()),
    }
}

fn cmd_counterexample(cli: &Cli, lambda: f64, mu: f64, nu: f64) -> Result<u8, String> {
    let report = mg1::md1_inventory_counterexample(lambda, mu, nu).map_err(|e| e.to_string())?;
    println!(
        "would-be environment ratio from the level-0 balance: {:.3} ({})",
        report.ratio_level0, report.ratio_level0
    );
    println!(
        "would-be environment ratio from the level-1 balance: {:.3} ({})",
        report.ratio_level1, report.ratio_level1
    );
    if report.product_form_refuted {
        println!("product form refuted: the two balances disagree");
    } else {
        println!("the two balances agree at these parameters");
    }
    println!(
        "level marginal still matches the plain deterministic-service law (TV {:.3e})",
        report.marginal_tv
    );
    println!(
        "best rank-one fit leaves L1 residual {:.6}",
        report.rank_one_l1_residual
    );
    let mut rows = Vec::new();
    for (n, row) in report.joint.iter().enumerate() {
        for (k, label) in ["2", "1", "0"].iter().enumerate() {
            rows.push(vec![n.to_string(), label.to_string(), format!("{}", row[k])]);
        }
    }
    write_csv(
        &cli.out.join("counterexample_pi_hat.csv"),
        &["level", "state", "value"],
        &rows,
    )?;
    write_json(
        &cli.out.join("counterexample.json"),
        &json!({
            "ratio_level0": report.ratio_level0,
            "ratio_level1": report.ratio_level1,
            "product_form_refuted": report.product_form_refuted,
            "marginal_tv": report.marginal_tv,
            "rank_one_l1_residual": report.rank_one_l1_residual,
        }),
    )?;
    Ok(if cli.strict && report.product_form_refuted {
        EXIT_VERDICT
    } else {
        EXIT_OK
    })
}

fn cmd_optimize(cli: &Cli, args: &MaintenanceArgs) -> Result<u8, String> {
    let failure = match (args.nu_const, args.nu_slope) {
        (Some(c), None) => models::FailureRates::Constant(c),
        (None, Some(s)) => models::FailureRates::Linear(s),
        _ => return Err("provide exactly one of --nu-const / --nu-slope".to_string()),
    };
    let policy = models::MaintenancePolicy {
        lambda: args.lambda,
        mu: args.mu.clone(),
        nu_maint: args.nu_m,
        nu_repair: args.nu_r,
        failure,
        costs: models::MaintenanceCosts {
            maintenance: args.c_m,
            repair: args.c_r,
            blocked: args.c_b,
            waiting: args.c_w,
        },
    };
    let opt = models::optimize_maintenance(&policy, args.n_min..=args.n_max)
        .map_err(|e| e.to_string())?;
    println!("optimal threshold N* = {}", opt.n_star);
    if let Some(trend) = opt.monotonicity {
        println!("constant failure rate: cost curve is {trend:?}");
    }
    let rows: Vec<Vec<String>> = opt
        .curve
        .iter()
        .map(|(n, g)| vec![n.to_string(), format!("{g}")])
        .collect();
    write_csv(&cli.out.join("g_curve.csv"), &["N", "g"], &rows)?;
    write_json(
        &cli.out.join("optimize_maintenance.json"),
        &json!({
            "n_star": opt.n_star,
            "monotonicity": opt.monotonicity.map(|m| format!("{m:?}")),
        }),
    )?;
    Ok(EXIT_OK)
}

fn cmd_simulate(
    cli: &Cli,
    source: &ModelSource,
    events: u64,
    seed: Option<u64>,
) -> Result<u8, String> {
    let seed = match seed {
        Some(s) => s,
        None => std::env::var("ENVQ_SEED")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(1),
    };
    let built = build_model(source)?;
    let report = env::validate(&built.model);
    if !report.is_accepted() {
        println!("{report}");
        return Ok(EXIT_MODEL);
    }
    let est = sim::simulate(&SimModel::Exponential(&built.model), events, seed);
    println!(
        "simulated {} events ({} departures), seed {}",
        est.events, est.departures, est.seed
    );
    let labels = built.model.env.labels();
    let mut occ_rows = Vec::new();
    let mut emb_rows = Vec::new();
    for n in 0..est.levels() {
        for (k, label) in labels.iter().enumerate() {
            let (t, t_se) = est.time_avg(n, k);
            let (d, d_se) = est.embedded(n, k);
            if t > 0.0 || d > 0.0 {
                occ_rows.push(vec![
                    n.to_string(),
                    label.clone(),
                    format!("{t}"),
                    format!("{t_se}"),
                ]);
                emb_rows.push(vec![
                    n.to_string(),
                    label.clone(),
                    format!("{d}"),
                    format!("{d_se}"),
                ]);
            }
        }
    }
    write_csv(
        &cli.out.join("sim_occupancy.csv"),
        &["level", "state", "value", "se"],
        &occ_rows,
    )?;
    write_csv(
        &cli.out.join("sim_embedded.csv"),
        &["level", "state", "value", "se"],
        &emb_rows,
    )?;
    write_json(
        &cli.out.join("simulate.json"),
        &json!({
            "model": built.model.name,
            "events": est.events,
            "departures": est.departures,
            "seed": est.seed,
        }),
    )?;
    Ok(EXIT_OK)
}

fn cmd_check_invertible(cli: &Cli, source: &ModelSource, rate: f64) -> Result<u8, String> {
    let built = build_model(source)?;
    let envr = &built.model.env;
    let m = envr.working_projector().scale(rate).sub(envr.v());
    let verdict = numerics::check_flow_invertible(&m, &envr.working_mask());
    let (desc, value) = match &verdict {
        InvertibilityVerdict::InvertibleCertified => (
            "invertible (certified)".to_string(),
            json!({"kind": "invertible-certified"}),
        ),
        InvertibilityVerdict::FlowViolated { witness } => {
            let labels: Vec<&str> = witness.iter().map(|&k| envr.label(k)).collect();
            (
                format!("flow condition violated by blocking subset {{{}}}", labels.join(", ")),
                json!({"kind": "flow-violated", "witness": labels}),
            )
        }
        InvertibilityVerdict::HypothesesUnmet { reason } => (
            format!("hypotheses unmet: {reason}"),
            json!({"kind": "hypotheses-unmet", "reason": reason}),
        ),
    };
    println!("matrix rate*I_W - V with rate = {rate}: {desc}");
    write_json(&cli.out.join("check_invertible.json"), &json!({"verdict": value}))?;
    Ok(match verdict {
        InvertibilityVerdict::InvertibleCertified => EXIT_OK,
        _ if cli.strict => EXIT_VERDICT,
        _ => EXIT_OK,
    })
}
