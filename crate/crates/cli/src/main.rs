//! `evt-suprema`: constants, simulations, verification suites and Pickands
//! estimates from the command line.
//!
//! Exit codes: 0 success, 2 invalid input, 3 I/O failure, 4 failed check
//! suite, 130 interrupted simulation (partial results are still written).

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use evt_suprema::asymptotics::{
    classify_regime, compute_constants_with, estimate_pickands, normalizers_log, PickandsMethod,
};
use evt_suprema::checks::{run_suite, SUITES};
use evt_suprema::experiments::{persist, resolve_pickands, run_scenario_with, ExperimentResult};
use evt_suprema::Error;
use serde_json::json;

use config::{ConfigFile, ModelBlock, PlanBlock};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Io(String),
    SuiteFailed(String),
    Interrupted,
    Other(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Io(m) | CliError::SuiteFailed(m) | CliError::Other(m) => f.write_str(m),
            CliError::Interrupted => f.write_str("interrupted; partial results written"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain { .. } => CliError::Validation(e.to_string()),
            Error::Io { .. } | Error::Format { .. } => CliError::Io(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Io(_) => 3,
            CliError::SuiteFailed(_) => 4,
            CliError::Interrupted => 130,
            CliError::Other(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "evt-suprema", version, about = "Extreme value laboratory for suprema of self-similar Gaussian processes with trend")]
struct Cli {
    /// TOML file with [model], [plan] and [output] blocks.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed of all random streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true, env = "EVT_SUPREMA_THREADS")]
    threads: Option<usize>,
    /// Output directory (must exist).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Machine-readable output on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Default)]
struct ModelFlags {
    #[arg(long)]
    hurst: Option<f64>,
    #[arg(long)]
    hurst_common: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    sigma0: Option<f64>,
    /// Minimal drift c.
    #[arg(long)]
    c: Option<f64>,
    /// Fraction of minimal drifts.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    elevated_factor: Option<f64>,
    /// Pickands constant H_alpha (estimated when absent and not tabulated).
    #[arg(long)]
    pickands: Option<f64>,
}

impl ModelFlags {
    fn block(&self) -> ModelBlock {
        ModelBlock {
            hurst: self.hurst,
            hurst_common: self.hurst_common,
            beta: self.beta,
            sigma: self.sigma,
            sigma0: self.sigma0,
            c: self.c,
            p: self.p,
            elevated_factor: self.elevated_factor,
            pickands: self.pickands,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Asymptotic constants, regime and normalizers.
    Constants {
        #[command(flatten)]
        model: ModelFlags,
        /// Sample sizes given through log n (repeatable).
        #[arg(long = "log-n", allow_negative_numbers = true)]
        log_n: Vec<f64>,
        /// Sample sizes (repeatable).
        #[arg(long)]
        n: Vec<u64>,
    },
    /// Replicated simulation of the normalized order statistics.
    Simulate {
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        n_points: Option<usize>,
        #[arg(long)]
        g_mult: Option<f64>,
        /// Exceedance level offsets x (comma separated).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        levels: Option<Vec<f64>>,
        /// Absolute-moment orders (comma separated).
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
    },
    /// Runs a verification suite.
    Check {
        /// One of: constants, limits, iid-weibull, pickands, oracle-bm, scenarios, reproducibility.
        suite: String,
    },
    /// Monte Carlo estimates of the Pickands constant over a schedule of horizons.
    Pickands {
        #[arg(long, allow_negative_numbers = true)]
        alpha: f64,
        #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
        horizons: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        reps: usize,
        /// Grid cells per unit of time on [0, T].
        #[arg(long, default_value_t = 256)]
        cells_per_unit: usize,
        #[arg(long, value_enum, default_value = "sup-over-integral")]
        method: MethodArg,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum MethodArg {
    SupOverIntegral,
    Definition,
}

struct Context {
    file: ConfigFile,
    seed: Option<u64>,
    out: Option<PathBuf>,
    json: bool,
}

impl Context {
    fn seed(&self) -> u64 {
        self.seed.or(self.file.plan.seed).unwrap_or(0)
    }

    fn out_dir(&self) -> Option<PathBuf> {
        self.out.clone().or_else(|| self.file.output.dir.clone())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Validation("invalid threads: must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Other(e.to_string()))?;
    }
    let json = cli.json || file.output.json.unwrap_or(false);
    let ctx = Context { file, seed: cli.seed, out: cli.out, json };
    match cli.command {
        Command::Constants { model, log_n, n } => cmd_constants(&ctx, &model, log_n, n),
        Command::Simulate { model, n, k, reps, n_points, g_mult, levels, lambdas } => {
            let flags = PlanBlock { n, k, reps, n_points, g_mult, levels, lambdas, ..Default::default() };
            cmd_simulate(&ctx, &model, &flags)
        }
        Command::Check { suite } => cmd_check(&ctx, &suite),
        Command::Pickands { alpha, horizons, reps, cells_per_unit, method } => {
            cmd_pickands(&ctx, alpha, &horizons, reps, cells_per_unit, method)
        }
    }
}

fn emit_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn cmd_constants(ctx: &Context, flags: &ModelFlags, log_n: Vec<f64>, n: Vec<u64>) -> Result<(), CliError> {
    let model = ctx.file.model.merged(&flags.block()).to_model()?;
    let mut logs: Vec<f64> = log_n;
    logs.extend(n.iter().map(|&n| (n as f64).ln()));
    if logs.is_empty() {
        logs = vec![1e3f64.ln(), 1e4f64.ln(), 1e6f64.ln()];
    }
    let plan = ctx.file.plan.to_plan_budget();
    let (pickands, source) = resolve_pickands(&model, ctx.seed(), &plan)?;
    let k = compute_constants_with(&model, pickands)?;
    let regime = classify_regime(&model);
    let rows = logs
        .iter()
        .map(|&l| normalizers_log(l, &k, &model))
        .collect::<Result<Vec<_>, _>>()?;
    if ctx.json {
        emit_json(&json!({
            "constants": k,
            "pickands_source": source,
            "regime": regime.tag.as_str(),
            "mixture_coeff": regime.mixture_coeff,
            "normalizers": rows,
        }));
        return Ok(());
    }
    println!("t0      {:.10}", k.t0);
    println!("A       {:.10}", k.a);
    println!("B       {:.10}", k.b);
    println!("tau     {:.10}", k.tau);
    println!("C       {:.10}", k.c_rate);
    println!("alpha   {:.10}", k.alpha);
    println!("H_alpha {:.10} ({source:?})", k.pickands);
    match regime.mixture_coeff {
        Some(coeff) => println!("regime  {} (coefficient {coeff:.10})", regime.tag.as_str()),
        None => println!("regime  {}", regime.tag.as_str()),
    }
    println!();
    println!("{:>12} {:>18} {:>18} {:>18}", "log n", "b_n", "a_n", "e_n");
    for r in rows {
        println!("{:>12.6} {:>18.10} {:>18.10} {:>18.10}", r.log_n, r.b_n, r.a_n, r.e_n);
    }
    Ok(())
}

impl PlanBlock {
    fn to_plan_budget(&self) -> evt_suprema::experiments::PickandsBudget {
        let d = evt_suprema::experiments::PickandsBudget::default();
        evt_suprema::experiments::PickandsBudget {
            horizon: self.pickands_horizon.unwrap_or(d.horizon),
            n_points: self.pickands_n_points.unwrap_or(d.n_points),
            reps: self.pickands_reps.unwrap_or(d.reps),
        }
    }
}

fn summary(result: &ExperimentResult) -> String {
    let n = &result.normalizers;
    let ks: Vec<String> = result.ks.iter().enumerate().map(|(j, d)| format!("KS[{}]={d:.4}", j + 1)).collect();
    let mut line = format!(
        "regime {} | n={} m_n={} b_m={:.6} a_m={:.6} e_m={:.6} | {} | reps {}/{} | {:.1}s",
        result.regime.tag.as_str(),
        n.n,
        n.m_n,
        n.b_n,
        n.a_n,
        n.e_n,
        ks.join(" "),
        result.completed_reps(),
        result.plan.reps,
        result.runtime_seconds
    );
    if result.truncated {
        line.push_str(" | TRUNCATED");
    }
    line
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(CliError::Io(format!("output directory {} does not exist", dir.display())))
    }
}

fn cmd_simulate(ctx: &Context, flags: &ModelFlags, plan_flags: &PlanBlock) -> Result<(), CliError> {
    let model = ctx.file.model.merged(&flags.block()).to_model()?;
    let mut block = ctx.file.plan.merged(plan_flags);
    block.seed = Some(ctx.seed());
    let mut plan = block.to_plan(model)?;
    let dir = ctx.out_dir().unwrap_or_else(|| PathBuf::from("."));
    ensure_dir(&dir)?;
    plan.output_path = Some(dir.clone());

    let cancel = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&cancel);
    // a second handler cannot be installed; only the first simulate per process needs one
    let _ = ctrlc::set_handler(move || flag.store(true, Ordering::Relaxed));

    let result = run_scenario_with(&plan, &cancel)?;
    persist(&result, &dir)?;
    if ctx.json {
        emit_json(&json!({
            "regime": result.regime.tag.as_str(),
            "mixture_coeff": result.regime.mixture_coeff,
            "normalizers": result.normalizers,
            "ks": result.ks,
            "tv_exceedance": result.tv_exceedance,
            "moments": result.moments,
            "completed_reps": result.completed_reps(),
            "truncated": result.truncated,
            "runtime_seconds": result.runtime_seconds,
            "output": dir,
        }));
    } else {
        println!("{}", summary(&result));
    }
    if result.truncated {
        return Err(CliError::Interrupted);
    }
    Ok(())
}

fn cmd_check(ctx: &Context, suite: &str) -> Result<(), CliError> {
    if !SUITES.contains(&suite) {
        return Err(CliError::Validation(format!(
            "unknown suite {suite:?}; available: {}",
            SUITES.join(", ")
        )));
    }
    let reports = run_suite(suite, ctx.seed())?;
    let passed = reports.iter().all(|r| r.passed);
    let verdict = json!({ "suite": suite, "seed": ctx.seed(), "passed": passed, "checks": reports });
    if let Some(dir) = ctx.out_dir() {
        ensure_dir(&dir)?;
        let path = dir.join(format!("check-{suite}.json"));
        let text = serde_json::to_string_pretty(&verdict).expect("serializable");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    if ctx.json {
        emit_json(&verdict);
    } else {
        for r in &reports {
            println!("{r}");
        }
    }
    if passed {
        Ok(())
    } else {
        Err(CliError::SuiteFailed(format!("suite {suite} failed")))
    }
}

fn cmd_pickands(
    ctx: &Context,
    alpha: f64,
    horizons: &[f64],
    reps: usize,
    cells_per_unit: usize,
    method: MethodArg,
) -> Result<(), CliError> {
    let method = match method {
        MethodArg::SupOverIntegral => PickandsMethod::SupOverIntegral,
        MethodArg::Definition => PickandsMethod::Definition,
    };
    let mut rows = Vec::new();
    for (i, &t) in horizons.iter().enumerate() {
        let cells = (t * cells_per_unit as f64).round().max(2.0) as usize;
        let est = estimate_pickands(alpha, t, cells, reps, ctx.seed().wrapping_add(i as u64), method)?;
        if !ctx.json {
            println!("alpha {alpha} T {t:>6}: {:.5} +- {:.5}", est.estimate, est.std_error);
        }
        rows.push(est);
    }
    if ctx.json {
        emit_json(&json!({ "alpha": alpha, "method": method, "estimates": rows }));
    }
    Ok(())
}
