//! Command-line front end of `fedchain-sim`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use super::config::{ExperimentConfig, RawConfig};
use super::experiment::{build_problem, compare, execute_in, initial_point, run_experiment, summarize};
use super::output::{compare_csv, compare_table, fmt_real, trace_csv, write_run_outputs};
use super::presets::{find_preset, PRESETS};
use crate::error::{Error, Result};
use crate::federation::Env;
use crate::metrics::{audit_distance_conserving, audit_zero_respecting};
use crate::objectives::hard_instance_lower_bound;

#[derive(Debug, Parser)]
#[command(
    name = "fedchain-sim",
    version,
    about = "Deterministic federated-optimization simulator"
)]
pub struct Cli {
    /// Worker threads for running clients and repeats in parallel.
    #[arg(long, global = true, env = "FEDCHAIN_SIM_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every optimizer in a config and write one trace CSV per run.
    Run(ExperimentArgs),
    /// Run a config and rank its optimizers by median final suboptimality.
    Compare(ExperimentArgs),
    /// Run one optimizer on the hard two-client instance and check the bound.
    Lowerbound(LowerboundArgs),
    /// Inspect the built-in experiments.
    Presets {
        #[command(subcommand)]
        action: PresetsAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum PresetsAction {
    List,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Config file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in experiment (see `presets list`).
    #[arg(long)]
    pub preset: Option<String>,
    /// Overrides the config's `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; defaults to `output.dir` or `results/<name>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the config's `repeat`.
    #[arg(long)]
    pub repeat: Option<usize>,
}

#[derive(Debug, Args)]
pub struct LowerboundArgs {
    #[arg(long, default_value_t = 1.0)]
    pub l2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub zeta_hat: f64,
    /// Strong convexity; defaults to the convex-case choice for `rounds`.
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub rounds: usize,
    #[arg(long, default_value = "sgd")]
    pub method: String,
    /// Stepsize; the method's preset when omitted.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the trace CSV here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::UnknownField(_) => 2,
        Error::NonFinite { .. } => 3,
        _ => 1,
    }
}

/// Parses the process arguments, runs, and maps errors to exit codes.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        // Only fails if a pool already exists, which is harmless here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let stdout = std::io::stdout();
    match dispatch(&cli.command, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                Error::NonFinite { round } => eprintln!("error: iterate became non-finite at round {round}"),
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn dispatch(command: &Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Run(args) => run_configs(args, false, out),
        Command::Compare(args) => run_configs(args, true, out),
        Command::Lowerbound(args) => lowerbound(args, out),
        Command::Presets {
            action: PresetsAction::List,
        } => {
            for p in PRESETS {
                writeln!(out, "{:<28} {}", p.name, p.description)?;
            }
            Ok(())
        }
    }
}

/// Config texts to run, each with an optional output subdirectory.
fn sources(args: &ExperimentArgs) -> Result<Vec<(Option<String>, String)>> {
    match (&args.config, &args.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
            Ok(vec![(None, text)])
        }
        (None, Some(name)) => Ok((find_preset(name)?.configs)()),
        (None, None) => Err(Error::Config("pass --config or --preset".into())),
    }
}

fn load(text: &str, args: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut raw = RawConfig::parse(text)?;
    if let Some(seed) = args.seed {
        raw.set("seed", seed.to_string());
    }
    if let Some(repeat) = args.repeat {
        raw.set("repeat", repeat.to_string());
    }
    ExperimentConfig::from_raw(&raw)
}

fn out_dir(cfg: &ExperimentConfig, args: &ExperimentArgs, sub: Option<&str>) -> PathBuf {
    let base = match (&args.out, &cfg.out_dir) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => o.clone(),
        (None, None) => Path::new("results").join(&cfg.name),
    };
    match sub {
        Some(s) => base.join(s),
        None => base,
    }
}

fn run_configs(args: &ExperimentArgs, ranking: bool, out: &mut dyn Write) -> Result<()> {
    // Parse everything first so a bad config fails before any work.
    let configs = sources(args)?
        .into_iter()
        .map(|(sub, text)| Ok((sub, load(&text, args)?)))
        .collect::<Result<Vec<_>>>()?;
    for (sub, cfg) in &configs {
        let dir = out_dir(cfg, args, sub.as_deref());
        let results = run_experiment(cfg)?;
        let summary = summarize(cfg, &results);
        write_run_outputs(&dir, &cfg.digest, &results, &summary)?;
        writeln!(out, "# {} -> {}", cfg.name, dir.display())?;
        if ranking {
            let rows = compare(cfg, &results)?;
            fs::write(dir.join("compare.csv"), compare_csv(&cfg.digest, &rows))?;
            out.write_all(compare_table(&rows).as_bytes())?;
        } else {
            for s in &summary {
                writeln!(
                    out,
                    "{} seed={} rounds={} final={} grad_calls={}",
                    s.label,
                    s.seed,
                    s.rounds,
                    fmt_real(s.final_suboptimality),
                    s.grad_calls
                )?;
            }
        }
    }
    Ok(())
}

fn lowerbound(args: &LowerboundArgs, out: &mut dyn Write) -> Result<()> {
    let mut raw = RawConfig::default();
    raw.set("name", "lowerbound");
    raw.set("problem.family", "hard");
    raw.set("problem.l2", args.l2.to_string());
    raw.set("problem.zeta_hat", args.zeta_hat.to_string());
    raw.set("problem.rounds", args.rounds.to_string());
    if let Some(mu) = args.mu {
        raw.set("problem.mu", mu.to_string());
    }
    raw.set("rounds", args.rounds.to_string());
    raw.set("optimizer.1.method", args.method.clone());
    if let Some(eta) = args.eta {
        raw.set("optimizer.1.eta", eta.to_string());
    }
    if let Some(seed) = args.seed {
        raw.set("seed", seed.to_string());
    }
    let cfg = ExperimentConfig::from_raw(&raw)?;
    let problem = build_problem(&cfg.problem)?;
    let inst = problem
        .hard_instance()
        .ok_or_else(|| Error::Missing("hard instance".into()))?
        .clone();
    let x0 = initial_point(&cfg.init, &problem)?;
    let spec = &cfg.runs[0];
    let mut env = Env::new(&problem, cfg.oracle, cfg.seed).with_log();
    let run = execute_in(spec, &mut env, &x0)?;
    let log = env.log.take().ok_or_else(|| Error::Missing("query log".into()))?;
    let audit = audit_zero_respecting(&log, &inst)?;
    let conserving = audit_distance_conserving(&log, &problem)?;
    let bound = hard_instance_lower_bound(&inst, args.rounds)?;
    let achieved = problem
        .excess(&run.x)
        .ok_or_else(|| Error::Missing("optimum of the hard instance".into()))?;

    writeln!(out, "method              {}", spec.method_name())?;
    writeln!(out, "dim                 {}", inst.dim)?;
    writeln!(out, "beta                {}", fmt_real(Some(inst.beta)))?;
    writeln!(out, "mu                  {}", fmt_real(Some(inst.mu)))?;
    writeln!(out, "rounds              {}", args.rounds)?;
    writeln!(out, "lower_bound         {}", fmt_real(Some(bound)))?;
    writeln!(out, "achieved            {}", fmt_real(Some(achieved)))?;
    writeln!(out, "ratio               {}", fmt_real(Some(achieved / bound)))?;
    writeln!(out, "zero_respecting     {}", audit.is_clean())?;
    writeln!(out, "violations          {}", audit.violations.len())?;
    writeln!(
        out,
        "max_coordinate      {}",
        audit
            .max_coordinate()
            .map_or_else(|| "-".to_string(), |m| m.to_string())
    )?;
    writeln!(out, "distance_constant   {}", fmt_real(Some(conserving)))?;
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        fs::write(
            dir.join(format!("{}.csv", spec.label)),
            trace_csv(&cfg.digest, &run.trace),
        )?;
    }
    Ok(())
}
