use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use signopt_core::Execution;
use signopt_harness::{fit_rate, parse_config, run_suite, run_sweep, ConfigError, Experiment, Suite};

const EXIT_CONFIG: u8 = 2;
const EXIT_VERIFY: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

#[derive(Parser)]
#[command(name = "signopt", version, about = "Sign-based optimizer experiments and verification suites")]
struct Cli {
    /// Output directory (overrides the config's `output`; default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress the per-run summary lines.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the first horizon and first seed of a config.
    Run { config: PathBuf },
    /// Run every (T, seed) pair of a config and fit the rate when possible.
    Sweep { config: PathBuf },
    /// Run a verification suite: condition1, contraction, descent, lemmas or smoothness.
    Verify {
        suite: Suite,
        /// Vectors, steps or Monte-Carlo samples (suite-dependent default).
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a config with the smoothness trace enabled and report the envelope fit.
    Estimate { config: PathBuf },
}

enum Failure {
    Config(String),
    Verify(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast::<ConfigError>() {
            Ok(c) => Failure::Config(c.to_string()),
            Err(e) => Failure::Runtime(e),
        }
    }
}

fn load(path: &Path) -> Result<Experiment, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(|e| Failure::Config(format!("{e:#}")))?;
    parse_config(&text).map_err(|e| Failure::Config(e.to_string()))
}

fn out_dir(cli_out: &Option<PathBuf>, exp: &Experiment) -> PathBuf {
    cli_out.clone().or_else(|| exp.config.output.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn report_warnings(warnings: &[String], quiet: bool) {
    if !quiet {
        for w in warnings {
            eprintln!("warning: {w}");
        }
    }
}

fn cmd_run(cli: &Cli, path: &Path, force_trace: bool) -> Result<(), Failure> {
    let mut exp = load(path)?;
    if force_trace {
        let mut cfg = exp.config.clone();
        cfg.logging.smoothness_trace = true;
        exp = Experiment::new(cfg).map_err(|e| Failure::Config(e.to_string()))?;
    }
    let t = exp.horizons()[0];
    let seed = *exp.config.seeds.first().ok_or_else(|| Failure::Config("config error at `seeds`: empty".into()))?;
    let plan = exp.plan(t, seed).map_err(|e| Failure::Config(e.to_string()))?;
    let outcome = signopt_harness::execute(&exp, plan)?;
    let dir = out_dir(&cli.out, &exp);
    let csv = outcome.write_to(&dir)?;
    report_warnings(&outcome.record.meta.warnings, cli.quiet);
    if !cli.quiet {
        println!(
            "{}: {} steps, mean grad_l1 {:.6e} -> {}",
            outcome.run_id,
            outcome.record.rows.len(),
            outcome.mean_grad_l1().unwrap_or(f64::NAN),
            csv.display()
        );
        if let Some((trace, env)) = &outcome.smoothness {
            println!(
                "smoothness: {} samples ({} skipped), envelope H <= {:.4} + {:.4} * ||grad||, coverage {:.3}",
                trace.samples.len(),
                trace.skipped,
                env.offset,
                env.slope,
                env.coverage
            );
        }
    }
    if let Some(f) = &outcome.record.meta.failure {
        return Err(Failure::Runtime(anyhow::anyhow!("{}: {f}", outcome.run_id)));
    }
    Ok(())
}

fn cmd_sweep(cli: &Cli, path: &Path) -> Result<(), Failure> {
    let exp = load(path)?;
    let dir = out_dir(&cli.out, &exp);
    let outcomes = run_sweep(&exp, Some(&dir))?;
    let mut warnings: Vec<String> = outcomes.iter().flat_map(|o| o.record.meta.warnings.iter().cloned()).collect();
    warnings.sort();
    warnings.dedup();
    report_warnings(&warnings, cli.quiet);
    let mut failed = 0;
    for o in &outcomes {
        if let Some(f) = &o.record.meta.failure {
            failed += 1;
            eprintln!("{}: partial run ({f})", o.run_id);
        } else if !cli.quiet {
            println!("{}: mean grad_l1 {:.6e}", o.run_id, o.mean_grad_l1().unwrap_or(f64::NAN));
        }
    }
    let points: Vec<(u64, f64)> = outcomes
        .iter()
        .filter(|o| o.record.meta.failure.is_none())
        .filter_map(|o| o.mean_grad_l1().map(|g| (o.t, g)))
        .collect();
    if let Ok(fit) = fit_rate(&points) {
        let rate = serde_json::to_string(&fit).context("serializing rate fit")?;
        fs::write(dir.join(format!("{}_rate.json", exp.config.name)), format!("{rate}\n"))
            .context("writing rate fit")?;
        if !cli.quiet {
            println!("rate fit: slope {:.4}, r^2 {:.4}", fit.slope, fit.r_squared);
        }
    }
    if failed > 0 {
        return Err(Failure::Runtime(anyhow::anyhow!("{failed} of {} runs failed", outcomes.len())));
    }
    Ok(())
}

fn cmd_verify(cli: &Cli, suite: Suite, trials: Option<usize>, seed: u64) -> Result<(), Failure> {
    let report = run_suite(suite, trials, seed, Execution::default())?;
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(format!("verify_{}.json", suite.name()));
    let body = serde_json::to_string_pretty(&report).context("serializing report")?;
    fs::write(&path, format!("{body}\n")).with_context(|| format!("writing {}", path.display()))?;
    if !cli.quiet {
        for c in &report.checks {
            println!("{} {} (margin {:.3e})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.margin);
        }
        println!(
            "{}: {} passed, {} failed, worst margin {:.3e} -> {}",
            suite.name(),
            report.passes,
            report.failures,
            report.worst_margin,
            path.display()
        );
    }
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure::Verify(format!("{} check(s) failed in suite {}", report.failures, suite.name())))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => cmd_run(&cli, config, false),
        Command::Estimate { config } => cmd_run(&cli, config, true),
        Command::Sweep { config } => cmd_sweep(&cli, config),
        Command::Verify { suite, trials, seed } => cmd_verify(&cli, *suite, *trials, *seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Verify(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(EXIT_VERIFY)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
