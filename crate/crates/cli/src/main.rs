use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use srpl_core::harness::{self, ExperimentConfig, GradcheckOptions};
use srpl_core::Error;

#[derive(Parser)]
#[command(name = "srpl", version, about = "Steps-to-cost safety representation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent kind over several seeds.
    Train(RunArgs),
    /// Transfer a steps-to-cost model to new layouts.
    Transfer(RunArgs),
    /// One run per value of a bin width, horizon or kind sweep.
    Ablate(RunArgs),
    /// Failures against final return over a penalty or multiplier sweep.
    Tradeoff(RunArgs),
    /// Finite-difference checks of the network gradients.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Comma-separated seeds, replacing those in the config.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, default_value = "runs")]
    out_dir: PathBuf,
    /// Env steps per run, replacing the config value.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Random networks per head.
    #[arg(long, default_value_t = 100)]
    nets: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    /// Corrupt the analytic gradients; the check must then fail.
    #[arg(long, hide = true)]
    inject_fault: bool,
}

fn load(args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seeds) = &args.seeds {
        cfg.seeds = seeds.clone();
    }
    if let Some(steps) = args.steps {
        cfg.total_steps = steps;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(args: &RunArgs, cfg: &ExperimentConfig) -> PathBuf {
    args.out_dir.join(&cfg.name)
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn report_path(dir: &Path) {
    eprintln!("wrote {}", dir.display());
}

fn execute(command: Command) -> Result<bool, Error> {
    match command {
        Command::Train(args) => {
            let cfg = load(&args)?;
            let dir = out_dir(&args, &cfg);
            let report = harness::run(&cfg, &dir)?;
            print_json(&report.summary)?;
            report_path(&dir);
        }
        Command::Transfer(args) => {
            let cfg = load(&args)?;
            let dir = out_dir(&args, &cfg);
            let report = harness::transfer(&cfg, &dir)?;
            print_json(&report.arms)?;
            report_path(&dir);
        }
        Command::Ablate(args) => {
            let cfg = load(&args)?;
            let dir = out_dir(&args, &cfg);
            let report = harness::ablate(&cfg, &dir)?;
            for &i in &report.ranking {
                let r = &report.rows[i];
                println!(
                    "{}={} {} bins={} return={:.3} failures={}",
                    r.parameter.name(),
                    r.value,
                    r.kind,
                    r.num_bins,
                    r.summary.final_return.median,
                    r.summary.total_failures.median
                );
            }
            report_path(&dir);
        }
        Command::Tradeoff(args) => {
            let cfg = load(&args)?;
            let dir = out_dir(&args, &cfg);
            let report = harness::tradeoff(&cfg, &dir)?;
            for p in &report.points {
                println!(
                    "{} {}={} failures={} return={:.3}",
                    p.kind,
                    report.parameter.name(),
                    p.value,
                    p.total_failures.median,
                    p.final_return.median
                );
            }
            report_path(&dir);
        }
        Command::Gradcheck(args) => {
            let summary = harness::gradcheck_suite(&GradcheckOptions {
                nets: args.nets,
                seed: args.seed,
                tolerance: args.tolerance,
                inject_fault: args.inject_fault,
            })?;
            for s in &summary.suites {
                println!(
                    "{}: {} nets, {} failed, max rel error {:.3e}",
                    s.head, s.nets, s.failures, s.max_rel_error
                );
                for p in &s.worst.per_layer {
                    println!(
                        "  layer {} worst {:?}: analytic {:.6e} numeric {:.6e} rel {:.3e}",
                        p.layer, p.param, p.analytic, p.numeric, p.rel_error
                    );
                }
            }
            println!("{}", if summary.passed { "PASS" } else { "FAIL" });
            return Ok(summary.passed);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
