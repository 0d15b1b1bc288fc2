//! Scenario-driven front end for the risk-sharing engine.
//!
//! One scenario file describes the space, payoff, agents, endowments, and
//! task; the binary dispatches to the engine, writes a structured report,
//! and reflects certificate validity in its exit status. Pointing
//! `--scenario` at a directory runs every `.json` inside concurrently, with
//! parallelism capped by `RISKSHARE_THREADS`.

mod report;
mod reproduce;
mod scenario;
mod tasks;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicI32, AtomicUsize, Ordering};

use clap::{Parser, ValueEnum};

use report::Format;
use tasks::{EXIT_OK, EXIT_VALIDATION};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TaskArg {
    Improve,
    Pareto,
    Upf,
    Equilibrium,
    Rdu,
    Reproduce,
}

impl TaskArg {
    fn matches(self, task: &scenario::TaskSpec) -> bool {
        matches!(
            (self, task),
            (TaskArg::Improve, scenario::TaskSpec::Improve)
                | (TaskArg::Pareto, scenario::TaskSpec::Pareto { .. })
                | (TaskArg::Upf, scenario::TaskSpec::Upf { .. })
                | (TaskArg::Equilibrium, scenario::TaskSpec::Equilibrium { .. })
                | (TaskArg::Rdu, scenario::TaskSpec::Rdu { .. })
                | (TaskArg::Reproduce, scenario::TaskSpec::Reproduce { .. })
        )
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "riskshare",
    version,
    about = "Risk-sharing engine: winner-take-all improvements, frontier traces, equilibria, dominance analysis"
)]
struct Cli {
    /// Task to run; must match the scenario's task kind.
    #[arg(value_enum)]
    task: TaskArg,
    /// Scenario file, or a directory of scenario files for batch mode.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; reports print to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format.
    #[arg(long, default_value = "json")]
    format: String,
    /// Overrides the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Attach brute-force oracle cross-checks where the instance is small
    /// enough.
    #[arg(long)]
    oracle: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let format: Format = match cli.format.parse() {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_VALIDATION as u8);
        }
    };
    let code = if cli.scenario.is_dir() {
        run_batch(&cli, format)
    } else {
        run_one(&cli, &cli.scenario, cli.out.as_deref(), format)
    };
    ExitCode::from(code as u8)
}

fn run_one(cli: &Cli, path: &Path, out: Option<&Path>, format: Format) -> i32 {
    let mut config = match scenario::parse_scenario(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("validation errors in {}:\n{e}", path.display());
            return EXIT_VALIDATION;
        }
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if !cli.task.matches(&config.task) {
        eprintln!(
            "validation error: scenario {} carries a different task kind than the subcommand",
            path.display()
        );
        return EXIT_VALIDATION;
    }
    let resolved = match scenario::resolve(config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("validation errors in {}:\n{e}", path.display());
            return EXIT_VALIDATION;
        }
    };
    match tasks::run_scenario(&resolved, cli.oracle) {
        Ok(outcome) => {
            match out {
                Some(dir) => {
                    if let Err(e) = outcome.report.emit(dir, format) {
                        eprintln!("error writing report: {e}");
                        return 1;
                    }
                }
                None => match format {
                    Format::Json => print!("{}", outcome.report.to_json()),
                    _ => print!("{}", outcome.report.to_text()),
                },
            }
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

/// Directory mode: every `.json` scenario runs on its own engine instance;
/// the overall exit status is the worst one seen.
fn run_batch(cli: &Cli, format: Format) -> i32 {
    let mut files: Vec<PathBuf> = match std::fs::read_dir(&cli.scenario) {
        Ok(entries) => entries
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect(),
        Err(e) => {
            eprintln!("cannot read {}: {e}", cli.scenario.display());
            return EXIT_VALIDATION;
        }
    };
    files.sort();
    if files.is_empty() {
        eprintln!("no .json scenarios in {}", cli.scenario.display());
        return EXIT_VALIDATION;
    }
    let threads = std::env::var("RISKSHARE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .min(files.len());
    let next = AtomicUsize::new(0);
    let worst = AtomicI32::new(EXIT_OK);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= files.len() {
                    break;
                }
                let file = &files[k];
                let stem = file
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| format!("scenario_{k}"));
                let out_dir = cli.out.as_ref().map(|d| d.join(&stem));
                let code = run_one(cli, file, out_dir.as_deref(), format);
                eprintln!("{}: exit {code}", file.display());
                worst.fetch_max(code, Ordering::Relaxed);
            });
        }
    });
    worst.load(Ordering::Relaxed)
}
