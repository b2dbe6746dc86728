use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use bench::{audit_trace_file, converge, run_experiment, ConvergeArgs, ExperimentSpec};
use prefpomdp::exact::Scheme;

#[derive(Parser)]
#[command(
    name = "bench",
    about = "Run planner experiments, convergence studies and trace audits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Exact,
    Synchronous,
    Asynchronous,
}

#[derive(Subcommand)]
enum Command {
    /// Run every planner/budget/run cell of an experiment spec.
    Run {
        #[arg(long)]
        spec: PathBuf,
        /// Overrides the spec's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the spec's roadmap cache file.
        #[arg(long)]
        roadmap_cache: Option<PathBuf>,
        /// Rebuild the roadmap even if a matching cache exists.
        #[arg(long)]
        rebuild_roadmap: bool,
    },
    /// Convergence study of a tabular scheme against the grid oracle.
    Converge {
        #[arg(long)]
        model: String,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        eta: f64,
        #[arg(long, default_value_t = 100)]
        k_max: usize,
        #[arg(long, value_enum, default_value = "exact")]
        scheme: SchemeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV destination; defaults to `converge_<model>_<scheme>_eta<eta>.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute the returns of one or more traces.
    Audit {
        #[arg(long, required = true, num_args = 1..)]
        trace: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run {
            spec,
            out,
            roadmap_cache,
            rebuild_roadmap,
        } => {
            let mut s = ExperimentSpec::load(&spec)?;
            let base = spec.parent().map(PathBuf::from).unwrap_or_default();
            if let Some(out) = out {
                s.output_dir = Some(std::env::current_dir()?.join(out));
            }
            if let Some(cache) = roadmap_cache {
                s.roadmap_cache = Some(std::env::current_dir()?.join(cache));
            }
            s.rebuild_roadmap = rebuild_roadmap;
            let output = run_experiment(&s, &base)?;
            println!(
                "{:<10} {:>10} {:>6} {:>8} {:>12} {:>10}",
                "planner", "budget", "runs", "succ%", "return", "ci95"
            );
            for c in &output.cells {
                println!(
                    "{:<10} {:>10} {:>6} {:>8.1} {:>12.1} {:>10.1}",
                    c.planner,
                    c.budget,
                    c.runs,
                    100.0 * c.success_rate,
                    c.mean_return,
                    c.ci95
                );
            }
            let crashed: usize = output.cells.iter().map(|c| c.crashed).sum();
            Ok(if crashed > 0 {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Converge {
            model,
            delta,
            eta,
            k_max,
            scheme,
            seed,
            out,
        } => {
            let scheme = match scheme {
                SchemeArg::Exact => Scheme::Exact,
                SchemeArg::Synchronous => Scheme::Synchronous,
                SchemeArg::Asynchronous => Scheme::Asynchronous,
            };
            let name = format!("{scheme:?}").to_lowercase();
            let out = out.unwrap_or_else(|| PathBuf::from(format!("converge_{model}_{name}_eta{eta}.csv")));
            let rows = converge(&ConvergeArgs {
                model,
                scheme,
                delta,
                eta,
                k_max,
                seed,
                out: Some(out.clone()),
            })?;
            let last = rows.last().expect("k_max + 1 rows");
            println!(
                "{} rows -> {}; k={} error={:.6} theorem1={:.3} theorem2={:.3}",
                rows.len(),
                out.display(),
                last.k,
                last.error,
                last.theorem1,
                last.theorem2
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Audit { trace } => {
            let mut failed = false;
            for path in &trace {
                match audit_trace_file(path) {
                    Ok(r) => println!(
                        "ok   {}: {} macros, {} steps, return {:.6} (discounted {:.6})",
                        path.display(),
                        r.records,
                        r.steps,
                        r.undiscounted_return,
                        r.discounted_return
                    ),
                    Err(e) => {
                        failed = true;
                        println!("FAIL {}: {e:#}", path.display());
                    }
                }
            }
            Ok(if failed { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
    }
}
