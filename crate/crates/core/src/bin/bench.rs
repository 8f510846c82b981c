//! Benchmark driver for HSODM and the baseline solvers.
//!
//! Log verbosity follows `HSODM_LOG` (`error`, `warn`, `info`, `debug`).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hsodm::bench::{
    emit_report, performance_profile, read_runs_csv, run_benchmark, sgm_table, solve_with, write_profile_csv,
    write_report_json, Metric, Report, RunSpec, SolverId,
};
use hsodm::problem::{make_problem, parse_problem_id, SUITE_NAMES};

#[derive(Parser)]
#[command(name = "bench", version, about = "Run and summarize optimization benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a solver x problem matrix and write runs.csv, report.json and profiles.
    Run {
        #[arg(long, value_delimiter = ',', default_value = "hsodm,hsodm-hvp,newton-tr,cubic")]
        solvers: Vec<SolverId>,
        #[arg(long, value_delimiter = ',', required = true)]
        problems: Vec<String>,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        #[arg(long, default_value_t = 20_000)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-5)]
        gtol: f64,
        /// One or more seeds, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "42")]
        seed: Vec<u64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Recompute a performance profile from a runs.csv file.
    Profile {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "iterations")]
        metric: Metric,
        #[arg(long, default_value = "profiles")]
        out: PathBuf,
    },
    /// Solve one problem and write its trace CSV and result JSON.
    Solve {
        #[arg(long, default_value = "hsodm")]
        solver: SolverId,
        #[arg(long)]
        problem: String,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        #[arg(long, default_value_t = 20_000)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-5)]
        gtol: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// List the built-in problem families.
    Problems,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HSODM_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> hsodm::Result<()> {
    match cli.command {
        Command::Run {
            solvers,
            problems,
            eps,
            max_iter,
            gtol,
            seed,
            jobs,
            out,
        } => {
            let spec = RunSpec {
                epsilon: eps,
                max_iter,
                gtol,
                seeds: seed,
                jobs,
                ..RunSpec::new(solvers, problems)
            };
            let results = run_benchmark(&spec)?;
            let profiles: Vec<_> = [Metric::Iterations, Metric::Time, Metric::GradientEvals]
                .into_iter()
                .map(|m| performance_profile(&results, m))
                .collect();
            let report = emit_report(&results, &profiles, &out)?;
            println!("{:<10} {:>7} {:>12} {:>12}", "solver", "solved", "time_sgm", "iter_sgm");
            for row in &report.sgm_table {
                println!(
                    "{:<10} {:>3}/{:<3} {:>12.4e} {:>12.2}",
                    row.solver, row.solved, row.total, row.time_sgm, row.iterations_sgm
                );
            }
            println!("wrote {}", out.display());
        }
        Command::Profile { input, metric, out } => {
            let results = read_runs_csv(&input)?;
            let profile = performance_profile(&results, metric);
            std::fs::create_dir_all(&out)?;
            for solver in profile.curves.keys() {
                let path = out.join(format!("profile_{}_{}.csv", metric.as_str(), solver));
                write_profile_csv(&profile, solver, &path)?;
            }
            let report = Report {
                sgm_table: if results.is_empty() {
                    Vec::new()
                } else {
                    sgm_table(&results)?
                },
                runs: results,
                profiles: vec![profile],
            };
            write_report_json(&report, &out.join(format!("profile_{}.json", metric.as_str())))?;
            println!("wrote {}", out.display());
        }
        Command::Solve {
            solver,
            problem,
            eps,
            max_iter,
            gtol,
            seed,
            out,
        } => {
            let spec = RunSpec {
                epsilon: eps,
                max_iter,
                gtol,
                seeds: vec![seed],
                ..RunSpec::new(vec![solver], vec![problem.clone()])
            };
            spec.validate()?;
            let result = solve_with(solver, &problem, &spec, seed)?;
            std::fs::create_dir_all(&out)?;
            let stem = format!("{}_{}", solver, problem.replace(':', "_"));
            result.save_trace_csv(&out.join(format!("{stem}_trace.csv")))?;
            hsodm::bench::write_atomic(&out.join(format!("{stem}.json")), |w| {
                use std::io::Write;
                writeln!(w, "{}", result.to_json()?)?;
                Ok(())
            })?;
            println!(
                "{} on {}: {} after {} iterations, f = {:.6e}, |g| = {:.3e}",
                result.solver, result.problem, result.status, result.iterations, result.f_final, result.grad_norm
            );
        }
        Command::Problems => {
            for name in SUITE_NAMES {
                let (_, n) = parse_problem_id(name)?;
                let p = make_problem(name, n)?;
                println!("{name:<20} default n = {n:<4} hvp = {}", p.has_hvp());
            }
        }
    }
    Ok(())
}
