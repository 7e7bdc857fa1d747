//! Command-line entry point: `verify`, `solve`, `eigen`, `oracle`, `falsify-quotient`.
//!
//! Each command writes `report.json` (plus `trace.csv` / `field.csv` where
//! applicable) into its output directory. Exit codes: 0 success, 1 a checked
//! property failed, 2 usage or configuration error.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{parse_config, RunConfig};
use crate::eigen::{compute_eigenpair, verify_bounds, ContinuationTrace};
use crate::error::{Error, Result};
use crate::grid::{check_strict_gamma_convexity, Grid, GridField};
use crate::newton::solve_family;
use crate::operators::HessianOperator;
use crate::radial::{oracle_with_cauchy, RadialProblem};
use crate::verify::{falsify_quotient_t, verify_operator};

#[derive(Debug, Parser)]
#[command(name = "garding-eigen", version, about = "First eigenpairs of concave Hessian operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
enum Command {
    /// Structural property checks of an operator on sampled spectra.
    Verify {
        #[arg(long)]
        operator: HessianOperator,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value = "out")]
        output: PathBuf,
    },
    /// Solve F(D²u) = 1 − λu with zero boundary values.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
    },
    /// Continuation, extrapolation and refinement of the first eigenpair.
    Eigen {
        #[arg(long)]
        config: PathBuf,
    },
    /// Radial shooting reference eigenvalue on a disk or ball.
    Oracle {
        #[arg(long)]
        operator: HessianOperator,
        #[arg(long)]
        radius: f64,
        #[arg(long, default_value_t = 100_000)]
        mesh: usize,
        #[arg(long, default_value = "out")]
        output: PathBuf,
    },
    /// Ray scan showing that a Hessian quotient has no Condition (T) constant.
    FalsifyQuotient {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        l: usize,
        #[arg(long, default_value = "out")]
        output: PathBuf,
    },
}

/// Outcome of a command before exit-code mapping.
struct Outcome {
    report: Value,
    pass: bool,
}

pub fn dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e @ (Error::Config(_) | Error::Validation(_) | Error::Io(_))) => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

fn run(command: Command) -> Result<bool> {
    let start = Instant::now();
    let invocation = serde_json::to_value(&command)?;
    let (output, outcome) = match command {
        Command::Verify { operator, seed, samples, ref output } => {
            let reports = verify_operator(&operator, samples, seed)?;
            let pass = reports.iter().all(|r| r.pass);
            (output.clone(), Outcome { report: json!({ "operator": operator, "properties": reports }), pass })
        }
        Command::Solve { ref config, lambda } => {
            let cfg = load_config(config)?;
            let out = cfg.output.clone();
            (out.clone(), solve_command(&cfg, lambda, &out)?)
        }
        Command::Eigen { ref config } => {
            let cfg = load_config(config)?;
            let out = cfg.output.clone();
            (out.clone(), eigen_command(&cfg, &out)?)
        }
        Command::Oracle { operator, radius, mesh, ref output } => {
            let problem = RadialProblem::new(operator, radius, mesh).map_err(|e| Error::Config(e.to_string()))?;
            let (coarse, fine, cauchy) = oracle_with_cauchy(&problem)?;
            let report = json!({
                "operator": problem.operator,
                "radius": radius,
                "mesh": mesh,
                "lambda1": coarse,
                "lambda1_doubled_mesh": fine,
                "cauchy_relative": cauchy,
                "laplace_mu1": problem.laplace_mu1(),
            });
            (output.clone(), Outcome { report, pass: cauchy <= 1e-6 })
        }
        Command::FalsifyQuotient { n, k, l, ref output } => {
            let report = falsify_quotient_t(n, k, l).map_err(|e| Error::Config(e.to_string()))?;
            let pass = report.pass;
            (output.clone(), Outcome { report: serde_json::to_value(report)?, pass })
        }
    };
    let doc = json!({
        "invocation": invocation,
        "result": outcome.report,
        "pass": outcome.pass,
        "metadata": { "wall_time_ms": start.elapsed().as_millis() as u64 },
    });
    fs::create_dir_all(&output)?;
    let mut w = BufWriter::new(File::create(output.join("report.json"))?);
    serde_json::to_writer_pretty(&mut w, &doc)?;
    writeln!(w)?;
    w.flush()?;
    println!("{}", serde_json::to_string(&json!({ "pass": outcome.pass, "report": output.join("report.json") }))?);
    Ok(outcome.pass)
}

fn write_field(dir: &Path, field: &GridField) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(File::create(dir.join("field.csv"))?);
    field.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_trace(dir: &Path, trace: &ContinuationTrace) -> Result<()> {
    let mut w = BufWriter::new(File::create(dir.join("trace.csv"))?);
    writeln!(w, "lambda,sup_norm,iterations,residual")?;
    for r in &trace.records {
        writeln!(w, "{:?},{:?},{},{:?}", r.lambda, r.sup_norm, r.iterations, r.residual)?;
    }
    w.flush()?;
    Ok(())
}

fn solve_command(cfg: &RunConfig, lambda: f64, out: &Path) -> Result<Outcome> {
    let grid = Grid::build(cfg.domain, cfg.h)?;
    let (u, report) = solve_family(&cfg.operator, &grid, lambda, None, &cfg.solver)?;
    write_field(out, &u)?;
    let report = json!({
        "config": cfg,
        "grid": grid.metadata(),
        "lambda": lambda,
        "sup_norm": u.sup_norm(),
        "newton": report,
    });
    Ok(Outcome { report, pass: true })
}

fn eigen_command(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let grid = Grid::build(cfg.domain, cfg.h)?;
    let run = compute_eigenpair(&cfg.operator, &grid, &cfg.solver, &cfg.eigen)?;
    let bounds = verify_bounds(&cfg.operator, &grid, &run.result, &run.u0)?;
    write_field(out, &run.result.eigenfunction)?;
    write_trace(out, &run.trace)?;
    let pass = bounds.pass && run.trace.monotone;
    let report = json!({
        "config": cfg,
        "grid": grid.metadata(),
        "gamma_convexity": check_strict_gamma_convexity(&cfg.domain, &cfg.operator),
        "operator": cfg.operator,
        "domain": cfg.domain,
        "h": cfg.h,
        "lambda1": run.result.lambda1,
        "lower": bounds.witness[0],
        "upper": bounds.witness[2],
        "iterations": run.result.iterations,
        "estimate": run.estimate,
        "residual": run.result.residual,
        "bounds": bounds,
        "trace": run.trace,
    });
    Ok(Outcome { report, pass })
}
