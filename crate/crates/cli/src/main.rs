//! `jetlab`: verify subequation hypotheses, check viscosity notions on grid
//! functions and solve Dirichlet problems from JSON problem files.
//!
//! Exit status: 0 when every check passes, 1 when any fails, 2 on usage or
//! input errors.

mod commands;
mod manifest;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use jetlab::problem::Problem;
use jetlab::verifier::{CheckConfig, SCHEMA_VERSION};
use jetlab::Tolerances;
use serde::Serialize;

use commands::{Context, Outcome};
use manifest::RunManifest;

#[derive(Parser)]
#[command(
    name = "jetlab",
    version,
    about = "Subequations on 2-jet space: axioms, duality, viscosity checks and Dirichlet solvers",
    after_help = "Environment:\n  JETLAB_THREADS  cap on worker threads (default: all cores)\n  SOURCE_DATE_EPOCH  fixes the manifest timestamp\n\nExit status: 0 all PASS, 1 any FAIL, 2 usage or input error."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Probe (P), (N), (T), monotonicity, compatibility and biduality of the induced set.
    VerifyAxioms(Flags),
    /// Compare the closed-form dual with the oracle dual and check dual(dual F) = F.
    DualCheck(Flags),
    /// Check that F > 0 on G is interior and F = 0 on the boundary of the induced set.
    CheckCompatibility(Flags),
    /// Empirical fiber modulus delta(eta); levels from `etas` in the problem file.
    FiberModulus(Flags),
    /// Compare set and pair verdicts node by node for the grid function `u`.
    CheckCorrespondence(Flags),
    /// Solve the Dirichlet problem with data `boundary`; `w`, if given, is the reference solution.
    Solve(Flags),
    /// Comparison harness for a subsolution `u` and a supersolution `w` (solver output if `w` is absent).
    Compare(Flags),
    /// Zero maximum principle for `u` with the cone `cone` (default: the operator's).
    Zmp(Flags),
}

#[derive(Args, Clone)]
struct Flags {
    /// Problem-definition file (JSON).
    #[arg(long, value_name = "PATH")]
    problem: PathBuf,
    /// Seed of every random stream.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Number of sampled points/jets per check.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Grid spacing, overriding the problem's `domain.h`.
    #[arg(long, value_name = "FLOAT")]
    h: Option<f64>,
    /// Relative check tolerance for sampling commands; the constant c in tau = c*h for grid commands.
    #[arg(long, value_name = "FLOAT")]
    tol: Option<f64>,
    /// Report file. `solve` also writes the grid as <stem>_solution.csv next to it (default: ./<problem>_solution.csv).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Serialize)]
struct Report<'a> {
    schema_version: &'static str,
    command: &'a str,
    verdict: &'static str,
    problem: serde_json::Value,
    result: &'a serde_json::Value,
    manifest: &'a RunManifest,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::VerifyAxioms(_) => "verify-axioms",
            Self::DualCheck(_) => "dual-check",
            Self::CheckCompatibility(_) => "check-compatibility",
            Self::FiberModulus(_) => "fiber-modulus",
            Self::CheckCorrespondence(_) => "check-correspondence",
            Self::Solve(_) => "solve",
            Self::Compare(_) => "compare",
            Self::Zmp(_) => "zmp",
        }
    }

    fn flags(&self) -> &Flags {
        match self {
            Self::VerifyAxioms(f)
            | Self::DualCheck(f)
            | Self::CheckCompatibility(f)
            | Self::FiberModulus(f)
            | Self::CheckCorrespondence(f)
            | Self::Solve(f)
            | Self::Compare(f)
            | Self::Zmp(f) => f,
        }
    }

    fn on_grid(&self) -> bool {
        matches!(self, Self::CheckCorrespondence(_) | Self::Solve(_) | Self::Compare(_) | Self::Zmp(_))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match run(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("JETLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("JETLAB_THREADS must be a positive integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn run(cmd: &Command) -> jetlab::Result<bool> {
    let flags = cmd.flags();
    let bytes = std::fs::read(&flags.problem)?;
    let dir = flags.problem.parent().map(Path::to_path_buf).unwrap_or_default();
    let problem = Problem::parse(&String::from_utf8_lossy(&bytes), &dir)?;
    let mut domain = problem.domain()?;
    if let Some(h) = flags.h {
        domain = domain.with_spacing(h)?;
    }
    let mut tol = Tolerances::default();
    if let Some(t) = flags.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(jetlab::Error::InvalidInput(format!("--tol must be positive, got {t}")));
        }
        if cmd.on_grid() {
            tol.contact_c = t;
        } else {
            tol.check_rel = t;
        }
    }
    let pair = problem.pair(&domain)?;
    let cfg = CheckConfig::new(flags.samples, flags.seed).with_tolerances(tol.clone());
    let ctx = Context {
        problem,
        domain,
        pair,
        cfg,
    };
    let outcome = match cmd {
        Command::VerifyAxioms(_) => commands::verify_axioms(&ctx)?,
        Command::DualCheck(_) => commands::dual_check(&ctx)?,
        Command::CheckCompatibility(_) => commands::check_compat(&ctx)?,
        Command::FiberModulus(_) => commands::modulus(&ctx)?,
        Command::CheckCorrespondence(_) => commands::correspondence(&ctx)?,
        Command::Solve(_) => commands::solve(&ctx)?,
        Command::Compare(_) => commands::compare(&ctx)?,
        Command::Zmp(_) => commands::zmp(&ctx)?,
    };
    let manifest = RunManifest::new(cmd.name(), &bytes, flags.seed, flags.samples, ctx.domain.h, tol);
    emit(cmd, flags, &ctx, &outcome, &manifest)?;
    Ok(outcome.passed)
}

fn emit(cmd: &Command, flags: &Flags, ctx: &Context, outcome: &Outcome, manifest: &RunManifest) -> jetlab::Result<()> {
    let verdict = if outcome.passed { "PASS" } else { "FAIL" };
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{} [{}] seed {} h {}", cmd.name(), ctx.pair.name(), flags.seed, ctx.domain.h)?;
    for line in &outcome.summary {
        writeln!(stdout, "  {line}")?;
    }

    if let Some(sol) = &outcome.solution {
        let csv = match (&flags.out, flags.format) {
            (Some(out), Format::Csv) => out.clone(),
            (Some(out), Format::Json) => {
                let stem = out.file_stem().map_or("report".into(), |s| s.to_string_lossy());
                out.with_file_name(format!("{stem}_solution.csv"))
            }
            (None, _) => {
                let stem = flags.problem.file_stem().map_or("problem".into(), |s| s.to_string_lossy());
                PathBuf::from(format!("{stem}_solution.csv"))
            }
        };
        let side = sol.save(&csv)?;
        writeln!(stdout, "  wrote {} and {}", csv.display(), side.display())?;
    }

    if let Some(out) = &flags.out {
        match flags.format {
            Format::Json => {
                let report = Report {
                    schema_version: SCHEMA_VERSION,
                    command: cmd.name(),
                    verdict,
                    problem: ctx.problem.echo(),
                    result: &outcome.result,
                    manifest,
                };
                std::fs::write(out, serde_json::to_string_pretty(&report)? + "\n")?;
                writeln!(stdout, "  wrote {}", out.display())?;
            }
            Format::Csv if outcome.solution.is_none() => {
                let mut w = csv::Writer::from_path(out)?;
                w.write_record(&outcome.table.header)?;
                for row in &outcome.table.rows {
                    w.write_record(row)?;
                }
                w.flush()?;
                writeln!(stdout, "  wrote {}", out.display())?;
            }
            Format::Csv => {}
        }
    }
    writeln!(stdout, "{verdict}")?;
    Ok(())
}
