//! `aa` - experiment runner for Anderson-accelerated fixed-point
//! iterations.
//!
//! Subcommands: `run` (execute an experiment, write the history CSV and a
//! summary), `compare` (tabulate several run summaries), `bounds-check`
//! (evaluate the one-step residual bounds on a recorded history).
//!
//! Exit codes for `run`: 0 converged, 1 configuration error, 2 iteration
//! budget exhausted, 3 divergence.

mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use aa_core::bounds::BoundsError;
use aa_core::problems::{NlhFixedPoint, NlhProblem, PolynomialProblem, POLY_INITIAL_GUESS};
use aa_core::{check_run_against_bounds, solve, BoundMode, RunReport, TerminationReason};
use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use config::{Experiment, ProblemKind, RawConfig};
use report::{
    bounds_csv, bounds_table, compare_table, history_csv, parse_history_csv, termination_label,
    BoundsSummary, RunSummary,
};

#[derive(Parser)]
#[command(
    name = "aa",
    about = "Anderson-accelerated fixed-point experiments with residual-bound diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its per-iteration history.
    Run(RunArgs),
    /// Tabulate several run summaries side by side.
    Compare(CompareArgs),
    /// Check a recorded history CSV against the one-step residual bounds.
    BoundsCheck(BoundsCheckArgs),
}

#[derive(Args, Clone)]
struct ConfigFlags {
    /// Flat JSON config file; every key can be overridden by a flag.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Problem to run: polynomial | nlh | external-trace.
    #[arg(long)]
    problem: Option<String>,
    /// Fixed window depth (shorthand for `--depth-policy fixed:<m>`).
    #[arg(long)]
    m: Option<usize>,
    /// Depth policy: `fixed:<m>` | `unbounded` | `switch:<m_low>:<m_high>`.
    #[arg(long)]
    depth_policy: Option<String>,
    /// Residual tolerance of the depth switch (default 0.005).
    #[arg(long)]
    switch_tol: Option<f64>,
    /// Damping factor in (0, 1].
    #[arg(long)]
    beta: Option<f64>,
    /// Residual tolerance for convergence.
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration budget (counted in residual evaluations).
    #[arg(long)]
    max_iters: Option<usize>,
    /// Nonlinearity coefficient of the Helmholtz problem.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Wave number of the Helmholtz problem.
    #[arg(long)]
    k0: Option<f64>,
    /// Grid spacing of the Helmholtz problem.
    #[arg(long)]
    grid_h: Option<f64>,
    /// Bound on |g'| for the bound calculators.
    #[arg(long)]
    kappa_g: Option<f64>,
    /// Lipschitz constant of g' for the bound calculators.
    #[arg(long)]
    kappa_hat_g: Option<f64>,
    /// Lower bound sigma in |w_{j+1} - w_j| >= sigma |e_j|.
    #[arg(long)]
    sigma: Option<f64>,
    /// Geometry constants for the bounds: measured | fixed:<c_s>.
    #[arg(long)]
    cs_mode: Option<String>,
    /// History CSV output path (summary lands next to it).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed echoed into the summary for reproducibility bookkeeping.
    #[arg(long)]
    seed: Option<u64>,
    /// History CSV input for problem = external-trace.
    #[arg(long)]
    trace: Option<PathBuf>,
}

impl ConfigFlags {
    fn resolve(&self) -> Result<Experiment> {
        let base = match &self.config {
            Some(path) => RawConfig::from_file(path)?,
            None => RawConfig::default(),
        };
        let overrides = RawConfig {
            problem: self.problem.clone(),
            m: self.m,
            depth_policy: self.depth_policy.clone(),
            switch_tol: self.switch_tol,
            beta: self.beta,
            tol: self.tol,
            max_iters: self.max_iters,
            epsilon: self.epsilon,
            k0: self.k0,
            grid_h: self.grid_h,
            kappa_g: self.kappa_g,
            kappa_hat_g: self.kappa_hat_g,
            sigma: self.sigma,
            cs_mode: self.cs_mode.clone(),
            out: self.out.clone(),
            seed: self.seed,
            trace: self.trace.clone(),
        };
        Experiment::resolve(base.merged_with(overrides))
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    flags: ConfigFlags,
}

#[derive(Args)]
struct CompareArgs {
    /// Run summary files produced by `aa run` (at least two).
    summaries: Vec<PathBuf>,
}

#[derive(Args)]
struct BoundsCheckArgs {
    #[command(flatten)]
    flags: ConfigFlags,
    /// Write the check table as CSV to this path.
    #[arg(long = "out-table")]
    out_table: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's help/version go to stdout with success
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args).map(|()| 0),
        Command::BoundsCheck(args) => cmd_bounds_check(args).map(|()| 0),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<u8> {
    let exp = args.flags.resolve()?;
    let report = match exp.problem {
        ProblemKind::Polynomial => {
            solve(&PolynomialProblem, &POLY_INITIAL_GUESS, exp.accelerator_config())?
        }
        ProblemKind::Nlh => {
            let nlh = NlhFixedPoint::new(
                NlhProblem::new(exp.k0, exp.epsilon, exp.grid_h)
                    .map_err(|e| anyhow!("invalid nlh configuration: {e}"))?,
            );
            let x0 = nlh.initial_iterate();
            solve(&nlh, &x0, exp.accelerator_config())?
        }
        ProblemKind::ExternalTrace => {
            bail!("'run' cannot execute an external trace; use 'bounds-check' instead")
        }
    };

    let (bound_rows, bounds_summary) = attach_bounds(&exp, &report)?;
    let csv = history_csv(&report, bound_rows.as_deref());
    std::fs::write(&exp.out, csv)
        .with_context(|| format!("cannot write history CSV {}", exp.out.display()))?;

    let summary = RunSummary {
        problem: exp.problem_identity(),
        config: serde_json::to_value(&exp)?,
        termination: termination_label(report.termination).to_string(),
        iterations: report.iterations(),
        final_residual: report.final_residual_norm(),
        mean_theta: report.mean_theta(),
        wall_time_seconds: report.wall_time.as_secs_f64(),
        csv: exp.out.display().to_string(),
        bounds: bounds_summary,
    };
    let summary_path = exp.summary_path();
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)
        .with_context(|| format!("cannot write summary {}", summary_path.display()))?;

    println!(
        "{}: {} after {} iterations, final residual {:.6e} (history: {}, summary: {})",
        report.problem,
        summary.termination,
        summary.iterations,
        summary.final_residual,
        exp.out.display(),
        summary_path.display()
    );
    Ok(match report.termination {
        TerminationReason::Converged => 0,
        TerminationReason::MaxIterations => 2,
        TerminationReason::Diverged => 3,
    })
}

/// Evaluate the one-step bounds for a finished run when operator constants
/// are configured. A history too short to check is reported as a warning,
/// not an error.
type BoundsAttachment = (Option<Vec<aa_core::bounds::BoundCheckRow<f64>>>, Option<BoundsSummary>);

fn attach_bounds(exp: &Experiment, report: &RunReport<f64>) -> Result<BoundsAttachment> {
    let Some(consts) = exp.operator_constants() else {
        return Ok((None, None));
    };
    let mode = infer_mode(report);
    match check_run_against_bounds(report, &consts, mode, exp.geometry_estimate()) {
        Ok(rows) => {
            let satisfied = rows.iter().filter(|r| r.satisfied).count();
            let summary = BoundsSummary {
                mode: mode_label(mode).to_string(),
                checked: rows.len(),
                satisfied,
            };
            Ok((Some(rows), Some(summary)))
        }
        Err(BoundsError::InsufficientHistory) => {
            eprintln!("warning: history too short for bound checking; bound columns left blank");
            Ok((None, None))
        }
        Err(e) => Err(anyhow!("bound check failed: {e}")),
    }
}

fn infer_mode(report: &RunReport<f64>) -> BoundMode {
    let max_m = report.steps.iter().map(|s| s.m_k_used).max().unwrap_or(0);
    if max_m <= 1 {
        BoundMode::M1
    } else {
        BoundMode::General
    }
}

fn mode_label(mode: BoundMode) -> &'static str {
    match mode {
        BoundMode::M1 => "m1",
        BoundMode::General => "general",
    }
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    if args.summaries.len() < 2 {
        bail!("compare needs at least two run summaries");
    }
    let mut loaded = Vec::new();
    for path in &args.summaries {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        loaded.push((name, RunSummary::load(path)?));
    }
    print!("{}", compare_table(&loaded)?);
    Ok(())
}

fn cmd_bounds_check(args: BoundsCheckArgs) -> Result<()> {
    let exp = args.flags.resolve()?;
    let trace_path = exp
        .trace
        .clone()
        .ok_or_else(|| anyhow!("bounds-check needs --trace <history.csv>"))?;
    let text = std::fs::read_to_string(&trace_path)
        .with_context(|| format!("cannot read trace {}", trace_path.display()))?;
    let report = parse_history_csv(&text, &trace_path)?;
    let consts = exp
        .operator_constants()
        .ok_or_else(|| anyhow!("bounds-check needs --kappa-g, --kappa-hat-g and --sigma"))?;

    let mode = infer_mode(&report);
    if mode == BoundMode::General
        && matches!(exp.geometry_estimate(), aa_core::GeometryEstimate::Measured)
    {
        bail!(
            "a history CSV carries no column geometry, so measured c_s/c_t are unavailable; \
             pass --cs-mode fixed:<c_s>"
        );
    }
    let rows = check_run_against_bounds(&report, &consts, mode, exp.geometry_estimate())
        .map_err(|e| anyhow!("bound check failed: {e}"))?;
    let satisfied = rows.iter().filter(|r| r.satisfied).count();
    print!("{}", bounds_table(&rows));
    println!(
        "{} mode: {satisfied}/{} checked ratios within the bound",
        mode_label(mode),
        rows.len()
    );
    if let Some(path) = args.out_table {
        std::fs::write(&path, bounds_csv(&rows))
            .with_context(|| format!("cannot write table {}", path.display()))?;
    }
    Ok(())
}
