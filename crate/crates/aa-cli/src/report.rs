//! History CSV emission and parsing, run summaries, and the comparison
//! table.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use aa_core::bounds::BoundCheckRow;
use aa_core::qr::ColumnGeometry;
use aa_core::{RunReport, StepDiagnostics, TerminationReason};
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

pub const HISTORY_HEADER: &str =
    "k,res_norm,theta,ratio,bound_lower,bound_higher,bound_total,m_k,beta_k,rank_events";

/// Full-precision decimal: 17 significant digits round-trip f64 exactly.
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

/// Render the per-iteration history as CSV. Undefined entries (the first
/// row's ratio, gain and bound fields, and bound fields of rows without a
/// checkable window) stay blank.
pub fn history_csv(report: &RunReport<f64>, bounds: Option<&[BoundCheckRow<f64>]>) -> String {
    let norms = report.residual_norms();
    let bound_by_k: BTreeMap<usize, &BoundCheckRow<f64>> = bounds
        .into_iter()
        .flatten()
        .map(|row| (row.k, row))
        .collect();

    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    out.push_str(&format!("1,{},,,,,,,,0\n", fmt(norms[0])));
    for step in &report.steps {
        let k = step.k;
        let ratio = norms[k - 1] / norms[k - 2];
        let (bl, bh, bt) = match bound_by_k.get(&k) {
            Some(row) => (
                fmt(row.bound.lower_order),
                fmt(row.bound.higher_order),
                fmt(row.bound.total),
            ),
            None => (String::new(), String::new(), String::new()),
        };
        out.push_str(&format!(
            "{k},{},{},{},{bl},{bh},{bt},{},{},{}\n",
            fmt(step.residual_norm),
            fmt(step.theta),
            fmt(ratio),
            step.m_k_used,
            fmt(step.beta_used),
            step.rank_events,
        ));
    }
    out
}

/// Parse a history CSV back into a report skeleton good enough for bound
/// checking (gains, window sizes, dampings and residual norms; no
/// geometry).
pub fn parse_history_csv(text: &str, origin: &Path) -> Result<RunReport<f64>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header.trim_end() != HISTORY_HEADER {
        bail!(
            "{}: unexpected header '{header}' (expected '{HISTORY_HEADER}')",
            origin.display()
        );
    }
    let mut initial = None;
    let mut steps = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            bail!(
                "{}: line {}: expected 10 fields, found {}",
                origin.display(),
                lineno + 2,
                fields.len()
            );
        }
        let k: usize = fields[0]
            .parse()
            .with_context(|| format!("{}: line {}: bad k", origin.display(), lineno + 2))?;
        let res: f64 = fields[1]
            .parse()
            .with_context(|| format!("{}: line {}: bad res_norm", origin.display(), lineno + 2))?;
        if k == 1 {
            initial = Some(res);
            continue;
        }
        let parse_req = |idx: usize, name: &str| -> Result<f64> {
            fields[idx].parse().with_context(|| {
                format!("{}: line {}: bad or missing {name}", origin.display(), lineno + 2)
            })
        };
        let theta = parse_req(2, "theta")?;
        let m_k: usize = fields[7].parse().with_context(|| {
            format!("{}: line {}: bad or missing m_k", origin.display(), lineno + 2)
        })?;
        let beta = parse_req(8, "beta_k")?;
        let rank_events: usize = fields[9].parse().unwrap_or(0);
        steps.push(StepDiagnostics {
            k,
            residual_norm: res,
            theta,
            gamma: Vec::new(),
            alpha: Vec::new(),
            geometry: ColumnGeometry {
                sines: Vec::new(),
                max_cosines: Vec::new(),
                c_s_estimate: 1.0,
                c_t_estimate: 0.0,
            },
            m_k_used: m_k,
            beta_used: beta,
            rank_events,
        });
    }
    let initial = initial.context("trace has no k = 1 row")?;
    Ok(RunReport {
        problem: format!("external trace {}", origin.display()),
        initial_residual_norm: initial,
        steps,
        final_iterate: Vec::new(),
        termination: TerminationReason::MaxIterations,
        wall_time: Duration::ZERO,
    })
}

pub fn termination_label(t: TerminationReason) -> &'static str {
    match t {
        TerminationReason::Converged => "converged",
        TerminationReason::MaxIterations => "max-iterations",
        TerminationReason::Diverged => "diverged",
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BoundsSummary {
    pub mode: String,
    pub checked: usize,
    pub satisfied: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub problem: serde_json::Value,
    pub config: serde_json::Value,
    pub termination: String,
    pub iterations: usize,
    pub final_residual: f64,
    pub mean_theta: Option<f64>,
    pub wall_time_seconds: f64,
    pub csv: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSummary>,
}

impl RunSummary {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read summary {}", path.display()))?;
        serde_json::from_str(&text)
            .with_context(|| format!("cannot parse summary {}", path.display()))
    }
}

/// Comparison table over run summaries of the same problem.
pub fn compare_table(summaries: &[(String, RunSummary)]) -> Result<String> {
    if summaries.len() < 2 {
        bail!("compare needs at least two run summaries");
    }
    let identity = &summaries[0].1.problem;
    for (name, s) in summaries.iter().skip(1) {
        if &s.problem != identity {
            bail!(
                "cannot compare runs of different problems: {name} has {}, expected {}",
                s.problem,
                identity
            );
        }
    }
    let mut out = String::new();
    out.push_str(&format!(
        "{:<32} {:>10} {:>16} {:>14} {:>12}\n",
        "run", "iterations", "termination", "final_resid", "mean_theta"
    ));
    for (name, s) in summaries {
        out.push_str(&format!(
            "{:<32} {:>10} {:>16} {:>14.6e} {:>12}\n",
            name,
            s.iterations,
            s.termination,
            s.final_residual,
            s.mean_theta
                .map(|t| format!("{t:.4}"))
                .unwrap_or_else(|| "-".to_string()),
        ));
    }
    Ok(out)
}

/// Bound-check table (also written as CSV with `--out`).
pub fn bounds_table(rows: &[BoundCheckRow<f64>]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:>6} {:>14} {:>14} {:>14} {:>14} {:>10}\n",
        "k", "ratio", "bound_lower", "bound_higher", "bound_total", "satisfied"
    ));
    for r in rows {
        out.push_str(&format!(
            "{:>6} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e} {:>10}\n",
            r.k, r.measured_ratio, r.bound.lower_order, r.bound.higher_order, r.bound.total,
            r.satisfied
        ));
    }
    out
}

pub fn bounds_csv(rows: &[BoundCheckRow<f64>]) -> String {
    let mut out = String::from("k,ratio,bound_lower,bound_higher,bound_total,satisfied\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.k,
            fmt(r.measured_ratio),
            fmt(r.bound.lower_order),
            fmt(r.bound.higher_order),
            fmt(r.bound.total),
            r.satisfied
        ));
    }
    out
}
