//! Experiment configuration: a flat JSON document whose keys can all be
//! overridden by command-line flags (flags win).

// negated comparisons in validation also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;
use std::path::{Path, PathBuf};

use aa_core::{AcceleratorConfig, DepthPolicy, GeometryEstimate, OperatorConstants, SigmaSource};
use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

/// Raw configuration as read from a file or assembled from flags. Every
/// field optional so flag overrides can be layered on top.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub problem: Option<String>,
    pub m: Option<usize>,
    pub depth_policy: Option<String>,
    pub switch_tol: Option<f64>,
    pub beta: Option<f64>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub epsilon: Option<f64>,
    pub k0: Option<f64>,
    pub grid_h: Option<f64>,
    pub kappa_g: Option<f64>,
    pub kappa_hat_g: Option<f64>,
    pub sigma: Option<f64>,
    pub cs_mode: Option<String>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    /// History CSV for `problem = "external-trace"`.
    pub trace: Option<PathBuf>,
}

impl RawConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let cfg: RawConfig = serde_json::from_str(&text)
            .with_context(|| format!("cannot parse config file {}", path.display()))?;
        Ok(cfg)
    }

    /// Layer `over` on top of `self`: any field set there wins.
    pub fn merged_with(mut self, over: RawConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(
            problem, m, depth_policy, switch_tol, beta, tol, max_iters, epsilon, k0, grid_h,
            kappa_g, kappa_hat_g, sigma, cs_mode, out, seed, trace
        );
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Polynomial,
    Nlh,
    ExternalTrace,
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemKind::Polynomial => write!(f, "polynomial"),
            ProblemKind::Nlh => write!(f, "nlh"),
            ProblemKind::ExternalTrace => write!(f, "external-trace"),
        }
    }
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, Serialize)]
pub struct Experiment {
    pub problem: ProblemKind,
    #[serde(skip)]
    pub depth_policy: DepthPolicy<f64>,
    pub depth_policy_text: String,
    pub beta: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub epsilon: f64,
    pub k0: f64,
    pub grid_h: f64,
    pub constants: Option<ConstantsSpec>,
    pub cs_mode: CsMode,
    pub out: PathBuf,
    pub seed: u64,
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConstantsSpec {
    pub kappa_g: f64,
    pub kappa_hat_g: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CsMode {
    Measured,
    /// Fixed subspace-sine lower bound; the cosine bound is derived as
    /// sqrt(1 - c_s^2).
    Fixed(f64),
}

/// Default wave number for the Helmholtz experiment. Picked so that the
/// plain damped iteration stalls while the accelerated depths converge;
/// the qualitative behavior of the experiment is sensitive to this value.
pub const DEFAULT_K0: f64 = 11.0;

/// Reference constants shipped as bound-check defaults for the polynomial
/// problem.
pub const POLY_DEFAULT_CONSTANTS: ConstantsSpec = ConstantsSpec {
    kappa_g: 6.609,
    kappa_hat_g: 1.0,
    sigma: 1.0,
};

impl Experiment {
    pub fn resolve(raw: RawConfig) -> Result<Self> {
        let problem = match raw.problem.as_deref() {
            Some("polynomial") => ProblemKind::Polynomial,
            Some("nlh") => ProblemKind::Nlh,
            Some("external-trace") => ProblemKind::ExternalTrace,
            Some(other) => bail!("field 'problem': unknown problem '{other}'"),
            None => bail!("field 'problem' is required (polynomial | nlh | external-trace)"),
        };

        let (depth_policy, depth_policy_text) = resolve_depth_policy(&raw)?;
        let beta = raw.beta.unwrap_or(1.0);
        if !(beta > 0.0 && beta <= 1.0) {
            bail!("field 'beta': must lie in (0, 1], got {beta}");
        }
        let tol = raw.tol.unwrap_or(1e-8);
        if !(tol > 0.0) {
            bail!("field 'tol': must be positive, got {tol}");
        }
        let max_iters = raw.max_iters.unwrap_or(1000);
        if max_iters == 0 {
            bail!("field 'max_iters': must be positive");
        }
        let epsilon = raw.epsilon.unwrap_or(0.22);
        if epsilon < 0.0 {
            bail!("field 'epsilon': must be nonnegative, got {epsilon}");
        }
        let k0 = raw.k0.unwrap_or(DEFAULT_K0);
        let grid_h = raw.grid_h.unwrap_or(0.01);
        if !(grid_h > 0.0) {
            bail!("field 'grid_h': must be positive, got {grid_h}");
        }

        let constants = match (raw.kappa_g, raw.kappa_hat_g, raw.sigma) {
            (None, None, None) => {
                if problem == ProblemKind::Polynomial {
                    Some(POLY_DEFAULT_CONSTANTS)
                } else {
                    None
                }
            }
            (Some(kappa_g), Some(kappa_hat_g), Some(sigma)) => Some(ConstantsSpec {
                kappa_g,
                kappa_hat_g,
                sigma,
            }),
            _ => {
                let mut base = if problem == ProblemKind::Polynomial {
                    POLY_DEFAULT_CONSTANTS
                } else {
                    bail!(
                        "fields 'kappa_g', 'kappa_hat_g', 'sigma': all three are needed for \
                         bound checking (only some were given)"
                    );
                };
                if let Some(v) = raw.kappa_g {
                    base.kappa_g = v;
                }
                if let Some(v) = raw.kappa_hat_g {
                    base.kappa_hat_g = v;
                }
                if let Some(v) = raw.sigma {
                    base.sigma = v;
                }
                Some(base)
            }
        };

        let cs_mode = match raw.cs_mode.as_deref() {
            None | Some("measured") => CsMode::Measured,
            Some(spec) => {
                let v = spec
                    .strip_prefix("fixed:")
                    .ok_or_else(|| anyhow!("field 'cs_mode': expected 'measured' or 'fixed:<v>'"))?
                    .parse::<f64>()
                    .map_err(|_| anyhow!("field 'cs_mode': bad number in '{spec}'"))?;
                if !(v > 0.0 && v <= 1.0) {
                    bail!("field 'cs_mode': fixed c_s must lie in (0, 1], got {v}");
                }
                CsMode::Fixed(v)
            }
        };

        if problem == ProblemKind::ExternalTrace && raw.trace.is_none() {
            bail!("field 'trace': required when problem = external-trace");
        }

        Ok(Experiment {
            problem,
            depth_policy,
            depth_policy_text,
            beta,
            tol,
            max_iters,
            epsilon,
            k0,
            grid_h,
            constants,
            cs_mode,
            out: raw.out.unwrap_or_else(|| PathBuf::from("aa-run.csv")),
            seed: raw.seed.unwrap_or(0),
            trace: raw.trace,
        })
    }

    pub fn accelerator_config(&self) -> AcceleratorConfig<f64> {
        let mut cfg = AcceleratorConfig::new(self.depth_policy, self.beta);
        cfg.residual_tolerance = self.tol;
        cfg.max_iterations = self.max_iters;
        cfg
    }

    pub fn operator_constants(&self) -> Option<OperatorConstants<f64>> {
        self.constants.map(|c| OperatorConstants {
            kappa_g: c.kappa_g,
            kappa_hat_g: c.kappa_hat_g,
            sigma: c.sigma,
            sigma_source: SigmaSource::JacobianLowerBound,
            c_s: 1.0,
            c_t: 0.0,
        })
    }

    pub fn geometry_estimate(&self) -> GeometryEstimate<f64> {
        match self.cs_mode {
            CsMode::Measured => GeometryEstimate::Measured,
            CsMode::Fixed(c_s) => GeometryEstimate::Fixed {
                c_s,
                c_t: (1.0 - c_s * c_s).max(0.0).sqrt().min(1.0 - 1e-12),
            },
        }
    }

    /// Identity used by `compare` to refuse mixing different problems.
    pub fn problem_identity(&self) -> serde_json::Value {
        match self.problem {
            ProblemKind::Polynomial => serde_json::json!({ "kind": "polynomial" }),
            ProblemKind::Nlh => serde_json::json!({
                "kind": "nlh",
                "epsilon": self.epsilon,
                "k0": self.k0,
                "grid_h": self.grid_h,
            }),
            ProblemKind::ExternalTrace => serde_json::json!({
                "kind": "external-trace",
                "trace": self.trace.as_ref().map(|p| p.display().to_string()),
            }),
        }
    }

    /// Summary path derived from the CSV output path.
    pub fn summary_path(&self) -> PathBuf {
        self.out.with_extension("summary.json")
    }
}

fn resolve_depth_policy(raw: &RawConfig) -> Result<(DepthPolicy<f64>, String)> {
    if let Some(spec) = raw.depth_policy.as_deref() {
        if spec == "unbounded" {
            return Ok((DepthPolicy::Unbounded, "unbounded".to_string()));
        }
        if let Some(m) = spec.strip_prefix("fixed:") {
            let m: usize = m
                .parse()
                .map_err(|_| anyhow!("field 'depth_policy': bad depth in '{spec}'"))?;
            return Ok((DepthPolicy::Fixed(m), format!("fixed:{m}")));
        }
        if let Some(rest) = spec.strip_prefix("switch:") {
            let parts: Vec<&str> = rest.split(':').collect();
            if parts.len() != 2 {
                bail!("field 'depth_policy': expected 'switch:<m_low>:<m_high>'");
            }
            let m_low: usize = parts[0]
                .parse()
                .map_err(|_| anyhow!("field 'depth_policy': bad m_low in '{spec}'"))?;
            let m_high: usize = parts[1]
                .parse()
                .map_err(|_| anyhow!("field 'depth_policy': bad m_high in '{spec}'"))?;
            let switch_tol = raw.switch_tol.unwrap_or(0.005);
            if !(switch_tol > 0.0) {
                bail!("field 'switch_tol': must be positive, got {switch_tol}");
            }
            return Ok((
                DepthPolicy::SwitchOnResidual {
                    m_low,
                    m_high,
                    switch_tol,
                },
                format!("switch:{m_low}:{m_high}@{switch_tol}"),
            ));
        }
        bail!("field 'depth_policy': unknown policy '{spec}' (fixed:<m> | unbounded | switch:<lo>:<hi>)");
    }
    let m = raw.m.unwrap_or(3);
    Ok((DepthPolicy::Fixed(m), format!("fixed:{m}")))
}
