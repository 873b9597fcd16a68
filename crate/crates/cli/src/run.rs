use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use mcpolicy::aggregate::{build_aggregation, AggError, AggregationMap, TransformKind, Transformation};
use mcpolicy::hdr::{build_hdr_aggregated, build_hdr_msilp, HdrInstance, INTENSITY_ATTR};
use mcpolicy::ldr::{benders_solve, build_ldr_model, extract_policy, LdrConfig, LdrKind, LdrVariant};
use mcpolicy::lp::{BnbConfig, MipStatus};
use mcpolicy::model::{build_aggregated_extensive_form, solve_extensive};
use mcpolicy::sddp::{evaluate_policy, solve_exact, solve_lower_bound, SddpConfig};

use crate::metrics::relative_gap;

pub const SOLUTION_SCHEMA: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("unknown method {0:?}")]
    UnknownMethod(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Solve(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Agg(#[from] AggError),
}

fn solve_err(e: impl fmt::Display) -> RunError {
    RunError::Solve(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Ex,
    Sddp,
    SddpLb,
    SddpUb,
    LdrTh,
    LdrT,
    LdrM,
}

impl Method {
    pub const ALL: [Method; 7] =
        [Method::Ex, Method::Sddp, Method::SddpLb, Method::SddpUb, Method::LdrTh, Method::LdrT, Method::LdrM];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ex => "ex",
            Method::Sddp => "sddp",
            Method::SddpLb => "sddp-lb",
            Method::SddpUb => "sddp-ub",
            Method::LdrTh => "ldr-th",
            Method::LdrT => "ldr-t",
            Method::LdrM => "ldr-m",
        }
    }

    fn ldr_kind(self) -> Option<LdrKind> {
        match self {
            Method::LdrTh => Some(LdrKind::Th),
            Method::LdrT => Some(LdrKind::T),
            Method::LdrM => Some(LdrKind::M),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = RunError;
    fn from_str(s: &str) -> Result<Self, RunError> {
        let s = s.to_ascii_lowercase();
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or(RunError::UnknownMethod(s))
    }
}

/// Solver tunables shared by every method.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub sddp: SddpConfig,
    /// Settings for `sddp-lb` and the first phase of `sddp-ub`.
    pub sddp_lb: SddpConfig,
    pub ldr: LdrConfig,
    pub time_limit: Option<Duration>,
    pub pm_attrs: Vec<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            sddp: SddpConfig::default(),
            sddp_lb: SddpConfig::lower_bound(),
            ldr: LdrConfig::default(),
            time_limit: None,
            pm_attrs: vec![INTENSITY_ATTR],
        }
    }
}

pub fn transformation(kind: TransformKind, pm_attrs: &[usize]) -> Transformation {
    match kind {
        TransformKind::Pm => Transformation::pm(pm_attrs.to_vec()),
        k => Transformation::new(k),
    }
}

/// One row of a benchmark report.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub instance: String,
    pub method: Method,
    pub transform: TransformKind,
    pub status: String,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub gap: Option<f64>,
    pub wall_secs: f64,
    pub optimality_cuts: usize,
    pub feasibility_cuts: usize,
    pub seed: u64,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn failed(instance: &str, method: Method, transform: TransformKind, seed: u64, err: &RunError) -> Self {
        RunRecord {
            instance: instance.to_string(),
            method,
            transform,
            status: "error".into(),
            objective: None,
            bound: None,
            gap: None,
            wall_secs: 0.0,
            optimality_cuts: 0,
            feasibility_cuts: 0,
            seed,
            error: Some(err.to_string()),
        }
    }
}

/// Integer policy and headline numbers of a solve, as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    pub schema: u32,
    pub instance: String,
    pub method: String,
    pub transform: String,
    pub pm_attrs: Vec<usize>,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub x_root: Vec<f64>,
    /// Integer copies, group-major.
    pub z: Vec<f64>,
}

impl SolutionFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, RunError> {
        let sol: SolutionFile = serde_json::from_str(s)?;
        if sol.schema != SOLUTION_SCHEMA {
            return Err(RunError::Invalid(format!("unsupported solution schema {}", sol.schema)));
        }
        sol.method.parse::<Method>()?;
        sol.transform.parse::<TransformKind>()?;
        if sol.z.iter().chain(&sol.x_root).any(|v| !v.is_finite()) {
            return Err(RunError::Invalid("non-finite solution value".into()));
        }
        Ok(sol)
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub record: RunRecord,
    pub solution: SolutionFile,
}

fn status_name(s: MipStatus) -> &'static str {
    match s {
        MipStatus::Optimal => "optimal",
        MipStatus::Infeasible => "infeasible",
        MipStatus::Unbounded => "unbounded",
        MipStatus::TimeLimit => "time_limit",
        MipStatus::NodeLimit => "node_limit",
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

struct Raw {
    status: &'static str,
    objective: Option<f64>,
    bound: Option<f64>,
    cuts: (usize, usize),
    x_root: Vec<f64>,
    z: Vec<f64>,
}

/// Runs `method` under `kind` on one instance.
pub fn solve(inst: &HdrInstance, id: &str, method: Method, kind: TransformKind, opts: &SolveOptions) -> Result<Outcome, RunError> {
    let start = Instant::now();
    let tr = transformation(kind, &opts.pm_attrs);
    let with_limit = |c: &SddpConfig| SddpConfig { time_limit: opts.time_limit, ..c.clone() };
    let raw = if let Some(lk) = method.ldr_kind() {
        let m = build_hdr_aggregated(inst).map_err(solve_err)?;
        let agg = build_aggregation(&m.tree, &tr).map_err(solve_err)?;
        let model = build_ldr_model(&m, &agg, LdrVariant::new(lk)).map_err(solve_err)?;
        let cfg = LdrConfig { time_limit: opts.time_limit, ..opts.ldr.clone() };
        let sol = benders_solve(&model, &cfg).map_err(solve_err)?;
        let pol = extract_policy(&model, &sol).ok();
        Raw {
            status: status_name(sol.status),
            objective: finite(sol.objective),
            bound: finite(sol.bound),
            cuts: (sol.stats.optimality_cuts, sol.stats.feasibility_cuts),
            x_root: sol.first.get(model.x0..model.x0 + model.dims.k).map(<[f64]>::to_vec).unwrap_or_default(),
            z: pol.map(|p| p.z).unwrap_or_default(),
        }
    } else {
        let m = build_hdr_msilp(inst).map_err(solve_err)?;
        let agg = build_aggregation(&m.tree, &tr).map_err(solve_err)?;
        match method {
            Method::Ex => {
                let ef = build_aggregated_extensive_form(&m, &agg).map_err(solve_err)?;
                let bnb = BnbConfig { time_limit: opts.time_limit, rel_gap: 1e-9, ..BnbConfig::default() };
                let sol = solve_extensive(&ef, &bnb).map_err(solve_err)?;
                let (x_root, z) = match &sol.x {
                    Some(x) => (ef.node_x(x, m.tree.root()).to_vec(), ef.z_values(x)),
                    None => (Vec::new(), Vec::new()),
                };
                Raw {
                    status: status_name(sol.status),
                    objective: finite(sol.objective),
                    bound: finite(sol.bound),
                    cuts: (0, 0),
                    x_root,
                    z,
                }
            }
            Method::Sddp => {
                let sol = solve_exact(&m, &agg, &with_limit(&opts.sddp)).map_err(solve_err)?;
                Raw {
                    status: status_name(sol.status),
                    objective: finite(sol.objective),
                    bound: finite(sol.bound),
                    cuts: (sol.stats.optimality_cuts, sol.stats.feasibility_cuts),
                    x_root: sol.x_root,
                    z: sol.z,
                }
            }
            Method::SddpLb | Method::SddpUb => {
                let lb = solve_lower_bound(&m, &agg, &with_limit(&opts.sddp_lb)).map_err(solve_err)?;
                let cuts = (lb.stats.optimality_cuts, lb.stats.feasibility_cuts);
                if method == Method::SddpLb {
                    Raw {
                        status: status_name(lb.status),
                        objective: finite(lb.objective),
                        bound: finite(lb.bound),
                        cuts,
                        x_root: lb.x_root,
                        z: lb.z,
                    }
                } else {
                    let ub = evaluate_policy(&m, &agg, &lb.z, &with_limit(&opts.sddp)).map_err(solve_err)?;
                    Raw {
                        status: status_name(lb.status),
                        objective: finite(ub),
                        bound: finite(lb.bound),
                        cuts,
                        x_root: lb.x_root,
                        z: lb.z,
                    }
                }
            }
            _ => unreachable!("ldr methods handled above"),
        }
    };
    let gap = match (raw.objective, raw.bound) {
        (Some(o), Some(b)) => Some(relative_gap(o, b)),
        _ => None,
    };
    let record = RunRecord {
        instance: id.to_string(),
        method,
        transform: kind,
        status: raw.status.to_string(),
        objective: raw.objective,
        bound: raw.bound,
        gap,
        wall_secs: start.elapsed().as_secs_f64(),
        optimality_cuts: raw.cuts.0,
        feasibility_cuts: raw.cuts.1,
        seed: inst.seed,
        error: None,
    };
    let solution = SolutionFile {
        schema: SOLUTION_SCHEMA,
        instance: id.to_string(),
        method: method.name().to_string(),
        transform: kind.name().to_string(),
        pm_attrs: if kind == TransformKind::Pm { opts.pm_attrs.clone() } else { Vec::new() },
        objective: raw.objective,
        bound: raw.bound,
        x_root: raw.x_root,
        z: raw.z,
    };
    Ok(Outcome { record, solution })
}

/// Exact expected cost of the solution's integer policy on `inst`.
pub fn evaluate(inst: &HdrInstance, sol: &SolutionFile, cfg: &SddpConfig) -> Result<f64, RunError> {
    let kind: TransformKind = sol.transform.parse()?;
    let m = build_hdr_msilp(inst).map_err(solve_err)?;
    let agg: AggregationMap = build_aggregation(&m.tree, &transformation(kind, &sol.pm_attrs)).map_err(solve_err)?;
    let want = agg.num_groups() * m.dims.l;
    if sol.z.len() != want {
        return Err(RunError::Invalid(format!("solution has {} integer values, instance needs {want}", sol.z.len())));
    }
    evaluate_policy(&m, &agg, &sol.z, cfg).map_err(solve_err)
}
