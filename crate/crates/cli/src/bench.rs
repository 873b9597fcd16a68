use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::Deserialize;

use mcpolicy::aggregate::TransformKind;
use mcpolicy::hdr::{generate_instance, HdrConfig, HdrInstance, ModalityType, INTENSITY_ATTR};
use mcpolicy::ldr::LdrConfig;
use mcpolicy::sddp::SddpConfig;

use crate::metrics::{fmt_opt, fmt_sig};
use crate::run::{solve, Method, RunRecord, SolveOptions};

pub const REPORT_COLUMNS: [&str; 11] = [
    "instance",
    "method",
    "transform",
    "status",
    "objective",
    "bound",
    "gap",
    "optimality_cuts",
    "feasibility_cuts",
    "seed",
    "error",
];

pub const TIMING_COLUMNS: [&str; 4] = ["instance", "method", "transform", "wall_secs"];

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    /// `desk` (two land cells, three stages) or `paper` (4×5 grid).
    pub preset: Option<String>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    /// Instance JSON files, relative to the config file.
    #[serde(default)]
    pub files: Vec<PathBuf>,
    pub cols: Option<usize>,
    pub rows: Option<usize>,
    pub capacity_pct: Option<f64>,
    pub modality_type: Option<ModalityType>,
    pub increments: Option<Vec<usize>>,
    pub modality_cost_factor: Option<(f64, f64)>,
    pub shelters_per_cell: Option<(usize, usize)>,
    pub dcs_per_cell: Option<(usize, usize)>,
}

impl InstanceSpec {
    pub fn generator(&self, seed: u64) -> Result<HdrConfig, BenchError> {
        let mut c = match self.preset.as_deref() {
            None | Some("desk") => HdrConfig::desk(seed),
            Some("paper") => HdrConfig { seed, ..HdrConfig::default() },
            Some(p) => return Err(BenchError::Config(format!("unknown preset {p:?}"))),
        };
        macro_rules! set {
            ($($f:ident),*) => {$( if let Some(v) = self.$f.clone() { c.$f = v; } )*};
        }
        set!(cols, rows, capacity_pct, modality_type, modality_cost_factor, shelters_per_cell, dcs_per_cell);
        if let Some(v) = &self.increments {
            c.increments = Some(v.clone());
        }
        c.check().map_err(|e| BenchError::Config(e.to_string()))?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SddpSection {
    pub eps: Option<f64>,
    pub k: Option<usize>,
    pub lb_eps: Option<f64>,
    pub lb_rounds: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdrSection {
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default)]
    pub instances: InstanceSpec,
    #[serde(default)]
    pub methods: Vec<String>,
    #[serde(default = "default_transforms")]
    pub transforms: Vec<String>,
    pub pm_attrs: Option<Vec<usize>>,
    pub time_limit_secs: Option<f64>,
    #[serde(default)]
    pub sddp: SddpSection,
    #[serde(default)]
    pub ldr: LdrSection,
}

fn default_transforms() -> Vec<String> {
    TransformKind::ALL.iter().map(|k| k.name().to_string()).collect()
}

fn positive(name: &str, v: Option<f64>) -> Result<(), BenchError> {
    match v {
        Some(x) if !(x.is_finite() && x > 0.0) => Err(BenchError::Config(format!("{name} must be positive"))),
        _ => Ok(()),
    }
}

impl BenchConfig {
    pub fn from_toml(s: &str) -> Result<Self, BenchError> {
        let cfg: BenchConfig = toml::from_str(s)?;
        cfg.methods()?;
        cfg.transforms()?;
        positive("time_limit_secs", cfg.time_limit_secs)?;
        positive("sddp.eps", cfg.sddp.eps)?;
        positive("sddp.lb_eps", cfg.sddp.lb_eps)?;
        positive("ldr.eps", cfg.ldr.eps)?;
        if cfg.sddp.k == Some(0) || cfg.sddp.lb_rounds == Some(0) {
            return Err(BenchError::Config("sddp.k and sddp.lb_rounds must be at least 1".into()));
        }
        if let Some(a) = &cfg.pm_attrs {
            if a.is_empty() {
                return Err(BenchError::Config("pm_attrs must not be empty".into()));
            }
        }
        for &seed in &cfg.instances.seeds {
            cfg.instances.generator(seed)?;
        }
        Ok(cfg)
    }

    pub fn methods(&self) -> Result<Vec<Method>, BenchError> {
        self.methods.iter().map(|m| m.parse().map_err(|e: crate::run::RunError| BenchError::Config(e.to_string()))).collect()
    }

    pub fn transforms(&self) -> Result<Vec<TransformKind>, BenchError> {
        self.transforms.iter().map(|t| t.parse().map_err(|e: mcpolicy::aggregate::AggError| BenchError::Config(e.to_string()))).collect()
    }

    pub fn options(&self) -> SolveOptions {
        let d = SolveOptions::default();
        let seed = self.sddp.seed.unwrap_or(0);
        SolveOptions {
            sddp: SddpConfig {
                eps: self.sddp.eps.unwrap_or(d.sddp.eps),
                k: self.sddp.k.unwrap_or(d.sddp.k),
                seed,
                ..d.sddp
            },
            sddp_lb: SddpConfig {
                eps: self.sddp.lb_eps.unwrap_or(d.sddp_lb.eps),
                k: self.sddp.k.unwrap_or(d.sddp_lb.k),
                max_rounds: self.sddp.lb_rounds.unwrap_or(d.sddp_lb.max_rounds),
                seed,
                ..d.sddp_lb
            },
            ldr: LdrConfig { eps: self.ldr.eps.unwrap_or(d.ldr.eps), ..d.ldr },
            time_limit: self.time_limit_secs.map(Duration::from_secs_f64),
            pm_attrs: self.pm_attrs.clone().unwrap_or(vec![INTENSITY_ATTR]),
        }
    }

    /// Generated instances first (in seed order), then files (in listed order).
    pub fn load_instances(&self, base: &Path) -> Result<Vec<(String, HdrInstance)>, BenchError> {
        let mut out = Vec::new();
        for &seed in &self.instances.seeds {
            let cfg = self.instances.generator(seed)?;
            let inst = generate_instance(&cfg).map_err(|e| BenchError::Config(e.to_string()))?;
            out.push((format!("s{seed}"), inst));
        }
        for f in &self.instances.files {
            let path = base.join(f);
            let text = std::fs::read_to_string(&path).map_err(|source| BenchError::Io { path: path.clone(), source })?;
            let inst = HdrInstance::from_json(&text).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
            let id = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| f.display().to_string());
            out.push((id, inst));
        }
        Ok(out)
    }
}

/// Runs every (instance, method, transform) cell on up to `jobs` threads.
/// Rows come back in cell order regardless of scheduling.
pub fn run_cells(instances: &[(String, HdrInstance)], cfg: &BenchConfig, jobs: usize) -> Result<Vec<RunRecord>, BenchError> {
    let methods = cfg.methods()?;
    let transforms = cfg.transforms()?;
    let opts = cfg.options();
    let mut cells = Vec::new();
    for (i, _) in instances.iter().enumerate() {
        for &m in &methods {
            for &t in &transforms {
                cells.push((i, m, t));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| BenchError::Config(e.to_string()))?;
    Ok(pool.install(|| {
        cells
            .par_iter()
            .map(|&(i, m, t)| {
                let (id, inst) = &instances[i];
                match solve(inst, id, m, t, &opts) {
                    Ok(o) => o.record,
                    Err(e) => RunRecord::failed(id, m, t, inst.seed, &e),
                }
            })
            .collect()
    }))
}

pub fn write_report<W: Write>(w: W, rows: &[RunRecord]) -> Result<(), BenchError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(REPORT_COLUMNS)?;
    for r in rows {
        out.write_record([
            r.instance.clone(),
            r.method.name().to_string(),
            r.transform.name().to_string(),
            r.status.clone(),
            fmt_opt(r.objective),
            fmt_opt(r.bound),
            fmt_opt(r.gap),
            r.optimality_cuts.to_string(),
            r.feasibility_cuts.to_string(),
            r.seed.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    out.flush().map_err(|source| BenchError::Io { path: PathBuf::from("<report>"), source })?;
    Ok(())
}

pub fn write_timings<W: Write>(w: W, rows: &[RunRecord]) -> Result<(), BenchError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TIMING_COLUMNS)?;
    for r in rows {
        out.write_record([
            r.instance.clone(),
            r.method.name().to_string(),
            r.transform.name().to_string(),
            fmt_sig(r.wall_secs),
        ])?;
    }
    out.flush().map_err(|source| BenchError::Io { path: PathBuf::from("<timings>"), source })?;
    Ok(())
}

pub fn report_string(rows: &[RunRecord]) -> String {
    let mut buf = Vec::new();
    write_report(&mut buf, rows).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is utf-8")
}
