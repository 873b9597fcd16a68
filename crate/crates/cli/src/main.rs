use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use mcpolicy::aggregate::TransformKind;
use mcpolicy::hdr::{generate_instance, HdrInstance, INTENSITY_ATTR};
use mcpolicy_cli::bench::{run_cells, write_report, write_timings, BenchConfig, InstanceSpec};
use mcpolicy_cli::metrics::fmt_opt;
use mcpolicy_cli::report::{parse_report, summarize, write_summary};
use mcpolicy_cli::run::{evaluate, solve, Method, SolutionFile, SolveOptions};

const EXIT_PARTIAL: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(name = "mcpolicy", version, about = "Aggregated policies for multistage stochastic integer programs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a disaster-relief instance as JSON.
    Generate(GenerateArgs),
    /// Solve one instance with one method and transformation.
    Solve(SolveArgs),
    /// Exact expected cost of a stored integer policy.
    Evaluate(EvaluateArgs),
    /// Run a benchmark grid from a TOML config.
    Bench(BenchArgs),
    /// Summarize a bench report per method and transformation.
    Report(ReportArgs),
}

#[derive(Args)]
struct OutDir {
    /// Output directory.
    #[arg(long, env = "MCPOLICY_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `desk` or `paper`.
    #[arg(long, default_value = "desk")]
    preset: String,
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    capacity_pct: Option<f64>,
    /// Write here instead of `<out-dir>/instance-<seed>.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    dir: OutDir,
}

#[derive(Args)]
struct Tunables {
    /// Relative cut-violation tolerance for exact SDDP.
    #[arg(long, default_value_t = 1e-7)]
    eps: f64,
    /// Sampled paths per SDDP round.
    #[arg(long, default_value_t = 20)]
    k: usize,
    /// Round limit for the lower-bounding SDDP.
    #[arg(long, default_value_t = 3)]
    rounds: usize,
    /// Cut tolerance for the lower-bounding SDDP.
    #[arg(long)]
    lb_eps: Option<f64>,
    /// Cut tolerance for the LDR Benders loop.
    #[arg(long, default_value_t = 1e-6)]
    ldr_eps: f64,
    #[arg(long, default_value_t = 0)]
    sddp_seed: u64,
    /// Wall-clock limit per solve, seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Chain attributes kept by PM, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [INTENSITY_ATTR])]
    pm_attrs: Vec<usize>,
}

impl Tunables {
    fn options(&self) -> Result<SolveOptions, String> {
        if let Some(t) = self.time_limit {
            if !(t.is_finite() && t > 0.0) {
                return Err("--time-limit must be positive".into());
            }
        }
        if self.k == 0 || self.rounds == 0 {
            return Err("--k and --rounds must be at least 1".into());
        }
        let d = SolveOptions::default();
        Ok(SolveOptions {
            sddp: mcpolicy::sddp::SddpConfig { eps: self.eps, k: self.k, seed: self.sddp_seed, ..d.sddp },
            sddp_lb: mcpolicy::sddp::SddpConfig {
                eps: self.lb_eps.unwrap_or(d.sddp_lb.eps),
                k: self.k,
                max_rounds: self.rounds,
                seed: self.sddp_seed,
                ..d.sddp_lb
            },
            ldr: mcpolicy::ldr::LdrConfig { eps: self.ldr_eps, ..d.ldr },
            time_limit: self.time_limit.map(Duration::from_secs_f64),
            pm_attrs: self.pm_attrs.clone(),
        })
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value = "ex")]
    method: String,
    #[arg(long, default_value = "hn")]
    transform: String,
    #[command(flatten)]
    tun: Tunables,
    /// Write the solution here instead of under the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    dir: OutDir,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    solution: PathBuf,
    #[command(flatten)]
    tun: Tunables,
}

#[derive(Args)]
struct BenchArgs {
    config: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    dir: OutDir,
}

#[derive(Args)]
struct ReportArgs {
    /// A `report.csv` written by `bench`.
    input: PathBuf,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Fail {
    Config(String),
    Run(String),
}

type Res = Result<u8, Fail>;

fn read(path: &Path) -> Result<String, Fail> {
    std::fs::read_to_string(path).map_err(|e| Fail::Config(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Fail> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Fail::Run(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| Fail::Run(format!("{}: {e}", path.display())))
}

fn load_instance(path: &Path) -> Result<HdrInstance, Fail> {
    HdrInstance::from_json(&read(path)?).map_err(|e| Fail::Config(format!("{}: {e}", path.display())))
}

fn cmd_generate(a: GenerateArgs) -> Res {
    let spec = InstanceSpec {
        preset: Some(a.preset),
        cols: a.cols,
        rows: a.rows,
        capacity_pct: a.capacity_pct,
        ..InstanceSpec::default()
    };
    let cfg = spec.generator(a.seed).map_err(|e| Fail::Config(e.to_string()))?;
    let inst = generate_instance(&cfg).map_err(|e| Fail::Config(e.to_string()))?;
    let path = a.out.unwrap_or_else(|| a.dir.out_dir.join(format!("instance-{}.json", a.seed)));
    write(&path, &inst.to_json())?;
    println!("{}", path.display());
    Ok(0)
}

fn cmd_solve(a: SolveArgs) -> Res {
    let inst = load_instance(&a.instance)?;
    let method: Method = a.method.parse().map_err(|e: mcpolicy_cli::run::RunError| Fail::Config(e.to_string()))?;
    let kind: TransformKind =
        a.transform.parse().map_err(|e: mcpolicy::aggregate::AggError| Fail::Config(e.to_string()))?;
    let opts = a.tun.options().map_err(Fail::Config)?;
    let id = a.instance.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let out = solve(&inst, &id, method, kind, &opts).map_err(|e| Fail::Run(e.to_string()))?;
    let r = &out.record;
    println!(
        "{} {} {} status={} objective={} bound={} gap={} cuts={}/{} secs={:.3}",
        r.instance,
        r.method,
        r.transform.name(),
        r.status,
        fmt_opt(r.objective),
        fmt_opt(r.bound),
        fmt_opt(r.gap),
        r.optimality_cuts,
        r.feasibility_cuts,
        r.wall_secs
    );
    let path = a.out.unwrap_or_else(|| a.dir.out_dir.join(format!("{id}-{}-{}.json", method, kind.name())));
    write(&path, &out.solution.to_json())?;
    Ok(if r.objective.is_some() { 0 } else { EXIT_PARTIAL })
}

fn cmd_evaluate(a: EvaluateArgs) -> Res {
    let inst = load_instance(&a.instance)?;
    let sol = SolutionFile::from_json(&read(&a.solution)?).map_err(|e| Fail::Config(e.to_string()))?;
    let opts = a.tun.options().map_err(Fail::Config)?;
    let cfg = mcpolicy::sddp::SddpConfig { time_limit: opts.time_limit, ..opts.sddp };
    let v = evaluate(&inst, &sol, &cfg).map_err(|e| Fail::Run(e.to_string()))?;
    println!("{}", mcpolicy_cli::metrics::fmt_sig(v));
    Ok(0)
}

fn cmd_bench(a: BenchArgs) -> Res {
    let text = read(&a.config)?;
    let cfg = BenchConfig::from_toml(&text).map_err(|e| Fail::Config(e.to_string()))?;
    let base = a.config.parent().unwrap_or(Path::new("."));
    let instances = cfg.load_instances(base).map_err(|e| Fail::Config(e.to_string()))?;
    let rows = run_cells(&instances, &cfg, a.jobs).map_err(|e| Fail::Config(e.to_string()))?;
    let dir = &a.dir.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| Fail::Run(format!("{}: {e}", dir.display())))?;
    let open = |name: &str| {
        let p = dir.join(name);
        std::fs::File::create(&p).map_err(|e| Fail::Run(format!("{}: {e}", p.display())))
    };
    write_report(open("report.csv")?, &rows).map_err(|e| Fail::Run(e.to_string()))?;
    write_timings(open("timings.csv")?, &rows).map_err(|e| Fail::Run(e.to_string()))?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    eprintln!("{} cells, {failed} failed, report in {}", rows.len(), dir.display());
    Ok(if failed > 0 { EXIT_PARTIAL } else { 0 })
}

fn cmd_report(a: ReportArgs) -> Res {
    let rows = parse_report(&read(&a.input)?).map_err(|e| Fail::Config(e.to_string()))?;
    let summary = summarize(&rows);
    let mut buf = Vec::new();
    write_summary(&mut buf, &summary).map_err(|e| Fail::Run(e.to_string()))?;
    let text = String::from_utf8(buf).expect("csv output is utf-8");
    match a.out {
        Some(p) => write(&p, &text)?,
        None => print!("{text}"),
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Generate(a) => cmd_generate(a),
        Cmd::Solve(a) => cmd_solve(a),
        Cmd::Evaluate(a) => cmd_evaluate(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Report(a) => cmd_report(a),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(Fail::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Fail::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
