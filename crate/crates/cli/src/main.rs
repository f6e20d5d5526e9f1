use std::f64::consts::{FRAC_PI_2, PI};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use contractflow::contract::{check_self_contracted_metric, check_uniform, estimate_c0, ContractLevel, DEFAULT_TRIPLES};
use contractflow::curve::{holder_seminorm_with, third_deriv_bound_with, Curve, DEFAULT_SAFETY_FACTOR};
use contractflow::extend::{build_extension, check_c, check_cw1, curve_jet, default_eps, ConvexExtension, DEFAULT_CW1_TOL};
use contractflow::flow::{integrate, GradientOracle, Quadratic};
use contractflow::io::{self, CurveRecord};
use contractflow::par;
use contractflow::pipeline::{exit, run_pipeline, CurveInput, Generator, PipelineConfig, PipelineOutput, Stage};
use contractflow::repar::{endpoint_plan, exponential_plan, verify_m, zeta_plan, PlanKind, PlanSummary, ReparamPlan};

#[derive(Parser)]
#[command(name = "contractflow", version, about = "Self-contracted curves as gradient flows of convex functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: contract, (M), extension, flow roundtrip.
    Run(RunArgs),
    /// Classify a curve (pairwise and metric checks).
    Check(CheckArgs),
    /// Build a speed profile and print its constants.
    BuildM(PlanCmd),
    /// Check the (M)-inequality for a plan on a curve.
    VerifyM(VerifyArgs),
    /// Check (C)/(CW1) on the trace jet and write the convex extension.
    Extend(ExtendArgs),
    /// Evaluate an extension and its gradient at a point.
    Eval(EvalArgs),
    /// Integrate a gradient flow and export the trajectory.
    Flow(FlowArgs),
    /// Pipeline run reporting only the roundtrip metrics.
    Roundtrip(RoundtripArgs),
    /// Sample a built-in curve.
    Gen(GenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Segment,
    Circle,
    Spiral,
}

#[derive(Args, Clone)]
struct CurveArgs {
    /// Curve file: CSV of points (resampled) or JSON from `gen --format json`.
    #[arg(long, conflicts_with = "gen")]
    input: Option<PathBuf>,
    /// Built-in curve (default: segment).
    #[arg(long, value_enum)]
    gen: Option<GenKind>,
    /// Segment start.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,0")]
    from: Vec<f64>,
    /// Segment end.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "1,0")]
    to: Vec<f64>,
    /// Circle arc angle.
    #[arg(long, default_value_t = FRAC_PI_2)]
    angle: f64,
    /// Spiral rate.
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    /// Spiral angular range.
    #[arg(long, default_value_t = 4.0 * PI)]
    tmax: f64,
    /// Arc-length grid size.
    #[arg(short, long, default_value_t = 200)]
    n: usize,
}

impl CurveArgs {
    fn input(&self) -> CurveInput {
        if let Some(path) = &self.input {
            return CurveInput::File(path.clone());
        }
        CurveInput::Generator(match self.gen.unwrap_or(GenKind::Segment) {
            GenKind::Segment => Generator::Segment { from: self.from.clone(), to: self.to.clone() },
            GenKind::Circle => Generator::Circle { angle: self.angle },
            GenKind::Spiral => Generator::Spiral { lambda: self.lambda, t_max: self.tmax },
        })
    }

    fn load(&self) -> Result<Curve> {
        let config = PipelineConfig { input: self.input(), n: self.n, ..Default::default() };
        Ok(config.load_curve()?)
    }
}

#[derive(Args, Clone)]
struct PlanArgs {
    /// Profile kind: exp, endpoint or zeta.
    #[arg(long = "plan", visible_alias = "kind", default_value = "exp")]
    plan: PlanKind,
    /// Hölder exponent of γ', in (1/2, 1].
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Inflation applied to estimated constants.
    #[arg(long, default_value_t = DEFAULT_SAFETY_FACTOR)]
    safety: f64,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    curve: CurveArgs,
    #[command(flatten)]
    plan: PlanArgs,
    /// Log-sum-exp smoothing (default: 1e-3 × jet value range).
    #[arg(long)]
    eps: Option<f64>,
    /// Step as a fraction of the horizon.
    #[arg(long, default_value_t = 1e-3)]
    dt_factor: f64,
    /// Flow horizon (default: T, or θ(t_{N−2}) when T is infinite).
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random triples for the metric check.
    #[arg(long, default_value_t = DEFAULT_TRIPLES)]
    triples: usize,
    /// Roundtrip sup-distance tolerance.
    #[arg(long, default_value_t = 5e-2)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Existing directory for report.json and CSV/JSON artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> PipelineConfig {
        PipelineConfig {
            input: self.curve.input(),
            n: self.curve.n,
            alpha: self.plan.alpha,
            plan: self.plan.plan,
            eps: self.eps,
            safety_factor: self.plan.safety,
            dt_factor: self.dt_factor,
            horizon: self.horizon,
            seed: self.seed,
            n_triples: self.triples,
            roundtrip_tol: self.tol,
            cw1_tol: DEFAULT_CW1_TOL,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    #[value(name = "self")]
    SelfContracted,
    Strong,
    Uniform,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    curve: CurveArgs,
    /// Level required for exit code 0.
    #[arg(long, value_enum, default_value_t = Level::Uniform)]
    level: Level,
    #[arg(long, default_value_t = DEFAULT_TRIPLES)]
    triples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PlanCmd {
    #[command(flatten)]
    curve: CurveArgs,
    #[command(flatten)]
    plan: PlanArgs,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    curve: CurveArgs,
    #[command(flatten)]
    plan: PlanArgs,
    /// Plan JSON from `build-m`; exp/endpoint plans are rebuilt from its rate.
    #[arg(long)]
    plan_file: Option<PathBuf>,
}

#[derive(Args)]
struct ExtendArgs {
    #[command(flatten)]
    curve: CurveArgs,
    #[command(flatten)]
    plan: PlanArgs,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_CW1_TOL)]
    cw1_tol: f64,
    /// Extension JSON output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Extension JSON from `extend --out`.
    #[arg(long)]
    extension: PathBuf,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    at: Vec<f64>,
    /// Override the stored smoothing.
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Args)]
struct FlowArgs {
    /// Extension JSON from `extend --out`.
    #[arg(long, conflicts_with = "quadratic", required_unless_present = "quadratic")]
    extension: Option<PathBuf>,
    /// Row-major symmetric matrix A of ½xᵀAx.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    quadratic: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    x0: Vec<f64>,
    #[arg(long)]
    t_end: f64,
    /// Step (default: 1e-3 × t_end).
    #[arg(long)]
    dt: Option<f64>,
    /// Trajectory CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RoundtripArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Trajectory CSV output.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Reparameterized-curve CSV output.
    #[arg(long)]
    reparam: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    curve: CurveArgs,
    #[arg(long, value_enum, default_value_t = GenFormat::Csv)]
    format: GenFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenFormat {
    Csv,
    Json,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("{}", path.display())),
        None => {
            println!("{}", text.trim_end());
            Ok(())
        }
    }
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn require_c0(curve: &Curve) -> Result<Option<f64>> {
    match estimate_c0(curve) {
        Ok(c0) if c0 > 0.0 => Ok(Some(c0)),
        Ok(_) => {
            eprintln!("curve is not strongly self-contracted (c0 = 0)");
            Ok(None)
        }
        Err(e) => {
            eprintln!("{e}");
            Ok(None)
        }
    }
}

fn build_plan(curve: &Curve, args: &PlanArgs, c0: f64) -> Result<ReparamPlan> {
    Ok(match args.plan {
        PlanKind::Exponential => {
            let reg = holder_seminorm_with(curve, args.alpha, args.safety)?;
            exponential_plan(curve, &reg, c0)?
        }
        PlanKind::Endpoint => {
            let bound = third_deriv_bound_with(curve, args.safety)?;
            endpoint_plan(curve, c0, bound.bound / 6.0)?
        }
        PlanKind::Zeta => {
            let bound = third_deriv_bound_with(curve, args.safety)?;
            zeta_plan(curve, c0, Arc::new(move |t| bound.zeta(t) / 6.0))?
        }
    })
}

fn write_artifacts(dir: &Path, out: &PipelineOutput) -> Result<()> {
    if !dir.is_dir() {
        bail!("{}: output directory does not exist", dir.display());
    }
    io::write_json(&dir.join("report.json"), &out.report)?;
    let a = &out.artifacts;
    if let Some(c) = &a.curve {
        io::save_csv(&dir.join("curve.csv"), |w| io::write_curve_csv(w, c))?;
    }
    if let Some(p) = &a.plan {
        io::write_json(&dir.join("plan.json"), &p.summary())?;
    }
    if let Some(e) = &a.extension {
        io::write_json(&dir.join("extension.json"), e)?;
    }
    if let Some(rc) = &a.reparam {
        io::save_csv(&dir.join("reparam.csv"), |w| io::write_reparam_csv(w, rc))?;
    }
    if let Some(t) = &a.trajectory {
        io::save_csv(&dir.join("trajectory.csv"), |w| io::write_trajectory_csv(w, t))?;
    }
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<i32> {
    if let Some(dir) = &args.out {
        if !dir.is_dir() {
            bail!("{}: output directory does not exist", dir.display());
        }
    }
    let out = run_pipeline(&args.config())?;
    match args.format {
        Format::Json => println!("{}", out.report.to_json()),
        Format::Text => print!("{}", out.report.to_text()),
    }
    if let Some(dir) = &args.out {
        write_artifacts(dir, &out)?;
    }
    Ok(out.report.exit_code)
}

fn cmd_check(args: &CheckArgs) -> Result<i32> {
    let curve = args.curve.load()?;
    let pairwise = check_uniform(&curve);
    let metric = check_self_contracted_metric(&curve, args.triples, args.seed);
    let met = match args.level {
        Level::SelfContracted => pairwise.meets(ContractLevel::SelfContracted) && metric.meets(ContractLevel::SelfContracted),
        Level::Strong => pairwise.meets(ContractLevel::Strongly),
        Level::Uniform => pairwise.meets(ContractLevel::UniformlyStrongly),
    };
    println!("{}", pretty(&json!({ "pairwise": pairwise, "metric": metric, "requested_level_met": met })));
    Ok(if met { exit::OK } else { exit::CONTRACT })
}

fn cmd_build_m(args: &PlanCmd) -> Result<i32> {
    let curve = args.curve.load()?;
    let Some(c0) = require_c0(&curve)? else { return Ok(exit::CONTRACT) };
    let plan = build_plan(&curve, &args.plan, c0)?;
    emit(args.out.as_deref(), &pretty(&plan.summary()))?;
    Ok(exit::OK)
}

fn cmd_verify_m(args: &VerifyArgs) -> Result<i32> {
    let curve = args.curve.load()?;
    let plan = match &args.plan_file {
        Some(path) => {
            let s: PlanSummary = io::read_json(path)?;
            if (s.length - curve.length()).abs() > 1e-9 * curve.length().max(1.0) {
                bail!("plan was built for L = {} but the curve has L = {}", s.length, curve.length());
            }
            match s.kind {
                PlanKind::Exponential => ReparamPlan::exponential_with_rate(s.b, s.length)?,
                PlanKind::Endpoint => ReparamPlan::endpoint_with_rate(s.b, s.length)?,
                PlanKind::Zeta => {
                    let planargs = PlanArgs { plan: PlanKind::Zeta, ..args.plan.clone() };
                    build_plan(&curve, &planargs, s.c0)?
                }
            }
        }
        None => {
            let Some(c0) = require_c0(&curve)? else { return Ok(exit::CONTRACT) };
            build_plan(&curve, &args.plan, c0)?
        }
    };
    let report = verify_m(&curve, &plan);
    println!("{}", pretty(&json!({ "plan": plan.summary(), "m_inequality": report })));
    Ok(if report.holds { exit::OK } else { exit::M_INEQUALITY })
}

fn cmd_extend(args: &ExtendArgs) -> Result<i32> {
    let curve = args.curve.load()?;
    let Some(c0) = require_c0(&curve)? else { return Ok(exit::CONTRACT) };
    let plan = build_plan(&curve, &args.plan, c0)?;
    let jet = curve_jet(&curve, &plan);
    let c = check_c(&jet);
    let cw1 = check_cw1(&jet, args.cw1_tol);
    let eps = args.eps.unwrap_or_else(|| default_eps(&jet));
    println!("{}", pretty(&json!({ "plan": plan.summary(), "condition_c": c, "condition_cw1": cw1, "eps": eps })));
    if !(c.passed && cw1.passed) {
        return Ok(exit::EXTENSION);
    }
    let ext = build_extension(&jet, eps)?;
    if let Some(path) = &args.out {
        io::write_json(path, &ext)?;
    }
    Ok(exit::OK)
}

fn load_extension(path: &Path) -> Result<ConvexExtension> {
    Ok(io::read_json(path)?)
}

fn cmd_eval(args: &EvalArgs) -> Result<i32> {
    let mut ext = load_extension(&args.extension)?;
    if let Some(eps) = args.eps {
        ext = ext.with_eps(eps)?;
    }
    if args.at.len() != ext.dim() {
        bail!("point has {} coordinates, extension lives in dimension {}", args.at.len(), ext.dim());
    }
    let mut g = vec![0.0; ext.dim()];
    let value = ext.eval(&args.at, Some(&mut g));
    println!("{}", pretty(&json!({ "x": args.at, "value": value, "gradient": g, "eps": ext.eps() })));
    Ok(exit::OK)
}

fn cmd_flow(args: &FlowArgs) -> Result<i32> {
    let oracle: Box<dyn GradientOracle> = match (&args.extension, &args.quadratic) {
        (Some(path), _) => {
            let ext = load_extension(path)?;
            if ext.eps() == 0.0 {
                bail!("flows need a smoothed extension (eps > 0); rebuild with --eps or pass one to `eval`");
            }
            Box::new(ext)
        }
        (None, Some(m)) => {
            let n = args.x0.len();
            if m.len() != n * n {
                bail!("quadratic needs {} entries for a {n}-dimensional start point, got {}", n * n, m.len());
            }
            Box::new(Quadratic::new(m.clone(), vec![0.0; n]))
        }
        (None, None) => bail!("pass --extension or --quadratic"),
    };
    let dt = args.dt.unwrap_or(1e-3 * args.t_end);
    let traj = match integrate(oracle.as_ref(), &args.x0, args.t_end, dt) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{e}");
            return Ok(exit::FLOW);
        }
    };
    match &args.out {
        Some(path) => io::save_csv(path, |w| io::write_trajectory_csv(w, &traj))?,
        None => io::write_trajectory_csv(std::io::stdout().lock(), &traj)?,
    }
    Ok(exit::OK)
}

fn cmd_roundtrip(args: &RoundtripArgs) -> Result<i32> {
    let out = run_pipeline(&args.run.config())?;
    let r = &out.report;
    let flow = r.stages.iter().find(|s| s.stage == Stage::Flow);
    println!(
        "{}",
        pretty(&json!({
            "exit_code": r.exit_code,
            "failed_stage": r.failed_stage,
            "constants": r.constants,
            "roundtrip": flow.map(|s| s.details.clone()),
        }))
    );
    if let (Some(path), Some(t)) = (&args.trajectory, &out.artifacts.trajectory) {
        io::save_csv(path, |w| io::write_trajectory_csv(w, t))?;
    }
    if let (Some(path), Some(rc)) = (&args.reparam, &out.artifacts.reparam) {
        io::save_csv(path, |w| io::write_reparam_csv(w, rc))?;
    }
    Ok(r.exit_code)
}

fn cmd_gen(args: &GenArgs) -> Result<i32> {
    let curve = args.curve.load()?;
    match (args.format, &args.out) {
        (GenFormat::Json, Some(path)) => io::write_json(path, &CurveRecord::from_curve(&curve))?,
        (GenFormat::Json, None) => println!("{}", pretty(&CurveRecord::from_curve(&curve))),
        (GenFormat::Csv, Some(path)) => io::save_csv(path, |w| io::write_curve_csv(w, &curve))?,
        (GenFormat::Csv, None) => io::write_curve_csv(std::io::stdout().lock(), &curve)?,
    }
    Ok(exit::OK)
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("CONTRACTFLOW_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("CONTRACTFLOW_THREADS={v}"))?;
        if n == 0 {
            bail!("CONTRACTFLOW_THREADS must be positive");
        }
        par::configure_threads(n);
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<i32> {
    configure_threads()?;
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Check(a) => cmd_check(a),
        Command::BuildM(a) => cmd_build_m(a),
        Command::VerifyM(a) => cmd_verify_m(a),
        Command::Extend(a) => cmd_extend(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Flow(a) => cmd_flow(a),
        Command::Roundtrip(a) => cmd_roundtrip(a),
        Command::Gen(a) => cmd_gen(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::CONFIG as u8)
        }
    }
}
