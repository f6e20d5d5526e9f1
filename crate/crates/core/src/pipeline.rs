//! The end-to-end run: curve → contract → repar → extend → flow.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::contract::{check_self_contracted_metric, check_uniform, ContractLevel, DEFAULT_TRIPLES};
use crate::curve::{
    check_alpha, holder_seminorm_with, make_circle_arc, make_log_spiral, make_segment, third_deriv_bound_with, Curve,
    CurveError, DEFAULT_SAFETY_FACTOR,
};
use crate::extend::{build_extension, check_c, check_cw1, curve_jet, default_eps, ConvexExtension, DEFAULT_CW1_TOL};
use crate::flow::{integrate, roundtrip_error, Trajectory};
use crate::io::{read_curve, IoError};
use crate::repar::{
    endpoint_plan, exponential_plan, reparameterize, verify_m, zeta_plan, PlanKind, ReparamCurve, ReparamPlan,
};

pub const SCHEMA_VERSION: u32 = 1;

pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const CONTRACT: i32 = 3;
    pub const M_INEQUALITY: i32 = 4;
    pub const EXTENSION: i32 = 5;
    pub const FLOW: i32 = 6;
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] IoError),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        exit::CONFIG
    }
}

impl From<CurveError> for PipelineError {
    fn from(e: CurveError) -> Self {
        PipelineError::Config(e.to_string())
    }
}

/// Built-in test curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Generator {
    Segment { from: Vec<f64>, to: Vec<f64> },
    /// Unit-circle arc from (1, 0), counter-clockwise.
    Circle { angle: f64 },
    /// `e^{−λu}(cos u, sin u)` for `u ∈ [0, t_max]`.
    Spiral { lambda: f64, t_max: f64 },
}

impl Generator {
    pub fn build(&self, n: usize) -> Result<Curve, CurveError> {
        match self {
            Generator::Segment { from, to } => make_segment(from, to, n),
            Generator::Circle { angle } => make_circle_arc(*angle, n),
            Generator::Spiral { lambda, t_max } => make_log_spiral(*lambda, *t_max, n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveInput {
    File(PathBuf),
    Generator(Generator),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub input: CurveInput,
    /// Arc-length grid size.
    pub n: usize,
    pub alpha: f64,
    pub plan: PlanKind,
    /// Smoothing; `None` uses `1e-3 ×` the jet value range.
    pub eps: Option<f64>,
    pub safety_factor: f64,
    /// Step as a fraction of the horizon.
    pub dt_factor: f64,
    /// Flow horizon; `None` uses T, or θ(t_{N−2}) when T is infinite.
    pub horizon: Option<f64>,
    pub seed: u64,
    pub n_triples: usize,
    pub roundtrip_tol: f64,
    pub cw1_tol: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: CurveInput::Generator(Generator::Segment { from: vec![0.0, 0.0], to: vec![1.0, 0.0] }),
            n: 200,
            alpha: 1.0,
            plan: PlanKind::Exponential,
            eps: None,
            safety_factor: DEFAULT_SAFETY_FACTOR,
            dt_factor: 1e-3,
            horizon: None,
            seed: 0,
            n_triples: DEFAULT_TRIPLES,
            roundtrip_tol: 5e-2,
            cw1_tol: DEFAULT_CW1_TOL,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), PipelineError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(PipelineError::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        check_alpha(self.alpha)?;
        if self.n < 7 {
            return Err(PipelineError::Config(format!("grid size must be at least 7, got {}", self.n)));
        }
        if let Some(eps) = self.eps {
            positive("eps (flow runs need a smoothed extension)", eps)?;
        }
        if !(self.safety_factor >= 1.0) {
            return Err(PipelineError::Config(format!("safety factor must be ≥ 1, got {}", self.safety_factor)));
        }
        positive("dt factor", self.dt_factor)?;
        if self.dt_factor > 1.0 {
            return Err(PipelineError::Config(format!("dt factor must be ≤ 1, got {}", self.dt_factor)));
        }
        if let Some(h) = self.horizon {
            positive("horizon", h)?;
        }
        positive("roundtrip tolerance", self.roundtrip_tol)?;
        positive("CW1 tolerance", self.cw1_tol)?;
        match &self.input {
            CurveInput::Generator(Generator::Circle { angle }) => positive("arc angle", *angle)?,
            CurveInput::Generator(Generator::Spiral { lambda, t_max }) => {
                positive("lambda", *lambda)?;
                positive("t_max", *t_max)?;
            }
            _ => {}
        }
        Ok(())
    }

    pub fn load_curve(&self) -> Result<Curve, PipelineError> {
        Ok(match &self.input {
            CurveInput::File(path) => read_curve(path, self.n)?,
            CurveInput::Generator(g) => g.build(self.n)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Curve,
    Contract,
    Repar,
    Extend,
    Flow,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Curve => "curve",
            Stage::Contract => "contract",
            Stage::Repar => "repar",
            Stage::Extend => "extend",
            Stage::Flow => "flow",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Curve => exit::CONFIG,
            Stage::Contract => exit::CONTRACT,
            Stage::Repar => exit::M_INEQUALITY,
            Stage::Extend => exit::EXTENSION,
            Stage::Flow => exit::FLOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: Stage,
    pub passed: bool,
    pub summary: String,
    pub details: Value,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    #[serde(rename = "L")]
    pub length: Option<f64>,
    pub c0: Option<f64>,
    pub c1: Option<f64>,
    pub b: Option<f64>,
    pub eps: Option<f64>,
    #[serde(rename = "T")]
    pub total_time: Option<f64>,
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub schema_version: u32,
    pub config: PipelineConfig,
    pub constants: Constants,
    pub stages: Vec<StageReport>,
    pub failed_stage: Option<Stage>,
    pub exit_code: i32,
}

impl PipelineReport {
    pub fn passed(&self) -> bool {
        self.exit_code == exit::OK
    }

    pub fn stage(&self, stage: Stage) -> Option<&StageReport> {
        self.stages.iter().find(|s| s.stage == stage)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "contractflow report (schema {})", self.schema_version);
        for s in &self.stages {
            let _ = writeln!(out, "{:<9} {}  {}", s.stage.as_str(), if s.passed { "PASS" } else { "FAIL" }, s.summary);
        }
        let c = &self.constants;
        let show = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6e}"));
        let _ = writeln!(
            out,
            "constants: L = {}, c0 = {}, C1 = {}, b = {}, eps = {}, T = {}",
            show(c.length),
            show(c.c0),
            show(c.c1),
            show(c.b),
            show(c.eps),
            show(c.total_time)
        );
        let _ = writeln!(out, "exit code {}", self.exit_code);
        out
    }
}

/// Everything a run produced, for writing to disk.
#[derive(Default)]
pub struct Artifacts {
    pub curve: Option<Curve>,
    pub plan: Option<ReparamPlan>,
    pub extension: Option<ConvexExtension>,
    pub reparam: Option<ReparamCurve>,
    pub trajectory: Option<Trajectory>,
}

pub struct PipelineOutput {
    pub report: PipelineReport,
    pub artifacts: Artifacts,
}

struct Run {
    config: PipelineConfig,
    constants: Constants,
    stages: Vec<StageReport>,
    artifacts: Artifacts,
}

impl Run {
    fn push(&mut self, stage: Stage, passed: bool, summary: String, details: Value) -> bool {
        self.stages.push(StageReport { stage, passed, summary, details });
        passed
    }

    fn fail(&mut self, stage: Stage, err: impl std::fmt::Display) -> bool {
        self.push(stage, false, err.to_string(), json!({ "error": err.to_string() }))
    }

    fn finish(self) -> PipelineOutput {
        let failed_stage = self.stages.iter().find(|s| !s.passed).map(|s| s.stage);
        let report = PipelineReport {
            schema_version: SCHEMA_VERSION,
            config: self.config,
            constants: self.constants,
            stages: self.stages,
            failed_stage,
            exit_code: failed_stage.map_or(exit::OK, Stage::exit_code),
        };
        PipelineOutput { report, artifacts: self.artifacts }
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn build_plan(curve: &Curve, config: &PipelineConfig, c0: f64) -> Result<(ReparamPlan, Value), String> {
    match config.plan {
        PlanKind::Exponential => {
            let reg = holder_seminorm_with(curve, config.alpha, config.safety_factor).map_err(|e| e.to_string())?;
            let plan = exponential_plan(curve, &reg, c0).map_err(|e| e.to_string())?;
            Ok((plan, serde_json::to_value(reg).unwrap_or(Value::Null)))
        }
        PlanKind::Endpoint => {
            let bound = third_deriv_bound_with(curve, config.safety_factor).map_err(|e| e.to_string())?;
            let plan = endpoint_plan(curve, c0, bound.bound / 6.0).map_err(|e| e.to_string())?;
            Ok((plan, json!({ "third_deriv_bound": bound.bound, "raw_sup": bound.raw_sup })))
        }
        PlanKind::Zeta => {
            let bound = third_deriv_bound_with(curve, config.safety_factor).map_err(|e| e.to_string())?;
            let details = json!({ "third_deriv_bound": bound.bound, "raw_sup": bound.raw_sup, "zeta": "running sup of |γ'''|/6" });
            let zeta = Arc::new(move |t: f64| bound.zeta(t) / 6.0);
            let plan = zeta_plan(curve, c0, zeta).map_err(|e| e.to_string())?;
            Ok((plan, details))
        }
    }
}

/// Runs every stage in order and stops at the first failing one.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    config.validate()?;
    let curve = config.load_curve()?;
    let mut run = Run { config: config.clone(), constants: Constants::default(), stages: Vec::new(), artifacts: Artifacts::default() };
    run.constants.length = Some(curve.length());
    run.push(
        Stage::Curve,
        true,
        format!("{}, N = {}, L = {:.6}", curve.source_kind().as_str(), curve.len(), curve.length()),
        json!({ "source": curve.source_kind(), "n": curve.len(), "dim": curve.dim(), "length": curve.length() }),
    );
    run.artifacts.curve = Some(curve.clone());

    // contract
    let uniform = check_uniform(&curve);
    let metric = check_self_contracted_metric(&curve, config.n_triples, config.seed);
    let ok = uniform.level == ContractLevel::UniformlyStrongly && metric.meets(ContractLevel::SelfContracted);
    if ok {
        run.constants.c0 = Some(uniform.c0);
    }
    let summary = format!("{}, c0 = {:.6}, metric triples {}", uniform.level.as_str(), uniform.c0, metric.level.as_str());
    if !run.push(Stage::Contract, ok, summary, json!({ "pairwise": uniform, "metric": metric })) {
        return Ok(run.finish());
    }
    let c0 = uniform.c0;

    // repar
    let (plan, regularity) = match build_plan(&curve, config, c0) {
        Ok(p) => p,
        Err(e) => {
            run.fail(Stage::Repar, e);
            return Ok(run.finish());
        }
    };
    run.constants.b = Some(plan.b);
    run.constants.c1 = Some(plan.c1);
    run.constants.total_time = finite(plan.total_time());
    let m = verify_m(&curve, &plan);
    let summary = format!("{} plan, b = {:.6e}, (M) margin = {:.3e}", plan.kind.as_str(), plan.b, m.margin);
    let details = json!({ "regularity": regularity, "plan": plan.summary(), "m_inequality": m });
    run.artifacts.plan = Some(plan.clone());
    if !run.push(Stage::Repar, m.holds, summary, details) {
        return Ok(run.finish());
    }

    // extend
    let jet = curve_jet(&curve, &plan);
    let c = check_c(&jet);
    let cw1 = check_cw1(&jet, config.cw1_tol);
    let eps = config.eps.unwrap_or_else(|| default_eps(&jet));
    run.constants.eps = Some(eps);
    let summary = format!(
        "(C) min gap {:.3e} / {:.3e}, (CW1) {} equality pairs, eps = {eps:.3e}",
        c.step1.min_value, c.step2.min_value, cw1.equality_pairs
    );
    let ext = if c.passed && cw1.passed { build_extension(&jet, eps).ok() } else { None };
    let details = json!({ "condition_c": c, "condition_cw1": cw1, "eps": eps, "pieces": jet.len() });
    if !run.push(Stage::Extend, ext.is_some(), summary, details) {
        return Ok(run.finish());
    }
    let ext = ext.expect("extension exists when the stage passed");

    // flow
    let horizon = config.horizon.or_else(|| finite(plan.total_time())).or_else(|| finite(plan.theta(curve.param(curve.len() - 2))));
    let Some(horizon) = horizon else {
        run.fail(Stage::Flow, "no finite flow horizon: θ overflows on this curve; pass an explicit horizon");
        run.artifacts.extension = Some(ext);
        return Ok(run.finish());
    };
    run.constants.horizon = Some(horizon);
    let rc = match reparameterize(&curve, &plan, curve.len(), horizon) {
        Ok(rc) => rc,
        Err(e) => {
            run.fail(Stage::Flow, e);
            run.artifacts.extension = Some(ext);
            return Ok(run.finish());
        }
    };
    let dt = config.dt_factor * horizon;
    match integrate(&ext, rc.point(0), horizon, dt) {
        Ok(traj) => {
            let metrics = roundtrip_error(&traj, &rc);
            let ok = metrics.sup_distance <= config.roundtrip_tol;
            let summary = format!(
                "sup {:.3e}, terminal {:.3e}, hausdorff {:.3e} (tolerance {:.1e})",
                metrics.sup_distance, metrics.terminal_distance, metrics.hausdorff, config.roundtrip_tol
            );
            let details = json!({
                "horizon": horizon,
                "dt": dt,
                "steps": traj.len() - 1,
                "final_speed": traj.speeds.last(),
                "roundtrip": metrics,
                "tolerance": config.roundtrip_tol,
            });
            run.push(Stage::Flow, ok, summary, details);
            run.artifacts.trajectory = Some(traj);
        }
        Err(e) => {
            run.fail(Stage::Flow, e);
        }
    }
    run.artifacts.reparam = Some(rc);
    run.artifacts.extension = Some(ext);
    Ok(run.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn segment_pipeline_passes() {
        let out = run_pipeline(&PipelineConfig::default()).unwrap();
        let r = &out.report;
        assert_eq!(r.exit_code, 0, "{}", r.to_text());
        assert_eq!(r.constants.b, Some(1.0));
        let order: Vec<Stage> = r.stages.iter().map(|s| s.stage).collect();
        assert_eq!(order, vec![Stage::Curve, Stage::Contract, Stage::Repar, Stage::Extend, Stage::Flow]);
        let sup = r.stage(Stage::Flow).unwrap().details["roundtrip"]["sup_distance"].as_f64().unwrap();
        assert!(sup <= 5e-2);
    }

    #[test]
    fn text_report_lists_stages_in_order() {
        let text = run_pipeline(&PipelineConfig::default()).unwrap().report.to_text();
        let pos: Vec<usize> = ["curve", "contract", "repar", "extend", "flow"].iter().map(|s| text.find(&format!("\n{s} ")).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn spiral_below_threshold_stops_at_contract() {
        let config = PipelineConfig {
            input: CurveInput::Generator(Generator::Spiral { lambda: 0.1, t_max: 12.566 }),
            ..Default::default()
        };
        let r = run_pipeline(&config).unwrap().report;
        assert_eq!(r.exit_code, exit::CONTRACT);
        assert_eq!(r.failed_stage, Some(Stage::Contract));
        assert!(r.stage(Stage::Contract).unwrap().details["pairwise"]["worst_pair"]["value"].as_f64().unwrap() < 0.0);
    }

    #[test]
    fn invalid_alpha_is_a_config_error() {
        let config = PipelineConfig { alpha: 0.4, ..Default::default() };
        let err = run_pipeline(&config).err().unwrap();
        assert_eq!(err.exit_code(), exit::CONFIG);
        assert!(err.to_string().contains("alpha"));
    }

    #[test]
    fn json_is_deterministic_and_roundtrips() {
        let config = PipelineConfig {
            input: CurveInput::Generator(Generator::Circle { angle: FRAC_PI_2 }),
            plan: PlanKind::Endpoint,
            seed: 42,
            ..Default::default()
        };
        let a = run_pipeline(&config).unwrap().report;
        let b = run_pipeline(&config).unwrap().report;
        assert_eq!(a.to_json(), b.to_json());
        let back: PipelineReport = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(back, a);
    }
}
