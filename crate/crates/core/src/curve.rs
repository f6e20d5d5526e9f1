//! Arc-length parameterized curves in ℝⁿ.
//!
//! A [`Curve`] always carries a uniform arc-length grid `t_0 = 0 < … < t_{N−1} = L`
//! together with positions and unit tangents at the grid. Analytic curves keep
//! exact evaluators (in the arc-length parameter) for off-grid queries; sampled
//! curves fall back to cubic Hermite interpolation of the stored grid.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dist, norm, normalized};
use crate::par;
use crate::quad::{invert_monotone, simpson};
use crate::spline::{hermite, locate, CubicSpline};

/// Scalar-parameter, vector-valued evaluator.
pub type Evaluator = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

pub const DEFAULT_SAFETY_FACTOR: f64 = 1.25;

const ANALYTIC_UNIT_TOL: f64 = 1e-9;
const SAMPLED_UNIT_TOL: f64 = 1e-4;
const STATIONARY_SPEED: f64 = 1e-10;
const ARC_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("curve is degenerate: total chordal length {length:e} is below 1e-12")]
    DegenerateCurve { length: f64 },
    #[error("consecutive raw points {index} and {} coincide", index + 1)]
    DuplicatePoint { index: usize },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("curve is stationary (speed {speed:e}) at parameter {at}")]
    StationaryPoint { at: f64, speed: f64 },
    #[error("parameter {t} lies outside [0, {length}]")]
    OutOfDomain { t: f64, length: f64 },
    #[error("third-derivative estimate diverges under refinement (ratio {ratio:.2})")]
    InsufficientRegularity { ratio: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, CurveError>;

/// Exact evaluators in the arc-length parameter.
pub struct AnalyticSource {
    pub point: Evaluator,
    pub tangent: Evaluator,
    pub third: Option<Evaluator>,
}

#[derive(Clone)]
pub enum CurveSource {
    Sampled,
    Analytic(Arc<AnalyticSource>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Sampled,
    Analytic,
}

impl SourceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Sampled => "sampled",
            SourceKind::Analytic => "analytic",
        }
    }
}

#[derive(Clone)]
pub struct Curve {
    dim: usize,
    params: Vec<f64>,
    points: Vec<f64>,
    tangents: Vec<f64>,
    length: f64,
    source: CurveSource,
    alpha: Option<f64>,
}

impl fmt::Debug for Curve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Curve")
            .field("dim", &self.dim)
            .field("samples", &self.params.len())
            .field("length", &self.length)
            .field("source", &self.source_kind())
            .finish()
    }
}

impl Curve {
    /// Builds a sampled curve from an explicit arc-length grid.
    ///
    /// `params` must start at 0 and increase strictly; tangents are
    /// renormalised after checking they are unit within 1e-4.
    pub fn from_parts(dim: usize, params: Vec<f64>, points: Vec<f64>, tangents: Vec<f64>) -> Result<Self> {
        let n = params.len();
        if dim == 0 {
            return Err(CurveError::InvalidParameter("dimension must be positive".into()));
        }
        if n < 2 {
            return Err(CurveError::TooFewPoints { needed: 2, got: n });
        }
        for (got, what) in [(points.len(), "points"), (tangents.len(), "tangents")] {
            if got != n * dim {
                return Err(CurveError::InvalidParameter(format!(
                    "{what} has {got} entries, expected {}",
                    n * dim
                )));
            }
        }
        if params[0].abs() > 1e-12 {
            return Err(CurveError::InvalidParameter("arc-length grid must start at 0".into()));
        }
        if params.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CurveError::InvalidParameter("arc-length grid must increase strictly".into()));
        }
        let mut tangents = tangents;
        for (i, tan) in tangents.chunks_mut(dim).enumerate() {
            let len = norm(tan);
            if (len - 1.0).abs() > SAMPLED_UNIT_TOL {
                return Err(CurveError::InvalidParameter(format!(
                    "tangent {i} has norm {len}, expected 1"
                )));
            }
            tan.iter_mut().for_each(|x| *x /= len);
        }
        let length = params[n - 1];
        Ok(Self { dim, params, points, tangents, length, source: CurveSource::Sampled, alpha: None })
    }

    /// Samples exact arc-length evaluators on a uniform grid of `n` points.
    pub fn from_arc_length(dim: usize, length: f64, n: usize, source: AnalyticSource) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(CurveError::InvalidParameter(format!("length must be positive, got {length}")));
        }
        if n < 2 {
            return Err(CurveError::TooFewPoints { needed: 2, got: n });
        }
        let params = uniform_grid(length, n);
        let mut points = Vec::with_capacity(n * dim);
        let mut tangents = Vec::with_capacity(n * dim);
        for &t in &params {
            let p = (source.point)(t);
            let v = (source.tangent)(t);
            if p.len() != dim || v.len() != dim {
                return Err(CurveError::DimensionMismatch { expected: dim, got: p.len().min(v.len()) });
            }
            let speed = norm(&v);
            if (speed - 1.0).abs() > ANALYTIC_UNIT_TOL {
                return Err(CurveError::InvalidParameter(format!(
                    "analytic tangent at t={t} has norm {speed}"
                )));
            }
            points.extend(p);
            tangents.extend(v);
        }
        Ok(Self {
            dim,
            params,
            points,
            tangents,
            length,
            source: CurveSource::Analytic(Arc::new(source)),
            alpha: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of grid samples N.
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total arc length L.
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn param(&self, i: usize) -> f64 {
        self.params[i]
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn tangent(&self, i: usize) -> &[f64] {
        &self.tangents[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points_flat(&self) -> &[f64] {
        &self.points
    }

    pub fn tangents_flat(&self) -> &[f64] {
        &self.tangents
    }

    pub fn source(&self) -> &CurveSource {
        &self.source
    }

    pub fn source_kind(&self) -> SourceKind {
        match self.source {
            CurveSource::Sampled => SourceKind::Sampled,
            CurveSource::Analytic(_) => SourceKind::Analytic,
        }
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self.source, CurveSource::Analytic(_))
    }

    /// Hölder exponent recorded as metadata (set by the pipeline).
    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    fn check_domain(&self, t: f64) -> Result<f64> {
        let slack = 1e-12 * self.length.max(1.0);
        if !(t >= -slack && t <= self.length + slack) {
            return Err(CurveError::OutOfDomain { t, length: self.length });
        }
        Ok(t.clamp(0.0, self.length))
    }

    fn hermite_at(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let k = locate(&self.params, t);
        let mut pos = vec![0.0; self.dim];
        let mut vel = vec![0.0; self.dim];
        hermite(
            t,
            (self.params[k], self.point(k), self.tangent(k)),
            (self.params[k + 1], self.point(k + 1), self.tangent(k + 1)),
            &mut pos,
            &mut vel,
        );
        (pos, vel)
    }

    /// γ(t) for any `t ∈ [0, L]`.
    pub fn point_at(&self, t: f64) -> Result<Vec<f64>> {
        let t = self.check_domain(t)?;
        Ok(match &self.source {
            CurveSource::Analytic(src) => (src.point)(t),
            CurveSource::Sampled => self.hermite_at(t).0,
        })
    }

    /// Unit tangent γ'(t): exact for analytic curves, interpolated and
    /// normalised otherwise.
    pub fn tangent_at(&self, t: f64) -> Result<Vec<f64>> {
        let t = self.check_domain(t)?;
        match &self.source {
            CurveSource::Analytic(src) => Ok((src.tangent)(t)),
            CurveSource::Sampled => {
                let (_, vel) = self.hermite_at(t);
                normalized(&vel).ok_or(CurveError::StationaryPoint { at: t, speed: 0.0 })
            }
        }
    }

    /// Applies `x ↦ R x + shift` (R row-major `dim × dim`, assumed orthogonal)
    /// to points and tangents. The result is a sampled curve.
    pub fn rigid_motion(&self, rotation: &[f64], shift: &[f64]) -> Result<Curve> {
        let d = self.dim;
        if rotation.len() != d * d || shift.len() != d {
            return Err(CurveError::DimensionMismatch { expected: d, got: shift.len() });
        }
        let apply = |v: &[f64], with_shift: bool| -> Vec<f64> {
            (0..d)
                .map(|r| {
                    let s: f64 = (0..d).map(|c| rotation[r * d + c] * v[c]).sum();
                    if with_shift {
                        s + shift[r]
                    } else {
                        s
                    }
                })
                .collect()
        };
        let points = (0..self.len()).flat_map(|i| apply(self.point(i), true)).collect();
        let tangents = (0..self.len()).flat_map(|i| apply(self.tangent(i), false)).collect();
        Curve::from_parts(d, self.params.clone(), points, tangents)
    }

    /// Cumulative chordal length of the grid polyline.
    pub fn chordal_length(&self) -> f64 {
        (1..self.len()).map(|i| dist(self.point(i), self.point(i - 1))).sum()
    }
}

fn uniform_grid(length: f64, n: usize) -> Vec<f64> {
    let mut g: Vec<f64> = (0..n).map(|k| length * k as f64 / (n - 1) as f64).collect();
    g[n - 1] = length;
    g
}

/// Cumulative arc length over a knot grid, invertible by monotone root-finding.
struct ArcTable {
    knots: Vec<f64>,
    cumulative: Vec<f64>,
}

impl ArcTable {
    fn build<S: Fn(f64) -> f64 + Sync>(knots: Vec<f64>, speed: &S) -> Self {
        let pieces = par::map_range(knots.len() - 1, |k| simpson(speed, knots[k], knots[k + 1], ARC_TOL));
        let mut cumulative = Vec::with_capacity(knots.len());
        cumulative.push(0.0);
        for p in pieces {
            cumulative.push(cumulative.last().unwrap() + p);
        }
        Self { knots, cumulative }
    }

    fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn param_at<S: Fn(f64) -> f64>(&self, s: f64, speed: &S) -> f64 {
        let k = locate(&self.cumulative, s);
        let (u0, u1) = (self.knots[k], self.knots[k + 1]);
        let base = self.cumulative[k];
        if s <= base {
            return u0;
        }
        if s >= self.cumulative[k + 1] {
            return u1;
        }
        invert_monotone(
            |u| base + simpson(speed, u0, u, ARC_TOL),
            speed,
            s,
            u0,
            u1,
            1e-13 * (1.0 + u1.abs()),
        )
    }
}

/// Arc-length resampling of a polyline through a natural cubic spline
/// (chord-length knots). Tangents come from differentiating the spline.
pub fn from_samples(raw_points: &[Vec<f64>], n_resample: usize) -> Result<Curve> {
    let dim = raw_points.first().map(|p| p.len()).unwrap_or(0);
    if let Some(bad) = raw_points.iter().find(|p| p.len() != dim) {
        return Err(CurveError::DimensionMismatch { expected: dim, got: bad.len() });
    }
    let mut knots = Vec::with_capacity(raw_points.len());
    knots.push(0.0);
    for (i, w) in raw_points.windows(2).enumerate() {
        let d = dist(&w[0], &w[1]);
        if d == 0.0 {
            return Err(CurveError::DuplicatePoint { index: i });
        }
        knots.push(knots[i] + d);
    }
    if raw_points.len() < 3 {
        return Err(CurveError::TooFewPoints { needed: 3, got: raw_points.len() });
    }
    let chord = *knots.last().unwrap();
    if chord < 1e-12 {
        return Err(CurveError::DegenerateCurve { length: chord });
    }
    if n_resample < 2 {
        return Err(CurveError::TooFewPoints { needed: 2, got: n_resample });
    }
    let flat: Vec<f64> = raw_points.iter().flatten().copied().collect();
    let spline = CubicSpline::not_a_knot(knots.clone(), flat, dim);
    let speed = |u: f64| norm(&spline.eval(u, 1));
    for &u in &knots {
        let v = speed(u);
        if v < STATIONARY_SPEED {
            return Err(CurveError::StationaryPoint { at: u, speed: v });
        }
    }
    let table = ArcTable::build(knots, &speed);
    let length = table.total();
    let params = uniform_grid(length, n_resample);
    let samples = par::map_range(n_resample, |k| {
        let u = table.param_at(params[k], &speed);
        let d = spline.eval(u, 1);
        (spline.eval(u, 0), d, u)
    });
    let mut points = Vec::with_capacity(n_resample * dim);
    let mut tangents = Vec::with_capacity(n_resample * dim);
    for (p, d, u) in samples {
        let tan = normalized(&d).ok_or(CurveError::StationaryPoint { at: u, speed: 0.0 })?;
        points.extend(p);
        tangents.extend(tan);
    }
    Curve::from_parts(dim, params, points, tangents)
}

/// Arc-length resampling of an analytic curve `γ: [0, t_end] → ℝⁿ`.
///
/// The returned curve keeps exact evaluators, composed with a numerically
/// inverted arc-length map.
pub fn make_analytic<G, D>(gamma: G, gamma_prime: D, domain: (f64, f64), n_samples: usize) -> Result<Curve>
where
    G: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    D: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
{
    let (u_start, u_end) = domain;
    if !(u_end > u_start) {
        return Err(CurveError::InvalidParameter(format!("empty domain [{u_start}, {u_end}]")));
    }
    let dim = gamma(u_start).len();
    let raw_cells = (8 * n_samples).max(256);
    let knots: Vec<f64> = (0..=raw_cells)
        .map(|k| u_start + (u_end - u_start) * k as f64 / raw_cells as f64)
        .collect();
    for &u in &knots {
        let v = norm(&gamma_prime(u));
        if !(v >= STATIONARY_SPEED) {
            return Err(CurveError::StationaryPoint { at: u, speed: v });
        }
    }
    let gamma_prime = Arc::new(gamma_prime);
    let speed = {
        let gp = Arc::clone(&gamma_prime);
        move |u: f64| norm(&gp(u))
    };
    let table = Arc::new(ArcTable::build(knots, &speed));
    let length = table.total();
    let gamma = Arc::new(gamma);

    let param = {
        let table = Arc::clone(&table);
        let speed = speed.clone();
        move |s: f64| table.param_at(s, &speed)
    };
    let param = Arc::new(param);
    let point: Evaluator = {
        let (param, gamma) = (Arc::clone(&param), Arc::clone(&gamma));
        Arc::new(move |s| gamma(param(s)))
    };
    let tangent: Evaluator = {
        let (param, gp) = (Arc::clone(&param), Arc::clone(&gamma_prime));
        Arc::new(move |s| {
            let d = gp(param(s));
            let n = norm(&d);
            d.into_iter().map(|x| x / n).collect()
        })
    };
    Curve::from_arc_length(dim, length, n_samples, AnalyticSource { point, tangent, third: None })
}

/// Straight segment from `a` to `b`, unit speed.
pub fn make_segment(a: &[f64], b: &[f64], n_samples: usize) -> Result<Curve> {
    if a.len() != b.len() {
        return Err(CurveError::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    let length = dist(a, b);
    if length < 1e-12 {
        return Err(CurveError::DegenerateCurve { length });
    }
    let dir: Vec<f64> = a.iter().zip(b).map(|(x, y)| (y - x) / length).collect();
    let dim = a.len();
    let origin = a.to_vec();
    let d2 = dir.clone();
    let source = AnalyticSource {
        point: Arc::new(move |t| origin.iter().zip(&d2).map(|(o, d)| o + t * d).collect()),
        tangent: Arc::new(move |_| dir.clone()),
        third: Some(Arc::new(move |_| vec![0.0; dim])),
    };
    Curve::from_arc_length(dim, length, n_samples, source)
}

/// Unit circle arc from (1, 0), counterclockwise, of angle (= length) `angle`.
pub fn make_circle_arc(angle: f64, n_samples: usize) -> Result<Curve> {
    if !(angle > 0.0) {
        return Err(CurveError::InvalidParameter(format!("arc angle must be positive, got {angle}")));
    }
    let source = AnalyticSource {
        point: Arc::new(|t: f64| vec![t.cos(), t.sin()]),
        tangent: Arc::new(|t: f64| vec![-t.sin(), t.cos()]),
        third: Some(Arc::new(|t: f64| vec![t.sin(), -t.cos()])),
    };
    Curve::from_arc_length(2, angle, n_samples, source)
}

/// Length of the logarithmic spiral `(e^{−λu} cos u, e^{−λu} sin u)`, `u ∈ [0, u_max]`.
pub fn log_spiral_length(lambda: f64, u_max: f64) -> f64 {
    (1.0 + lambda * lambda).sqrt() * (-(-lambda * u_max).exp_m1()) / lambda
}

/// Logarithmic spiral `u ↦ e^{−λu}(cos u, sin u)` on `[0, t_max]`, resampled
/// to arc length. The arc-length inverse is closed form, so all evaluators
/// (including γ''') are exact.
pub fn make_log_spiral(lambda: f64, t_max: f64, n_samples: usize) -> Result<Curve> {
    if !(lambda > 0.0) || !(t_max > 0.0) {
        return Err(CurveError::InvalidParameter(format!(
            "spiral needs lambda > 0 and t_max > 0 (got {lambda}, {t_max})"
        )));
    }
    if n_samples < 10 {
        return Err(CurveError::TooFewPoints { needed: 10, got: n_samples });
    }
    let k = (1.0 + lambda * lambda).sqrt();
    let length = log_spiral_length(lambda, t_max);
    // u(s) = −ln(1 − λ s / k) / λ
    let angle = move |s: f64| -(-lambda * s / k).ln_1p() / lambda;
    let source = AnalyticSource {
        point: Arc::new(move |s| {
            let u = angle(s);
            let r = (-lambda * u).exp();
            vec![r * u.cos(), r * u.sin()]
        }),
        tangent: Arc::new(move |s| {
            let u = angle(s);
            let (c, sn) = (u.cos(), u.sin());
            vec![(-lambda * c - sn) / k, (-lambda * sn + c) / k]
        }),
        third: Some(Arc::new(move |s| {
            let u = angle(s);
            let g = (2.0 * lambda * u).exp() / k;
            vec![g * u.sin(), -g * u.cos()]
        })),
    };
    Curve::from_arc_length(2, length, n_samples, source)
}

/// Regularity constants of a curve: Hölder seminorm of γ' and the Taylor
/// constant `c1 = ‖γ'‖²_{C^{0,α}} / (2(2α+1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityEstimate {
    pub alpha: f64,
    pub holder_seminorm: f64,
    pub c1: f64,
    pub third_deriv_bound: Option<f64>,
    pub safety_factor: f64,
}

impl RegularityEstimate {
    /// Builds an estimate from a known seminorm (no inflation applied).
    pub fn from_seminorm(alpha: f64, holder_seminorm: f64) -> Self {
        Self {
            alpha,
            holder_seminorm,
            c1: taylor_constant(alpha, holder_seminorm),
            third_deriv_bound: None,
            safety_factor: 1.0,
        }
    }

    pub fn with_third_deriv_bound(mut self, bound: f64) -> Self {
        self.third_deriv_bound = Some(bound);
        self
    }

    /// Constant of the cubic bound `⟨γ'(t), γ(s)−γ(t)⟩ ≥ (s−t) − C₁(s−t)³`,
    /// i.e. `sup‖γ'''‖ / 6`.
    pub fn cubic_constant(&self) -> Option<f64> {
        self.third_deriv_bound.map(|b| b / 6.0)
    }
}

pub fn taylor_constant(alpha: f64, holder_seminorm: f64) -> f64 {
    holder_seminorm * holder_seminorm / (2.0 * (2.0 * alpha + 1.0))
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.5 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(CurveError::InvalidParameter(format!("alpha must lie in (1/2, 1], got {alpha}")))
    }
}

/// Grid estimate of `‖γ'‖_{C^{0,α}}` inflated by the default safety factor.
pub fn holder_seminorm(curve: &Curve, alpha: f64) -> Result<RegularityEstimate> {
    holder_seminorm_with(curve, alpha, DEFAULT_SAFETY_FACTOR)
}

pub fn holder_seminorm_with(curve: &Curve, alpha: f64, safety_factor: f64) -> Result<RegularityEstimate> {
    check_alpha(alpha)?;
    if !(safety_factor >= 1.0) {
        return Err(CurveError::InvalidParameter(format!("safety factor must be ≥ 1, got {safety_factor}")));
    }
    let n = curve.len();
    if n < 2 {
        return Err(CurveError::TooFewPoints { needed: 2, got: n });
    }
    let rows = par::map_range(n - 1, |i| {
        let ti = curve.param(i);
        let gi = curve.tangent(i);
        (i + 1..n)
            .map(|j| dist(gi, curve.tangent(j)) / (curve.param(j) - ti).powf(alpha))
            .fold(0.0_f64, f64::max)
    });
    let raw = rows.into_iter().fold(0.0_f64, f64::max);
    let seminorm = safety_factor * raw;
    Ok(RegularityEstimate {
        alpha,
        holder_seminorm: seminorm,
        c1: taylor_constant(alpha, seminorm),
        third_deriv_bound: None,
        safety_factor,
    })
}

/// Sup bound on ‖γ'''‖ with its running supremum ζ(t) = sup_{τ≤t} ‖γ'''(τ)‖.
#[derive(Debug, Clone, Serialize)]
pub struct ThirdDerivBound {
    /// Safety-inflated sup.
    pub bound: f64,
    pub raw_sup: f64,
    pub safety_factor: f64,
    pub params: Vec<f64>,
    /// Inflated running sup at each grid parameter (nondecreasing).
    pub running_sup: Vec<f64>,
}

impl ThirdDerivBound {
    /// Running sup interpolated linearly between grid points, so it is
    /// continuous and nondecreasing on `[0, L]`.
    pub fn zeta(&self, t: f64) -> f64 {
        let k = locate(&self.params, t);
        let (t0, t1) = (self.params[k], self.params[k + 1]);
        let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        (1.0 - w) * self.running_sup[k] + w * self.running_sup[k + 1]
    }
}

fn second_difference(ts: &[f64], vs: &[&[f64]], i: usize) -> f64 {
    let (h0, h1) = (ts[i] - ts[i - 1], ts[i + 1] - ts[i]);
    let dim = vs[i].len();
    let mut acc = 0.0;
    for d in 0..dim {
        let s = 2.0 * ((vs[i + 1][d] - vs[i][d]) / h1 - (vs[i][d] - vs[i - 1][d]) / h0) / (h0 + h1);
        acc += s * s;
    }
    acc.sqrt()
}

/// Per-point ‖γ'''‖ from second differences of grid tangents at `stride`.
fn sampled_third(curve: &Curve, stride: usize) -> Vec<(f64, f64)> {
    let idx: Vec<usize> = (0..curve.len()).step_by(stride).collect();
    let ts: Vec<f64> = idx.iter().map(|&i| curve.param(i)).collect();
    let vs: Vec<&[f64]> = idx.iter().map(|&i| curve.tangent(i)).collect();
    let mut out = Vec::with_capacity(ts.len());
    for i in 1..ts.len().saturating_sub(1) {
        out.push((ts[i], second_difference(&ts, &vs, i)));
    }
    out
}

pub fn third_deriv_bound(curve: &Curve) -> Result<ThirdDerivBound> {
    third_deriv_bound_with(curve, DEFAULT_SAFETY_FACTOR)
}

/// Safety-inflated sup of ‖γ'''‖.
///
/// Analytic curves use the exact third derivative (or second differences of
/// the exact tangent when none is supplied). Sampled curves use second
/// differences of grid tangents, and are rejected when halving the stride
/// more than doubles the estimate.
pub fn third_deriv_bound_with(curve: &Curve, safety_factor: f64) -> Result<ThirdDerivBound> {
    let n = curve.len();
    let params = curve.params().to_vec();
    let pointwise: Vec<f64> = match curve.source() {
        CurveSource::Analytic(src) => {
            let l = curve.length();
            let h = 1e-3 * l;
            let eval = |t: f64| -> f64 {
                match &src.third {
                    Some(f) => norm(&f(t)),
                    None => {
                        let c = t.clamp(h, l - h);
                        let (a, m, b) = ((src.tangent)(c - h), (src.tangent)(c), (src.tangent)(c + h));
                        let s: f64 = (0..a.len())
                            .map(|d| {
                                let v = (a[d] - 2.0 * m[d] + b[d]) / (h * h);
                                v * v
                            })
                            .sum();
                        s.sqrt()
                    }
                }
            };
            // grid points plus midpoints, folded back onto the grid
            par::map_range(n, |i| {
                let t = params[i];
                let mut v = eval(t);
                if i > 0 {
                    v = v.max(eval(0.5 * (t + params[i - 1])));
                }
                v
            })
        }
        CurveSource::Sampled => {
            if n < 7 {
                return Err(CurveError::TooFewPoints { needed: 7, got: n });
            }
            let fine = sampled_third(curve, 1);
            let coarse = sampled_third(curve, 2);
            let sup = |v: &[(f64, f64)]| v.iter().map(|x| x.1).fold(0.0_f64, f64::max);
            let (s1, s2) = (sup(&fine), sup(&coarse));
            if s1 > 1e-8 && s1 > 2.0 * s2 {
                return Err(CurveError::InsufficientRegularity { ratio: s1 / s2.max(f64::MIN_POSITIVE) });
            }
            let mut per = vec![0.0; n];
            for (k, (_, v)) in fine.iter().enumerate() {
                per[k + 1] = *v;
            }
            per[0] = per[1];
            per[n - 1] = per[n - 2];
            per
        }
    };
    let mut running = Vec::with_capacity(n);
    let mut acc = 0.0_f64;
    for v in &pointwise {
        acc = acc.max(*v);
        running.push(safety_factor * acc);
    }
    Ok(ThirdDerivBound {
        bound: safety_factor * acc,
        raw_sup: acc,
        safety_factor,
        params,
        running_sup: running,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn quarter(n: usize) -> Curve {
        make_circle_arc(FRAC_PI_2, n).unwrap()
    }

    #[test]
    fn straight_raw_points_resample_exactly() {
        let raw = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]];
        let c = from_samples(&raw, 5).unwrap();
        assert!((c.length() - 2.0).abs() < 1e-12);
        for i in 0..5 {
            let p = c.point(i);
            assert!((p[0] - 0.5 * i as f64).abs() < 1e-10 && p[1].abs() < 1e-14);
            assert!((c.tangent(i)[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_samples_recover_quarter_length() {
        let raw: Vec<Vec<f64>> = (0..50)
            .map(|k| {
                let a = FRAC_PI_2 * k as f64 / 49.0;
                vec![a.cos(), a.sin()]
            })
            .collect();
        let c = from_samples(&raw, 100).unwrap();
        assert!((c.length() - FRAC_PI_2).abs() < 1e-3, "{}", c.length());
        assert!((c.chordal_length() - c.length()).abs() / c.length() < 1e-3);
        for i in 1..c.len() {
            let chord = dist(c.point(i), c.point(i - 1));
            assert!(chord <= c.param(i) - c.param(i - 1) + 1e-12);
        }
    }

    #[test]
    fn duplicate_and_degenerate_inputs() {
        let dup = from_samples(&[vec![0.0, 0.0], vec![0.0, 0.0]], 10);
        assert!(matches!(dup, Err(CurveError::DuplicatePoint { index: 0 })));
        let tiny = from_samples(&[vec![0.0], vec![1e-13], vec![2e-13]], 10);
        assert!(matches!(tiny, Err(CurveError::DegenerateCurve { .. })));
        let short = from_samples(&[vec![0.0, 0.0], vec![1.0, 0.0]], 10);
        assert!(matches!(short, Err(CurveError::TooFewPoints { .. })));
    }

    #[test]
    fn spiral_length_and_endpoint() {
        let c = make_log_spiral(0.5, 2.0 * PI, 200).unwrap();
        let end = c.point(c.len() - 1);
        assert!((end[0] - (-PI).exp()).abs() < 1e-10);
        assert!(end[1].abs() < 1e-10);
        assert!((c.point(0)[0] - 1.0).abs() < 1e-15);
        // λ = 1: L → √2 as t_max → ∞
        assert!((log_spiral_length(1.0, 60.0) - 2f64.sqrt()).abs() < 1e-12);
        for i in 0..c.len() {
            assert!((norm(c.tangent(i)) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn spiral_tangent_matches_finite_difference() {
        let c = make_log_spiral(0.3, 10.0, 50).unwrap();
        let t = 0.7 * c.length();
        let h = 1e-6;
        let a = c.point_at(t - h).unwrap();
        let b = c.point_at(t + h).unwrap();
        let fd: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (y - x) / (2.0 * h)).collect();
        let tan = c.tangent_at(t).unwrap();
        assert!(dist(&fd, &tan) < 1e-6);
    }

    #[test]
    fn analytic_generic_curves() {
        let c = make_analytic(|t| vec![t.cos(), t.sin()], |t| vec![-t.sin(), t.cos()], (0.0, FRAC_PI_2), 50).unwrap();
        assert!((c.length() - FRAC_PI_2).abs() < 1e-10);
        let line = make_analytic(|t| vec![2.0 * t, 0.0], |_| vec![2.0, 0.0], (0.0, 1.0), 20).unwrap();
        assert!((line.length() - 2.0).abs() < 1e-12);
        assert!((line.point(10)[0] - 2.0 * 10.0 / 19.0).abs() < 1e-10);
        let parabola = make_analytic(|t| vec![t, t * t], |t| vec![1.0, 2.0 * t], (0.0, 1.0), 100).unwrap();
        let exact = 5f64.sqrt() / 2.0 + 2f64.asinh() / 4.0;
        assert!((parabola.length() - exact).abs() < 1e-4);
        assert!((parabola.length() - 1.4789).abs() < 1e-4);
    }

    #[test]
    fn stationary_analytic_rejected() {
        let r = make_analytic(|t| vec![t * t * t, 0.0], |t| vec![3.0 * t * t, 0.0], (-1.0, 1.0), 20);
        assert!(matches!(r, Err(CurveError::StationaryPoint { .. })));
    }

    #[test]
    fn tangent_queries() {
        let seg = make_segment(&[0.0, 0.0], &[1.0, 0.0], 11).unwrap();
        assert_eq!(seg.tangent_at(0.7).unwrap(), vec![1.0, 0.0]);
        let q = quarter(20);
        let t0 = q.tangent_at(0.0).unwrap();
        assert!(t0[0].abs() < 1e-15 && (t0[1] - 1.0).abs() < 1e-15);
        assert!(matches!(q.tangent_at(q.length() + 0.1), Err(CurveError::OutOfDomain { .. })));
        let sampled = Curve::from_parts(2, q.params().to_vec(), q.points_flat().to_vec(), q.tangents_flat().to_vec()).unwrap();
        let t = 0.4321;
        assert!(dist(&sampled.tangent_at(t).unwrap(), &q.tangent_at(t).unwrap()) < 1e-5);
        assert!(dist(&sampled.point_at(t).unwrap(), &q.point_at(t).unwrap()) < 1e-7);
    }

    #[test]
    fn holder_examples() {
        let seg = make_segment(&[0.0, 0.0], &[1.0, 0.0], 50).unwrap();
        let r = holder_seminorm(&seg, 1.0).unwrap();
        assert_eq!(r.holder_seminorm, 0.0);
        assert_eq!(r.c1, 0.0);
        let q = quarter(200);
        let r1 = holder_seminorm_with(&q, 1.0, 1.0).unwrap();
        // grid maximum of 2 sin(h/2)/h is attained at the smallest gap h
        let h = FRAC_PI_2 / 199.0;
        let oracle = 2.0 * (h / 2.0).sin() / h;
        assert!((r1.holder_seminorm - oracle).abs() < 1e-12);
        assert!(r1.holder_seminorm <= 1.0);
        let r2 = holder_seminorm(&q, 1.0).unwrap();
        assert!((r2.c1 - 1.25f64.powi(2) / 6.0).abs() < 1e-4);
        assert!(holder_seminorm(&q, 0.4).is_err());
    }

    #[test]
    fn holder_refines_towards_one() {
        let coarse = holder_seminorm_with(&quarter(20), 1.0, 1.0).unwrap().holder_seminorm;
        let fine = holder_seminorm_with(&quarter(400), 1.0, 1.0).unwrap().holder_seminorm;
        assert!(coarse < fine && fine < 1.0 && 1.0 - fine < 1e-5);
    }

    #[test]
    fn third_derivative_bounds() {
        let seg = make_segment(&[0.0, 0.0], &[1.0, 1.0], 30).unwrap();
        assert_eq!(third_deriv_bound(&seg).unwrap().bound, 0.0);
        let q = quarter(100);
        let b = third_deriv_bound(&q).unwrap();
        assert!((b.bound - 1.25).abs() < 1e-12);
        // sampled copy of the circle: finite differences of the tangent
        let sampled = Curve::from_parts(2, q.params().to_vec(), q.points_flat().to_vec(), q.tangents_flat().to_vec()).unwrap();
        let s = third_deriv_bound_with(&sampled, 1.0).unwrap();
        assert!((s.bound - 1.0).abs() < 1e-3, "{}", s.bound);
        // without an exact γ''' the exact tangent is differenced
        let generic = make_analytic(|t| vec![t.cos(), t.sin()], |t| vec![-t.sin(), t.cos()], (0.0, 1.0), 40).unwrap();
        let g = third_deriv_bound_with(&generic, 1.0).unwrap();
        assert!((g.bound - 1.0).abs() < 1e-5, "{}", g.bound);
    }

    #[test]
    fn spiral_running_sup_is_monotone() {
        let c = make_log_spiral(0.5, 4.0 * PI, 200).unwrap();
        let b = third_deriv_bound(&c).unwrap();
        assert!(b.running_sup.windows(2).all(|w| w[1] >= w[0]));
        let l = c.length();
        assert!(b.zeta(0.3 * l) <= b.zeta(0.6 * l));
        // ‖γ'''‖ = e^{2λu}/√(1+λ²) at the tip u = 4π
        let tip = (4.0 * PI).exp() / 1.25f64.sqrt();
        assert!((b.raw_sup - tip).abs() / tip < 1e-12);
    }

    #[test]
    fn kinked_samples_are_irregular() {
        // polyline with a right-angle corner, resampled coarsely
        let mut raw = Vec::new();
        for k in 0..=200 {
            raw.push(vec![k as f64 / 200.0, 0.0]);
        }
        for k in 1..=200 {
            raw.push(vec![1.0, k as f64 / 200.0]);
        }
        let c = from_samples(&raw, 61).unwrap();
        let r = third_deriv_bound(&c);
        assert!(matches!(r, Err(CurveError::InsufficientRegularity { .. })), "{r:?}");
    }
}
