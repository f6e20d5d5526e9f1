//! Speed profiles `m` and the time change `θ(t) = ∫₀ᵗ m`.
//!
//! Every profile is written as `m(t) = K·e^{φ(t)}/φ'(t)` for a phase `φ` with
//! `φ' > 0` on `[0, L)`:
//!
//! | kind        | φ(t)                          | K |
//! |-------------|-------------------------------|---|
//! | exponential | `b t`                         | b |
//! | endpoint    | `b (L t − t²/2)`              | 1 |
//! | zeta        | `∫₀ᵗ (2/c₀)(A − ∫₀^τ ζ)`      | 1 |
//!
//! so that `∫_t^s 1/m = (e^{−φ(t)} − e^{−φ(s)})/K` and the left side of the
//! (M)-inequality is `m(t)∫_t^s 1/m = −expm1(−(φ(s)−φ(t)))/φ'(t)`, which stays
//! finite even when `m` itself overflows.

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{Curve, CurveError, RegularityEstimate};
use crate::linalg::dot_diff;
use crate::par;
use crate::quad::{integrate_to_endpoint, invert_monotone, simpson, QuadError};
use crate::spline::locate;

/// Floor on every rate parameter b.
pub const B_MIN: f64 = 1.0;
/// Floor applied to user-supplied ζ.
pub const ZETA_MIN: f64 = 1e-3;
const QUAD_TOL: f64 = 1e-10;
const THETA_CELLS: usize = 512;
const ZETA_CELLS: usize = 256;
const REFINE_POINTS: usize = 10;
const GAP_FREEZE: f64 = 1e-8;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Error)]
pub enum ReparError {
    #[error("c0 must be positive, got {c0}")]
    NonPositiveC0 { c0: f64 },
    #[error("rate parameter overflows (c0 = {c0}, c1' = {c1})")]
    RateOverflow { c0: f64, c1: f64 },
    #[error("zeta bound violated at (t, s) = ({t}, {s}): {value} < {bound}")]
    HypothesisViolated { t: f64, s: f64, value: f64, bound: f64 },
    #[error("integral of zeta over [0, L) diverges: {0}")]
    DivergentA(QuadError),
    #[error("invalid zeta: {0}")]
    InvalidZeta(String),
    #[error("profile m is not positive and nondecreasing near t = {at}")]
    InvalidProfile { at: f64 },
    #[error("horizon {horizon} exceeds total flow time {total}")]
    HorizonExceedsT { horizon: f64, total: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

pub type Result<T> = std::result::Result<T, ReparError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanKind {
    Exponential,
    Endpoint,
    Zeta,
}

impl PlanKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlanKind::Exponential => "exponential",
            PlanKind::Endpoint => "endpoint",
            PlanKind::Zeta => "zeta",
        }
    }
}

impl std::str::FromStr for PlanKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "exp" | "exponential" => Ok(PlanKind::Exponential),
            "endpoint" => Ok(PlanKind::Endpoint),
            "zeta" => Ok(PlanKind::Zeta),
            other => Err(format!("unknown plan kind `{other}` (expected exp|endpoint|zeta)")),
        }
    }
}

/// Cumulative integrals of ζ on a node grid; everything else is cell-local.
struct ZetaProfile {
    zeta: ScalarFn,
    scale: f64, // 2 / c0
    length: f64,
    total: f64, // A = ∫₀^L ζ
    phi_end: f64,
    nodes: Vec<f64>,
    z_cum: Vec<f64>,   // ∫₀^{t_k} ζ
    tau_cum: Vec<f64>, // ∫₀^{t_k} τ ζ(τ)
}

impl ZetaProfile {
    fn build(zeta: ScalarFn, c0: f64, length: f64) -> Result<Self> {
        let total = integrate_to_endpoint(|t| zeta(t), 0.0, length, QUAD_TOL).map_err(ReparError::DivergentA)?;
        let w_total =
            integrate_to_endpoint(|t| t * zeta(t), 0.0, length, QUAD_TOL).map_err(ReparError::DivergentA)?;
        let nodes: Vec<f64> = (0..ZETA_CELLS).map(|k| length * k as f64 / ZETA_CELLS as f64).collect();
        let cells = par::map_range(ZETA_CELLS - 1, |k| {
            let (a, b) = (nodes[k], nodes[k + 1]);
            (simpson(|t| zeta(t), a, b, QUAD_TOL), simpson(|t| t * zeta(t), a, b, QUAD_TOL))
        });
        let mut z_cum = vec![0.0; ZETA_CELLS];
        let mut tau_cum = vec![0.0; ZETA_CELLS];
        for (k, (z, w)) in cells.into_iter().enumerate() {
            z_cum[k + 1] = z_cum[k] + z;
            tau_cum[k + 1] = tau_cum[k] + w;
        }
        let scale = 2.0 / c0;
        Ok(Self { zeta, scale, length, total, phi_end: scale * w_total, nodes, z_cum, tau_cum })
    }

    fn cell(&self, t: f64) -> usize {
        self.nodes.partition_point(|&x| x <= t).saturating_sub(1)
    }

    /// `∫_t^L ζ`.
    fn tail(&self, t: f64) -> f64 {
        if t >= self.length {
            return 0.0;
        }
        let k = self.cell(t);
        let z = self.z_cum[k] + simpson(|x| (self.zeta)(x), self.nodes[k], t, QUAD_TOL);
        (self.total - z).max(0.0)
    }

    fn phi_prime(&self, t: f64) -> f64 {
        self.scale * self.tail(t)
    }

    fn phi(&self, t: f64) -> f64 {
        if t >= self.length {
            return self.phi_end;
        }
        let k = self.cell(t);
        let w = self.tau_cum[k] + simpson(|x| x * (self.zeta)(x), self.nodes[k], t, QUAD_TOL);
        self.scale * (t * self.tail(t) + w)
    }
}

enum Profile {
    Exponential { b: f64 },
    Endpoint { b: f64 },
    Zeta(ZetaProfile),
}

struct PlanInner {
    profile: Profile,
    theta_table: OnceLock<Vec<f64>>,
}

/// A speed profile `m` on `[0, L)` with its constants.
#[derive(Clone)]
pub struct ReparamPlan {
    pub kind: PlanKind,
    pub b: f64,
    pub c0: f64,
    pub c1: f64,
    pub length: f64,
    inner: Arc<PlanInner>,
}

impl fmt::Debug for ReparamPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReparamPlan")
            .field("kind", &self.kind)
            .field("b", &self.b)
            .field("c0", &self.c0)
            .field("c1", &self.c1)
            .field("length", &self.length)
            .finish()
    }
}

/// Serializable view of a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub kind: PlanKind,
    pub b: f64,
    pub c0: f64,
    pub c1: f64,
    #[serde(rename = "L")]
    pub length: f64,
    /// Total flow time θ(L); `null` when infinite.
    #[serde(rename = "T")]
    pub total_time: Option<f64>,
}

impl ReparamPlan {
    fn new(kind: PlanKind, b: f64, c0: f64, c1: f64, length: f64, profile: Profile) -> Result<Self> {
        if !(length > 0.0) {
            return Err(ReparError::InvalidParameter(format!("length must be positive, got {length}")));
        }
        let plan = Self {
            kind,
            b,
            c0,
            c1,
            length,
            inner: Arc::new(PlanInner { profile, theta_table: OnceLock::new() }),
        };
        plan.validate_profile()?;
        Ok(plan)
    }

    /// `m(t) = e^{bt}` with the given rate.
    pub fn exponential_with_rate(b: f64, length: f64) -> Result<Self> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(ReparError::InvalidParameter(format!("rate must be positive and finite, got {b}")));
        }
        Self::new(PlanKind::Exponential, b, 0.0, 0.0, length, Profile::Exponential { b })
    }

    /// `m(t) = e^{b(Lt − t²/2)} / (b(L − t))` with the given rate.
    pub fn endpoint_with_rate(b: f64, length: f64) -> Result<Self> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(ReparError::InvalidParameter(format!("rate must be positive and finite, got {b}")));
        }
        Self::new(PlanKind::Endpoint, b, 0.0, 0.0, length, Profile::Endpoint { b })
    }

    pub fn summary(&self) -> PlanSummary {
        let t = self.total_time();
        PlanSummary {
            kind: self.kind,
            b: self.b,
            c0: self.c0,
            c1: self.c1,
            length: self.length,
            total_time: t.is_finite().then_some(t),
        }
    }

    fn profile(&self) -> &Profile {
        &self.inner.profile
    }

    /// Finite total time θ(L)?
    pub fn is_compact(&self) -> bool {
        matches!(self.profile(), Profile::Exponential { .. })
    }

    /// Normalising constant K in `m = K e^{φ}/φ'`.
    fn k(&self) -> f64 {
        match self.profile() {
            Profile::Exponential { b } => *b,
            _ => 1.0,
        }
    }

    pub fn phi(&self, t: f64) -> f64 {
        let l = self.length;
        match self.profile() {
            Profile::Exponential { b } => b * t,
            Profile::Endpoint { b } => {
                let t = t.min(l);
                b * (l * t - 0.5 * t * t)
            }
            Profile::Zeta(z) => z.phi(t),
        }
    }

    pub fn phi_prime(&self, t: f64) -> f64 {
        match self.profile() {
            Profile::Exponential { b } => *b,
            Profile::Endpoint { b } => b * (self.length - t).max(0.0),
            Profile::Zeta(z) => z.phi_prime(t),
        }
    }

    /// `φ(s) − φ(t)`, closed form where available.
    pub fn phi_diff(&self, t: f64, s: f64) -> f64 {
        let l = self.length;
        match self.profile() {
            Profile::Exponential { b } => b * (s - t),
            Profile::Endpoint { b } => {
                let s = s.min(l);
                b * (s - t) * (l - 0.5 * (s + t))
            }
            Profile::Zeta(z) => z.phi(s) - z.phi(t),
        }
    }

    /// The speed profile m(t); `+∞` at `t = L` for the endpoint and zeta kinds.
    pub fn m(&self, t: f64) -> f64 {
        let d = self.phi_prime(t);
        if d <= 0.0 {
            return f64::INFINITY;
        }
        self.k() * self.phi(t).exp() / d
    }

    /// `1/m(t)`, computed without forming m.
    pub fn inv_m(&self, t: f64) -> f64 {
        self.phi_prime(t) * (-self.phi(t)).exp() / self.k()
    }

    /// `∫_t^s 1/m(τ) dτ`.
    pub fn inv_m_integral(&self, t: f64, s: f64) -> f64 {
        let e_t = (-self.phi(t)).exp();
        // e^{−φ(t)} (1 − e^{−(φ(s)−φ(t))})
        -e_t * (-self.phi_diff(t, s)).exp_m1() / self.k()
    }

    /// `m(t) ∫_t^s 1/m`, the left side of the (M)-inequality.
    pub fn m_times_inv_integral(&self, t: f64, s: f64) -> f64 {
        lhs_from(self.phi_diff(t, s), self.phi_prime(t))
    }

    /// Total flow time `T = θ(L)`.
    pub fn total_time(&self) -> f64 {
        match self.profile() {
            Profile::Exponential { b } => (b * self.length).exp_m1() / b,
            _ => f64::INFINITY,
        }
    }

    fn theta_nodes(&self) -> Vec<f64> {
        (0..THETA_CELLS).map(|k| self.length * k as f64 / THETA_CELLS as f64).collect()
    }

    fn theta_table(&self) -> &[f64] {
        self.inner.theta_table.get_or_init(|| {
            let nodes = self.theta_nodes();
            let cells = par::map_range(THETA_CELLS - 1, |k| {
                self.theta_cell(nodes[k], nodes[k + 1], 0.0)
            });
            let mut table = vec![0.0; THETA_CELLS];
            for (k, c) in cells.into_iter().enumerate() {
                table[k + 1] = table[k] + c;
            }
            table
        })
    }

    /// `∫_a^t m` in the variable `v = −ln(L − τ)`, where the integrand
    /// `m(τ)(L − τ)` stays bounded up to L. Below a gap of `GAP_FREEZE·L` the
    /// integrand is held at its value there and integrated exactly.
    fn theta_cell(&self, a: f64, t: f64, base: f64) -> f64 {
        let l = self.length;
        let g = |v: f64| {
            let gap = (-v).exp();
            let tau = l - gap;
            self.k() * self.phi(tau).exp() * gap / self.phi_prime(tau)
        };
        let v_cap = -(l * GAP_FREEZE).ln();
        let to_v = |x: f64| if l - x <= l * GAP_FREEZE { v_cap } else { -(l - x).ln() };
        let (va, vt) = (to_v(a), to_v(t));
        let rough = 0.5 * (vt - va) * (g(va) + g(vt));
        let mut total = simpson(g, va, vt, QUAD_TOL * (1.0 + base).max(1e-2 * rough.abs()));
        if l - t < l * GAP_FREEZE {
            let v_end = if t >= l { f64::INFINITY } else { -(l - t).ln() };
            let v_start = if l - a < l * GAP_FREEZE { -(l - a).ln() } else { v_cap };
            total += g(v_cap) * (v_end - v_start);
        }
        total
    }

    /// `θ(t) = ∫₀ᵗ m(s) ds`.
    pub fn theta(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self.profile() {
            Profile::Exponential { b } => (b * t.min(self.length)).exp_m1() / b,
            _ => {
                if t >= self.length {
                    return f64::INFINITY;
                }
                let table = self.theta_table();
                let k = ((t / self.length * THETA_CELLS as f64) as usize).min(THETA_CELLS - 1);
                let t_k = self.length * k as f64 / THETA_CELLS as f64;
                let base = table[k];
                base + self.theta_cell(t_k, t, base)
            }
        }
    }

    /// `θ⁻¹(s)` by bracketing then safeguarded Newton.
    pub fn theta_inverse(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match self.profile() {
            Profile::Exponential { b } => ((b * s).ln_1p() / b).min(self.length),
            _ => {
                let table = self.theta_table();
                let k = locate(table, s).min(THETA_CELLS - 1);
                let k = if s >= table[THETA_CELLS - 1] { THETA_CELLS - 1 } else { k };
                let lo = self.length * k as f64 / THETA_CELLS as f64;
                let hi = if k + 1 == THETA_CELLS { self.length } else { self.length * (k + 1) as f64 / THETA_CELLS as f64 };
                invert_monotone(|t| self.theta(t), |t| self.m(t), s, lo, hi, 1e-12 * self.length.max(1.0))
            }
        }
    }

    fn validate_profile(&self) -> Result<()> {
        let grid = 1000;
        let mut prev = 0.0_f64;
        for k in 0..grid {
            let t = self.length * k as f64 / grid as f64;
            // compare in log space: ln m = ln K + φ − ln φ'
            let log_m = self.k().ln() + self.phi(t) - self.phi_prime(t).ln();
            if !(log_m.is_finite()) || (k > 0 && log_m < prev - 1e-12 * prev.abs().max(1.0)) {
                return Err(ReparError::InvalidProfile { at: t });
            }
            prev = log_m;
        }
        Ok(())
    }
}

fn lhs_from(phi_diff: f64, phi_prime_t: f64) -> f64 {
    if phi_prime_t <= 0.0 {
        return f64::INFINITY;
    }
    -(-phi_diff).exp_m1() / phi_prime_t
}

fn check_c0(c0: f64) -> Result<()> {
    if c0 > 0.0 && c0.is_finite() {
        Ok(())
    } else {
        Err(ReparError::NonPositiveC0 { c0 })
    }
}

/// `m(t) = e^{bt}` with `b = 3 C₁' e^{1/c₀}`, `C₁' = c1 · L^{2α−1}`, floored at [`B_MIN`].
pub fn exponential_plan(curve: &Curve, reg: &RegularityEstimate, c0: f64) -> Result<ReparamPlan> {
    check_c0(c0)?;
    crate::curve::check_alpha(reg.alpha)?;
    let length = curve.length();
    let c1_prime = reg.c1 * length.powf(2.0 * reg.alpha - 1.0);
    let b = 3.0 * c1_prime * (1.0 / c0).exp();
    if !b.is_finite() {
        return Err(ReparError::RateOverflow { c0, c1: c1_prime });
    }
    let b = b.max(B_MIN);
    ReparamPlan::new(PlanKind::Exponential, b, c0, reg.c1, length, Profile::Exponential { b })
}

/// `m(t) = e^{b(Lt−t²/2)}/(b(L−t))` with `b = max(3 C₁/c₀, B_MIN)`; m → ∞ at L.
pub fn endpoint_plan(curve: &Curve, c0: f64, c1_cubic: f64) -> Result<ReparamPlan> {
    check_c0(c0)?;
    if !(c1_cubic >= 0.0) {
        return Err(ReparError::InvalidParameter(format!("cubic constant must be ≥ 0, got {c1_cubic}")));
    }
    let b = (3.0 * c1_cubic / c0).max(B_MIN);
    if !b.is_finite() {
        return Err(ReparError::RateOverflow { c0, c1: c1_cubic });
    }
    ReparamPlan::new(PlanKind::Endpoint, b, c0, c1_cubic, curve.length(), Profile::Endpoint { b })
}

/// Profile from a bound `⟨γ'(t), (γ(s)−γ(t))/(s−t)⟩ ≥ 1 − ζ(s)(s−t)²`:
/// `φ'(t) = (2/c₀)(A − ∫₀ᵗ ζ)`, `A = ∫₀^L ζ`, `m = e^{φ}/φ'`.
///
/// ζ is floored at [`ZETA_MIN`] so φ' stays positive on `[0, L)`.
pub fn zeta_plan(curve: &Curve, c0: f64, zeta: ScalarFn) -> Result<ReparamPlan> {
    check_c0(c0)?;
    let length = curve.length();
    let raw = Arc::clone(&zeta);
    let floored: ScalarFn = Arc::new(move |t| raw(t).max(ZETA_MIN));

    // positivity / monotonicity on a grid strictly inside [0, L)
    let grid = 1000;
    let mut prev = f64::NEG_INFINITY;
    for k in 0..grid {
        let t = length * k as f64 / grid as f64;
        let z = floored(t);
        if !z.is_finite() {
            return Err(ReparError::InvalidZeta(format!("zeta({t}) = {z} is not finite")));
        }
        if z < prev - 1e-12 * prev.abs().max(1.0) {
            return Err(ReparError::InvalidZeta(format!("zeta decreases near t = {t}")));
        }
        prev = z;
    }

    // the ζ-bound on all grid pairs with s < L
    let n = curve.len();
    let rows = par::map_range(n.saturating_sub(2), |i| {
        let (ti, pi, gi) = (curve.param(i), curve.point(i), curve.tangent(i));
        let mut worst: Option<(f64, f64, f64, f64)> = None;
        for j in i + 1..n - 1 {
            let tj = curve.param(j);
            let h = tj - ti;
            let value = dot_diff(gi, curve.point(j), pi) / h;
            let bound = 1.0 - floored(tj) * h * h;
            let slack = value - bound;
            if worst.map_or(true, |w| slack < w.2 - w.3) {
                worst = Some((ti, tj, value, bound));
            }
        }
        worst
    });
    for (t, s, value, bound) in rows.into_iter().flatten() {
        if value < bound - 1e-9 {
            return Err(ReparError::HypothesisViolated { t, s, value, bound });
        }
    }

    let profile = ZetaProfile::build(Arc::clone(&floored), c0, length)?;
    let b = profile.scale * profile.total / length;
    let mean_zeta = profile.total / length;
    ReparamPlan::new(PlanKind::Zeta, b, c0, mean_zeta, length, Profile::Zeta(profile))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MPair {
    pub t: f64,
    pub s: f64,
    pub lhs: f64,
    pub rhs: f64,
}

impl MPair {
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MReport {
    pub holds: bool,
    pub worst_pair: MPair,
    pub margin: f64,
    pub pairs_checked: usize,
}

/// Checks `m(t)∫_t^s 1/m < ⟨γ'(t), γ(s) − γ(t)⟩` on all grid pairs, then on a
/// refined 10 × 10 patch around the worst pair. Profiles that blow up at L
/// are checked for `s ≤ t_{N−2}`.
pub fn verify_m(curve: &Curve, plan: &ReparamPlan) -> MReport {
    let n = curve.len();
    let last = if plan.is_compact() { n } else { n - 1 };
    let closed_form = !matches!(plan.profile(), Profile::Zeta(_));
    let phis: Vec<(f64, f64)> = par::map_range(n, |i| {
        let t = curve.param(i);
        let phi = if closed_form { 0.0 } else { plan.phi(t) };
        (phi, plan.phi_prime(t))
    });
    let rows = par::map_range(last.saturating_sub(1), |i| {
        let (ti, pi, gi) = (curve.param(i), curve.point(i), curve.tangent(i));
        let mut worst: Option<(MPair, usize)> = None;
        for j in i + 1..last {
            let tj = curve.param(j);
            let dphi = if closed_form { plan.phi_diff(ti, tj) } else { phis[j].0 - phis[i].0 };
            let pair = MPair { t: ti, s: tj, lhs: lhs_from(dphi, phis[i].1), rhs: dot_diff(gi, curve.point(j), pi) };
            if worst.map_or(true, |(w, _)| pair.margin() < w.margin()) {
                worst = Some((pair, j));
            }
        }
        worst.map(|(p, j)| (p, i, j))
    });
    let rows: Vec<(MPair, usize, usize)> = rows.into_iter().flatten().collect();
    let mut pairs_checked = last * last.saturating_sub(1) / 2;
    let Some(k) = par::argmin_by_key(&rows, |r| r.0.margin()) else {
        let empty = MPair { t: 0.0, s: 0.0, lhs: 0.0, rhs: 0.0 };
        return MReport { holds: true, worst_pair: empty, margin: f64::INFINITY, pairs_checked: 0 };
    };
    let (mut worst, wi, wj) = rows[k];

    // refinement around the worst pair
    let s_max = curve.param(last - 1);
    let window = |idx: usize, cap: f64| -> Vec<f64> {
        let lo = curve.param(idx.saturating_sub(1));
        let hi = curve.param((idx + 1).min(n - 1)).min(cap);
        (0..REFINE_POINTS)
            .map(|q| lo + (hi - lo) * (q as f64 + 0.5) / REFINE_POINTS as f64)
            .collect()
    };
    let ts = window(wi, s_max);
    let ss = window(wj, s_max);
    let gap = 0.5 * (ts[1] - ts[0]).min(ss[1] - ss[0]);
    let refined: Vec<MPair> = ts
        .iter()
        .flat_map(|&t| ss.iter().filter(move |&&s| s > t + gap).map(move |&s| (t, s)))
        .filter_map(|(t, s)| {
            let (pt, gt, ps) = (curve.point_at(t).ok()?, curve.tangent_at(t).ok()?, curve.point_at(s).ok()?);
            Some(MPair { t, s, lhs: plan.m_times_inv_integral(t, s), rhs: dot_diff(&gt, &ps, &pt) })
        })
        .collect();
    pairs_checked += refined.len();
    for p in refined {
        if p.margin() < worst.margin() {
            worst = p;
        }
    }
    let margin = worst.margin();
    MReport { holds: margin > 0.0, worst_pair: worst, margin, pairs_checked }
}

/// Samples of `γ̃ = γ ∘ θ⁻¹` on a uniform time grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReparamCurve {
    pub dim: usize,
    pub times: Vec<f64>,
    /// Arc-length parameter `θ⁻¹(s_k)`.
    pub arc_params: Vec<f64>,
    pub points: Vec<f64>,
    pub velocities: Vec<f64>,
}

impl ReparamCurve {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.dim..(k + 1) * self.dim]
    }

    pub fn velocity(&self, k: usize) -> &[f64] {
        &self.velocities[k * self.dim..(k + 1) * self.dim]
    }

    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }
}

/// `γ̃(s) = γ(θ⁻¹(s))` and `γ̃'(s) = γ'(θ⁻¹(s)) / m(θ⁻¹(s))` on `n_out`
/// uniform times in `[0, t_horizon]`.
pub fn reparameterize(curve: &Curve, plan: &ReparamPlan, n_out: usize, t_horizon: f64) -> Result<ReparamCurve> {
    let total = plan.total_time();
    if !(t_horizon > 0.0) || !t_horizon.is_finite() {
        return Err(ReparError::InvalidParameter(format!("horizon must be positive and finite, got {t_horizon}")));
    }
    if t_horizon > total * (1.0 + 1e-12) {
        return Err(ReparError::HorizonExceedsT { horizon: t_horizon, total });
    }
    if n_out < 2 {
        return Err(ReparError::InvalidParameter("need at least two output samples".into()));
    }
    let times: Vec<f64> = (0..n_out).map(|k| t_horizon * k as f64 / (n_out - 1) as f64).collect();
    let samples = par::map_range(n_out, |k| -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let u = plan.theta_inverse(times[k]).min(curve.length());
        let p = curve.point_at(u)?;
        let speed = plan.inv_m(u);
        let v: Vec<f64> = curve.tangent_at(u)?.into_iter().map(|x| x * speed).collect();
        Ok((u, p, v))
    });
    let dim = curve.dim();
    let mut out = ReparamCurve {
        dim,
        times,
        arc_params: Vec::with_capacity(n_out),
        points: Vec::with_capacity(n_out * dim),
        velocities: Vec::with_capacity(n_out * dim),
    };
    for s in samples {
        let (u, p, v) = s?;
        out.arc_params.push(u);
        out.points.extend(p);
        out.velocities.extend(v);
    }
    Ok(out)
}
