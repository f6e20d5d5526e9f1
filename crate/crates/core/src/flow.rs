//! Gradient flows `x' = −∇F(x)` and the checks run on their orbits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contract::{check_uniform, ContractReport};
use crate::curve::{from_samples, CurveError};
use crate::extend::ConvexExtension;
use crate::linalg::{dist, norm};
use crate::par;
use crate::quad::tail_integrals;
use crate::repar::ReparamCurve;

/// Integration stops once `‖∇F‖` drops below this.
pub const STATIONARY_GRAD: f64 = 1e-8;
/// Samples slower than this are cut before contract checks.
pub const TAIL_SPEED: f64 = 1e-6;
pub const ENERGY_TOL: f64 = 1e-6;
const BLOWUP_FACTOR: f64 = 1e6;
const ORBIT_RESAMPLE: usize = 200;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("invalid step: dt = {dt}, t_end = {t_end}")]
    InvalidStep { dt: f64, t_end: f64 },
    #[error("state norm {norm:.3e} exceeds the blow-up bound at s = {time}")]
    BlowUp { time: f64, norm: f64 },
    #[error("oracle has dimension {expected} but the start point has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite gradient at s = {time}")]
    NonFinite { time: f64 },
    #[error("energy identity violated: max residual {residual:.3e} (tolerance {tol:.1e})")]
    IdentityViolated { residual: f64, tol: f64 },
    #[error("orbit too short for a contract check ({points} samples above the speed cut)")]
    ShortOrbit { points: usize },
    #[error(transparent)]
    Curve(#[from] CurveError),
}

pub type Result<T> = std::result::Result<T, FlowError>;

/// A C¹ function given through its value and gradient.
pub trait GradientOracle: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
}

impl GradientOracle for ConvexExtension {
    fn dim(&self) -> usize {
        ConvexExtension::dim(self)
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.eval_f(x)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.eval(x, Some(out));
    }
}

fn mat_vec(a: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        *o = a[r * n..(r + 1) * n].iter().zip(x).map(|(p, q)| p * q).sum();
    }
}

/// `½ (x − c)ᵀ A (x − c)` with a symmetric matrix `A` (row-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    pub matrix: Vec<f64>,
    pub center: Vec<f64>,
}

impl Quadratic {
    pub fn new(matrix: Vec<f64>, center: Vec<f64>) -> Self {
        assert_eq!(matrix.len(), center.len() * center.len(), "matrix must be n × n");
        Self { matrix, center }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut matrix = vec![0.0; n * n];
        for (i, d) in diag.iter().enumerate() {
            matrix[i * n + i] = *d;
        }
        Self::new(matrix, vec![0.0; n])
    }

    fn shifted(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.center).map(|(a, c)| a - c).collect()
    }
}

impl GradientOracle for Quadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let y = self.shifted(x);
        let mut ay = vec![0.0; y.len()];
        mat_vec(&self.matrix, &y, &mut ay);
        0.5 * y.iter().zip(&ay).map(|(p, q)| p * q).sum::<f64>()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        mat_vec(&self.matrix, &self.shifted(x), out);
    }
}

/// `(xᵀAx + δ)^{1/4}`: coercive and quasiconvex, not convex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiconvexBowl {
    pub matrix: Vec<f64>,
    pub delta: f64,
}

impl GradientOracle for QuasiconvexBowl {
    fn dim(&self) -> usize {
        (self.matrix.len() as f64).sqrt().round() as usize
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut ax = vec![0.0; x.len()];
        mat_vec(&self.matrix, x, &mut ax);
        let q: f64 = x.iter().zip(&ax).map(|(p, q)| p * q).sum();
        (q + self.delta).powf(0.25)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        mat_vec(&self.matrix, x, out);
        let q: f64 = x.iter().zip(out.iter()).map(|(p, q)| p * q).sum();
        let w = 0.5 * (q + self.delta).powf(-0.75);
        out.iter_mut().for_each(|g| *g *= w);
    }
}

/// An oracle from closures.
pub struct FnOracle<V, G> {
    pub dim: usize,
    pub value: V,
    pub gradient: G,
}

impl<V, G> GradientOracle for FnOracle<V, G>
where
    V: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64], &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (self.gradient)(x, out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dim: usize,
    pub times: Vec<f64>,
    /// Flat `len × dim`.
    pub states: Vec<f64>,
    pub speeds: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// Piecewise-linear state at time `s`, constant past either end.
    pub fn state_at(&self, s: f64) -> Vec<f64> {
        let n = self.len();
        if s <= self.times[0] || n == 1 {
            return self.state(0).to_vec();
        }
        if s >= self.times[n - 1] {
            return self.last_state().to_vec();
        }
        let k = self.times.partition_point(|&t| t <= s) - 1;
        let w = (s - self.times[k]) / (self.times[k + 1] - self.times[k]);
        self.state(k).iter().zip(self.state(k + 1)).map(|(a, b)| a + w * (b - a)).collect()
    }
}

/// Classical RK4 with fixed step `dt` on `[0, t_end]` (last step shortened).
pub fn integrate<O: GradientOracle + ?Sized>(oracle: &O, x0: &[f64], t_end: f64, dt: f64) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_end >= 0.0) || !dt.is_finite() || !t_end.is_finite() {
        return Err(FlowError::InvalidStep { dt, t_end });
    }
    let n = oracle.dim();
    if x0.len() != n {
        return Err(FlowError::DimensionMismatch { expected: n, got: x0.len() });
    }
    let bound = BLOWUP_FACTOR * (norm(x0) + 1.0);
    let steps = (t_end / dt).ceil() as usize;
    let mut traj = Trajectory {
        dim: n,
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity((steps + 1) * n),
        speeds: Vec::with_capacity(steps + 1),
    };
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let mut s = 0.0;
    let mut k = 0;
    loop {
        oracle.gradient(&x, &mut g);
        let speed = norm(&g);
        if !speed.is_finite() {
            return Err(FlowError::NonFinite { time: s });
        }
        traj.times.push(s);
        traj.states.extend_from_slice(&x);
        traj.speeds.push(speed);
        if k == steps || speed < STATIONARY_GRAD {
            break;
        }
        let h = if k + 1 == steps { t_end - s } else { dt };
        k1.copy_from_slice(&g);
        for (t, (xi, a)) in tmp.iter_mut().zip(x.iter().zip(&k1)) {
            *t = xi - 0.5 * h * a;
        }
        oracle.gradient(&tmp, &mut k2);
        for (t, (xi, a)) in tmp.iter_mut().zip(x.iter().zip(&k2)) {
            *t = xi - 0.5 * h * a;
        }
        oracle.gradient(&tmp, &mut k3);
        for (t, (xi, a)) in tmp.iter_mut().zip(x.iter().zip(&k3)) {
            *t = xi - h * a;
        }
        oracle.gradient(&tmp, &mut k4);
        for i in 0..n {
            x[i] -= h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        k += 1;
        s = if k == steps { t_end } else { k as f64 * dt };
        let r = norm(&x);
        if !(r <= bound) {
            return Err(FlowError::BlowUp { time: s, norm: r });
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundtripMetrics {
    /// `max_k ‖x(s_k) − γ̃(s_k)‖` over the reparameterized samples.
    pub sup_distance: f64,
    pub terminal_distance: f64,
    pub hausdorff: f64,
}

fn one_sided(a: &[f64], b: &[f64], dim: usize) -> f64 {
    let nb = b.len() / dim;
    let mins = par::map_range(a.len() / dim, |i| {
        let p = &a[i * dim..(i + 1) * dim];
        (0..nb).map(|j| dist(p, &b[j * dim..(j + 1) * dim])).fold(f64::INFINITY, f64::min)
    });
    mins.into_iter().fold(0.0, f64::max)
}

/// Distances between a flow trajectory and the reparameterized curve it should reproduce.
pub fn roundtrip_error(traj: &Trajectory, reparam: &ReparamCurve) -> RoundtripMetrics {
    let dists = par::map_range(reparam.len(), |k| dist(&traj.state_at(reparam.times[k]), reparam.point(k)));
    let sup_distance = dists.iter().copied().fold(0.0, f64::max);
    let terminal_distance = dists.last().copied().unwrap_or(0.0);
    let hausdorff = one_sided(&traj.states, &reparam.points, traj.dim).max(one_sided(&reparam.points, &traj.states, traj.dim));
    RoundtripMetrics { sup_distance, terminal_distance, hausdorff }
}

/// Arc-length curve through the orbit samples faster than [`TAIL_SPEED`].
pub fn orbit_curve(traj: &Trajectory, n_resample: usize) -> Result<crate::curve::Curve> {
    let cut = traj.speeds.iter().position(|&v| v < TAIL_SPEED).unwrap_or(traj.len());
    let mut raw: Vec<Vec<f64>> = Vec::with_capacity(cut);
    for k in 0..cut {
        let p = traj.state(k);
        if raw.last().map_or(true, |q| dist(q, p) > 0.0) {
            raw.push(p.to_vec());
        }
    }
    if raw.len() < 3 {
        return Err(FlowError::ShortOrbit { points: raw.len() });
    }
    Ok(from_samples(&raw, n_resample)?)
}

/// Integrates from `x0` with `dt = 1e-3·t_end` and checks the orbit pairwise.
pub fn check_flow_self_contracted<O: GradientOracle + ?Sized>(oracle: &O, x0: &[f64], t_end: f64) -> Result<ContractReport> {
    let traj = integrate(oracle, x0, t_end, 1e-3 * t_end)?;
    let curve = orbit_curve(&traj, ORBIT_RESAMPLE)?;
    Ok(check_uniform(&curve))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub values: Vec<f64>,
    /// `∫_{s_k}^{s_M} ‖x'‖²`.
    pub dissipated: Vec<f64>,
    pub max_residual: f64,
}

/// Checks `F(x(s_k)) − F(x(s_M)) = ∫_{s_k}^{s_M} ‖x'‖²` along the trajectory.
pub fn trace_energy<O: GradientOracle + ?Sized>(traj: &Trajectory, oracle: &O) -> Result<EnergyTrace> {
    let values = par::map_range(traj.len(), |k| oracle.value(traj.state(k)));
    let sq: Vec<f64> = traj.speeds.iter().map(|v| v * v).collect();
    let dissipated = tail_integrals(&traj.times, &sq);
    let last = *values.last().unwrap_or(&0.0);
    let max_residual = values
        .iter()
        .zip(&dissipated)
        .map(|(f, d)| (f - last - d).abs())
        .fold(0.0, f64::max);
    let tol = ENERGY_TOL * (values.first().map_or(0.0, |f0| (f0 - last).abs())).max(1.0);
    if !(max_residual <= tol) {
        return Err(FlowError::IdentityViolated { residual: max_residual, tol });
    }
    Ok(EnergyTrace { values, dissipated, max_residual })
}
