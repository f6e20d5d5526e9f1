//! Self-contractedness hierarchy of a curve.
//!
//! Levels are decided from the pairwise differential form
//! `⟨γ'(t), γ(s) − γ(t)⟩` over all grid pairs; the metric triple inequality
//! `‖γ(t₂)−γ(t₃)‖ ≤ ‖γ(t₁)−γ(t₃)‖` runs on a random subsample as a cross-check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{Curve, RegularityEstimate};
use crate::linalg::{dist, dot_diff};
use crate::par;

/// Scaled strictness tolerance: a pair counts as strictly positive when its
/// normalised inner product exceeds this.
pub const STRICT_TOL: f64 = 1e-9;
/// Deflation applied to the grid minimum when reporting c₀.
pub const C0_DEFLATION: f64 = 0.9;
pub const DEFAULT_TRIPLES: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContractError {
    #[error("curve is not self-contracted: inner product {value:e} at (t, s) = ({t}, {s})")]
    NotStronglyContracted { t: f64, s: f64, value: f64 },
    #[error("Taylor bound violated at (t, s) = ({t}, {s}): {lhs} < {rhs}; increase the safety factor")]
    BoundViolated { t: f64, s: f64, lhs: f64, rhs: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContractLevel {
    NotSelfContracted,
    SelfContracted,
    Strongly,
    UniformlyStrongly,
}

impl ContractLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            ContractLevel::NotSelfContracted => "not_self_contracted",
            ContractLevel::SelfContracted => "self_contracted",
            ContractLevel::Strongly => "strongly",
            ContractLevel::UniformlyStrongly => "uniformly_strongly",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairWitness {
    pub t: f64,
    pub s: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripleWitness {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractReport {
    pub level: ContractLevel,
    pub c0: f64,
    pub worst_pair: Option<PairWitness>,
    pub worst_triple: Option<TripleWitness>,
    pub tol: f64,
}

impl ContractReport {
    pub fn meets(&self, level: ContractLevel) -> bool {
        self.level >= level
    }
}

/// Minimum over `j > i` of `⟨γ'(t_i), (γ(t_j) − γ(t_i)) / (t_j − t_i)⟩`, per row `i`.
fn row_minima(curve: &Curve) -> Vec<PairWitness> {
    let n = curve.len();
    par::map_range(n.saturating_sub(1), |i| {
        let (ti, pi, gi) = (curve.param(i), curve.point(i), curve.tangent(i));
        let mut best = PairWitness { t: ti, s: f64::NAN, value: f64::INFINITY };
        for j in i + 1..n {
            let tj = curve.param(j);
            let v = dot_diff(gi, curve.point(j), pi) / (tj - ti);
            if v < best.value {
                best = PairWitness { t: ti, s: tj, value: v };
            }
        }
        best
    })
}

/// Worst normalised pair value over the whole grid.
pub fn worst_pair(curve: &Curve) -> Option<PairWitness> {
    let rows = row_minima(curve);
    par::argmin_by_key(&rows, |w| w.value).map(|k| rows[k])
}

/// Pairwise check: strongly iff every normalised pair value exceeds
/// [`STRICT_TOL`]; self-contracted iff none is below `−STRICT_TOL`.
pub fn check_strong(curve: &Curve) -> ContractReport {
    let worst = worst_pair(curve);
    let level = match worst {
        None => ContractLevel::Strongly,
        Some(w) if w.value > STRICT_TOL => ContractLevel::Strongly,
        Some(w) if w.value >= -STRICT_TOL => ContractLevel::SelfContracted,
        Some(_) => ContractLevel::NotSelfContracted,
    };
    ContractReport { level, c0: 0.0, worst_pair: worst, worst_triple: None, tol: STRICT_TOL }
}

/// c₀ = 0.9 × grid minimum of the normalised pair value.
///
/// Returns 0 for curves that are self-contracted but not strongly so (the
/// minimum touches 0), and an error when the curve is not self-contracted.
pub fn estimate_c0(curve: &Curve) -> Result<f64, ContractError> {
    estimate_c0_with(curve, C0_DEFLATION)
}

pub fn estimate_c0_with(curve: &Curve, deflation: f64) -> Result<f64, ContractError> {
    let report = check_strong(curve);
    c0_from_report(&report, deflation)
}

fn c0_from_report(report: &ContractReport, deflation: f64) -> Result<f64, ContractError> {
    match (report.level, report.worst_pair) {
        (ContractLevel::NotSelfContracted, Some(w)) => {
            Err(ContractError::NotStronglyContracted { t: w.t, s: w.s, value: w.value })
        }
        (ContractLevel::Strongly, Some(w)) => Ok(deflation * w.value),
        _ => Ok(0.0),
    }
}

/// [`check_strong`] upgraded to `uniformly_strongly` with c₀ filled in when
/// the grid minimum is positive.
pub fn check_uniform(curve: &Curve) -> ContractReport {
    let mut report = check_strong(curve);
    if report.level == ContractLevel::Strongly {
        if let Ok(c0) = c0_from_report(&report, C0_DEFLATION) {
            if c0 > 0.0 {
                report.level = ContractLevel::UniformlyStrongly;
                report.c0 = c0;
            }
        }
    }
    report
}

/// Metric triple check on all consecutive triples plus `n_triples` random
/// index triples `i < j < k`, stratified on `i`.
pub fn check_self_contracted_metric(curve: &Curve, n_triples: usize, seed: u64) -> ContractReport {
    let n = curve.len();
    let tol = 1e-9 * curve.length();
    if n < 3 {
        return ContractReport {
            level: ContractLevel::SelfContracted,
            c0: 0.0,
            worst_pair: None,
            worst_triple: None,
            tol,
        };
    }
    let mut triples: Vec<(usize, usize, usize)> = (0..n - 2).map(|i| (i, i + 1, i + 2)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let firsts = n - 2;
    for q in 0..n_triples {
        let lo = q * firsts / n_triples.max(1);
        let hi = ((q + 1) * firsts / n_triples.max(1)).max(lo + 1).min(firsts);
        let i = rng.gen_range(lo..hi);
        let j = rng.gen_range(i + 1..n - 1);
        let k = rng.gen_range(j + 1..n);
        triples.push((i, j, k));
    }
    let slacks = par::map_range(triples.len(), |q| {
        let (i, j, k) = triples[q];
        let p3 = curve.point(k);
        dist(curve.point(i), p3) - dist(curve.point(j), p3)
    });
    let worst = par::argmin_by_key(&slacks, |s| *s).map(|q| {
        let (i, j, k) = triples[q];
        TripleWitness { t1: curve.param(i), t2: curve.param(j), t3: curve.param(k), slack: slacks[q] }
    });
    let level = match worst {
        Some(w) if w.slack < -tol => ContractLevel::NotSelfContracted,
        _ => ContractLevel::SelfContracted,
    };
    ContractReport { level, c0: 0.0, worst_pair: None, worst_triple: worst, tol }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaylorSlack {
    /// Constant used in the lower bound.
    pub constant: f64,
    pub exponent: f64,
    pub t: f64,
    pub s: f64,
    /// ⟨γ'(t), γ(s) − γ(t)⟩
    pub lhs: f64,
    /// (s − t) − C (s − t)^exponent
    pub rhs: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaylorReport {
    pub holder: TaylorSlack,
    pub cubic: Option<TaylorSlack>,
}

fn taylor_worst(curve: &Curve, constant: f64, exponent: f64) -> TaylorSlack {
    let n = curve.len();
    let rows = par::map_range(n.saturating_sub(1), |i| {
        let (ti, pi, gi) = (curve.param(i), curve.point(i), curve.tangent(i));
        let mut best: Option<TaylorSlack> = None;
        for j in i + 1..n {
            let h = curve.param(j) - ti;
            let lhs = dot_diff(gi, curve.point(j), pi);
            let rhs = h - constant * h.powf(exponent);
            // rounding allowance relative to the gap
            let slack = lhs - rhs + 1e-12 + 1e-10 * h;
            if best.map_or(true, |b| slack < b.slack) {
                best = Some(TaylorSlack { constant, exponent, t: ti, s: ti + h, lhs, rhs, slack });
            }
        }
        best.unwrap()
    });
    let k = par::argmin_by_key(&rows, |r| r.slack).unwrap();
    rows[k]
}

/// Verifies `⟨γ'(t), γ(s)−γ(t)⟩ ≥ (s−t) − C(s−t)^{2α+1}` on all grid pairs
/// with `C = reg.c1`, and the cubic variant with `C₁ = sup‖γ'''‖/6` when a
/// third-derivative bound is present.
pub fn check_taylor_bound(curve: &Curve, reg: &RegularityEstimate) -> Result<TaylorReport, ContractError> {
    if curve.len() < 2 {
        return Err(ContractError::BoundViolated { t: 0.0, s: 0.0, lhs: 0.0, rhs: 0.0 });
    }
    let holder = taylor_worst(curve, reg.c1, 2.0 * reg.alpha + 1.0);
    let cubic = reg.cubic_constant().map(|c| taylor_worst(curve, c, 3.0));
    for w in std::iter::once(&holder).chain(cubic.as_ref()) {
        if w.slack < 0.0 {
            return Err(ContractError::BoundViolated { t: w.t, s: w.s, lhs: w.lhs, rhs: w.rhs });
        }
    }
    Ok(TaylorReport { holder, cubic })
}
