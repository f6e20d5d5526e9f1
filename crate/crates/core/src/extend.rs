//! Trace jets on the curve and their convex extension.
//!
//! `F₀(x) = max_i [f_i + ⟨G_i, x − x_i⟩]` is the lower envelope of supporting
//! hyperplanes; `F_ε = ε log Σ exp(piece_i/ε)` is its smooth upper companion
//! with `F₀ ≤ F_ε ≤ F₀ + ε log N`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::Curve;
use crate::linalg::{dist, dot, dot_diff};
use crate::par;
use crate::repar::ReparamPlan;

/// Relative tolerance for (C).
pub const C_TOL: f64 = 1e-10;
pub const DEFAULT_CW1_TOL: f64 = 1e-9;
/// Default smoothing relative to the jet value range.
pub const DEFAULT_EPS_FRACTION: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum ExtendError {
    #[error("condition (C) fails at pair ({i}, {j}): value {value:.3e} below {threshold:.3e}")]
    ConditionCFailed { i: usize, j: usize, value: f64, threshold: f64 },
    #[error("smoothing must be finite and ≥ 0, got {0}")]
    InvalidEps(f64),
    #[error("jet is empty")]
    EmptyJet,
    #[error("inconsistent jet: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetData {
    pub dim: usize,
    pub params: Vec<f64>,
    /// Flat `n × dim`.
    pub anchors: Vec<f64>,
    pub values: Vec<f64>,
    /// Flat `n × dim`.
    pub gradients: Vec<f64>,
}

impl JetData {
    pub fn new(dim: usize, params: Vec<f64>, anchors: Vec<f64>, values: Vec<f64>, gradients: Vec<f64>) -> Result<Self, ExtendError> {
        let n = values.len();
        if n == 0 {
            return Err(ExtendError::EmptyJet);
        }
        if dim == 0 || anchors.len() != n * dim || gradients.len() != n * dim || params.len() != n {
            return Err(ExtendError::Inconsistent(format!(
                "{n} values, {} params, {} anchor and {} gradient coordinates for dim {dim}",
                params.len(),
                anchors.len(),
                gradients.len()
            )));
        }
        Ok(Self { dim, params, anchors, values, gradients })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn anchor(&self, i: usize) -> &[f64] {
        &self.anchors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn gradient(&self, i: usize) -> &[f64] {
        &self.gradients[i * self.dim..(i + 1) * self.dim]
    }

    pub fn gradient_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.gradients[i * self.dim..(i + 1) * self.dim]
    }

    /// `max |f_i|`, floored at the smallest positive normal.
    pub fn scale(&self) -> f64 {
        self.values.iter().fold(f64::MIN_POSITIVE, |a, v| a.max(v.abs()))
    }

    pub fn value_range(&self) -> f64 {
        let (lo, hi) = self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        hi - lo
    }

    /// `f_i − f_j − ⟨G_j, x_i − x_j⟩`.
    pub fn c_gap(&self, i: usize, j: usize) -> f64 {
        self.values[i] - self.values[j] - dot_diff(self.gradient(j), self.anchor(i), self.anchor(j))
    }
}

/// `f_i = ∫_{t_i}^L 1/m`, `G_i = −γ'(t_i)/m(t_i)`.
pub fn curve_jet(curve: &Curve, plan: &ReparamPlan) -> JetData {
    let n = curve.len();
    let l = curve.length();
    let rows = par::map_range(n, |i| {
        let t = curve.param(i);
        let value = if i + 1 == n { 0.0 } else { plan.inv_m_integral(t, l) };
        let w = plan.inv_m(t);
        let g: Vec<f64> = curve.tangent(i).iter().map(|x| -x * w).collect();
        (value, g)
    });
    let mut values = Vec::with_capacity(n);
    let mut gradients = Vec::with_capacity(n * curve.dim());
    for (v, g) in rows {
        values.push(v);
        gradients.extend(g);
    }
    JetData {
        dim: curve.dim(),
        params: curve.params().to_vec(),
        anchors: curve.points_flat().to_vec(),
        values,
        gradients,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CWitness {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// Minimum of the (C) gap over one family of ordered pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CStep {
    pub passed: bool,
    pub pairs: usize,
    pub min_value: f64,
    pub witness: Option<CWitness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CReport {
    pub passed: bool,
    pub scale: f64,
    pub threshold: f64,
    /// Pairs with `i < j` (the gradient point comes later on the curve).
    pub step1: CStep,
    /// Pairs with `i > j`.
    pub step2: CStep,
}

impl CReport {
    pub fn worst(&self) -> Option<CWitness> {
        match (self.step1.witness, self.step2.witness) {
            (Some(a), Some(b)) => Some(if b.value < a.value { b } else { a }),
            (a, b) => a.or(b),
        }
    }
}

fn c_step(jet: &JetData, threshold: f64, later: bool) -> CStep {
    let n = jet.len();
    let rows = par::map_range(n, |i| {
        let range = if later { i + 1..n } else { 0..i };
        range
            .map(|j| CWitness { i, j, value: jet.c_gap(i, j) })
            .fold(None, |w: Option<CWitness>, c| match w {
                Some(w) if w.value <= c.value => Some(w),
                _ => Some(c),
            })
    });
    let witness = rows.into_iter().flatten().fold(None, |w: Option<CWitness>, c| match w {
        Some(w) if w.value <= c.value => Some(w),
        _ => Some(c),
    });
    let min_value = witness.map_or(f64::INFINITY, |w| w.value);
    CStep { passed: min_value >= threshold, pairs: n * n.saturating_sub(1) / 2, min_value, witness }
}

/// Condition (C) on all ordered pairs; passes iff every gap is ≥ `−1e-10·max|f|`.
pub fn check_c(jet: &JetData) -> CReport {
    let scale = jet.scale();
    let threshold = -C_TOL * scale;
    let step1 = c_step(jet, threshold, true);
    let step2 = c_step(jet, threshold, false);
    CReport { passed: step1.passed && step2.passed, scale, threshold, step1, step2 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cw1Witness {
    pub i: usize,
    pub j: usize,
    pub gap: f64,
    pub gradient_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cw1Report {
    pub passed: bool,
    pub tol: f64,
    /// Off-diagonal pairs where (C) holds with equality.
    pub equality_pairs: usize,
    pub violations: usize,
    pub witness: Option<Cw1Witness>,
}

/// Condition (CW1): equality in (C) forces equal gradients.
pub fn check_cw1(jet: &JetData, tol: f64) -> Cw1Report {
    let n = jet.len();
    let band = tol * jet.scale();
    let rows = par::map_range(n, |i| {
        let mut equal = 0usize;
        let mut bad: Vec<Cw1Witness> = Vec::new();
        for j in (0..n).filter(|&j| j != i) {
            let gap = jet.c_gap(i, j);
            if gap.abs() <= band {
                equal += 1;
                let gd = dist(jet.gradient(i), jet.gradient(j));
                if gd > tol {
                    bad.push(Cw1Witness { i, j, gap, gradient_distance: gd });
                }
            }
        }
        (equal, bad)
    });
    let mut equality_pairs = 0;
    let mut violations = 0;
    let mut witness: Option<Cw1Witness> = None;
    for (e, bad) in rows {
        equality_pairs += e;
        violations += bad.len();
        for w in bad {
            if witness.as_ref().map_or(true, |c| w.gradient_distance > c.gradient_distance) {
                witness = Some(w);
            }
        }
    }
    Cw1Report { passed: violations == 0, tol, equality_pairs, violations, witness }
}

/// `1e-3 ×` the value range of the jet.
pub fn default_eps(jet: &JetData) -> f64 {
    DEFAULT_EPS_FRACTION * jet.value_range()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ExtensionRepr {
    dim: usize,
    anchors: Vec<f64>,
    values: Vec<f64>,
    gradients: Vec<f64>,
    eps: f64,
}

/// Max-affine convex function, optionally log-sum-exp smoothed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ExtensionRepr", into = "ExtensionRepr")]
pub struct ConvexExtension {
    dim: usize,
    anchors: Vec<f64>,
    values: Vec<f64>,
    gradients: Vec<f64>,
    eps: f64,
    /// `f_i − ⟨G_i, x_i⟩`
    offsets: Vec<f64>,
}

impl TryFrom<ExtensionRepr> for ConvexExtension {
    type Error = ExtendError;
    fn try_from(r: ExtensionRepr) -> Result<Self, ExtendError> {
        let n = r.values.len();
        let jet = JetData::new(r.dim, vec![0.0; n], r.anchors, r.values, r.gradients)?;
        ConvexExtension::from_jet_unchecked(&jet, r.eps)
    }
}

impl From<ConvexExtension> for ExtensionRepr {
    fn from(e: ConvexExtension) -> Self {
        ExtensionRepr { dim: e.dim, anchors: e.anchors, values: e.values, gradients: e.gradients, eps: e.eps }
    }
}

/// Builds `F_ε` after confirming (C).
pub fn build_extension(jet: &JetData, eps: f64) -> Result<ConvexExtension, ExtendError> {
    let report = check_c(jet);
    if !report.passed {
        let w = report.worst().expect("a failing report has a witness");
        return Err(ExtendError::ConditionCFailed { i: w.i, j: w.j, value: w.value, threshold: report.threshold });
    }
    ConvexExtension::from_jet_unchecked(jet, eps)
}

impl ConvexExtension {
    /// Skips the (C) check; the result is convex regardless.
    pub fn from_jet_unchecked(jet: &JetData, eps: f64) -> Result<Self, ExtendError> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(ExtendError::InvalidEps(eps));
        }
        if jet.is_empty() {
            return Err(ExtendError::EmptyJet);
        }
        let offsets = (0..jet.len()).map(|i| jet.values[i] - dot(jet.gradient(i), jet.anchor(i))).collect();
        Ok(Self {
            dim: jet.dim,
            anchors: jet.anchors.clone(),
            values: jet.values.clone(),
            gradients: jet.gradients.clone(),
            eps,
            offsets,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self, ExtendError> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(ExtendError::InvalidEps(eps));
        }
        Ok(Self { eps, ..self.clone() })
    }

    pub fn anchor(&self, i: usize) -> &[f64] {
        &self.anchors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn value_at_anchor(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn gradient_at_anchor(&self, i: usize) -> &[f64] {
        &self.gradients[i * self.dim..(i + 1) * self.dim]
    }

    /// `f_i + ⟨G_i, x − x_i⟩`.
    pub fn piece(&self, i: usize, x: &[f64]) -> f64 {
        self.offsets[i] + dot(self.gradient_at_anchor(i), x)
    }

    fn pieces(&self, x: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|i| self.piece(i, x)).collect()
    }

    /// Index of the largest piece, lowest index on ties.
    pub fn argmax(&self, x: &[f64]) -> usize {
        let p = self.pieces(x);
        argmax_first(&p)
    }

    /// The unsmoothed envelope `F₀`.
    pub fn eval_max(&self, x: &[f64]) -> f64 {
        self.pieces(x).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn eval_f(&self, x: &[f64]) -> f64 {
        self.eval(x, None)
    }

    pub fn eval_grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        self.eval(x, Some(&mut g));
        g
    }

    /// Value, and gradient into `grad` when given.
    pub fn eval(&self, x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let p = self.pieces(x);
        let k = argmax_first(&p);
        let top = p[k];
        if self.eps == 0.0 {
            if let Some(g) = grad {
                g.copy_from_slice(self.gradient_at_anchor(k));
            }
            return top;
        }
        let w: Vec<f64> = p.iter().map(|&v| ((v - top) / self.eps).exp()).collect();
        let total: f64 = w.iter().sum();
        if let Some(g) = grad {
            g.iter_mut().for_each(|v| *v = 0.0);
            for (i, wi) in w.iter().enumerate() {
                if *wi > 0.0 {
                    for (gv, gi) in g.iter_mut().zip(self.gradient_at_anchor(i)) {
                        *gv += wi * gi;
                    }
                }
            }
            g.iter_mut().for_each(|v| *v /= total);
        }
        top + self.eps * total.ln()
    }
}

fn argmax_first(p: &[f64]) -> usize {
    let mut k = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[k] {
            k = i;
        }
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contract::estimate_c0;
    use crate::curve::{from_samples, holder_seminorm_with, make_circle_arc, make_segment};
    use crate::linalg::norm;
    use crate::repar::{exponential_plan, verify_m};
    use rand::{Rng as _, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn segment_jet(n: usize) -> (Curve, JetData) {
        let seg = make_segment(&[0.0, 0.0], &[1.0, 0.0], n).unwrap();
        let plan = ReparamPlan::exponential_with_rate(1.0, 1.0).unwrap();
        let jet = curve_jet(&seg, &plan);
        (seg, jet)
    }

    fn quarter_jet() -> JetData {
        let q = make_circle_arc(FRAC_PI_2, 200).unwrap();
        let reg = holder_seminorm_with(&q, 1.0, 1.25).unwrap();
        let plan = exponential_plan(&q, &reg, estimate_c0(&q).unwrap()).unwrap();
        assert!(verify_m(&q, &plan).holds);
        curve_jet(&q, &plan)
    }

    #[test]
    fn segment_jet_closed_form() {
        let (seg, jet) = segment_jet(200);
        let e1 = (-1f64).exp();
        for i in 0..jet.len() {
            let t = seg.param(i);
            assert!((jet.values[i] - ((-t).exp() - e1)).abs() < 1e-14);
            assert!((jet.gradient(i)[0] + (-t).exp()).abs() < 1e-14);
            assert_eq!(jet.gradient(i)[1], 0.0);
        }
        assert_eq!(*jet.values.last().unwrap(), 0.0);
        assert!((norm(jet.gradient(0)) - 1.0).abs() < 1e-15);
        assert!(jet.values.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn segment_c_and_cw1() {
        let (_, jet) = segment_jet(200);
        let r = check_c(&jet);
        assert!(r.passed, "{r:?}");
        // the step-2 pair (x = γ(1), y = γ(0))
        let gap = jet.c_gap(jet.len() - 1, 0);
        assert!((gap - (-(1.0 - (-1f64).exp()) + 1.0)).abs() < 1e-14);
        let w = check_cw1(&jet, DEFAULT_CW1_TOL);
        assert!(w.passed);
        assert_eq!(w.equality_pairs, 0);
    }

    #[test]
    fn corrupted_gradient_fails() {
        let (_, mut jet) = segment_jet(50);
        jet.gradient_mut(0).iter_mut().for_each(|g| *g *= -10.0);
        let r = check_c(&jet);
        assert!(!r.passed);
        assert_eq!(r.worst().unwrap().j, 0);
        assert!(matches!(build_extension(&jet, 0.0), Err(ExtendError::ConditionCFailed { .. })));
    }

    #[test]
    fn duplicated_anchor_fails_cw1() {
        let jet = JetData::new(1, vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, -1.0]).unwrap();
        let r = check_cw1(&jet, 1e-9);
        assert!(!r.passed);
        assert_eq!(r.violations, 2);
        let single = JetData::new(1, vec![0.0], vec![0.0], vec![1.0], vec![1.0]).unwrap();
        assert!(check_cw1(&single, 1e-9).passed);
    }

    #[test]
    fn quarter_circle_hypotheses() {
        let jet = quarter_jet();
        assert!(check_c(&jet).passed);
        let w = check_cw1(&jet, DEFAULT_CW1_TOL);
        assert!(w.passed && w.equality_pairs == 0, "{w:?}");
    }

    #[test]
    fn envelope_interpolates_and_matches_segment_profile() {
        let (_, jet) = segment_jet(200);
        let ext = build_extension(&jet, 0.0).unwrap();
        for j in 0..jet.len() {
            assert!((ext.eval_f(jet.anchor(j)) - jet.values[j]).abs() < 1e-12);
            assert_eq!(ext.argmax(jet.anchor(j)), j);
        }
        let h = 1.0 / 199.0;
        for k in 0..=1000 {
            let u = k as f64 / 1000.0;
            let exact = (-u).exp() - (-1f64).exp();
            let v = ext.eval_f(&[u, 0.0]);
            assert!(v <= exact + 1e-14);
            assert!(exact - v <= h * h);
        }
    }

    #[test]
    fn sandwich_and_gradient_limit() {
        let jet = quarter_jet();
        let ext0 = build_extension(&jet, 0.0).unwrap();
        let eps = 1e-3;
        let ext = ext0.with_eps(eps).unwrap();
        let bound = eps * (jet.len() as f64).ln();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let x = [rng.gen_range(-1.0..2.0), rng.gen_range(-1.0..2.0)];
            let (f0, fe) = (ext0.eval_f(&x), ext.eval_f(&x));
            assert!(f0 <= fe + 1e-15 && fe <= f0 + bound + 1e-15);
        }
        let j = 77;
        let target = jet.gradient(j);
        let errs: Vec<f64> = [1e-2, 1e-4, 1e-6]
            .iter()
            .map(|&eps| dist(&ext0.with_eps(eps).unwrap().eval_grad(jet.anchor(j)), target))
            .collect();
        assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
        assert!(errs[2] < 1e-2 * errs[0], "{errs:?}");
    }

    #[test]
    fn finite_differences_match_gradient() {
        let jet = quarter_jet();
        let ext = build_extension(&jet, 1e-3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = 1e-6;
        for _ in 0..100 {
            let x = [rng.gen_range(-0.5..1.5), rng.gen_range(-0.5..1.5)];
            let g = ext.eval_grad(&x);
            for d in 0..2 {
                let (mut a, mut b) = (x, x);
                a[d] += h;
                b[d] -= h;
                let fd = (ext.eval_f(&a) - ext.eval_f(&b)) / (2.0 * h);
                assert!((fd - g[d]).abs() <= 1e-5);
            }
        }
    }

    #[test]
    fn single_piece_is_affine() {
        let jet = JetData::new(2, vec![0.0], vec![1.0, 2.0], vec![3.0], vec![0.5, -1.0]).unwrap();
        let ext = build_extension(&jet, 1e-2).unwrap();
        for x in [[0.0, 0.0], [5.0, -3.0]] {
            assert_eq!(ext.eval_grad(&x), vec![0.5, -1.0]);
            assert!((ext.eval_f(&x) - (3.0 + 0.5 * (x[0] - 1.0) - (x[1] - 2.0))).abs() < 1e-14);
        }
    }

    #[test]
    fn json_roundtrip() {
        let (_, jet) = segment_jet(20);
        let ext = build_extension(&jet, 1e-3).unwrap();
        let s = serde_json::to_string(&ext).unwrap();
        let back: ConvexExtension = serde_json::from_str(&s).unwrap();
        assert_eq!(back.eval_f(&[0.3, 0.1]), ext.eval_f(&[0.3, 0.1]));
        assert!(s.contains("\"eps\""));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn random_curve(seed: u64) -> Curve {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p = vec![0.0, 0.0];
            let mut heading: f64 = rng.gen_range(0.0..6.3);
            let mut raw = vec![p.clone()];
            for _ in 0..12 {
                heading += rng.gen_range(-1.2..1.2);
                let step = rng.gen_range(0.2..1.0);
                p = vec![p[0] + step * heading.cos(), p[1] + step * heading.sin()];
                raw.push(p.clone());
            }
            from_samples(&raw, 120).unwrap()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(40))]

            #[test]
            fn step1_is_unconditional(seed in 0u64..10_000, pick in 0usize..3) {
                let b = [0.5, 1.0, 5.0][pick];
                let curve = random_curve(seed);
                let plan = ReparamPlan::exponential_with_rate(b, curve.length()).unwrap();
                let jet = curve_jet(&curve, &plan);
                let r = check_c(&jet);
                prop_assert!(r.step1.passed, "{:?}", r.step1);
            }

            #[test]
            fn smoothed_extension_is_convex(x in prop::array::uniform2(-1.0f64..2.0), y in prop::array::uniform2(-1.0f64..2.0), th in 0.0f64..1.0, eps in prop::sample::select(vec![0.0, 1e-4, 1e-2])) {
                let (_, jet) = segment_jet(60);
                let ext = build_extension(&jet, eps).unwrap();
                let z = [th * x[0] + (1.0 - th) * y[0], th * x[1] + (1.0 - th) * y[1]];
                prop_assert!(ext.eval_f(&z) <= th * ext.eval_f(&x) + (1.0 - th) * ext.eval_f(&y) + 1e-12);
            }

            #[test]
            fn anchors_support_the_envelope(x in prop::array::uniform2(-1.0f64..2.0), j in 0usize..60) {
                let (_, jet) = segment_jet(60);
                let ext = build_extension(&jet, 0.0).unwrap();
                prop_assert!(ext.eval_f(&x) >= ext.piece(j, &x));
            }
        }
    }
}
