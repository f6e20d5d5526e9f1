//! Adaptive Simpson quadrature and monotone inversion.

use thiserror::Error;

const MAX_DEPTH: u32 = 48;
const INITIAL_PANELS: usize = 4;
// below this relative size a panel error is rounding noise
const ROUNDING_FLOOR: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("integral does not converge towards the endpoint (last increment ratio {ratio:.3})")]
    Divergent { ratio: f64 },
    #[error("integrand is not finite at t = {at}")]
    NonFinite { at: f64 },
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    /// False when some panel hit the depth limit before meeting its tolerance.
    pub converged: bool,
}

struct Panel {
    a: f64,
    m: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

fn refine<F: Fn(f64) -> f64>(f: &F, p: Panel, tol: f64, depth: u32, ok: &mut bool) -> f64 {
    let Panel { a, m, b, fa, fm, fb, whole } = p;
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let h = b - a;
    let left = h * (fa + 4.0 * flm + fm) / 12.0;
    let right = h * (fm + 4.0 * frm + fb) / 12.0;
    let both = left + right;
    let err = both - whole;
    if err.abs() <= 15.0 * tol.max(ROUNDING_FLOOR * both.abs()) || !err.is_finite() {
        return both + err / 15.0;
    }
    if depth == 0 || m <= a || b <= m {
        *ok = false;
        return both + err / 15.0;
    }
    let l = Panel { a, m: lm, b: m, fa, fm: flm, fb: fm, whole: left };
    let r = Panel { a: m, m: rm, b, fa: fm, fm: frm, fb, whole: right };
    refine(f, l, 0.5 * tol, depth - 1, ok) + refine(f, r, 0.5 * tol, depth - 1, ok)
}

/// Adaptive Simpson on `[a, b]` with absolute tolerance `tol`.
pub fn simpson_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Integral {
    if a == b {
        return Integral { value: 0.0, converged: true };
    }
    if b < a {
        let r = simpson_adaptive(f, b, a, tol);
        return Integral { value: -r.value, converged: r.converged };
    }
    let mut ok = true;
    let w = (b - a) / INITIAL_PANELS as f64;
    let panel_tol = tol / INITIAL_PANELS as f64;
    let mut total = 0.0;
    let mut fa = f(a);
    for k in 0..INITIAL_PANELS {
        let pa = a + w * k as f64;
        let pb = if k + 1 == INITIAL_PANELS { b } else { a + w * (k + 1) as f64 };
        let pm = 0.5 * (pa + pb);
        let (fm, fb) = (f(pm), f(pb));
        let whole = (pb - pa) * (fa + 4.0 * fm + fb) / 6.0;
        let p = Panel { a: pa, m: pm, b: pb, fa, fm, fb, whole };
        total += refine(&f, p, panel_tol, MAX_DEPTH, &mut ok);
        fa = fb;
    }
    Integral { value: total, converged: ok }
}

/// Shorthand for [`simpson_adaptive`] when only the value matters.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    simpson_adaptive(f, a, b, tol).value
}

/// Integrates `f` over `[a, b)` where `f` may blow up (integrably) at `b`.
///
/// The integral is accumulated over `[a, b − (b−a)·4^{-k}]` for growing `k`;
/// the increments of an integrable singularity shrink geometrically and the
/// remaining tail is extrapolated from their ratio. Increments that fail to
/// shrink are reported as [`QuadError::Divergent`].
pub fn integrate_to_endpoint<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64, QuadError> {
    if b <= a {
        return Ok(0.0);
    }
    let width = b - a;
    let mut lo = a;
    let mut total = 0.0;
    let mut prev_inc: Option<f64> = None;
    let mut ratio = 0.0;
    for k in 1..=24 {
        let hi = b - width * 0.25f64.powi(k);
        if hi <= lo {
            break;
        }
        let inc = simpson(&f, lo, hi, tol);
        if !inc.is_finite() {
            return Err(QuadError::NonFinite { at: hi });
        }
        total += inc;
        lo = hi;
        if let Some(p) = prev_inc {
            ratio = if p.abs() > 0.0 { (inc / p).abs() } else if inc == 0.0 { 0.0 } else { f64::INFINITY };
            if inc.abs() <= tol {
                return Ok(total);
            }
            if k >= 6 && ratio > 0.9 {
                return Err(QuadError::Divergent { ratio });
            }
        }
        prev_inc = Some(inc);
    }
    let last = prev_inc.unwrap_or(0.0);
    if ratio >= 0.9 {
        return Err(QuadError::Divergent { ratio });
    }
    Ok(total + last * ratio / (1.0 - ratio))
}

/// Solves `f(x) = target` for nondecreasing `f` on the bracket `[lo, hi]`.
///
/// Bisection keeps the bracket; a Newton step with derivative `df` is taken
/// whenever it lands strictly inside the current bracket.
pub fn invert_monotone<F, D>(f: F, df: D, target: f64, mut lo: f64, mut hi: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x) - target;
        if fx == 0.0 {
            return x;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= tol {
            return 0.5 * (lo + hi);
        }
        let d = df(x);
        let newton = x - fx / d;
        let step_ok = d.is_finite() && d > 0.0 && newton > lo && newton < hi;
        let next = if step_ok { newton } else { 0.5 * (lo + hi) };
        if step_ok && (next - x).abs() <= 0.5 * tol {
            return next;
        }
        x = next;
    }
    x
}

/// Integral over `[x[i], x[i+1]]` of the cubic through the (up to) four
/// nearest nodes. Two-point Gauss–Legendre is exact for cubics.
fn interval_cubic(x: &[f64], y: &[f64], i: usize) -> f64 {
    let n = x.len();
    let (a, b) = (x[i], x[i + 1]);
    if n < 3 {
        return 0.5 * (b - a) * (y[i] + y[i + 1]);
    }
    let width = n.min(4);
    let start = i.saturating_sub(1).min(n - width);
    let nodes = &x[start..start + width];
    let vals = &y[start..start + width];
    let lagrange = |t: f64| {
        let mut s = 0.0;
        for (k, (&xk, &yk)) in nodes.iter().zip(vals).enumerate() {
            let mut w = 1.0;
            for (l, &xl) in nodes.iter().enumerate() {
                if l != k {
                    w *= (t - xl) / (xk - xl);
                }
            }
            s += w * yk;
        }
        s
    };
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a) / 3f64.sqrt();
    0.5 * (b - a) * (lagrange(c - r) + lagrange(c + r))
}

/// `out[k] = ∫_{x[k]}^{x[last]} y`, from piecewise-cubic interpolation of the
/// samples (fourth order on smooth data, nonuniform nodes allowed).
pub fn tail_integrals(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    for i in (0..n.saturating_sub(1)).rev() {
        out[i] = out[i + 1] + interval_cubic(x, y, i);
    }
    out
}
