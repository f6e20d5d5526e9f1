//! Piecewise-cubic interpolants of vector-valued data.

/// Cubic spline through `(knots[k], values[k])`, one per coordinate.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    dim: usize,
    knots: Vec<f64>,
    values: Vec<f64>,
    // second derivatives at knots, flat like `values`
    moments: Vec<f64>,
}

impl CubicSpline {
    /// `values` is row-major with `dim` entries per knot; needs ≥ 2 knots,
    /// strictly increasing.
    pub fn natural(knots: Vec<f64>, values: Vec<f64>, dim: usize) -> Self {
        Self::build(knots, values, dim, false)
    }

    /// Not-a-knot end conditions: the third derivative is continuous across
    /// the second and second-to-last knots. Reproduces cubic data exactly.
    pub fn not_a_knot(knots: Vec<f64>, values: Vec<f64>, dim: usize) -> Self {
        Self::build(knots, values, dim, true)
    }

    fn build(knots: Vec<f64>, values: Vec<f64>, dim: usize, not_a_knot: bool) -> Self {
        let n = knots.len();
        debug_assert_eq!(values.len(), n * dim);
        let mut moments = vec![0.0; n * dim];
        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let slope = |k: usize, d: usize| (values[(k + 1) * dim + d] - values[k * dim + d]) / h[k];
        if n == 3 && not_a_knot {
            // single parabola
            for d in 0..dim {
                let c = 2.0 * (slope(1, d) - slope(0, d)) / (h[0] + h[1]);
                for k in 0..3 {
                    moments[k * dim + d] = c;
                }
            }
        } else if n > 2 {
            // Tridiagonal system for interior moments.
            let m = n - 2;
            let mut diag = vec![0.0; m];
            let mut upper = vec![0.0; m];
            let mut lower = vec![0.0; m];
            for i in 0..m {
                diag[i] = 2.0 * (h[i] + h[i + 1]);
                upper[i] = h[i + 1];
                lower[i] = h[i];
            }
            if not_a_knot {
                let (h0, h1) = (h[0], h[1]);
                diag[0] += h0 * (h0 + h1) / h1;
                upper[0] -= h0 * h0 / h1;
                let (ha, hb) = (h[n - 3], h[n - 2]);
                diag[m - 1] += hb * (ha + hb) / ha;
                lower[m - 1] -= hb * hb / ha;
            }
            let tri = Thomas::factor(&diag, &upper, &lower);
            let mut rhs = vec![0.0; m];
            for d in 0..dim {
                for (i, r) in rhs.iter_mut().enumerate() {
                    *r = 6.0 * (slope(i + 1, d) - slope(i, d));
                }
                tri.solve(&mut rhs);
                for i in 0..m {
                    moments[(i + 1) * dim + d] = rhs[i];
                }
                if not_a_knot {
                    let (h0, h1) = (h[0], h[1]);
                    moments[d] = ((h0 + h1) * rhs[0] - h0 * rhs[1]) / h1;
                    let (ha, hb) = (h[n - 3], h[n - 2]);
                    moments[(n - 1) * dim + d] = ((ha + hb) * rhs[m - 1] - hb * rhs[m - 2]) / ha;
                }
            }
        }
        Self { dim, knots, values, moments }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn segment_of(&self, u: f64) -> usize {
        locate(&self.knots, u)
    }

    /// Derivative of order `order ∈ 0..=3` at `u`, written into `out`.
    pub fn eval_into(&self, u: f64, order: usize, out: &mut [f64]) {
        let k = self.segment_of(u);
        let (u0, u1) = (self.knots[k], self.knots[k + 1]);
        let h = u1 - u0;
        let a = (u1 - u) / h;
        let b = (u - u0) / h;
        let dim = self.dim;
        for d in 0..dim {
            let y0 = self.values[k * dim + d];
            let y1 = self.values[(k + 1) * dim + d];
            let m0 = self.moments[k * dim + d];
            let m1 = self.moments[(k + 1) * dim + d];
            out[d] = match order {
                0 => a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0,
                1 => (y1 - y0) / h + ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0,
                2 => a * m0 + b * m1,
                3 => (m1 - m0) / h,
                _ => 0.0,
            };
        }
    }

    pub fn eval(&self, u: f64, order: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(u, order, &mut out);
        out
    }
}

struct Thomas {
    lower: Vec<f64>,
    c_prime: Vec<f64>,
    denom: Vec<f64>,
}

impl Thomas {
    fn factor(diag: &[f64], upper: &[f64], lower: &[f64]) -> Self {
        let m = diag.len();
        let mut c_prime = vec![0.0; m];
        let mut denom = vec![0.0; m];
        denom[0] = diag[0];
        if m > 1 {
            c_prime[0] = upper[0] / denom[0];
        }
        for i in 1..m {
            denom[i] = diag[i] - lower[i] * c_prime[i - 1];
            if i + 1 < m {
                c_prime[i] = upper[i] / denom[i];
            }
        }
        Self { lower: lower.to_vec(), c_prime, denom }
    }

    fn solve(&self, rhs: &mut [f64]) {
        let m = rhs.len();
        rhs[0] /= self.denom[0];
        for i in 1..m {
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) / self.denom[i];
        }
        for i in (0..m.saturating_sub(1)).rev() {
            rhs[i] -= self.c_prime[i] * rhs[i + 1];
        }
    }
}

/// Index `k` of the interval `[x[k], x[k+1]]` containing `u` (clamped).
pub(crate) fn locate(x: &[f64], u: f64) -> usize {
    let n = x.len();
    if n < 2 || u <= x[0] {
        return 0;
    }
    if u >= x[n - 1] {
        return n - 2;
    }
    x.partition_point(|&k| k <= u).saturating_sub(1).min(n - 2)
}

/// Cubic Hermite interpolation of positions with prescribed derivatives.
///
/// Writes position and derivative at `t` for a node pair
/// `(t0, p0, v0) → (t1, p1, v1)`.
pub(crate) fn hermite(
    t: f64,
    (t0, p0, v0): (f64, &[f64], &[f64]),
    (t1, p1, v1): (f64, &[f64], &[f64]),
    pos: &mut [f64],
    vel: &mut [f64],
) {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let d00 = (6.0 * s2 - 6.0 * s) / h;
    let d10 = 3.0 * s2 - 4.0 * s + 1.0;
    let d01 = (-6.0 * s2 + 6.0 * s) / h;
    let d11 = 3.0 * s2 - 2.0 * s;
    for d in 0..pos.len() {
        pos[d] = h00 * p0[d] + h10 * h * v0[d] + h01 * p1[d] + h11 * h * v1[d];
        vel[d] = d00 * p0[d] + d10 * v0[d] + d01 * p1[d] + d11 * v1[d];
    }
}
