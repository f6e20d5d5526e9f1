//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;
use std::time::{Duration, Instant};

use contractflow::contract::{check_self_contracted_metric, check_strong, check_uniform, estimate_c0, ContractLevel};
use contractflow::curve::{
    from_samples, holder_seminorm, holder_seminorm_with, make_circle_arc, make_log_spiral, make_segment,
    third_deriv_bound, third_deriv_bound_with, Curve, RegularityEstimate,
};
use contractflow::extend::{build_extension, check_c, check_cw1, curve_jet, DEFAULT_CW1_TOL};
use contractflow::flow::{check_flow_self_contracted, integrate, roundtrip_error, trace_energy, Quadratic, QuasiconvexBowl};
use contractflow::linalg::dist;
use contractflow::quad::invert_monotone;
use contractflow::repar::{endpoint_plan, exponential_plan, reparameterize, verify_m, zeta_plan, ReparamPlan};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(id: u32, pass: bool, detail: &str) {
    println!("acceptance {id}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
}

fn quarter(n: usize) -> Curve {
    make_circle_arc(FRAC_PI_2, n).unwrap()
}

fn segment(n: usize) -> Curve {
    make_segment(&[0.0, 0.0], &[1.0, 0.0], n).unwrap()
}

fn spiral(lambda: f64, n: usize) -> Curve {
    make_log_spiral(lambda, 4.0 * PI, n).unwrap()
}

fn running_sup_plan(curve: &Curve, c0: f64) -> ReparamPlan {
    let bound = third_deriv_bound(curve).unwrap();
    zeta_plan(curve, c0, Arc::new(move |t| bound.zeta(t) / 6.0)).unwrap()
}

fn endpoint_for(curve: &Curve, c0: f64, safety: f64) -> ReparamPlan {
    let bound = third_deriv_bound_with(curve, safety).unwrap();
    endpoint_plan(curve, c0, bound.bound / 6.0).unwrap()
}

#[test]
fn criterion_1_constants() {
    let start = Instant::now();
    let q = quarter(200);
    let c0 = estimate_c0(&q).unwrap();
    let reg = holder_seminorm_with(&q, 1.0, 1.0).unwrap();
    let plan = exponential_plan(&q, &reg, c0).unwrap();
    let target = 3.0 * (1.0 / 6.0) * FRAC_PI_2 * FRAC_PI_2.exp();
    let elapsed = start.elapsed();
    let ok_c0 = (0.55..=0.60).contains(&c0);
    let ok_b = (plan.b - target).abs() <= 0.25 * target;
    let ok_t = elapsed < Duration::from_secs(1);
    verdict(1, ok_c0 && ok_b && ok_t, &format!("c0 = {c0:.4}, b = {:.3} vs {target:.3}, {elapsed:?}", plan.b));
    assert!(ok_c0 && ok_b && ok_t);
}

#[test]
fn criterion_2_m_inequality() {
    let mut ok = true;
    let mut lines = Vec::new();
    for (name, curve) in [("segment", segment(200)), ("quarter", quarter(200)), ("spiral", spiral(0.5, 200))] {
        let start = Instant::now();
        let reg = holder_seminorm(&curve, 1.0).unwrap();
        let c0 = estimate_c0(&curve).unwrap();
        let plan = exponential_plan(&curve, &reg, c0).unwrap();
        let r = verify_m(&curve, &plan);
        let elapsed = start.elapsed();
        let pass = r.holds && r.margin > 0.0 && elapsed < Duration::from_secs(5);
        ok &= pass;
        lines.push(format!("{name}: b = {:.3e}, margin = {:.3e}, {} pairs, {elapsed:?}", plan.b, r.margin, r.pairs_checked));
    }
    let q = quarter(200);
    let bad = ReparamPlan::exponential_with_rate(0.01, q.length()).unwrap();
    let r = verify_m(&q, &bad);
    let witness_ok = !r.holds && r.worst_pair.lhs >= r.worst_pair.rhs;
    ok &= witness_ok;
    lines.push(format!(
        "b = 0.01 fails at (t, s) = ({:.3}, {:.3}) with lhs {:.3e} ≥ rhs {:.3e}",
        r.worst_pair.t, r.worst_pair.s, r.worst_pair.lhs, r.worst_pair.rhs
    ));
    verdict(2, ok, &lines.join("; "));
    assert!(ok);
}

#[test]
fn criterion_3_extension_hypotheses() {
    let mut ok = true;
    let mut checked = 0;
    let mut lines = Vec::new();
    for (name, curve) in [("segment", segment(200)), ("quarter", quarter(200)), ("spiral", spiral(0.5, 200))] {
        let reg = holder_seminorm(&curve, 1.0).unwrap();
        let c0 = estimate_c0(&curve).unwrap();
        let plans = [
            exponential_plan(&curve, &reg, c0).ok(),
            Some(endpoint_for(&curve, c0, 1.25)),
            Some(running_sup_plan(&curve, c0)),
        ];
        for plan in plans.into_iter().flatten() {
            if !verify_m(&curve, &plan).holds {
                lines.push(format!("{name}/{}: (M) fails, skipped", plan.kind.as_str()));
                continue;
            }
            let jet = curve_jet(&curve, &plan);
            let c = check_c(&jet);
            let w = check_cw1(&jet, DEFAULT_CW1_TOL);
            checked += 1;
            ok &= c.passed && w.passed;
            if !(c.passed && w.passed) {
                lines.push(format!("{name}/{}: C {} CW1 {}", plan.kind.as_str(), c.passed, w.passed));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut step1 = 0;
    for _ in 0..100 {
        let mut p = vec![0.0, 0.0];
        let mut heading: f64 = rng.gen_range(0.0..2.0 * PI);
        let mut raw = vec![p.clone()];
        for _ in 0..10 {
            heading += rng.gen_range(-1.5..1.5);
            let step = rng.gen_range(0.2..1.0);
            p = vec![p[0] + step * heading.cos(), p[1] + step * heading.sin()];
            raw.push(p.clone());
        }
        let curve = from_samples(&raw, 100).unwrap();
        let b = rng.gen_range(0.1..10.0);
        let plan = if rng.gen_bool(0.5) {
            ReparamPlan::exponential_with_rate(b, curve.length()).unwrap()
        } else {
            ReparamPlan::endpoint_with_rate(b, curve.length()).unwrap()
        };
        if check_c(&curve_jet(&curve, &plan)).step1.passed {
            step1 += 1;
        }
    }
    ok &= step1 == 100 && checked >= 7;
    lines.insert(0, format!("{checked} certified jets pass (C)/(CW1), step 1 holds on {step1}/100 random pairs"));
    verdict(3, ok, &lines.join("; "));
    assert!(ok);
}

struct Roundtrip {
    sup: f64,
    elapsed: Duration,
}

fn roundtrip(curve: &Curve, plan: &ReparamPlan, eps: f64, horizon: f64) -> Roundtrip {
    let start = Instant::now();
    let jet = curve_jet(curve, plan);
    let ext = build_extension(&jet, eps).unwrap();
    let rc = reparameterize(curve, plan, curve.len(), horizon).unwrap();
    let traj = integrate(&ext, rc.point(0), horizon, 1e-3 * horizon).unwrap();
    let m = roundtrip_error(&traj, &rc);
    Roundtrip { sup: m.sup_distance, elapsed: start.elapsed() }
}

#[test]
fn criterion_4_roundtrip() {
    let mut ok = true;
    let mut lines = Vec::new();
    let mut run = |name: &str, build: &dyn Fn(usize) -> (Curve, ReparamPlan, f64)| {
        let mut sups = Vec::new();
        for (n, eps) in [(200, 1e-3), (400, 5e-4)] {
            let (curve, plan, horizon) = build(n);
            let r = roundtrip(&curve, &plan, eps, horizon);
            ok &= r.elapsed < Duration::from_secs(10);
            sups.push(r.sup);
        }
        let ratio = sups[1] / sups[0];
        let pass = sups[0] <= 5e-2 && (0.25..=1.0).contains(&ratio);
        ok &= pass;
        lines.push(format!("{name}: sup {:.3e} -> {:.3e} (ratio {ratio:.2})", sups[0], sups[1]));
    };
    run("segment/exp", &|n| {
        let plan = ReparamPlan::exponential_with_rate(1.0, 1.0).unwrap();
        let t = plan.total_time();
        (segment(n), plan, t)
    });
    run("quarter/endpoint", &|n| {
        let q = quarter(n);
        let plan = endpoint_for(&q, estimate_c0(&q).unwrap(), 1.0);
        let horizon = plan.theta(q.param(n - 2));
        (q, plan, horizon)
    });
    verdict(4, ok, &lines.join("; "));
    assert!(ok);
}

/// Random rotation of `diag(l1, l2)` with `l2 / l1 ≤ 100`; also returns `l2`.
fn random_spd(rng: &mut ChaCha8Rng) -> (Quadratic, f64) {
    let a: f64 = rng.gen_range(0.0..PI);
    let (c, s) = (a.cos(), a.sin());
    let l1 = rng.gen_range(0.5..2.0);
    let l2 = l1 * rng.gen_range(1.0..100.0);
    let m = vec![c * c * l1 + s * s * l2, c * s * (l1 - l2), c * s * (l1 - l2), s * s * l1 + c * c * l2];
    (Quadratic::new(m, vec![0.0, 0.0]), l2)
}

#[test]
fn criterion_5_converse() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ok = true;
    let mut min_c0 = f64::INFINITY;
    let mut max_residual: f64 = 0.0;
    for _ in 0..10 {
        let (f, lambda_max) = random_spd(&mut rng);
        let x0 = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let r = check_flow_self_contracted(&f, &x0, 10.0).unwrap();
        ok &= r.meets(ContractLevel::UniformlyStrongly) && r.c0 > 0.0;
        min_c0 = min_c0.min(r.c0);
        // step scaled to the fastest mode
        let traj = integrate(&f, &x0, 2.0, 2e-3 / lambda_max).unwrap();
        match trace_energy(&traj, &f) {
            Ok(e) => max_residual = max_residual.max(e.max_residual),
            Err(e) => {
                println!("energy check: {e}");
                ok = false;
            }
        }
    }
    let bowl = QuasiconvexBowl { matrix: vec![2.0, 0.5, 0.5, 1.0], delta: 1e-2 };
    let r = check_flow_self_contracted(&bowl, &[1.5, -1.0], 30.0).unwrap();
    ok &= r.meets(ContractLevel::UniformlyStrongly) && r.c0 > 0.0;
    ok &= max_residual <= 1e-6;
    verdict(
        5,
        ok,
        &format!("min c0 over quadratics {min_c0:.3}, bowl c0 {:.3}, energy residual {max_residual:.2e}", r.c0),
    );
    assert!(ok);
}

#[test]
fn criterion_6_spiral_classification() {
    let start = Instant::now();
    let g = |l: f64| l - (-1.5 * PI * l).exp();
    let dg = |l: f64| 1.0 + 1.5 * PI * (-1.5 * PI * l).exp();
    let lambda0 = invert_monotone(g, dg, 0.0, 0.0, 1.0, 1e-14);
    let residual = g(lambda0).abs();
    let low = spiral(lambda0 - 0.15, 400);
    let high = spiral(lambda0 + 0.15, 400);
    let low_pair = check_strong(&low);
    let low_metric = check_self_contracted_metric(&low, 100_000, 7);
    let high_r = check_uniform(&high);
    let elapsed = start.elapsed();
    let ok = residual < 1e-10
        && (lambda0 - 0.2744).abs() < 1e-4
        && low_pair.level == ContractLevel::NotSelfContracted
        && low_metric.level == ContractLevel::NotSelfContracted
        && high_r.level == ContractLevel::UniformlyStrongly
        && high_r.c0 > 0.0
        && elapsed < Duration::from_secs(5);
    verdict(
        6,
        ok,
        &format!(
            "lambda0 = {lambda0:.6} (residual {residual:.1e}), low: {}, high: {} with c0 {:.3e}, {elapsed:?}",
            low_pair.level.as_str(),
            high_r.level.as_str(),
            high_r.c0
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_7_endpoint_behaviour() {
    let n = 400;
    let q = quarter(n);
    let c0 = estimate_c0(&q).unwrap();
    let plan = endpoint_for(&q, c0, 1.0);
    let t_last = q.param(n - 2);
    let m_ratio = plan.m(t_last) / plan.m(0.0);
    let theta_ratio = plan.theta(t_last) / plan.theta(q.length() / 2.0);

    let jet = curve_jet(&q, &plan);
    let ext = build_extension(&jet, 1e-3).unwrap();
    let horizon = plan.theta(t_last);
    let traj = integrate(&ext, q.point(0), horizon, 1e-3 * horizon).unwrap();
    let final_speed = *traj.speeds.last().unwrap();
    let first = traj.times.partition_point(|&s| s < 0.1 * horizon);
    let decreasing = traj.speeds[first..].windows(2).all(|w| w[1] <= w[0]);

    let ok_m = m_ratio > 1e3;
    let ok_theta = theta_ratio > 1e2;
    let ok_speed = final_speed < 1e-2 && decreasing;
    verdict(
        7,
        ok_m && ok_theta && ok_speed,
        &format!(
            "m ratio {m_ratio:.3e} [{}], theta ratio {theta_ratio:.2} [{}], final speed {final_speed:.2e} decreasing {decreasing} [{}]",
            pf(ok_m),
            pf(ok_theta),
            pf(ok_speed)
        ),
    );
    assert!(ok_m, "m(t_(N-2)) / m(0) = {m_ratio}");
    assert!(ok_speed, "final speed {final_speed}, decreasing {decreasing}");
    assert!(ok_theta, "theta(t_(N-2)) / theta(L/2) = {theta_ratio}");
}

fn pf(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "fail"
    }
}

#[test]
fn criterion_8_numerical_hygiene() {
    let q = quarter(200);
    let reg = holder_seminorm(&q, 1.0).unwrap();
    let plan = exponential_plan(&q, &reg, estimate_c0(&q).unwrap()).unwrap();
    let jet = curve_jet(&q, &plan);
    let ext = build_extension(&jet, 1e-3).unwrap();
    let ext0 = ext.with_eps(0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    let h = 1e-6;
    let mut fd_err: f64 = 0.0;
    for _ in 0..100 {
        let x = [rng.gen_range(-0.5..1.5), rng.gen_range(-0.5..1.5)];
        let g = ext.eval_grad(&x);
        for d in 0..2 {
            let (mut a, mut b) = (x, x);
            a[d] += h;
            b[d] -= h;
            fd_err = fd_err.max(((ext.eval_f(&a) - ext.eval_f(&b)) / (2.0 * h) - g[d]).abs());
        }
    }

    let lin = Quadratic::diagonal(&[1.0, 1.0]);
    let exact = [(-1f64).exp(), 0.0];
    let err = |dt: f64| dist(integrate(&lin, &[1.0, 0.0], 1.0, dt).unwrap().last_state(), &exact);
    let order = err(0.1) / err(0.05);

    let bound = 1e-3 * (jet.len() as f64).ln();
    let mut sandwich = true;
    for _ in 0..1000 {
        let x = [rng.gen_range(-1.0..2.0), rng.gen_range(-1.0..2.0)];
        let (f0, fe) = (ext0.eval_f(&x), ext.eval_f(&x));
        sandwich &= f0 <= fe && fe <= f0 + bound + 1e-15;
    }

    let ok = fd_err <= 1e-5 && (11.0..=21.0).contains(&order) && sandwich;
    verdict(8, ok, &format!("fd error {fd_err:.2e}, rk4 ratio {order:.2}, sandwich {sandwich}"));
    assert!(ok);
}

#[test]
fn regularity_constants_are_consistent() {
    let q = quarter(200);
    let reg = RegularityEstimate::from_seminorm(1.0, 1.0);
    assert!((reg.c1 - 1.0 / 6.0).abs() < 1e-12);
    assert!(third_deriv_bound_with(&q, 1.0).unwrap().bound > 0.99);
}
