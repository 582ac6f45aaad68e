//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Reference values come from oracles written here: closed-form kernels,
//! a recursive B-spline basis, dense matrix inverses, hand-coded kinematics
//! and central differences.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rkhs_motion::arm::PlanarArm;
use rkhs_motion::bench::{self, ExperimentConfig, SuiteDetails, SuiteReport, WAYPOINTS};
use rkhs_motion::kernels::{KernelConfig, KernelSpec};
use rkhs_motion::objective::{self, legendre_rule, ReduceConfig, ReduceOp};
use rkhs_motion::optimizer::{self, OptimizerConfig};
use rkhs_motion::trajectory::{densify, KernelTrajectory};
use rkhs_motion::world::{Circle, Scene};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1.0)
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || {
        format!("took {:.1} s, limit {limit_s} s", elapsed.as_secs_f64())
    })
}

// ---------------------------------------------------------------- oracles

/// Recursive Cox-de Boor on a clamped uniform knot vector.
fn bspline_oracle(i: usize, p: usize, knots: &[f64], t: f64) -> f64 {
    if p == 0 {
        let last = knots[knots.len() - 1];
        let inside = knots[i] <= t && t < knots[i + 1];
        let right_end = t == last && knots[i] < knots[i + 1] && knots[i + 1] == last;
        return if inside || right_end { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    let d1 = knots[i + p] - knots[i];
    if d1 > 0.0 {
        v += (t - knots[i]) / d1 * bspline_oracle(i, p - 1, knots, t);
    }
    let d2 = knots[i + p + 1] - knots[i + 1];
    if d2 > 0.0 {
        v += (knots[i + p + 1] - t) / d2 * bspline_oracle(i + 1, p - 1, knots, t);
    }
    v
}

/// Acceleration metric on `m` waypoints, normalized so that `max diag(A⁻¹) = 1`,
/// inverted with a dense LU solve.
fn waypoint_metric(m: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = m - 2;
    let h = 1.0 / (m - 1) as f64;
    let k = DMatrix::from_fn(n, n, |i, j| match i as i64 - j as i64 {
        0 => -2.0,
        1 | -1 => 1.0,
        _ => 0.0,
    });
    let raw = k.transpose() * &k / h.powi(3);
    let raw_inv = raw.clone().lu().try_inverse().unwrap();
    let scale = raw_inv.diagonal().max();
    (raw * scale, raw_inv / scale)
}

#[derive(Clone, Copy)]
enum OracleKernel {
    Gaussian(f64),
    Laplacian(f64),
    BSpline,
    Waypoint(usize),
}

impl OracleKernel {
    fn config(self) -> KernelConfig {
        match self {
            OracleKernel::Gaussian(s) => KernelConfig::family("gaussian").with_sigma(s),
            OracleKernel::Laplacian(s) => KernelConfig::family("laplacian").with_sigma(s),
            OracleKernel::BSpline => KernelConfig::family("bspline"),
            OracleKernel::Waypoint(m) => KernelConfig {
                waypoints: m,
                ..KernelConfig::family("waypoint")
            },
        }
    }

    fn eval(self, t: f64, s: f64) -> f64 {
        match self {
            OracleKernel::Gaussian(sig) => (-(t - s).powi(2) / (2.0 * sig * sig)).exp(),
            OracleKernel::Laplacian(sig) => (-(t - s).abs() / sig).exp(),
            OracleKernel::BSpline => {
                let mut knots = vec![0.0; 3];
                knots.extend((0..8).map(|i| i as f64 / 7.0));
                knots.extend([1.0; 3]);
                (0..10)
                    .map(|i| bspline_oracle(i, 3, &knots, t) * bspline_oracle(i, 3, &knots, s))
                    .sum()
            }
            OracleKernel::Waypoint(m) => {
                let (_, inv) = waypoint_metric(m);
                let hats = |x: f64| {
                    let scaled = x * (m - 1) as f64;
                    let i = (scaled.floor() as usize).min(m - 2);
                    let f = scaled - i as f64;
                    [(i, 1.0 - f), (i + 1, f)]
                };
                let pad = |i: usize, j: usize| {
                    if i == 0 || j == 0 || i == m - 1 || j == m - 1 {
                        0.0
                    } else {
                        inv[(i - 1, j - 1)]
                    }
                };
                let mut v = 0.0;
                for (i, wi) in hats(t) {
                    for (j, wj) in hats(s) {
                        v += wi * wj * pad(i, j);
                    }
                }
                v
            }
        }
    }
}

fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let l = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            rng.random_range(0.5..1.5)
        } else if j < i {
            rng.random_range(-0.4..0.4)
        } else {
            0.0
        }
    });
    &l * l.transpose()
}

fn hinge(d: f64, eps: f64) -> f64 {
    if d < 0.0 {
        -d + 0.5 * eps
    } else if d <= eps {
        (d - eps).powi(2) / (2.0 * eps)
    } else {
        0.0
    }
}

fn oracle_cost(circles: &[Circle], eps: f64, x: Vector2<f64>) -> f64 {
    let d = circles
        .iter()
        .map(|c| (x - Vector2::new(c.cx, c.cy)).norm() - c.r)
        .fold(f64::INFINITY, f64::min);
    hinge(d, eps)
}

// ------------------------------------------------------------- criteria

/// 1. yᵀξ(t) = ⟨ξ, K(t,·)y⟩ for 1000 random triples.
fn reproducing_property() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_identity, mut worst_oracle) = (0.0f64, 0.0f64);
    for trial in 0..1000 {
        let kernel = match trial % 4 {
            0 => OracleKernel::Gaussian(rng.random_range(0.05..0.5)),
            1 => OracleKernel::Laplacian(rng.random_range(0.05..0.5)),
            2 => OracleKernel::BSpline,
            _ => OracleKernel::Waypoint(rng.random_range(4..16)),
        };
        let d = rng.random_range(1..=4);
        let b = random_spd(&mut rng, d);
        let mut cfg = kernel.config();
        cfg.coupling = Some(b.transpose().as_slice().to_vec());
        let spec = cfg.build(d).map_err(|e| e.to_string())?;
        let n = rng.random_range(1..=10);
        let sections: Vec<(f64, DVector<f64>)> = (0..n)
            .map(|_| (rng.random_range(0.0..=1.0), DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0))))
            .collect();
        let zero = DVector::zeros(d);
        let xi = KernelTrajectory::from_sections(zero.clone(), zero.clone(), spec.clone(), sections.clone())
            .map_err(|e| e.to_string())?;
        let t = rng.random_range(0.0..=1.0);
        let y = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        let probe = KernelTrajectory::from_sections(zero.clone(), zero, spec, vec![(t, y.clone())])
            .map_err(|e| e.to_string())?;

        let evaluated = y.dot(&xi.eval(t).map_err(|e| e.to_string())?);
        let inner = xi.rkhs_inner(&probe).map_err(|e| e.to_string())?;
        let oracle: f64 = sections
            .iter()
            .map(|(ti, a)| kernel.eval(*ti, t) * y.dot(&(&b * a)))
            .sum();
        worst_identity = worst_identity.max(rel(inner, evaluated));
        worst_oracle = worst_oracle.max(rel(evaluated, oracle)).max(rel(inner, oracle));
    }
    ensure(worst_identity <= 1e-10, || format!("identity error {worst_identity:.2e} > 1e-10"))?;
    ensure(worst_oracle <= 1e-10, || format!("oracle error {worst_oracle:.2e} > 1e-10"))?;
    within(started.elapsed(), 5.0)?;
    Ok(format!(
        "1000 triples, identity error {worst_identity:.1e}, oracle error {worst_oracle:.1e} (tol 1e-10), {:.2} s",
        started.elapsed().as_secs_f64()
    ))
}

const H: f64 = 1e-6;

fn cost_gradient_check(rng: &mut ChaCha8Rng) -> Result<(usize, f64), String> {
    let eps = 0.25;
    let circles = vec![Circle::new(0.3, 1.0, 0.4), Circle::new(1.4, 0.3, 0.3), Circle::new(-0.6, 1.5, 0.2)];
    let arm = PlanarArm::uniform_limits(vec![1.0], 3.0).map_err(|e| e.to_string())?;
    let scene = Scene::new(
        circles.clone(),
        eps,
        arm,
        DVector::from_element(1, -1.57),
        DVector::from_element(1, -1.5),
        0,
    )
    .map_err(|e| e.to_string())?;
    let (mut n, mut worst) = (0, 0.0f64);
    while n < 200 {
        let x = Vector2::new(rng.random_range(-1.0..2.0), rng.random_range(-1.0..2.0));
        let d = scene.distance(&x);
        // stay clear of the hinge kinks, where the cost has no derivative
        if d.abs() < 1e-3 || (d - eps).abs() < 1e-3 || d > eps + 0.1 {
            continue;
        }
        let g = scene.grad_cost(&x);
        ensure((scene.cost(&x) - oracle_cost(&circles, eps, x)).abs() < 1e-14, || "cost mismatch".into())?;
        for k in 0..2 {
            let mut e = Vector2::zeros();
            e[k] = H;
            let fd = (oracle_cost(&circles, eps, x + e) - oracle_cost(&circles, eps, x - e)) / (2.0 * H);
            worst = worst.max((g[k] - fd).abs());
        }
        n += 1;
    }
    Ok((n, worst))
}

fn jacobian_check(rng: &mut ChaCha8Rng) -> Result<(usize, f64), String> {
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let d = rng.random_range(1..=5);
        let links: Vec<f64> = (0..d).map(|_| rng.random_range(0.3..1.5)).collect();
        let arm = PlanarArm::uniform_limits(links.clone(), 3.2).map_err(|e| e.to_string())?;
        let q = DVector::from_fn(d, |_, _| rng.random_range(-3.0..3.0));
        let u = arm.body_points()[rng.random_range(0..arm.body_points().len())];
        // hand-coded forward kinematics
        let fk = |q: &DVector<f64>| {
            let (mut x, mut angle) = (Vector2::zeros(), 0.0);
            for i in 0..=u.link {
                angle += q[i];
                let len = if i == u.link { links[i] * u.fraction } else { links[i] };
                x += Vector2::new(angle.cos(), angle.sin()) * len;
            }
            x
        };
        let lib_x = arm.fk(&q, u).map_err(|e| e.to_string())?;
        worst = worst.max((lib_x - fk(&q)).amax());
        let jac = arm.jacobian(&q, u).map_err(|e| e.to_string())?;
        for k in 0..d {
            let mut e = DVector::zeros(d);
            e[k] = H;
            let fd = (fk(&(&q + &e)) - fk(&(&q - &e))) / (2.0 * H);
            worst = worst.max((jac[(0, k)] - fd.x).abs()).max((jac[(1, k)] - fd.y).abs());
        }
    }
    Ok((200, worst))
}

fn trajectory_derivative_check(rng: &mut ChaCha8Rng) -> Result<(usize, f64), String> {
    let mut worst = 0.0f64;
    for trial in 0..200 {
        let d = rng.random_range(1..=3);
        let cfg = if trial % 2 == 0 {
            OracleKernel::Gaussian(rng.random_range(0.1..0.5)).config()
        } else {
            OracleKernel::BSpline.config()
        };
        let spec = cfg.build(d).map_err(|e| e.to_string())?;
        let n = rng.random_range(1..=6);
        let sections: Vec<_> = (0..n)
            .map(|_| (rng.random_range(0.0..=1.0), DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0))))
            .collect();
        let q0 = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        let q1 = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        let xi = KernelTrajectory::from_sections(q0, q1, spec, sections).map_err(|e| e.to_string())?;
        let t = rng.random_range(0.05..0.95);
        let e = |r: rkhs_motion::Result<DVector<f64>>| r.map_err(|e| e.to_string());
        let v = e(xi.eval_derivative(t, 1))?;
        let fd = (e(xi.eval(t + H))? - e(xi.eval(t - H))?) / (2.0 * H);
        let a = e(xi.eval_derivative(t, 2))?;
        let fd2 = (e(xi.eval_derivative(t + H, 1))? - e(xi.eval_derivative(t - H, 1))?) / (2.0 * H);
        for k in 0..d {
            worst = worst.max(rel(v[k], fd[k])).max(rel(a[k], fd2[k]));
        }
    }
    Ok((200, worst))
}

fn functional_gradient_check(rng: &mut ChaCha8Rng) -> Result<(usize, f64), String> {
    let (mut n, mut worst) = (0, 0.0f64);
    let mut attempts = 0;
    while n < 120 {
        attempts += 1;
        if attempts > 5000 {
            return Err(format!("only {n} usable instances"));
        }
        let arm = PlanarArm::new(vec![1.0, 0.8], vec![(-3.0, 3.0); 2], 3).map_err(|e| e.to_string())?;
        let circles: Vec<Circle> = (0..4)
            .map(|_| {
                let (r, a): (f64, f64) = (rng.random_range(0.8..1.9), rng.random_range(-1.2..1.2));
                Circle::new(r * a.cos(), r * a.sin(), rng.random_range(0.1..0.3))
            })
            .collect();
        let Ok(scene) = Scene::new(
            circles,
            0.2,
            arm,
            DVector::from_row_slice(&[-2.6, 0.2]),
            DVector::from_row_slice(&[2.6, -0.2]),
            0,
        ) else {
            continue;
        };
        let kernel = if n % 2 == 0 {
            OracleKernel::Gaussian(rng.random_range(0.1..0.4))
        } else {
            OracleKernel::BSpline
        };
        let spec = kernel.config().build(2).map_err(|e| e.to_string())?;
        let rand_sections = |rng: &mut ChaCha8Rng, k: usize| -> Vec<(f64, DVector<f64>)> {
            (0..k)
                .map(|_| (rng.random_range(0.0..=1.0), DVector::from_fn(2, |_, _| rng.random_range(-0.5..0.5))))
                .collect()
        };
        let xi = KernelTrajectory::from_sections(
            scene.q_start().clone(),
            scene.q_goal().clone(),
            spec.clone(),
            rand_sections(rng, 3),
        )
        .map_err(|e| e.to_string())?;
        let reduce = match n % 3 {
            0 => ReduceOp::MaxViolation { nx: 4, m: 16 },
            1 => ReduceOp::Quadrature { n: 10 },
            _ => ReduceOp::DensePathIntegral { m: 50 },
        };
        let support = objective::select_support(&xi, &scene, reduce).map_err(|e| e.to_string())?;
        let coeffs = objective::functional_gradient(&xi, &scene, &support).map_err(|e| e.to_string())?;
        let zero = DVector::zeros(2);
        let h = KernelTrajectory::from_sections(zero.clone(), zero, spec.clone(), rand_sections(rng, 3))
            .map_err(|e| e.to_string())?;
        // ⟨∇U, h⟩ through the library's inner product and through Σ gᵢᵀh(tᵢ)
        let grad = objective::gradient_trajectory(&spec, coeffs.clone()).map_err(|e| e.to_string())?;
        let inner = grad.rkhs_inner(&h).map_err(|e| e.to_string())?;
        let mut direct = 0.0;
        for (t, g) in &coeffs {
            direct += g.dot(&h.eval(*t).map_err(|e| e.to_string())?);
        }
        let shifted = |s: f64| -> Result<f64, String> {
            let moved = xi
                .updated(1.0, h.sections().map(|(t, a)| (t, a * s)))
                .map_err(|e| e.to_string())?;
            objective::evaluate(&moved, &scene, &support).map_err(|e| e.to_string())
        };
        let step = 1e-5;
        let fd = (shifted(step)? - shifted(-step)?) / (2.0 * step);
        if fd.abs() < 1e-4 {
            continue;
        }
        // skip instances where a body point sits on a hinge kink
        let kinked = support.entries.iter().any(|e| {
            let q = xi.eval(e.t).unwrap();
            let dist = scene.distance(&scene.arm().fk(&q, e.point).unwrap());
            dist.abs() < 1e-3 || (dist - 0.2).abs() < 1e-3
        });
        if kinked {
            continue;
        }
        worst = worst
            .max((inner - fd).abs() / fd.abs())
            .max((direct - fd).abs() / fd.abs());
        n += 1;
    }
    Ok((n, worst))
}

/// 2. Analytic gradients against central differences.
fn gradient_oracles() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let checks = [
        ("cost gradient", cost_gradient_check(&mut rng)?, 1e-6),
        ("jacobian", jacobian_check(&mut rng)?, 1e-6),
        ("trajectory derivative", trajectory_derivative_check(&mut rng)?, 1e-5),
        ("functional gradient", functional_gradient_check(&mut rng)?, 1e-3),
    ];
    let mut parts = Vec::new();
    for (name, (n, err), tol) in checks {
        ensure(n >= 100, || format!("{name}: only {n} instances"))?;
        ensure(err <= tol, || format!("{name}: error {err:.2e} > {tol:.0e}"))?;
        parts.push(format!("{name} {err:.1e}/{tol:.0e} (n={n})"));
    }
    within(started.elapsed(), 30.0)?;
    Ok(format!("{}, {:.2} s", parts.join(", "), started.elapsed().as_secs_f64()))
}

/// 3. Gauss-Legendre exactness and the two-node rule.
fn quadrature() -> Outcome {
    let mut worst = 0.0f64;
    for n in 1..=20 {
        let rule = legendre_rule(n).map_err(|e| e.to_string())?;
        for k in 0..2 * n {
            let got: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(k as i32)).sum();
            worst = worst.max((got - 1.0 / (k + 1) as f64).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("monomial error {worst:.2e} > 1e-12"))?;
    let two = legendre_rule(2).map_err(|e| e.to_string())?;
    let r = 1.0 / 3f64.sqrt();
    let node_err = (two.nodes[0] - (1.0 - r) / 2.0).abs().max((two.nodes[1] - (1.0 + r) / 2.0).abs());
    ensure(node_err <= 1e-12, || format!("n=2 node error {node_err:.2e}"))?;
    Ok(format!("monomial error {worst:.1e}, n=2 node error {node_err:.1e} (tol 1e-12)"))
}

/// 4. Delta-basis RKHS iteration against the waypoint update.
fn waypoints_as_rkhs() -> Outcome {
    let m = 8;
    let circles = vec![Circle::new(1.05, 0.1, 0.2), Circle::new(0.95, -0.45, 0.15)];
    let eps = 0.2;
    let arm = PlanarArm::new(vec![1.0], vec![(-3.0, 3.0)], 1).map_err(|e| e.to_string())?;
    let scene = Scene::new(
        circles.clone(),
        eps,
        arm,
        DVector::from_element(1, -1.0),
        DVector::from_element(1, 1.0),
        0,
    )
    .map_err(|e| e.to_string())?;
    let cfg = OptimizerConfig {
        lambda: 20.0,
        beta: 0.5,
        eps: 0.0,
        stall_tol: 0.0,
        n_max: 10,
        reduce: ReduceConfig { kind: "max".into(), nx: 1, m, ..Default::default() },
        ..Default::default()
    };
    let spec = KernelSpec::waypoint(m, 1).map_err(|e| e.to_string())?;
    let mut rkhs = Vec::new();
    optimizer::optimize_observed(&scene, &cfg, &spec, |xi, _| {
        rkhs.push(densify(xi, m).unwrap().waypoints().column(0).into_owned())
    })
    .map_err(|e| e.to_string())?;
    let mut baseline = Vec::new();
    optimizer::optimize_waypoints_observed(&scene, &cfg, m, |w, _| baseline.push(w.waypoints().column(0).into_owned()))
        .map_err(|e| e.to_string())?;

    // hand-rolled covariant waypoint iteration
    let (a, a_inv) = waypoint_metric(m);
    let line: DVector<f64> = DVector::from_fn(m, |i, _| -1.0 + 2.0 * i as f64 / (m - 1) as f64);
    let mut w = line.clone();
    let mut oracle = vec![w.clone()];
    for _ in 0..cfg.n_max {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..m {
            let c = oracle_cost(&circles, eps, Vector2::new(w[j].cos(), w[j].sin()));
            if c > best.map_or(0.0, |b| b.1) {
                best = Some((j, c));
            }
        }
        let mut g = DVector::zeros(m - 2);
        if let Some((j, _)) = best {
            let x = Vector2::new(w[j].cos(), w[j].sin());
            let fd = (oracle_cost(&circles, eps, x + Vector2::new(1e-7, 0.0))
                - oracle_cost(&circles, eps, x - Vector2::new(1e-7, 0.0)))
                / 2e-7;
            let fd_y = (oracle_cost(&circles, eps, x + Vector2::new(0.0, 1e-7))
                - oracle_cost(&circles, eps, x - Vector2::new(0.0, 1e-7)))
                / 2e-7;
            let jt_grad = -x.y * fd + x.x * fd_y;
            if (1..m - 1).contains(&j) {
                g[j - 1] += jt_grad;
            }
        }
        let dev = (&w - &line).rows(1, m - 2).into_owned();
        let step = &a_inv * (g + &a * dev * cfg.beta) / cfg.lambda;
        let mut next = w.clone();
        for i in 0..m - 2 {
            next[i + 1] -= step[i];
        }
        w = next;
        oracle.push(w.clone());
    }

    ensure(rkhs.len() == baseline.len() && rkhs.len() == cfg.n_max + 1, || {
        format!("iterate counts {} / {}", rkhs.len(), baseline.len())
    })?;
    ensure((&rkhs[1] - &rkhs[0]).amax() > 1e-3, || "first step did not move".into())?;
    let mut worst = 0.0f64;
    let mut worst_oracle = 0.0f64;
    for i in 0..rkhs.len() {
        worst = worst.max((&rkhs[i] - &baseline[i]).amax());
        worst_oracle = worst_oracle.max((&baseline[i] - &oracle[i]).amax());
    }
    ensure(worst <= 1e-8, || format!("RKHS vs baseline {worst:.2e} > 1e-8"))?;
    ensure(worst_oracle <= 1e-6, || format!("baseline vs hand-rolled {worst_oracle:.2e} > 1e-6"))?;
    Ok(format!(
        "{} iterates, RKHS vs baseline {worst:.1e} (tol 1e-8), baseline vs hand-rolled {worst_oracle:.1e}",
        rkhs.len()
    ))
}

/// 5. Endpoint and joint-limit residuals over the 100-trial suite.
fn constraint_satisfaction(report: &SuiteReport) -> Outcome {
    ensure(report.trials.len() == 100, || format!("{} trials completed", report.trials.len()))?;
    let (mut endpoint, mut limits, mut iterates) = (0.0f64, 0.0f64, 0);
    for t in &report.trials {
        for m in &t.methods {
            for it in &m.iterates {
                endpoint = endpoint.max(it.endpoint_residual);
                limits = limits.max(it.limit_violation);
                iterates += 1;
            }
        }
    }
    ensure(endpoint <= 1e-8, || format!("endpoint residual {endpoint:.2e} > 1e-8"))?;
    ensure(limits <= 1e-9, || format!("limit violation {limits:.2e} > 1e-9"))?;
    Ok(format!("{iterates} iterates, endpoint {endpoint:.1e} (tol 1e-8), limits {limits:.1e} (tol 1e-9)"))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// 6. Max and quadrature formulations stay within 20% of each other.
fn cost_formulation() -> Outcome {
    let started = Instant::now();
    let cfg = ExperimentConfig::default();
    ensure(cfg.trials == 100 && cfg.obstacles == 12 && cfg.iterations == 10 && cfg.quad_n == 20, || {
        "unexpected default experiment settings".into()
    })?;
    let report = bench::run_cost_formulation_comparison(&cfg).map_err(|e| e.to_string())?;
    ensure(report.trials.len() == 100, || format!("{} trials completed", report.trials.len()))?;
    let max = mean(&report.finals(bench::MAX_METHOD, |m| m.u_obs_dense));
    let quad = mean(&report.finals(bench::QUADRATURE_METHOD, |m| m.u_obs_dense));
    let SuiteDetails::CostFormulation(gap) = &report.details else {
        return Err("missing gap details".into());
    };
    ensure((gap.mean_max - max).abs() < 1e-12 && (gap.mean_quadrature - quad).abs() < 1e-12, || {
        "reported means disagree with the trial data".into()
    })?;
    ensure(max <= 1.2 * quad, || format!("max {max:.4} exceeds quadrature {quad:.4} by more than 20%"))?;
    ensure(quad <= 1.2 * max, || format!("quadrature {quad:.4} exceeds max {max:.4} by more than 20%"))?;
    within(started.elapsed(), 600.0)?;
    Ok(format!(
        "dense cost max {max:.4}, quadrature {quad:.4}; quadrature vs max {:+.1}% [{:+.1}%, {:+.1}%], max vs quadrature {:+.1}%, {:.0} s",
        100.0 * gap.quadrature_vs_max,
        100.0 * gap.quadrature_vs_max_ci.0,
        100.0 * gap.quadrature_vs_max_ci.1,
        100.0 * gap.max_vs_quadrature,
        started.elapsed().as_secs_f64()
    ))
}

/// 7. Gaussian RBF is smoother than the waypoint baseline at comparable cost.
fn kernel_vs_waypoints(report: &SuiteReport) -> Outcome {
    let gaussian = report.config.kernels[0].family.clone();
    ensure(gaussian == "gaussian", || format!("first kernel is {gaussian}"))?;
    let smooth_g = mean(&report.finals("gaussian", |m| m.smoothness));
    let smooth_w = mean(&report.finals(WAYPOINTS, |m| m.smoothness));
    let cost_g = mean(&report.finals("gaussian", |m| m.u_obs_dense));
    let cost_w = mean(&report.finals(WAYPOINTS, |m| m.u_obs_dense));
    let detail = format!(
        "smoothness gaussian {smooth_g:.4} vs waypoints {smooth_w:.4}; dense cost {cost_g:.4} vs {cost_w:.4} (bound {:.4})",
        1.05 * cost_w
    );
    ensure(smooth_g < smooth_w, || format!("smoothness not lower: {detail}"))?;
    ensure(cost_g <= 1.05 * cost_w, || format!("cost above bound: {detail}"))?;
    Ok(detail)
}

/// 8. Large steps on the maze scene.
fn large_step() -> Outcome {
    let report = bench::run_large_step_experiment(&ExperimentConfig::default()).map_err(|e| e.to_string())?;
    let SuiteDetails::LargeStep(outcomes) = &report.details else {
        return Err("missing large-step details".into());
    };
    let get = |name: &str| {
        outcomes
            .iter()
            .find(|o| o.method == name)
            .ok_or_else(|| format!("missing run {name}"))
    };
    let g = get(bench::LARGE_STEP_KERNEL)?;
    let wa = get(bench::LARGE_STEP_WAYPOINTS_AGGRESSIVE)?;
    let wc = get(bench::LARGE_STEP_WAYPOINTS_CONSERVATIVE)?;
    ensure(g.lambda == wa.lambda && wc.lambda > wa.lambda, || "unexpected step sizes".into())?;
    let g_iters = g.iterations_to_clear.ok_or("gaussian never cleared the maze")?;
    ensure(g_iters <= 10, || format!("gaussian needed {g_iters} iterations"))?;
    let wc_iters = wc.iterations_to_clear.unwrap_or(usize::MAX);
    ensure(wc_iters > g_iters, || format!("conservative waypoints cleared in {wc_iters} <= {g_iters}"))?;
    ensure(wa.velocity_tv > wc.velocity_tv, || {
        format!("aggressive tv {:.3} <= conservative tv {:.3}", wa.velocity_tv, wc.velocity_tv)
    })?;
    let wc_text = wc.iterations_to_clear.map_or("never".to_string(), |n| n.to_string());
    Ok(format!(
        "gaussian λ={} clear after {g_iters}; waypoints λ={} clear after {wc_text}; velocity TV aggressive {:.2} vs conservative {:.2}",
        g.lambda, wc.lambda, wa.velocity_tv, wc.velocity_tv
    ))
}

/// 9. Byte-identical results.csv across repeated runs and worker counts.
fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |name: &str, threads: &str| -> Result<Vec<u8>, String> {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_rkhs-motion"))
            .args(["bench", "--suite", "kernel-comparison", "--trials", "5", "--seed", "7", "--out"])
            .arg(&out)
            .env("RKHS_MOTION_THREADS", threads)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), || {
            format!("bench exited with {}: {}", status.status, String::from_utf8_lossy(&status.stderr))
        })?;
        std::fs::read(Path::new(&out).join("results.csv")).map_err(|e| e.to_string())
    };
    let a = run("a", "1")?;
    let b = run("b", "1")?;
    let c = run("c", "4")?;
    ensure(!a.is_empty(), || "empty results.csv".into())?;
    ensure(a == b, || "repeated runs differ".into())?;
    ensure(a == c, || "1 vs 4 workers differ".into())?;
    Ok(format!("3 runs (1, 1, 4 workers), {} identical bytes", a.len()))
}

fn main() {
    let mut failed = 0;
    let mut report_line = |n: usize, name: &str, outcome: Outcome| {
        match outcome {
            Ok(detail) => println!("PASS criterion {n} ({name}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}): {why}");
            }
        }
    };
    report_line(1, "reproducing property", reproducing_property());
    report_line(2, "gradient oracles", gradient_oracles());
    report_line(3, "quadrature", quadrature());
    report_line(4, "waypoints as RKHS", waypoints_as_rkhs());

    let started = Instant::now();
    let suite = bench::run_kernel_comparison(&ExperimentConfig::default()).map_err(|e| e.to_string());
    println!("(kernel-comparison suite, 100 trials: {:.0} s)", started.elapsed().as_secs_f64());
    report_line(5, "constraint satisfaction", suite.clone().and_then(|r| constraint_satisfaction(&r)));
    report_line(6, "cost-formulation gap", cost_formulation());
    report_line(7, "kernel vs waypoints", suite.and_then(|r| kernel_vs_waypoints(&r)));
    report_line(8, "large steps", large_step());
    report_line(9, "determinism", determinism());

    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
    println!("all 9 criteria passed");
}
