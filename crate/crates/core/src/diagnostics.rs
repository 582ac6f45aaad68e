//! Fast self-checks run by the `check` subcommand.
//!
//! Each check draws seeded random instances and reports the worst error
//! against its tolerance.

use nalgebra::{DVector, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::arm::PlanarArm;
use crate::error::Result;
use crate::kernels::{KernelConfig, KernelSpec};
use crate::objective::{self, legendre_rule, ReduceOp};
use crate::optimizer::natural_gradient_check;
use crate::trajectory::KernelTrajectory;
use crate::world::{Circle, Scene};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub instances: usize,
    pub max_error: f64,
    pub tolerance: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_error <= self.tolerance
    }
}

/// Central difference step of all finite-difference checks.
const FD_STEP: f64 = 1e-6;

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1.0)
}

fn random_spec(rng: &mut ChaCha8Rng, dof: usize) -> Result<KernelSpec> {
    let family = ["gaussian", "laplacian", "bspline", "waypoint"][rng.random_range(0..4)];
    let mut cfg = KernelConfig::family(family).with_sigma(rng.random_range(0.05..0.6));
    cfg.waypoints = rng.random_range(5..20);
    let mut b = nalgebra::DMatrix::<f64>::identity(dof, dof);
    for i in 0..dof {
        for j in 0..i {
            let v = rng.random_range(-0.2..0.2);
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    cfg.coupling = Some(b.as_slice().to_vec());
    cfg.build(dof)
}

fn random_sections(rng: &mut ChaCha8Rng, dof: usize, n: usize) -> Vec<(f64, DVector<f64>)> {
    (0..n)
        .map(|_| {
            let t = rng.random_range(0.0..=1.0);
            (t, DVector::from_fn(dof, |_, _| rng.random_range(-1.0..1.0)))
        })
        .collect()
}

fn zero_line(spec: &KernelSpec, sections: Vec<(f64, DVector<f64>)>) -> Result<KernelTrajectory> {
    let zero = DVector::zeros(spec.dof());
    KernelTrajectory::from_sections(zero.clone(), zero, spec.clone(), sections)
}

/// `yᵀξ(t) = ⟨ξ, K(t, ·)y⟩` on random kernels, trajectories and probes.
pub fn reproducing_property(trials: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let dof = rng.random_range(1..4);
        let spec = random_spec(&mut rng, dof)?;
        let n = rng.random_range(1..8);
        let xi = zero_line(&spec, random_sections(&mut rng, dof, n))?;
        let t = rng.random_range(0.0..=1.0);
        let y = DVector::from_fn(dof, |_, _| rng.random_range(-1.0..1.0));
        let direct = y.dot(&xi.eval(t)?);
        let probe = zero_line(&spec, vec![(t, y)])?;
        worst = worst.max(rel_err(xi.rkhs_inner(&probe)?, direct));
    }
    Ok(CheckResult {
        name: "reproducing property",
        instances: trials,
        max_error: worst,
        tolerance: 1e-10,
    })
}

fn check_arm(rng: &mut ChaCha8Rng) -> Result<PlanarArm> {
    let dof = rng.random_range(1..5);
    let links = (0..dof).map(|_| rng.random_range(0.3..1.5)).collect();
    PlanarArm::uniform_limits(links, std::f64::consts::PI)
}

/// Obstacle cost gradient against central differences, away from the kinks
/// of the hinge.
pub fn cost_gradient(trials: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = 0.2;
    let arm = PlanarArm::uniform_limits(vec![1.0], 3.0)?;
    let circles = vec![Circle::new(1.5, 0.0, 0.3), Circle::new(-0.5, 1.2, 0.2)];
    let scene = Scene::new(
        circles,
        eps,
        arm,
        DVector::from_element(1, 1.5),
        DVector::from_element(1, 1.6),
        0,
    )?;
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < trials {
        let x = Vector2::new(rng.random_range(-1.5..2.5), rng.random_range(-1.0..2.0));
        let d = scene.distance(&x);
        if d.abs() < 1e-3 || (d - eps).abs() < 1e-3 {
            continue;
        }
        let g = scene.grad_cost(&x);
        for k in 0..2 {
            let mut e = Vector2::zeros();
            e[k] = FD_STEP;
            let fd = (scene.cost(&(x + e)) - scene.cost(&(x - e))) / (2.0 * FD_STEP);
            worst = worst.max((g[k] - fd).abs());
        }
        done += 1;
    }
    Ok(CheckResult {
        name: "workspace cost gradient",
        instances: trials,
        max_error: worst,
        tolerance: 1e-6,
    })
}

/// Arm Jacobian against central differences of forward kinematics.
pub fn jacobian(trials: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let arm = check_arm(&mut rng)?;
        let q = DVector::from_fn(arm.dof(), |_, _| rng.random_range(-3.0..3.0));
        let u = arm.body_points()[rng.random_range(0..arm.body_points().len())];
        let jac = arm.jacobian(&q, u)?;
        for k in 0..arm.dof() {
            let mut e = DVector::zeros(arm.dof());
            e[k] = FD_STEP;
            let fd = (arm.fk(&(&q + &e), u)? - arm.fk(&(&q - &e), u)?) / (2.0 * FD_STEP);
            worst = worst.max((jac[(0, k)] - fd.x).abs()).max((jac[(1, k)] - fd.y).abs());
        }
    }
    Ok(CheckResult {
        name: "arm jacobian",
        instances: trials,
        max_error: worst,
        tolerance: 1e-6,
    })
}

/// Analytic trajectory velocity against central differences, on smooth
/// kernels.
pub fn trajectory_derivative(trials: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let dof = rng.random_range(1..4);
        let spec = if rng.random_bool(0.5) {
            KernelSpec::gaussian(rng.random_range(0.1..0.6), dof)?
        } else {
            KernelSpec::bspline(3, 8, dof)?
        };
        let n = rng.random_range(1..6);
        let line_a = DVector::from_fn(dof, |_, _| rng.random_range(-1.0..1.0));
        let line_b = DVector::from_fn(dof, |_, _| rng.random_range(-1.0..1.0));
        let xi = KernelTrajectory::from_sections(line_a, line_b, spec, random_sections(&mut rng, dof, n))?;
        let t = rng.random_range(0.01..0.99);
        let v = xi.eval_derivative(t, 1)?;
        let fd = (xi.eval(t + FD_STEP)? - xi.eval(t - FD_STEP)?) / (2.0 * FD_STEP);
        for k in 0..dof {
            worst = worst.max(rel_err(v[k], fd[k]));
        }
    }
    Ok(CheckResult {
        name: "trajectory velocity",
        instances: trials,
        max_error: worst,
        tolerance: 1e-5,
    })
}

/// Directional derivative of the frozen-support obstacle cost against
/// `⟨∇U, h⟩` for random kernel directions `h`.
pub fn functional_gradient(trials: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    let mut attempts = 0;
    while done < trials && attempts < 50 * trials {
        attempts += 1;
        let arm = PlanarArm::uniform_limits(vec![1.0, 0.8], 3.0)?;
        let circles = (0..3)
            .map(|_| {
                let r = rng.random_range(1.0..2.0);
                let a = rng.random_range(-1.5..1.5);
                Circle::new(r * f64::cos(a), r * f64::sin(a), rng.random_range(0.1..0.3))
            })
            .collect();
        let scene = match Scene::new(
            circles,
            0.2,
            arm,
            DVector::from_row_slice(&[-2.5, 0.1]),
            DVector::from_row_slice(&[2.5, -0.1]),
            0,
        ) {
            Ok(s) => s,
            Err(_) => continue,
        };
        let spec = KernelSpec::gaussian(rng.random_range(0.1..0.5), 2)?;
        let xi = KernelTrajectory::from_sections(
            scene.q_start().clone(),
            scene.q_goal().clone(),
            spec.clone(),
            random_sections(&mut rng, 2, 3),
        )?;
        let reduce = if rng.random_bool(0.5) {
            ReduceOp::MaxViolation { nx: 4, m: 16 }
        } else {
            ReduceOp::Quadrature { n: 8 }
        };
        let support = objective::select_support(&xi, &scene, reduce)?;
        if support.is_empty() {
            continue;
        }
        let grad = objective::gradient_trajectory(&spec, objective::functional_gradient(&xi, &scene, &support)?)?;
        let h = zero_line(&spec, random_sections(&mut rng, 2, 3))?;
        let analytic = grad.rkhs_inner(&h)?;
        let shifted = |s: f64| -> Result<f64> {
            let moved = xi.updated(1.0, h.sections().map(|(t, a)| (t, a * s)))?;
            objective::evaluate(&moved, &scene, &support)
        };
        let fd = (shifted(FD_STEP)? - shifted(-FD_STEP)?) / (2.0 * FD_STEP);
        if analytic.abs() < 1e-6 {
            continue;
        }
        worst = worst.max((analytic - fd).abs() / analytic.abs());
        done += 1;
    }
    Ok(CheckResult {
        name: "functional gradient",
        instances: done,
        max_error: if done < trials { f64::INFINITY } else { worst },
        tolerance: 1e-3,
    })
}

/// Gauss-Legendre exactness on monomials of degree up to `2n − 1`.
pub fn quadrature_exactness(max_n: usize) -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for n in 1..=max_n {
        let rule = legendre_rule(n)?;
        for k in 0..2 * n {
            let got = rule.integrate(|t| t.powi(k as i32));
            worst = worst.max((got - 1.0 / (k as f64 + 1.0)).abs());
        }
    }
    Ok(CheckResult {
        name: "quadrature exactness",
        instances: max_n,
        max_error: worst,
        tolerance: 1e-12,
    })
}

/// Kernel-function evaluation at its own support equals the Gram product.
pub fn gram_consistency(trials: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let spec = KernelSpec::gaussian(rng.random_range(0.1..0.5), 2)?;
        let mut support: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..=1.0)).collect();
        support.sort_by(f64::total_cmp);
        support.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        worst = worst.max(natural_gradient_check(&spec, &support, 4, rng.random())?);
    }
    Ok(CheckResult {
        name: "gram consistency",
        instances: trials,
        max_error: worst,
        tolerance: 1e-9,
    })
}

/// Every check with its default instance count.
pub fn run_all(seed: u64) -> Result<Vec<CheckResult>> {
    Ok(vec![
        reproducing_property(1000, seed)?,
        cost_gradient(200, seed)?,
        jacobian(200, seed)?,
        trajectory_derivative(200, seed)?,
        functional_gradient(100, seed)?,
        quadrature_exactness(20)?,
        gram_consistency(50, seed)?,
    ])
}
