//! Obstacle cost functionals and their RKHS gradients.
//!
//! A reduce operator turns the cost field along a path into a finite
//! [`SupportSet`] of weighted (time, body point) pairs. The obstacle cost is
//! the weighted sum of the field over that set, and its functional gradient
//! is a kernel trajectory supported on the same times.

mod quadrature;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::arm::BodyPoint;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::trajectory::{ConfigPath, KernelTrajectory};
use crate::world::Scene;

pub use quadrature::{legendre_rule, QuadratureRule, MAX_NODES};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ReduceOp {
    /// One maximum-cost (time, body point) per section, found on a grid of
    /// `m` samples in each of `nx` equal sections.
    MaxViolation { nx: usize, m: usize },
    /// Gauss-Legendre nodes weighted by arc length, with the worst body
    /// point at each node.
    Quadrature { n: usize },
    /// Trapezoidal rule over `m` samples and every body point.
    DensePathIntegral { m: usize },
}

impl ReduceOp {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ReduceOp::MaxViolation { nx, m } if nx >= 1 && m >= 2 => Ok(()),
            ReduceOp::Quadrature { n } if (1..=MAX_NODES).contains(&n) => Ok(()),
            ReduceOp::DensePathIntegral { m } if m >= 2 => Ok(()),
            other => Err(Error::Config(format!("invalid reduce operator {other:?}"))),
        }
    }

    /// The evaluation-only reference functional.
    pub fn dense_reference() -> Self {
        ReduceOp::DensePathIntegral { m: DENSE_REFERENCE_SAMPLES }
    }
}

/// Sample count of the dense reference functional.
pub const DENSE_REFERENCE_SAMPLES: usize = 2000;

/// Reduce settings as they appear in config files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReduceConfig {
    /// `"max"`, `"quadrature"` or `"dense"`.
    pub kind: String,
    pub nx: usize,
    pub m: usize,
    pub quad_n: usize,
}

impl Default for ReduceConfig {
    fn default() -> Self {
        Self {
            kind: "max".into(),
            nx: 4,
            m: 32,
            quad_n: 20,
        }
    }
}

impl ReduceConfig {
    pub fn build(&self) -> Result<ReduceOp> {
        let op = match self.kind.as_str() {
            "max" => ReduceOp::MaxViolation { nx: self.nx, m: self.m },
            "quadrature" => ReduceOp::Quadrature { n: self.quad_n },
            "dense" => ReduceOp::DensePathIntegral { m: self.m },
            other => {
                return Err(Error::Config(format!(
                    "unknown reduce kind {other:?} (expected max, quadrature or dense)"
                )))
            }
        };
        op.validate()?;
        Ok(op)
    }

    pub fn from_op(op: ReduceOp) -> Self {
        let base = Self::default();
        match op {
            ReduceOp::MaxViolation { nx, m } => Self { kind: "max".into(), nx, m, ..base },
            ReduceOp::Quadrature { n } => Self { kind: "quadrature".into(), quad_n: n, ..base },
            ReduceOp::DensePathIntegral { m } => Self { kind: "dense".into(), m, ..base },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SupportEntry {
    pub t: f64,
    pub point: BodyPoint,
    pub weight: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SupportSet {
    pub entries: Vec<SupportEntry>,
}

impl SupportSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct support times, ascending.
    pub fn times(&self) -> Vec<f64> {
        let mut times: Vec<f64> = self.entries.iter().map(|e| e.t).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        times
    }
}

/// Worst body point at configuration `q` and its cost; the first body point
/// wins ties.
fn worst_point(path_q: &DVector<f64>, scene: &Scene) -> Result<(BodyPoint, f64)> {
    let arm = scene.arm();
    let mut best: Option<(BodyPoint, f64)> = None;
    for &u in arm.body_points() {
        let c = scene.cost(&arm.fk(path_q, u)?);
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((u, c));
        }
    }
    best.ok_or_else(|| Error::Config("arm has no body points".into()))
}

/// Choose the finite support set for `path` under `reduce`.
pub fn select_support<P: ConfigPath + ?Sized>(
    path: &P,
    scene: &Scene,
    reduce: ReduceOp,
) -> Result<SupportSet> {
    reduce.validate()?;
    let mut entries = Vec::new();
    match reduce {
        ReduceOp::MaxViolation { nx, m } => {
            for s in 0..nx {
                let mut best: Option<SupportEntry> = None;
                let mut best_cost = 0.0;
                for j in 0..m {
                    let t = ((s as f64 + j as f64 / (m - 1) as f64) / nx as f64).min(1.0);
                    let (u, c) = worst_point(&path.config(t)?, scene)?;
                    if c > best_cost {
                        best_cost = c;
                        best = Some(SupportEntry { t, point: u, weight: 1.0 });
                    }
                }
                entries.extend(best);
            }
        }
        ReduceOp::Quadrature { n } => {
            let rule = legendre_rule(n)?;
            for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
                let (u, _) = worst_point(&path.config(t)?, scene)?;
                entries.push(SupportEntry {
                    t,
                    point: u,
                    weight: w * path.speed(t)?,
                });
            }
        }
        ReduceOp::DensePathIntegral { m } => {
            let h = 1.0 / (m - 1) as f64;
            for i in 0..m {
                let t = i as f64 * h;
                let trap = if i == 0 || i == m - 1 { 0.5 * h } else { h };
                let weight = trap * path.speed(t)?;
                for &u in scene.arm().body_points() {
                    entries.push(SupportEntry { t, point: u, weight });
                }
            }
        }
    }
    Ok(SupportSet { entries })
}

/// `Σ w · c(fk(ξ(t), u))` over a fixed support set.
pub fn evaluate<P: ConfigPath + ?Sized>(path: &P, scene: &Scene, support: &SupportSet) -> Result<f64> {
    let arm = scene.arm();
    let mut total = 0.0;
    let mut cached: Option<(f64, DVector<f64>)> = None;
    for e in &support.entries {
        let q = match &cached {
            Some((t, q)) if *t == e.t => q.clone(),
            _ => {
                let q = path.config(e.t)?;
                cached = Some((e.t, q.clone()));
                q
            }
        };
        total += e.weight * scene.cost(&arm.fk(&q, e.point)?);
    }
    Ok(total)
}

/// Obstacle cost `U_obs` of `path` under `reduce`.
pub fn u_obs<P: ConfigPath + ?Sized>(path: &P, scene: &Scene, reduce: ReduceOp) -> Result<f64> {
    if scene.obstacles().is_empty() {
        return Ok(0.0);
    }
    let support = select_support(path, scene, reduce)?;
    evaluate(path, scene, &support)
}

/// Smallest signed obstacle distance of any body point over `samples`
/// uniform times, endpoints included. Positive means collision-free at the
/// sampled times; `+∞` for an empty scene.
pub fn min_clearance<P: ConfigPath + ?Sized>(path: &P, scene: &Scene, samples: usize) -> Result<f64> {
    if samples < 2 {
        return Err(Error::Config(format!("clearance needs at least 2 samples, got {samples}")));
    }
    let mut best = f64::INFINITY;
    for i in 0..samples {
        let t = i as f64 / (samples - 1) as f64;
        best = best.min(scene.clearance(&path.config(t)?)?);
    }
    Ok(best)
}

/// Per-entry gradient coefficients `gᵢ = wᵢ · J(ξ(tᵢ), uᵢ)ᵀ ∇c(fk(ξ(tᵢ), uᵢ))`,
/// one `(tᵢ, gᵢ)` per support entry in order. The coupling matrix is not
/// applied here.
pub fn functional_gradient<P: ConfigPath + ?Sized>(
    path: &P,
    scene: &Scene,
    support: &SupportSet,
) -> Result<Vec<(f64, DVector<f64>)>> {
    let arm = scene.arm();
    crate::error::check_dim(arm.dof(), path.dof())?;
    let mut out = Vec::with_capacity(support.len());
    for e in &support.entries {
        let q = path.config(e.t)?;
        let x = arm.fk(&q, e.point)?;
        let grad_c = scene.grad_cost(&x);
        let g = if grad_c == nalgebra::Vector2::zeros() {
            DVector::zeros(arm.dof())
        } else {
            arm.jacobian(&q, e.point)?.transpose() * grad_c * e.weight
        };
        out.push((e.t, g));
    }
    Ok(out)
}

/// The functional gradient as a kernel trajectory in the space of `spec`
/// (zero straight-line part).
pub fn gradient_trajectory(
    spec: &KernelSpec,
    coefficients: Vec<(f64, DVector<f64>)>,
) -> Result<KernelTrajectory> {
    let zero = DVector::zeros(spec.dof());
    KernelTrajectory::from_sections(zero.clone(), zero, spec.clone(), coefficients)
        .map(|t| t.with_max_support(usize::MAX))
}

/// Gradient of the obstacle cost for the derivative-kernel space of order
/// `order`: the same coefficients attached to `∂ʲ∂ʲk(tᵢ, ·)` sections.
pub fn derivative_penalty_gradient<P: ConfigPath + ?Sized>(
    path: &P,
    scene: &Scene,
    support: &SupportSet,
    spec: &KernelSpec,
    order: usize,
) -> Result<KernelTrajectory> {
    let derived = spec.derivative(order)?;
    gradient_trajectory(&derived, functional_gradient(path, scene, support)?)
}
