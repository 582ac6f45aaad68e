//! The regularized functional-gradient iteration.
//!
//! One step minimizes `⟨ξ − ξⁿ, ∇U⟩_H + (λ/2)‖ξ − ξⁿ‖²_H` in closed form:
//! kernel coefficients shrink by `(1 − β/λ)`, the obstacle gradient is
//! appended with weight `−1/λ`, and endpoint multipliers restore the
//! boundary conditions. The straight-line part of the trajectory is never
//! shrunk. Joint limits are handled afterwards by a sampled active-set
//! projection.

mod constraints;

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{gram, KernelSpec};
use crate::objective::{self, ReduceConfig, ReduceOp, SupportSet};
use crate::trajectory::{waypoint_update, KernelTrajectory, WaypointTrajectory};
use crate::world::Scene;

pub use constraints::{
    max_limit_violation, project_joint_limits, project_waypoint_limits, solve_equality_multipliers,
    ProjectionReport,
};

/// Default waypoint count of the baseline.
pub const DEFAULT_WAYPOINTS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    /// Step regularizer; larger values take smaller steps.
    pub lambda: f64,
    /// Weight of the RKHS norm in the objective.
    pub beta: f64,
    /// Stop once the total objective is at or below this.
    pub eps: f64,
    /// Iteration cap.
    pub n_max: usize,
    pub reduce: ReduceConfig,
    /// Uniform times scanned for joint-limit violations.
    pub limit_check_samples: usize,
    /// Relative objective change below which a run counts as stalled;
    /// zero disables the check.
    pub stall_tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            lambda: 20.0,
            beta: 0.5,
            eps: 1e-4,
            n_max: 10,
            reduce: ReduceConfig::default(),
            limit_check_samples: 200,
            stall_tol: 1e-6,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<ReduceOp> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::Config(format!("beta must be non-negative, got {}", self.beta)));
        }
        if !(self.eps >= 0.0) || !(self.stall_tol >= 0.0) {
            return Err(Error::Config("eps and stall_tol must be non-negative".into()));
        }
        if self.n_max == 0 {
            return Err(Error::Config("n_max must be at least 1".into()));
        }
        if self.limit_check_samples < 2 {
            return Err(Error::Config("limit_check_samples must be at least 2".into()));
        }
        self.reduce.build()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// Total objective reached `eps`.
    Converged,
    MaxIterations,
    /// Relative objective change fell below `stall_tol`.
    Stalled,
}

/// Metrics of one iterate `ξⁿ`; iterate 0 is the initial straight line.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub u_obs: f64,
    pub norm2: f64,
    pub u_total: f64,
    /// Size of the support set selected at this iterate.
    pub support_size: usize,
    pub endpoint_residual: f64,
    /// Largest sampled joint-limit violation.
    pub limit_violation: f64,
    /// Wall time of the step that produced this iterate.
    pub ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationTrace {
    pub lambda: f64,
    pub beta: f64,
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
}

impl IterationTrace {
    pub fn last(&self) -> &IterationRecord {
        self.records.last().expect("a trace always holds the initial iterate")
    }

    /// Steps taken (iterates after the initial one).
    pub fn iterations(&self) -> usize {
        self.records.len() - 1
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,u_obs,norm2,u_total,support_size,endpoint_residual,ms\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.iter, r.u_obs, r.norm2, r.u_total, r.support_size, r.endpoint_residual, r.ms
            );
        }
        out
    }
}

/// The closed-form update from `xi` given an already selected support.
pub fn step_with_support(
    xi: &KernelTrajectory,
    scene: &Scene,
    cfg: &OptimizerConfig,
    support: &SupportSet,
) -> Result<KernelTrajectory> {
    let grad = objective::functional_gradient(xi, scene, support)?;
    let scale = -1.0 / cfg.lambda;
    let appended = grad.into_iter().map(|(t, g)| (t, g * scale));
    let candidate = xi.updated(1.0 - cfg.beta / cfg.lambda, appended)?;
    constraints::restore_endpoints(candidate)
}

/// One iteration: select support at `xi`, take the closed-form step and
/// restore the endpoints. Joint limits are not touched.
pub fn step(
    xi: &KernelTrajectory,
    scene: &Scene,
    cfg: &OptimizerConfig,
) -> Result<(KernelTrajectory, SupportSet)> {
    let reduce = cfg.validate()?;
    let support = objective::select_support(xi, scene, reduce)?;
    Ok((step_with_support(xi, scene, cfg, &support)?, support))
}

struct Metrics {
    u_obs: f64,
    norm2: f64,
    support: SupportSet,
}

fn record(iter: usize, m: &Metrics, beta: f64, endpoint: f64, limits: f64, ms: f64) -> IterationRecord {
    IterationRecord {
        iter,
        u_obs: m.u_obs,
        norm2: m.norm2,
        u_total: m.u_obs + 0.5 * beta * m.norm2,
        support_size: m.support.len(),
        endpoint_residual: endpoint,
        limit_violation: limits,
        ms,
    }
}

/// Shared loop: evaluate, test termination, advance.
fn run_loop<T>(
    cfg: &OptimizerConfig,
    mut current: T,
    mut metrics: impl FnMut(&T) -> Result<Metrics>,
    mut residuals: impl FnMut(&T) -> Result<(f64, f64)>,
    mut advance: impl FnMut(&T, &SupportSet) -> Result<T>,
    mut observer: impl FnMut(&T, &IterationRecord),
) -> Result<(T, IterationTrace)> {
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut ms = 0.0;
    let termination = loop {
        let m = metrics(&current)?;
        let (endpoint, limits) = residuals(&current)?;
        let rec = record(records.len(), &m, cfg.beta, endpoint, limits, ms);
        observer(&current, &rec);
        let total = rec.u_total;
        let previous = records.last().map(|r: &IterationRecord| r.u_total);
        records.push(rec);
        if total <= cfg.eps {
            break Termination::Converged;
        }
        if records.len() > cfg.n_max {
            break Termination::MaxIterations;
        }
        if let Some(prev) = previous {
            if cfg.stall_tol > 0.0 && (prev - total).abs() <= cfg.stall_tol * total.abs() {
                break Termination::Stalled;
            }
        }
        let started = Instant::now();
        current = advance(&current, &m.support)?;
        ms = started.elapsed().as_secs_f64() * 1e3;
    };
    Ok((
        current,
        IterationTrace {
            lambda: cfg.lambda,
            beta: cfg.beta,
            records,
            termination,
        },
    ))
}

/// Optimize from the straight line until the objective reaches `eps` or
/// `n_max` steps have been taken.
pub fn optimize(
    scene: &Scene,
    cfg: &OptimizerConfig,
    spec: &KernelSpec,
) -> Result<(KernelTrajectory, IterationTrace)> {
    optimize_observed(scene, cfg, spec, |_, _| {})
}

/// [`optimize`] with a callback on every iterate, including the first.
pub fn optimize_observed(
    scene: &Scene,
    cfg: &OptimizerConfig,
    spec: &KernelSpec,
    observer: impl FnMut(&KernelTrajectory, &IterationRecord),
) -> Result<(KernelTrajectory, IterationTrace)> {
    let reduce = cfg.validate()?;
    let init = KernelTrajectory::straight_line(scene.q_start().clone(), scene.q_goal().clone(), spec.clone())?;
    let arm = scene.arm();
    run_loop(
        cfg,
        init,
        |xi| {
            let support = objective::select_support(xi, scene, reduce)?;
            Ok(Metrics {
                u_obs: objective::evaluate(xi, scene, &support)?,
                norm2: xi.rkhs_norm2(),
                support,
            })
        },
        |xi| {
            Ok((
                xi.endpoint_residual()?,
                max_limit_violation(xi, arm, cfg.limit_check_samples)?,
            ))
        },
        |xi, support| {
            let next = step_with_support(xi, scene, cfg, support)?;
            Ok(project_joint_limits(&next, arm, cfg.limit_check_samples)?.0)
        },
        observer,
    )
}

/// Euclidean gradient on the waypoints: obstacle terms land on the nearest
/// waypoint, and `β·A·δ` accounts for the norm term of the objective.
pub fn waypoint_gradient(
    w: &WaypointTrajectory,
    scene: &Scene,
    support: &SupportSet,
    beta: f64,
) -> Result<DMatrix<f64>> {
    let m = w.len();
    let mut g = DMatrix::zeros(m, w.waypoints().ncols());
    for (t, gi) in objective::functional_gradient(w, scene, support)? {
        let i = w.nearest_index(t);
        let mut row = g.row_mut(i);
        row += gi.transpose();
    }
    if beta != 0.0 {
        let smooth = w.metric().interior() * w.deviation() * beta;
        let mut rows = g.rows_mut(1, m - 2);
        rows += smooth;
    }
    Ok(g)
}

/// Waypoint baseline under the same cost field and reduce operator.
pub fn optimize_waypoints(
    scene: &Scene,
    cfg: &OptimizerConfig,
    m: usize,
) -> Result<(WaypointTrajectory, IterationTrace)> {
    optimize_waypoints_observed(scene, cfg, m, |_, _| {})
}

pub fn optimize_waypoints_observed(
    scene: &Scene,
    cfg: &OptimizerConfig,
    m: usize,
    observer: impl FnMut(&WaypointTrajectory, &IterationRecord),
) -> Result<(WaypointTrajectory, IterationTrace)> {
    let reduce = cfg.validate()?;
    let init = WaypointTrajectory::straight_line(scene.q_start(), scene.q_goal(), m)?;
    let arm = scene.arm();
    run_loop(
        cfg,
        init,
        |w| {
            let support = objective::select_support(w, scene, reduce)?;
            Ok(Metrics {
                u_obs: objective::evaluate(w, scene, &support)?,
                norm2: w.metric_norm2(),
                support,
            })
        },
        |w| {
            let q0 = w.waypoints().row(0).transpose() - scene.q_start();
            let q1 = w.waypoints().row(w.len() - 1).transpose() - scene.q_goal();
            Ok((q0.amax().max(q1.amax()), max_limit_violation(w, arm, cfg.limit_check_samples)?))
        },
        |w, support| {
            let g = waypoint_gradient(w, scene, support, cfg.beta)?;
            let next = waypoint_update(w, &g, cfg.lambda)?;
            Ok(project_waypoint_limits(&next, arm)?.0)
        },
        observer,
    )
}

/// Checks that evaluating a kernel function at its own support equals the
/// Gram matrix times its coefficient stack, on `trials` random coefficient
/// draws. Returns the largest absolute deviation.
pub fn natural_gradient_check(spec: &KernelSpec, support: &[f64], trials: usize, seed: u64) -> Result<f64> {
    let g = gram(spec, support)?;
    let d = spec.dof();
    let n = support.len();
    let zero = DVector::zeros(d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let stack = DVector::from_fn(n * d, |_, _| rng.random_range(-1.0..1.0));
        let sections = (0..n).map(|i| (support[i], stack.rows(i * d, d).into_owned()));
        let f = KernelTrajectory::from_sections(zero.clone(), zero.clone(), spec.clone(), sections)?
            .with_max_support(usize::MAX);
        let predicted = g.values() * &stack;
        for (i, &t) in support.iter().enumerate() {
            let value = f.eval(t)?;
            let diff = (value - predicted.rows(i * d, d)).amax();
            worst = worst.max(diff);
        }
    }
    Ok(worst)
}
