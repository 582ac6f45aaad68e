//! Seeded comparison experiments.
//!
//! Three suites are available:
//!
//! * `kernel-comparison`: every kernel family and the waypoint baseline on
//!   the same random scenes, with the same reduce operator and step size.
//! * `cost-formulation`: the Gaussian kernel optimized under the max reduce
//!   and under Gauss-Legendre quadrature, both scored by the dense path
//!   integral.
//! * `large-step`: the bundled maze, solved with an aggressive step by the
//!   kernel method and the waypoint baseline, and with a conservative step by
//!   the baseline.
//!
//! Trials run on a rayon pool and are collected in trial order, so outputs
//! do not depend on the worker count. Wall times are only recorded when
//! `timing` is enabled.

pub mod report;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{KernelConfig, KernelSpec};
use crate::objective::{self, ReduceConfig, ReduceOp, DENSE_REFERENCE_SAMPLES};
use crate::optimizer::{self, IterationRecord, OptimizerConfig, Termination};
use crate::trajectory::{densify, ConfigPath};
use crate::world::{generate_scene, Scene, SceneTemplate};

pub use report::{
    emit_report, parse_results_csv, results_csv, summarize, summary_csv, ResultRow, SummaryRow,
};

/// Environment variable capping the number of bench workers.
pub const THREADS_ENV: &str = "RKHS_MOTION_THREADS";

/// Waypoint count of the common smoothness metric.
pub const SMOOTHNESS_WAYPOINTS: usize = 100;

/// Method name of the waypoint baseline.
pub const WAYPOINTS: &str = "waypoints";

/// Hand-authored corridor scene for the large-step experiment.
pub const MAZE_SCENE: &str = include_str!("../../scenes/maze.toml");

pub fn maze_scene() -> Result<Scene> {
    Scene::from_toml(MAZE_SCENE)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    KernelComparison,
    CostFormulation,
    LargeStep,
}

impl Suite {
    pub const ALL: [Suite; 3] = [Suite::KernelComparison, Suite::CostFormulation, Suite::LargeStep];

    pub fn name(self) -> &'static str {
        match self {
            Suite::KernelComparison => "kernel-comparison",
            Suite::CostFormulation => "cost-formulation",
            Suite::LargeStep => "large-step",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|suite| suite.name() == s).ok_or_else(|| {
            let names: Vec<_> = Suite::ALL.iter().map(|s| s.name()).collect();
            Error::Config(format!("unknown suite {s:?}; valid suites: {}", names.join(", ")))
        })
    }
}

/// Settings of the large-step experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LargeStepConfig {
    pub kernel: KernelConfig,
    /// Support points added per iteration.
    pub nx: usize,
    pub aggressive_lambda: f64,
    pub conservative_lambda: f64,
    /// Iteration cap of every run.
    pub max_iterations: usize,
}

impl Default for LargeStepConfig {
    fn default() -> Self {
        Self {
            kernel: KernelConfig::family("gaussian").with_sigma(DEFAULT_SIGMA),
            nx: 5,
            aggressive_lambda: 2.0,
            conservative_lambda: 20.0,
            max_iterations: 40,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub trials: usize,
    pub obstacles: usize,
    pub iterations: usize,
    /// Trial `i` uses scene seed `seed + i`.
    pub seed: u64,
    /// Waypoint count of the baseline.
    pub waypoints: usize,
    /// Kernels under test; the first one is also used by the
    /// cost-formulation suite.
    pub kernels: Vec<KernelConfig>,
    pub lambda: f64,
    /// Step regularizer of the baseline; `lambda` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub waypoint_lambda: Option<f64>,
    pub beta: f64,
    pub nx: usize,
    /// Grid points per section of the max reduce.
    pub max_grid: usize,
    /// Nodes of the quadrature reduce.
    pub quad_n: usize,
    pub limit_check_samples: usize,
    pub large_step: LargeStepConfig,
    /// Record wall times in `results.csv` (makes the file nondeterministic).
    pub timing: bool,
    /// Worker count; falls back to `RKHS_MOTION_THREADS`, then to all cores.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

pub const DEFAULT_SIGMA: f64 = 0.35;

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            obstacles: 12,
            iterations: 10,
            seed: 0,
            waypoints: optimizer::DEFAULT_WAYPOINTS,
            kernels: vec![
                KernelConfig::family("gaussian").with_sigma(DEFAULT_SIGMA),
                KernelConfig::family("laplacian").with_sigma(DEFAULT_SIGMA),
                KernelConfig::family("bspline"),
            ],
            lambda: 6.0,
            waypoint_lambda: None,
            beta: 0.5,
            nx: 4,
            max_grid: 32,
            quad_n: 20,
            limit_check_samples: 200,
            large_step: LargeStepConfig::default(),
            timing: false,
            threads: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.iterations == 0 || self.large_step.max_iterations == 0 {
            return Err(Error::Config("iteration counts must be at least 1".into()));
        }
        if self.kernels.is_empty() {
            return Err(Error::Config("at least one kernel is required".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        for k in &self.kernels {
            k.build(1)?;
        }
        self.large_step.kernel.build(1)?;
        self.optimizer(self.lambda, ReduceOp::MaxViolation { nx: self.nx, m: self.max_grid }, self.iterations)
            .validate()?;
        self.optimizer(self.baseline_lambda(), ReduceOp::Quadrature { n: self.quad_n }, self.iterations)
            .validate()?;
        let ls = &self.large_step;
        for lambda in [ls.aggressive_lambda, ls.conservative_lambda] {
            self.optimizer(lambda, self.max_reduce(ls.nx), ls.max_iterations).validate()?;
        }
        Ok(())
    }

    pub fn baseline_lambda(&self) -> f64 {
        self.waypoint_lambda.unwrap_or(self.lambda)
    }

    fn max_reduce(&self, nx: usize) -> ReduceOp {
        ReduceOp::MaxViolation { nx, m: self.max_grid }
    }

    /// Bench runs always take exactly `iterations` steps.
    fn optimizer(&self, lambda: f64, reduce: ReduceOp, iterations: usize) -> OptimizerConfig {
        OptimizerConfig {
            lambda,
            beta: self.beta,
            eps: 0.0,
            n_max: iterations,
            reduce: ReduceConfig::from_op(reduce),
            limit_check_samples: self.limit_check_samples,
            stall_tol: 0.0,
        }
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let threads = match self.threads {
            Some(n) => n,
            None => match std::env::var(THREADS_ENV) {
                Ok(v) => v.trim().parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| {
                    Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))
                })?,
                Err(_) => 0,
            },
        };
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))
    }
}

/// Measurements of one iterate.
#[derive(Clone, Debug, PartialEq)]
pub struct IterateMetrics {
    pub iter: usize,
    /// Dense path-integral obstacle cost.
    pub u_obs_dense: f64,
    /// Acceleration-metric smoothness after densifying to 100 waypoints.
    pub smoothness: f64,
    /// Smallest body-point obstacle distance over the dense samples.
    pub clearance: f64,
    /// Kernel support points, or the waypoint count of the baseline.
    pub support_size: usize,
    pub endpoint_residual: f64,
    pub limit_violation: f64,
    /// Total variation of the densified velocity profile.
    pub velocity_tv: f64,
    pub ms: f64,
}

impl IterateMetrics {
    pub fn success(&self) -> bool {
        self.clearance > 0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodRun {
    pub method: String,
    pub lambda: f64,
    /// Iterates `0..=n`, iterate 0 being the straight line.
    pub iterates: Vec<IterateMetrics>,
    pub termination: Termination,
}

impl MethodRun {
    pub fn last(&self) -> &IterateMetrics {
        self.iterates.last().expect("runs always record the initial iterate")
    }

    /// First iterate that is collision-free at every dense sample.
    pub fn first_success(&self) -> Option<usize> {
        self.iterates.iter().find(|m| m.success()).map(|m| m.iter)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub methods: Vec<MethodRun>,
}

impl TrialResult {
    pub fn method(&self, name: &str) -> Option<&MethodRun> {
        self.methods.iter().find(|m| m.method == name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialFailure {
    pub trial: usize,
    pub message: String,
}

/// Relative gap between the two cost formulations, both scored by the dense
/// path integral.
#[derive(Clone, Debug, PartialEq)]
pub struct FormulationGap {
    pub trials: usize,
    pub mean_max: f64,
    pub se_max: f64,
    pub mean_quadrature: f64,
    pub se_quadrature: f64,
    /// `mean_max / mean_quadrature − 1`.
    pub max_vs_quadrature: f64,
    /// `mean_quadrature / mean_max − 1`.
    pub quadrature_vs_max: f64,
    /// 95% interval of `max_vs_quadrature` from the paired differences.
    pub max_vs_quadrature_ci: (f64, f64),
    pub quadrature_vs_max_ci: (f64, f64),
    /// Trials in which the max run ended with the lower dense cost.
    pub max_wins: usize,
}

/// Outcome of one run of the large-step experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct LargeStepOutcome {
    pub method: String,
    pub lambda: f64,
    /// First collision-free iterate, if any within the cap.
    pub iterations_to_clear: Option<usize>,
    pub u_obs_dense: f64,
    pub smoothness: f64,
    /// Velocity total variation at the first collision-free iterate, or at
    /// the cap.
    pub velocity_tv: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SuiteDetails {
    KernelComparison,
    CostFormulation(FormulationGap),
    LargeStep(Vec<LargeStepOutcome>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub config: ExperimentConfig,
    pub trials: Vec<TrialResult>,
    pub failures: Vec<TrialFailure>,
    pub details: SuiteDetails,
}

impl SuiteReport {
    pub fn methods(&self) -> Vec<String> {
        self.trials
            .first()
            .map(|t| t.methods.iter().map(|m| m.method.clone()).collect())
            .unwrap_or_default()
    }

    /// Per-trial final value of `metric` for `method`.
    pub fn finals(&self, method: &str, metric: impl Fn(&IterateMetrics) -> f64) -> Vec<f64> {
        self.trials
            .iter()
            .filter_map(|t| t.method(method))
            .map(|m| metric(m.last()))
            .collect()
    }
}

/// Sample mean and standard error (`s/√n`, zero for fewer than two values).
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn measure<P: ConfigPath>(
    path: &P,
    scene: &Scene,
    record: &IterationRecord,
    support_size: usize,
) -> Result<IterateMetrics> {
    let dense = densify(path, SMOOTHNESS_WAYPOINTS)?;
    Ok(IterateMetrics {
        iter: record.iter,
        u_obs_dense: objective::u_obs(path, scene, ReduceOp::dense_reference())?,
        smoothness: dense.smoothness(),
        clearance: objective::min_clearance(path, scene, DENSE_REFERENCE_SAMPLES)?,
        support_size,
        endpoint_residual: record.endpoint_residual,
        limit_violation: record.limit_violation,
        velocity_tv: dense.velocity_total_variation(),
        ms: record.ms,
    })
}

/// A method under comparison.
#[derive(Clone, Debug)]
enum Method {
    Kernel { name: String, spec: KernelSpec },
    Waypoints { m: usize },
}

fn run_method(
    name: &str,
    method: &Method,
    scene: &Scene,
    cfg: &OptimizerConfig,
) -> Result<MethodRun> {
    let mut iterates = Vec::new();
    let mut failure = None;
    let termination = match method {
        Method::Kernel { spec, .. } => {
            let (_, trace) = optimizer::optimize_observed(scene, cfg, spec, |xi, rec| {
                if failure.is_none() {
                    match measure(xi, scene, rec, xi.support_len()) {
                        Ok(m) => iterates.push(m),
                        Err(e) => failure = Some(e),
                    }
                }
            })?;
            trace.termination
        }
        Method::Waypoints { m } => {
            let (_, trace) = optimizer::optimize_waypoints_observed(scene, cfg, *m, |w, rec| {
                if failure.is_none() {
                    match measure(w, scene, rec, w.len()) {
                        Ok(m) => iterates.push(m),
                        Err(e) => failure = Some(e),
                    }
                }
            })?;
            trace.termination
        }
    };
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(MethodRun {
        method: name.to_string(),
        lambda: cfg.lambda,
        iterates,
        termination,
    })
}

fn kernel_method(config: &KernelConfig, dof: usize) -> Result<Method> {
    Ok(Method::Kernel {
        name: config.family.clone(),
        spec: config.build(dof)?,
    })
}

/// Run `per_trial` on every seeded scene and split successes from failures.
fn run_trials(
    cfg: &ExperimentConfig,
    per_trial: impl Fn(&Scene) -> Result<Vec<MethodRun>> + Sync,
) -> Result<(Vec<TrialResult>, Vec<TrialFailure>)> {
    let template = SceneTemplate::planar_3dof();
    let pool = cfg.pool()?;
    let outcomes: Vec<(usize, u64, Result<Vec<MethodRun>>)> = pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|trial| {
                let seed = cfg.seed.wrapping_add(trial as u64);
                let result = generate_scene(seed, cfg.obstacles, &template).and_then(|s| per_trial(&s));
                (trial, seed, result)
            })
            .collect()
    });
    let mut trials = Vec::new();
    let mut failures = Vec::new();
    for (trial, seed, result) in outcomes {
        match result {
            Ok(methods) => trials.push(TrialResult { trial, seed, methods }),
            Err(e) => failures.push(TrialFailure {
                trial,
                message: e.to_string(),
            }),
        }
    }
    if failures.len() * 10 > cfg.trials {
        let detail: Vec<String> = failures
            .iter()
            .map(|f| format!("trial {}: {}", f.trial, f.message))
            .collect();
        return Err(Error::Bench(format!(
            "{} of {} trials failed\n{}",
            failures.len(),
            cfg.trials,
            detail.join("\n")
        )));
    }
    Ok((trials, failures))
}

/// Every configured kernel and the waypoint baseline on each seeded scene.
pub fn run_kernel_comparison(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let dof = SceneTemplate::planar_3dof().arm.dof();
    let mut methods = Vec::new();
    for k in &cfg.kernels {
        methods.push(kernel_method(k, dof)?);
    }
    methods.push(Method::Waypoints { m: cfg.waypoints });
    let reduce = cfg.max_reduce(cfg.nx);
    let (trials, failures) = run_trials(cfg, |scene| {
        methods
            .iter()
            .map(|method| match method {
                Method::Kernel { name, .. } => {
                    run_method(name, method, scene, &cfg.optimizer(cfg.lambda, reduce, cfg.iterations))
                }
                Method::Waypoints { .. } => run_method(
                    WAYPOINTS,
                    method,
                    scene,
                    &cfg.optimizer(cfg.baseline_lambda(), reduce, cfg.iterations),
                ),
            })
            .collect()
    })?;
    Ok(SuiteReport {
        suite: Suite::KernelComparison,
        config: cfg.clone(),
        trials,
        failures,
        details: SuiteDetails::KernelComparison,
    })
}

/// Method names of the cost-formulation suite.
pub const MAX_METHOD: &str = "max";
pub const QUADRATURE_METHOD: &str = "quadrature";

/// The first configured kernel under the max reduce and under quadrature.
pub fn run_cost_formulation_comparison(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let dof = SceneTemplate::planar_3dof().arm.dof();
    let method = kernel_method(&cfg.kernels[0], dof)?;
    let (trials, failures) = run_trials(cfg, |scene| {
        Ok(vec![
            run_method(
                MAX_METHOD,
                &method,
                scene,
                &cfg.optimizer(cfg.lambda, cfg.max_reduce(cfg.nx), cfg.iterations),
            )?,
            run_method(
                QUADRATURE_METHOD,
                &method,
                scene,
                &cfg.optimizer(cfg.lambda, ReduceOp::Quadrature { n: cfg.quad_n }, cfg.iterations),
            )?,
        ])
    })?;
    let gap = formulation_gap(&trials);
    Ok(SuiteReport {
        suite: Suite::CostFormulation,
        config: cfg.clone(),
        trials,
        failures,
        details: SuiteDetails::CostFormulation(gap),
    })
}

fn ratio_gap(num: f64, den: f64) -> f64 {
    if num == 0.0 && den == 0.0 {
        0.0
    } else {
        num / den - 1.0
    }
}

/// Gaps between the final dense costs of the `max` and `quadrature` runs.
pub fn formulation_gap(trials: &[TrialResult]) -> FormulationGap {
    let pairs: Vec<(f64, f64)> = trials
        .iter()
        .filter_map(|t| Some((t.method(MAX_METHOD)?.last().u_obs_dense, t.method(QUADRATURE_METHOD)?.last().u_obs_dense)))
        .collect();
    let max: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let quad: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let diff: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
    let (mean_max, se_max) = mean_se(&max);
    let (mean_quadrature, se_quadrature) = mean_se(&quad);
    let (mean_diff, se_diff) = mean_se(&diff);
    const Z95: f64 = 1.959_963_984_540_054;
    let half = Z95 * se_diff;
    let scaled = |d: f64, den: f64| if den == 0.0 { 0.0 } else { d / den };
    FormulationGap {
        trials: pairs.len(),
        mean_max,
        se_max,
        mean_quadrature,
        se_quadrature,
        max_vs_quadrature: ratio_gap(mean_max, mean_quadrature),
        quadrature_vs_max: ratio_gap(mean_quadrature, mean_max),
        max_vs_quadrature_ci: (
            scaled(mean_diff - half, mean_quadrature),
            scaled(mean_diff + half, mean_quadrature),
        ),
        quadrature_vs_max_ci: (
            scaled(-mean_diff - half, mean_max),
            scaled(-mean_diff + half, mean_max),
        ),
        max_wins: pairs.iter().filter(|p| p.0 < p.1).count(),
    }
}

/// Method names of the large-step suite.
pub const LARGE_STEP_KERNEL: &str = "gaussian-aggressive";
pub const LARGE_STEP_WAYPOINTS_AGGRESSIVE: &str = "waypoints-aggressive";
pub const LARGE_STEP_WAYPOINTS_CONSERVATIVE: &str = "waypoints-conservative";

/// Kernel method and baseline on the bundled maze.
pub fn run_large_step_experiment(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    run_large_step_on(cfg, &maze_scene()?)
}

/// The large-step experiment on an arbitrary scene.
pub fn run_large_step_on(cfg: &ExperimentConfig, scene: &Scene) -> Result<SuiteReport> {
    cfg.validate()?;
    let ls = &cfg.large_step;
    let spec = ls.kernel.build(scene.arm().dof())?;
    let reduce = cfg.max_reduce(ls.nx);
    let runs = [
        (LARGE_STEP_KERNEL, Method::Kernel { name: ls.kernel.family.clone(), spec }, ls.aggressive_lambda),
        (LARGE_STEP_WAYPOINTS_AGGRESSIVE, Method::Waypoints { m: cfg.waypoints }, ls.aggressive_lambda),
        (LARGE_STEP_WAYPOINTS_CONSERVATIVE, Method::Waypoints { m: cfg.waypoints }, ls.conservative_lambda),
    ];
    let pool = cfg.pool()?;
    let methods: Vec<MethodRun> = pool.install(|| {
        runs.par_iter()
            .map(|(name, method, lambda)| {
                run_method(name, method, scene, &cfg.optimizer(*lambda, reduce, ls.max_iterations))
            })
            .collect::<Result<_>>()
    })?;
    let outcomes = methods
        .iter()
        .map(|run| {
            let clear = run.first_success();
            let at = clear.map_or_else(|| run.last(), |i| &run.iterates[i]);
            LargeStepOutcome {
                method: run.method.clone(),
                lambda: run.lambda,
                iterations_to_clear: clear,
                u_obs_dense: at.u_obs_dense,
                smoothness: at.smoothness,
                velocity_tv: at.velocity_tv,
            }
        })
        .collect();
    Ok(SuiteReport {
        suite: Suite::LargeStep,
        config: cfg.clone(),
        trials: vec![TrialResult {
            trial: 0,
            seed: scene.seed(),
            methods,
        }],
        failures: Vec::new(),
        details: SuiteDetails::LargeStep(outcomes),
    })
}

pub fn run_suite(suite: Suite, cfg: &ExperimentConfig) -> Result<SuiteReport> {
    match suite {
        Suite::KernelComparison => run_kernel_comparison(cfg),
        Suite::CostFormulation => run_cost_formulation_comparison(cfg),
        Suite::LargeStep => run_large_step_experiment(cfg),
    }
}
