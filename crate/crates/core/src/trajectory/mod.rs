//! Trajectory representations.
//!
//! [`KernelTrajectory`] stores the straight line between the endpoints
//! explicitly and carries every deviation as kernel sections, so a freshly
//! initialized trajectory has no support points and zero RKHS norm.
//! [`WaypointTrajectory`] is the dense waypoint baseline.

mod waypoint;

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, check_time, Error, Result};
use crate::kernels::KernelSpec;

pub use waypoint::{densify, waypoint_update, AccelerationMetric, WaypointTrajectory};

/// Default cap on the number of support points of a kernel trajectory.
pub const DEFAULT_MAX_SUPPORT: usize = 512;

/// Support times closer than this are merged.
pub const MERGE_TOL: f64 = 1e-12;

/// Anything that maps time in [0, 1] to a configuration.
pub trait ConfigPath {
    fn dof(&self) -> usize;

    fn config(&self, t: f64) -> Result<DVector<f64>>;

    /// First time derivative; `Error::Unsupported` when the representation
    /// is not differentiable.
    fn velocity(&self, t: f64) -> Result<DVector<f64>>;

    /// Speed `‖ξ'(t)‖`, falling back to a central difference when the
    /// representation has no analytic derivative.
    fn speed(&self, t: f64) -> Result<f64> {
        match self.velocity(t) {
            Ok(v) => Ok(v.norm()),
            Err(Error::Unsupported(_)) => {
                const H: f64 = 1e-6;
                let (lo, hi) = ((t - H).max(0.0), (t + H).min(1.0));
                let diff = self.config(hi)? - self.config(lo)?;
                Ok(diff.norm() / (hi - lo))
            }
            Err(e) => Err(e),
        }
    }
}

/// `ξ(t) = q_start + (q_goal − q_start)·t + Σᵢ k(tᵢ, t)·B·aᵢ`.
#[derive(Clone, Debug)]
pub struct KernelTrajectory {
    spec: KernelSpec,
    q_start: DVector<f64>,
    q_goal: DVector<f64>,
    times: Vec<f64>,
    coeffs: Vec<DVector<f64>>,
    max_support: usize,
    /// `Σᵢ φ(tᵢ) aᵢᵀ` for kernels with a finite feature map.
    features: Option<DMatrix<f64>>,
}

impl KernelTrajectory {
    /// Straight line from `q_start` to `q_goal` with an empty support.
    pub fn straight_line(q_start: DVector<f64>, q_goal: DVector<f64>, spec: KernelSpec) -> Result<Self> {
        check_dim(spec.dof(), q_start.len())?;
        check_dim(spec.dof(), q_goal.len())?;
        Ok(Self {
            spec,
            q_start,
            q_goal,
            times: Vec::new(),
            coeffs: Vec::new(),
            max_support: DEFAULT_MAX_SUPPORT,
            features: None,
        })
    }

    /// Build from explicit sections; duplicates are merged.
    pub fn from_sections(
        q_start: DVector<f64>,
        q_goal: DVector<f64>,
        spec: KernelSpec,
        sections: impl IntoIterator<Item = (f64, DVector<f64>)>,
    ) -> Result<Self> {
        let traj = Self::straight_line(q_start, q_goal, spec)?;
        traj.updated(1.0, sections)
    }

    pub fn with_max_support(mut self, cap: usize) -> Self {
        self.max_support = cap;
        self
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn q_start(&self) -> &DVector<f64> {
        &self.q_start
    }

    pub fn q_goal(&self) -> &DVector<f64> {
        &self.q_goal
    }

    pub fn support(&self) -> &[f64] {
        &self.times
    }

    pub fn support_len(&self) -> usize {
        self.times.len()
    }

    pub fn max_support(&self) -> usize {
        self.max_support
    }

    /// Coefficients as an N×D matrix (row `i` is `aᵢ`).
    pub fn coeffs(&self) -> DMatrix<f64> {
        let d = self.spec.dof();
        DMatrix::from_fn(self.times.len(), d, |i, j| self.coeffs[i][j])
    }

    pub fn sections(&self) -> impl Iterator<Item = (f64, &DVector<f64>)> {
        self.times.iter().copied().zip(self.coeffs.iter())
    }

    pub fn line(&self, t: f64) -> DVector<f64> {
        &self.q_start + (&self.q_goal - &self.q_start) * t
    }

    /// Kernel part of the trajectory at `t` (deviation from the line).
    pub fn deviation(&self, t: f64) -> Result<DVector<f64>> {
        check_time(t)?;
        if let Some(acc) = self.feature_eval(t, 0)? {
            return Ok(self.spec.couple(&acc));
        }
        let mut acc = DVector::zeros(self.spec.dof());
        for (ti, a) in self.sections() {
            let k = self.spec.eval_scalar(ti, t)?;
            if k != 0.0 {
                acc.axpy(k, a, 1.0);
            }
        }
        Ok(self.spec.couple(&acc))
    }

    pub fn eval(&self, t: f64) -> Result<DVector<f64>> {
        Ok(self.line(t) + self.deviation(t)?)
    }

    /// Analytic time derivative of order 1 or 2.
    pub fn eval_derivative(&self, t: f64, order: usize) -> Result<DVector<f64>> {
        check_time(t)?;
        if !(1..=2).contains(&order) {
            return Err(Error::Unsupported(format!(
                "trajectory derivatives of order {order}"
            )));
        }
        let acc = match self.feature_eval(t, order)? {
            Some(acc) => acc,
            None => {
                let mut acc = DVector::zeros(self.spec.dof());
                for (ti, a) in self.sections() {
                    let k = self.spec.section_derivative(ti, t, order)?;
                    if k != 0.0 {
                        acc.axpy(k, a, 1.0);
                    }
                }
                acc
            }
        };
        let mut out = self.spec.couple(&acc);
        if order == 1 {
            out += &self.q_goal - &self.q_start;
        }
        Ok(out)
    }

    fn feature_eval(&self, t: f64, m: usize) -> Result<Option<DVector<f64>>> {
        let Some(c) = &self.features else {
            return Ok(None);
        };
        let Some(phi) = self.spec.features(t, m) else {
            return Ok(None);
        };
        Ok(Some(c.tr_mul(&DVector::from_vec(phi?))))
    }

    /// `‖ξ − line‖²_H = Σᵢⱼ k(tᵢ, tⱼ) aᵢᵀ B aⱼ`.
    pub fn rkhs_norm2(&self) -> f64 {
        let n = self.times.len();
        let coupled: Vec<DVector<f64>> = self.coeffs.iter().map(|a| self.spec.couple(a)).collect();
        let mut acc = 0.0;
        for i in 0..n {
            for (j, cj) in coupled.iter().enumerate().skip(i) {
                let k = self
                    .spec
                    .eval_scalar(self.times[i], self.times[j])
                    .expect("support times are validated on insertion");
                if k == 0.0 {
                    continue;
                }
                let term = k * self.coeffs[i].dot(cj);
                acc += if i == j { term } else { 2.0 * term };
            }
        }
        acc.max(0.0)
    }

    /// `⟨ξ − line, other − line⟩_H` with both trajectories in the same space.
    pub fn rkhs_inner(&self, other: &KernelTrajectory) -> Result<f64> {
        check_dim(self.spec.dof(), other.spec.dof())?;
        crate::kernels::rkhs_inner(
            &self.spec,
            &self.times,
            &self.coeffs(),
            &other.times,
            &other.coeffs(),
        )
    }

    /// New trajectory with existing coefficients scaled by `shrink` and the
    /// given sections appended, then canonicalized.
    pub fn updated(
        &self,
        shrink: f64,
        extra: impl IntoIterator<Item = (f64, DVector<f64>)>,
    ) -> Result<Self> {
        let d = self.spec.dof();
        let mut sections: Vec<(f64, DVector<f64>)> = self
            .sections()
            .map(|(t, a)| (t, a * shrink))
            .collect();
        for (t, a) in extra {
            check_time(t)?;
            check_dim(d, a.len())?;
            sections.push((t, a));
        }
        sections.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut times: Vec<f64> = Vec::with_capacity(sections.len());
        let mut coeffs: Vec<DVector<f64>> = Vec::with_capacity(sections.len());
        for (t, a) in sections {
            match times.last() {
                Some(&last) if (t - last).abs() <= MERGE_TOL => {
                    *coeffs.last_mut().expect("parallel vectors") += a;
                }
                _ => {
                    times.push(t);
                    coeffs.push(a);
                }
            }
        }
        if times.len() > self.max_support {
            return Err(Error::SupportOverflow {
                size: times.len(),
                cap: self.max_support,
            });
        }
        let features = feature_sum(&self.spec, &times, &coeffs)?;
        Ok(Self {
            spec: self.spec.clone(),
            q_start: self.q_start.clone(),
            q_goal: self.q_goal.clone(),
            times,
            coeffs,
            max_support: self.max_support,
            features,
        })
    }

    /// Largest endpoint deviation `max(‖ξ(0) − q_start‖∞, ‖ξ(1) − q_goal‖∞)`.
    pub fn endpoint_residual(&self) -> Result<f64> {
        let r0 = (self.eval(0.0)? - &self.q_start).amax();
        let r1 = (self.eval(1.0)? - &self.q_goal).amax();
        Ok(r0.max(r1))
    }

    /// CSV with header `t,q_1,...,q_D` at `samples` uniform times.
    pub fn trajectory_csv(&self, samples: usize) -> Result<String> {
        path_csv(self, samples)
    }

    /// CSV with header `t_i,a_i1,...,a_iD`.
    pub fn support_csv(&self) -> String {
        let d = self.spec.dof();
        let mut out = String::from("t_i");
        for k in 1..=d {
            let _ = write!(out, ",a_i{k}");
        }
        out.push('\n');
        for (t, a) in self.sections() {
            let _ = write!(out, "{t}");
            for v in a.iter() {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

fn feature_sum(spec: &KernelSpec, times: &[f64], coeffs: &[DVector<f64>]) -> Result<Option<DMatrix<f64>>> {
    let mut sum: Option<DMatrix<f64>> = None;
    for (&t, a) in times.iter().zip(coeffs) {
        let Some(phi) = spec.features(t, 0) else {
            return Ok(None);
        };
        let phi = DVector::from_vec(phi?);
        let term = &phi * a.transpose();
        match &mut sum {
            Some(s) => *s += term,
            None => sum = Some(term),
        }
    }
    Ok(sum)
}

impl ConfigPath for KernelTrajectory {
    fn dof(&self) -> usize {
        self.spec.dof()
    }

    fn config(&self, t: f64) -> Result<DVector<f64>> {
        self.eval(t)
    }

    fn velocity(&self, t: f64) -> Result<DVector<f64>> {
        self.eval_derivative(t, 1)
    }
}

/// CSV with header `t,q_1,...,q_D` sampled at `samples` uniform times.
pub fn path_csv<P: ConfigPath + ?Sized>(path: &P, samples: usize) -> Result<String> {
    if samples < 2 {
        return Err(Error::Config("trajectory export needs at least 2 samples".into()));
    }
    let mut out = String::from("t");
    for k in 1..=path.dof() {
        let _ = write!(out, ",q_{k}");
    }
    out.push('\n');
    for i in 0..samples {
        let t = i as f64 / (samples - 1) as f64;
        let q = path.config(t)?;
        let _ = write!(out, "{t}");
        for v in q.iter() {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    Ok(out)
}
