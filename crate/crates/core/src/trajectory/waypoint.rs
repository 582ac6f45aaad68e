use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};

use super::ConfigPath;
use crate::error::{check_dim, check_time, Error, Result};

/// Finite-difference acceleration metric on `m` uniform waypoints with both
/// endpoints clamped.
///
/// With `K` the (m−2)×m second-difference operator and `h = 1/(m−1)`, the
/// raw metric on interior waypoints is `KᵀK / h³` (a Riemann sum of
/// `∫ ξ''² dt`). It is rescaled so that the largest diagonal entry of `A⁻¹`
/// is one, matching the unit peak of a radial kernel section.
#[derive(Clone, Debug)]
pub struct AccelerationMetric {
    m: usize,
    scale: f64,
    interior: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

impl AccelerationMetric {
    pub fn new(m: usize) -> Result<Self> {
        if m < 3 {
            return Err(Error::Config(format!("waypoint count must be at least 3, got {m}")));
        }
        let n = m - 2;
        let h = 1.0 / (m - 1) as f64;
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            k[(i, i)] = -2.0;
            if i > 0 {
                k[(i, i - 1)] = 1.0;
            }
            if i + 1 < n {
                k[(i, i + 1)] = 1.0;
            }
        }
        let raw = k.transpose() * &k / h.powi(3);
        let raw_inv = Cholesky::new(raw.clone())
            .ok_or(Error::Singular("acceleration metric"))?
            .inverse();
        let scale = raw_inv.diagonal().max();
        let interior = raw * scale;
        let mut inverse = raw_inv / scale;
        // symmetrize away roundoff so the waypoint kernel is exactly symmetric
        inverse = (&inverse + inverse.transpose()) * 0.5;
        Ok(Self {
            m,
            scale,
            interior,
            inverse,
        })
    }

    pub fn waypoints(&self) -> usize {
        self.m
    }

    /// Interior (m−2)×(m−2) metric `A`.
    pub fn interior(&self) -> &DMatrix<f64> {
        &self.interior
    }

    /// `A⁻¹` on interior waypoints.
    pub fn interior_inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    /// `A⁻¹` embedded in an m×m matrix with zero rows and columns for the
    /// clamped endpoints.
    pub fn padded_inverse(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.m, self.m);
        out.view_mut((1, 1), (self.m - 2, self.m - 2))
            .copy_from(&self.inverse);
        out
    }

    /// `½ Σ_d ‖K ξ_d‖² · scale / h³` over full waypoints (endpoints
    /// included). Zero for any straight line.
    pub fn smoothness(&self, waypoints: &DMatrix<f64>) -> f64 {
        let h = 1.0 / (self.m - 1) as f64;
        let factor = self.scale / h.powi(3);
        let mut acc = 0.0;
        for col in waypoints.column_iter() {
            for i in 1..self.m - 1 {
                let acc2 = col[i - 1] - 2.0 * col[i] + col[i + 1];
                acc += acc2 * acc2;
            }
        }
        0.5 * factor * acc
    }
}

/// Dense waypoint path with clamped endpoints, interpolated linearly.
#[derive(Clone, Debug)]
pub struct WaypointTrajectory {
    waypoints: DMatrix<f64>,
    metric: Arc<AccelerationMetric>,
}

impl WaypointTrajectory {
    pub fn new(waypoints: DMatrix<f64>, metric: Arc<AccelerationMetric>) -> Result<Self> {
        check_dim(metric.waypoints(), waypoints.nrows())?;
        Ok(Self { waypoints, metric })
    }

    pub fn straight_line(q_start: &DVector<f64>, q_goal: &DVector<f64>, m: usize) -> Result<Self> {
        check_dim(q_start.len(), q_goal.len())?;
        let metric = Arc::new(AccelerationMetric::new(m)?);
        let waypoints = DMatrix::from_fn(m, q_start.len(), |i, d| {
            let t = i as f64 / (m - 1) as f64;
            q_start[d] + (q_goal[d] - q_start[d]) * t
        });
        Ok(Self { waypoints, metric })
    }

    /// M×D matrix of waypoints; rows 0 and M−1 are the fixed endpoints.
    pub fn waypoints(&self) -> &DMatrix<f64> {
        &self.waypoints
    }

    pub fn metric(&self) -> &AccelerationMetric {
        &self.metric
    }

    pub fn len(&self) -> usize {
        self.waypoints.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.nrows() == 0
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 / (self.len() - 1) as f64
    }

    /// Index of the waypoint nearest to `t`: `round(t·(M−1))`.
    pub fn nearest_index(&self, t: f64) -> usize {
        ((t * (self.len() - 1) as f64).round() as usize).min(self.len() - 1)
    }

    pub fn smoothness(&self) -> f64 {
        self.metric.smoothness(&self.waypoints)
    }

    /// Interior deviation from the straight line between the endpoints.
    pub fn deviation(&self) -> DMatrix<f64> {
        let m = self.len();
        let first = self.waypoints.row(0).into_owned();
        let last = self.waypoints.row(m - 1).into_owned();
        DMatrix::from_fn(m - 2, self.waypoints.ncols(), |i, d| {
            let t = self.time(i + 1);
            self.waypoints[(i + 1, d)] - (first[d] + (last[d] - first[d]) * t)
        })
    }

    /// `Σ_d δ_dᵀ A δ_d` for the interior deviation `δ` from the line.
    pub fn metric_norm2(&self) -> f64 {
        let dev = self.deviation();
        let a_dev = self.metric.interior() * &dev;
        dev.dot(&a_dev)
    }

    /// Total variation of the finite-difference velocity profile, summed over
    /// joints. Large values indicate an oscillating path.
    pub fn velocity_total_variation(&self) -> f64 {
        let m = self.len();
        let scale = (m - 1) as f64;
        let mut tv = 0.0;
        for col in self.waypoints.column_iter() {
            let vel: Vec<f64> = (0..m - 1).map(|i| (col[i + 1] - col[i]) * scale).collect();
            tv += vel.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>();
        }
        tv
    }

    pub(crate) fn with_interior(&self, interior: DMatrix<f64>) -> Self {
        let mut waypoints = self.waypoints.clone();
        let m = self.len();
        waypoints.view_mut((1, 0), (m - 2, waypoints.ncols())).copy_from(&interior);
        Self {
            waypoints,
            metric: Arc::clone(&self.metric),
        }
    }

    pub(crate) fn interior(&self) -> DMatrix<f64> {
        let m = self.len();
        self.waypoints.rows(1, m - 2).into_owned()
    }

    fn segment(&self, t: f64) -> (usize, f64) {
        let scale = (self.len() - 1) as f64;
        let x = t * scale;
        let i = (x.floor() as usize).min(self.len() - 2);
        (i, x - i as f64)
    }
}

impl ConfigPath for WaypointTrajectory {
    fn dof(&self) -> usize {
        self.waypoints.ncols()
    }

    fn config(&self, t: f64) -> Result<DVector<f64>> {
        check_time(t)?;
        let (i, frac) = self.segment(t);
        let a = self.waypoints.row(i).transpose();
        let b = self.waypoints.row(i + 1).transpose();
        Ok(a * (1.0 - frac) + b * frac)
    }

    fn velocity(&self, t: f64) -> Result<DVector<f64>> {
        check_time(t)?;
        let (i, _) = self.segment(t);
        let scale = (self.len() - 1) as f64;
        Ok((self.waypoints.row(i + 1) - self.waypoints.row(i)).transpose() * scale)
    }
}

/// Sample `path` at `m` uniform times (endpoints included) and attach the
/// acceleration metric.
pub fn densify<P: ConfigPath + ?Sized>(path: &P, m: usize) -> Result<WaypointTrajectory> {
    let metric = Arc::new(AccelerationMetric::new(m)?);
    let d = path.dof();
    let mut waypoints = DMatrix::zeros(m, d);
    for i in 0..m {
        let t = i as f64 / (m - 1) as f64;
        waypoints.set_row(i, &path.config(t)?.transpose());
    }
    Ok(WaypointTrajectory { waypoints, metric })
}

/// One covariant waypoint step: interior waypoints move by
/// `−(1/λ)·A⁻¹·grad`, endpoints stay fixed. Rows 0 and M−1 of `euclid_grad`
/// are ignored.
pub fn waypoint_update(
    traj: &WaypointTrajectory,
    euclid_grad: &DMatrix<f64>,
    lambda: f64,
) -> Result<WaypointTrajectory> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Config(format!("lambda must be positive, got {lambda}")));
    }
    check_dim(traj.len(), euclid_grad.nrows())?;
    check_dim(traj.dof(), euclid_grad.ncols())?;
    let m = traj.len();
    let grad_int = euclid_grad.rows(1, m - 2);
    let step = traj.metric.interior_inverse() * grad_int / lambda;
    Ok(traj.with_interior(traj.interior() - step))
}
