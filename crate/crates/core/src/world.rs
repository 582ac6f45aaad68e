//! Circular workspace obstacles, the obstacle cost field and scenes.

use nalgebra::{DVector, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arm::{ArmConfig, PlanarArm};
use crate::error::{check_dim, Error, Result};

/// Default clearance margin ε in meters.
pub const DEFAULT_EPSILON: f64 = 0.2;

/// Rejections tolerated by [`generate_scene`] before giving up.
pub const MAX_REJECTIONS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Circle {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

impl Circle {
    pub fn new(cx: f64, cy: f64, r: f64) -> Self {
        Self { cx, cy, r }
    }

    pub fn center(&self) -> Vector2<f64> {
        Vector2::new(self.cx, self.cy)
    }

    pub fn distance(&self, x: &Vector2<f64>) -> f64 {
        (x - self.center()).norm() - self.r
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    obstacles: Vec<Circle>,
    epsilon: f64,
    arm: PlanarArm,
    q_start: DVector<f64>,
    q_goal: DVector<f64>,
    seed: u64,
}

impl Scene {
    /// Validated scene: positive radii and margin, endpoints inside the joint
    /// limits and clear of every obstacle at every body point.
    pub fn new(
        obstacles: Vec<Circle>,
        epsilon: f64,
        arm: PlanarArm,
        q_start: DVector<f64>,
        q_goal: DVector<f64>,
        seed: u64,
    ) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::Scene(format!("epsilon must be positive, got {epsilon}")));
        }
        if let Some(c) = obstacles.iter().find(|c| !(c.r.is_finite() && c.r > 0.0)) {
            return Err(Error::Scene(format!("obstacle radius must be positive, got {}", c.r)));
        }
        check_dim(arm.dof(), q_start.len())?;
        check_dim(arm.dof(), q_goal.len())?;
        let scene = Self {
            obstacles,
            epsilon,
            arm,
            q_start,
            q_goal,
            seed,
        };
        for (name, q) in [("q_start", &scene.q_start), ("q_goal", &scene.q_goal)] {
            if !scene.arm.limit_violations(q).is_empty() {
                return Err(Error::Scene(format!("{name} violates the joint limits")));
            }
            let clearance = scene.clearance(q)?;
            if clearance <= 0.0 {
                return Err(Error::Scene(format!(
                    "{name} collides with an obstacle (clearance {clearance})"
                )));
            }
        }
        Ok(scene)
    }

    pub fn obstacles(&self) -> &[Circle] {
        &self.obstacles
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn arm(&self) -> &PlanarArm {
        &self.arm
    }

    pub fn q_start(&self) -> &DVector<f64> {
        &self.q_start
    }

    pub fn q_goal(&self) -> &DVector<f64> {
        &self.q_goal
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Nearest obstacle (first in index order on ties) and its signed
    /// distance; `None` for an empty scene.
    pub fn nearest(&self, x: &Vector2<f64>) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in self.obstacles.iter().enumerate() {
            let d = c.distance(x);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best
    }

    /// Signed distance to the closest obstacle surface, negative inside;
    /// `+∞` with no obstacles.
    pub fn distance(&self, x: &Vector2<f64>) -> f64 {
        self.nearest(x).map_or(f64::INFINITY, |(_, d)| d)
    }

    /// Hinge cost: `−d + ε/2` inside, `(d − ε)²/(2ε)` within the margin,
    /// zero beyond it.
    pub fn cost(&self, x: &Vector2<f64>) -> f64 {
        hinge(self.distance(x), self.epsilon)
    }

    /// Analytic gradient of [`Scene::cost`].
    pub fn grad_cost(&self, x: &Vector2<f64>) -> Vector2<f64> {
        let Some((i, d)) = self.nearest(x) else {
            return Vector2::zeros();
        };
        let slope = hinge_slope(d, self.epsilon);
        if slope == 0.0 {
            return Vector2::zeros();
        }
        let offset = x - self.obstacles[i].center();
        let norm = offset.norm();
        // at the exact center any direction is a valid subgradient
        let dir = if norm > 0.0 { offset / norm } else { Vector2::x() };
        dir * slope
    }

    /// Minimum signed distance over all body points at configuration `q`.
    pub fn clearance(&self, q: &DVector<f64>) -> Result<f64> {
        let mut min = f64::INFINITY;
        for &u in self.arm.body_points() {
            min = min.min(self.distance(&self.arm.fk(q, u)?));
        }
        Ok(min)
    }

    pub fn to_file(&self) -> SceneFile {
        SceneFile {
            seed: self.seed,
            epsilon: self.epsilon,
            q_start: self.q_start.iter().copied().collect(),
            q_goal: self.q_goal.iter().copied().collect(),
            arm: self.arm.to_config(),
            obstacles: self.obstacles.clone(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        self.to_file().to_toml()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        SceneFile::from_toml(text)?.build()
    }
}

pub(crate) fn hinge(d: f64, eps: f64) -> f64 {
    if d < 0.0 {
        -d + 0.5 * eps
    } else if d <= eps {
        (d - eps).powi(2) / (2.0 * eps)
    } else {
        0.0
    }
}

/// `dc/dd`; at `d = 0` both pieces give −1.
pub(crate) fn hinge_slope(d: f64, eps: f64) -> f64 {
    if d <= 0.0 {
        -1.0
    } else if d <= eps {
        (d - eps) / eps
    } else {
        0.0
    }
}

/// On-disk scene description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub seed: u64,
    pub epsilon: f64,
    pub q_start: Vec<f64>,
    pub q_goal: Vec<f64>,
    pub arm: ArmConfig,
    #[serde(default)]
    pub obstacles: Vec<Circle>,
}

impl SceneFile {
    pub fn build(&self) -> Result<Scene> {
        Scene::new(
            self.obstacles.clone(),
            self.epsilon,
            self.arm.build()?,
            DVector::from_vec(self.q_start.clone()),
            DVector::from_vec(self.q_goal.clone()),
            self.seed,
        )
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Everything about a random scene except the obstacles themselves.
#[derive(Clone, Debug)]
pub struct SceneTemplate {
    pub arm: PlanarArm,
    pub q_start: DVector<f64>,
    pub q_goal: DVector<f64>,
    pub epsilon: f64,
    /// Distance range of obstacle centers from the arm base.
    pub center_distance: (f64, f64),
    /// Bearing range of obstacle centers in radians.
    pub center_bearing: (f64, f64),
    pub radius_range: (f64, f64),
}

impl SceneTemplate {
    /// Three-link desk arm (links summing to 3 m) sweeping from lower right
    /// to upper right through the front of the workspace.
    pub fn planar_3dof() -> Self {
        let arm = PlanarArm::new(
            vec![1.2, 1.0, 0.8],
            vec![(-3.0, 3.0), (-2.5, 2.5), (-2.5, 2.5)],
            crate::arm::DEFAULT_BODY_POINTS_PER_LINK,
        )
        .expect("valid default arm");
        Self {
            arm,
            q_start: DVector::from_row_slice(&[-1.3, 0.6, 0.5]),
            q_goal: DVector::from_row_slice(&[1.3, -0.6, -0.5]),
            epsilon: DEFAULT_EPSILON,
            center_distance: (1.8, 3.2),
            center_bearing: (-1.2, 1.2),
            radius_range: (0.1, 0.3),
        }
    }
}

/// Reproducible random scene. Centers are uniform by area over the annular
/// sector given by the template; obstacles that come within ε of any body
/// point at the start or goal pose are rejected and redrawn.
pub fn generate_scene(seed: u64, n_obstacles: usize, template: &SceneTemplate) -> Result<Scene> {
    let (dmin, dmax) = template.center_distance;
    let (amin, amax) = template.center_bearing;
    let (rmin, rmax) = template.radius_range;
    if !(0.0 <= dmin && dmin < dmax) || !(amin < amax) || !(0.0 < rmin && rmin <= rmax) {
        return Err(Error::Config("invalid obstacle placement ranges".into()));
    }
    let arm = &template.arm;
    let mut endpoint_points = Vec::new();
    for q in [&template.q_start, &template.q_goal] {
        for &u in arm.body_points() {
            endpoint_points.push(arm.fk(q, u)?);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obstacles = Vec::with_capacity(n_obstacles);
    let mut rejections = 0;
    while obstacles.len() < n_obstacles {
        let dist = rng.random_range(dmin * dmin..dmax * dmax).sqrt();
        let bearing = rng.random_range(amin..amax);
        let r = if rmin == rmax { rmin } else { rng.random_range(rmin..rmax) };
        let c = Circle::new(dist * bearing.cos(), dist * bearing.sin(), r);
        if endpoint_points.iter().all(|p| c.distance(p) > template.epsilon) {
            obstacles.push(c);
        } else {
            rejections += 1;
            if rejections > MAX_REJECTIONS {
                return Err(Error::Generation(rejections));
            }
        }
    }
    Scene::new(
        obstacles,
        template.epsilon,
        arm.clone(),
        template.q_start.clone(),
        template.q_goal.clone(),
        seed,
    )
}
