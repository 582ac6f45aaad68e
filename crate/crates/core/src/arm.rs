//! Planar serial arm with revolute joints.
//!
//! Joint `k` sits at the end of link `k−1` (joint 0 at the origin) and its
//! link points along the cumulative angle `θ_k = Σ_{j≤k} q_j`.

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Default number of body points sampled along each link.
pub const DEFAULT_BODY_POINTS_PER_LINK: usize = 3;

/// A point on the arm: `fraction` of the way along link `link`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BodyPoint {
    pub link: usize,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanarArm {
    links: Vec<f64>,
    joint_limits: Vec<(f64, f64)>,
    body_points_per_link: usize,
    body_points: Vec<BodyPoint>,
}

/// Fractions along a link for `k` body points: evenly spread over
/// [0.25, 1.0], so `k = 3` gives (0.25, 0.625, 1.0).
pub fn body_fractions(k: usize) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..k)
            .map(|i| 0.25 + 0.75 * i as f64 / (k - 1) as f64)
            .collect(),
    }
}

impl PlanarArm {
    pub fn new(links: Vec<f64>, joint_limits: Vec<(f64, f64)>, body_points_per_link: usize) -> Result<Self> {
        if links.is_empty() {
            return Err(Error::Config("arm needs at least one link".into()));
        }
        check_dim(links.len(), joint_limits.len())?;
        if let Some(l) = links.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::Config(format!("link lengths must be positive, got {l}")));
        }
        if let Some((lo, hi)) = joint_limits.iter().find(|(lo, hi)| !(lo < hi)) {
            return Err(Error::Config(format!("joint limit [{lo}, {hi}] is empty")));
        }
        if body_points_per_link == 0 {
            return Err(Error::Config("body_points_per_link must be at least 1".into()));
        }
        let fractions = body_fractions(body_points_per_link);
        let body_points = (0..links.len())
            .flat_map(|link| fractions.iter().map(move |&fraction| BodyPoint { link, fraction }))
            .collect();
        Ok(Self {
            links,
            joint_limits,
            body_points_per_link,
            body_points,
        })
    }

    /// Arm with the same symmetric limit `[-limit, limit]` on every joint.
    pub fn uniform_limits(links: Vec<f64>, limit: f64) -> Result<Self> {
        let n = links.len();
        Self::new(links, vec![(-limit, limit); n], DEFAULT_BODY_POINTS_PER_LINK)
    }

    pub fn dof(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[f64] {
        &self.links
    }

    pub fn joint_limits(&self) -> &[(f64, f64)] {
        &self.joint_limits
    }

    pub fn body_points(&self) -> &[BodyPoint] {
        &self.body_points
    }

    pub fn body_points_per_link(&self) -> usize {
        self.body_points_per_link
    }

    pub fn reach(&self) -> f64 {
        self.links.iter().sum()
    }

    pub fn end_effector(&self) -> BodyPoint {
        BodyPoint {
            link: self.links.len() - 1,
            fraction: 1.0,
        }
    }

    fn check_point(&self, u: BodyPoint) -> Result<()> {
        if u.link < self.links.len() && (0.0..=1.0).contains(&u.fraction) {
            Ok(())
        } else {
            Err(Error::BodyPoint {
                link: u.link,
                fraction: u.fraction,
            })
        }
    }

    /// Joint origins `p_0 = 0, …, p_D` (the last one is the link tip).
    pub fn joint_origins(&self, q: &DVector<f64>) -> Result<Vec<Vector2<f64>>> {
        check_dim(self.dof(), q.len())?;
        let mut out = Vec::with_capacity(self.dof() + 1);
        let mut p = Vector2::zeros();
        let mut theta = 0.0;
        out.push(p);
        for (k, len) in self.links.iter().enumerate() {
            theta += q[k];
            p += Vector2::new(theta.cos(), theta.sin()) * *len;
            out.push(p);
        }
        Ok(out)
    }

    /// Workspace position of body point `u`.
    pub fn fk(&self, q: &DVector<f64>, u: BodyPoint) -> Result<Vector2<f64>> {
        check_dim(self.dof(), q.len())?;
        self.check_point(u)?;
        let mut p = Vector2::zeros();
        let mut theta = 0.0;
        for k in 0..=u.link {
            theta += q[k];
            let dir = Vector2::new(theta.cos(), theta.sin());
            let len = if k == u.link {
                self.links[k] * u.fraction
            } else {
                self.links[k]
            };
            p += dir * len;
        }
        Ok(p)
    }

    /// 2×D Jacobian `∂fk/∂q` at body point `u`. Column `j` is the
    /// perpendicular of the vector from joint `j` to the point; columns of
    /// joints beyond the point's link are zero.
    pub fn jacobian(&self, q: &DVector<f64>, u: BodyPoint) -> Result<DMatrix<f64>> {
        let origins = self.joint_origins(q)?;
        self.check_point(u)?;
        let x = self.fk(q, u)?;
        let mut jac = DMatrix::zeros(2, self.dof());
        for j in 0..=u.link {
            let r = x - origins[j];
            jac[(0, j)] = -r.y;
            jac[(1, j)] = r.x;
        }
        Ok(jac)
    }

    /// Joints outside their limits, with the signed distance past the
    /// violated bound (positive above `hi`, negative below `lo`). Limits are
    /// closed intervals.
    pub fn limit_violations(&self, q: &DVector<f64>) -> Vec<(usize, f64)> {
        self.joint_limits
            .iter()
            .zip(q.iter())
            .enumerate()
            .filter_map(|(d, (&(lo, hi), &v))| {
                if v > hi {
                    Some((d, v - hi))
                } else if v < lo {
                    Some((d, v - lo))
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn to_config(&self) -> ArmConfig {
        ArmConfig {
            links: self.links.clone(),
            joint_limits: self.joint_limits.iter().map(|&(lo, hi)| [lo, hi]).collect(),
            body_points_per_link: self.body_points_per_link,
        }
    }
}

/// Serialized arm description inside a scene file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmConfig {
    pub links: Vec<f64>,
    pub joint_limits: Vec<[f64; 2]>,
    #[serde(default = "default_body_points")]
    pub body_points_per_link: usize,
}

fn default_body_points() -> usize {
    DEFAULT_BODY_POINTS_PER_LINK
}

impl ArmConfig {
    pub fn build(&self) -> Result<PlanarArm> {
        PlanarArm::new(
            self.links.clone(),
            self.joint_limits.iter().map(|&[lo, hi]| (lo, hi)).collect(),
            self.body_points_per_link,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn two_link() -> PlanarArm {
        PlanarArm::uniform_limits(vec![1.0, 1.0], PI).unwrap()
    }

    fn q(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    #[test]
    fn forward_kinematics_examples() {
        let arm = two_link();
        let ee = arm.end_effector();
        let close = |a: Vector2<f64>, x: f64, y: f64| (a - Vector2::new(x, y)).norm() < 1e-12;
        assert!(close(arm.fk(&q(&[0.0, 0.0]), ee).unwrap(), 2.0, 0.0));
        assert!(close(arm.fk(&q(&[FRAC_PI_2, 0.0]), ee).unwrap(), 0.0, 2.0));
        assert!(close(arm.fk(&q(&[FRAC_PI_2, -FRAC_PI_2]), ee).unwrap(), 1.0, 1.0));
    }

    #[test]
    fn jacobian_example_and_distal_zero() {
        let arm = two_link();
        let jac = arm.jacobian(&q(&[0.0, 0.0]), arm.end_effector()).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 2.0, 1.0]);
        assert!((jac - expected).amax() < 1e-12);
        let mid = BodyPoint { link: 0, fraction: 0.5 };
        let jac = arm.jacobian(&q(&[0.3, 0.9]), mid).unwrap();
        assert_eq!(jac[(0, 1)], 0.0);
        assert_eq!(jac[(1, 1)], 0.0);
    }

    #[test]
    fn invalid_body_point() {
        let arm = two_link();
        let bad = BodyPoint { link: 2, fraction: 0.5 };
        assert!(matches!(arm.fk(&q(&[0.0, 0.0]), bad), Err(Error::BodyPoint { .. })));
        let bad = BodyPoint { link: 0, fraction: 1.5 };
        assert!(arm.jacobian(&q(&[0.0, 0.0]), bad).is_err());
    }

    #[test]
    fn default_body_points() {
        let arm = PlanarArm::uniform_limits(vec![1.0, 0.5, 0.5], 2.0).unwrap();
        assert_eq!(arm.body_points().len(), 9);
        assert_eq!(body_fractions(3), vec![0.25, 0.625, 1.0]);
        assert!(arm.body_points().contains(&arm.end_effector()));
    }

    #[test]
    fn limit_violation_examples() {
        let arm = PlanarArm::new(vec![1.0, 1.0], vec![(-1.0, 1.0), (-0.5, 0.5)], 3).unwrap();
        assert!(arm.limit_violations(&q(&[0.0, 0.0])).is_empty());
        let v = arm.limit_violations(&q(&[1.1, 0.0]));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].0, 0);
        assert!((v[0].1 - 0.1).abs() < 1e-12);
        assert!(arm.limit_violations(&q(&[1.0, -0.5])).is_empty());
        let v = arm.limit_violations(&q(&[0.0, -0.75]));
        assert_eq!(v, vec![(1, -0.25)]);
    }

    #[test]
    fn rejects_bad_arms() {
        assert!(PlanarArm::uniform_limits(vec![], 1.0).is_err());
        assert!(PlanarArm::uniform_limits(vec![1.0, 0.0], 1.0).is_err());
        assert!(PlanarArm::new(vec![1.0], vec![(1.0, 1.0)], 3).is_err());
        assert!(PlanarArm::new(vec![1.0], vec![(0.0, 1.0)], 0).is_err());
    }

    proptest! {
        #[test]
        fn jacobian_matches_finite_differences(
            angles in proptest::collection::vec(-PI..PI, 3),
            point in 0usize..9,
        ) {
            let arm = PlanarArm::uniform_limits(vec![1.2, 1.0, 0.8], PI).unwrap();
            let u = arm.body_points()[point];
            let q0 = q(&angles);
            let jac = arm.jacobian(&q0, u).unwrap();
            let h = 1e-6;
            for j in 0..3 {
                let mut qp = q0.clone();
                let mut qm = q0.clone();
                qp[j] += h;
                qm[j] -= h;
                let fd = (arm.fk(&qp, u).unwrap() - arm.fk(&qm, u).unwrap()) / (2.0 * h);
                prop_assert!((fd.x - jac[(0, j)]).abs() < 1e-6);
                prop_assert!((fd.y - jac[(1, j)]).abs() < 1e-6);
                prop_assert!(jac.column(j).norm() <= arm.reach() + 1e-12);
            }
        }

        #[test]
        fn rigid_links_and_periodicity(angles in proptest::collection::vec(-10.0f64..10.0, 3)) {
            let arm = PlanarArm::uniform_limits(vec![1.2, 1.0, 0.8], PI).unwrap();
            let q0 = q(&angles);
            let origins = arm.joint_origins(&q0).unwrap();
            for (k, len) in arm.links().iter().enumerate() {
                prop_assert!(((origins[k + 1] - origins[k]).norm() - len).abs() < 1e-12);
            }
            let mut shifted = q0.clone();
            shifted[1] += 2.0 * PI;
            let a = arm.fk(&q0, arm.end_effector()).unwrap();
            let b = arm.fk(&shifted, arm.end_effector()).unwrap();
            prop_assert!((a - b).norm() < 1e-9);
        }
    }
}
