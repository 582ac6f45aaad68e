use nalgebra::{DMatrix, DVector};

use crate::arm::PlanarArm;
use crate::error::{Error, Result};
use crate::trajectory::{ConfigPath, KernelTrajectory, WaypointTrajectory};

/// Violations at or below this are treated as satisfied.
const VIOLATION_TOL: f64 = 1e-12;

/// Endpoint multipliers `(γ⁰, γ¹)` such that appending
/// `−(1/λ)·K(0,·)γ⁰ − (1/λ)·K(1,·)γ¹` to `candidate` restores both
/// endpoints. The scalar 2×2 system `[k(0,0) k(0,1); k(1,0) k(1,1)]` is solved
/// once per joint and `B⁻¹` maps the residual into coefficient space.
pub fn solve_equality_multipliers(
    candidate: &KernelTrajectory,
    lambda: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let (c0, c1) = endpoint_coefficients(candidate)?;
    Ok((c0 * -lambda, c1 * -lambda))
}

/// Coefficients to append at `t = 0` and `t = 1` so the endpoints match.
pub(crate) fn endpoint_coefficients(
    candidate: &KernelTrajectory,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let spec = candidate.spec();
    let d = spec.dof();
    let r0 = candidate.deviation(0.0)?;
    let r1 = candidate.deviation(1.0)?;
    if r0.iter().chain(r1.iter()).all(|&v| v == 0.0) {
        return Ok((DVector::zeros(d), DVector::zeros(d)));
    }
    let k00 = spec.eval_scalar(0.0, 0.0)?;
    let k01 = spec.eval_scalar(0.0, 1.0)?;
    let k11 = spec.eval_scalar(1.0, 1.0)?;
    let det = k00 * k11 - k01 * k01;
    if !(det.abs() > DEGENERATE_TOL * (k00 * k11).abs().max(f64::MIN_POSITIVE)) {
        return Err(Error::Singular("endpoint multiplier"));
    }
    let s0 = spec.coupling_inverse() * r0;
    let s1 = spec.coupling_inverse() * r1;
    // [k00 k01; k01 k11]·[c0; c1] = −[s0; s1]
    let c0 = (&s1 * k01 - &s0 * k11) / det;
    let c1 = (&s0 * k01 - &s1 * k00) / det;
    Ok((c0, c1))
}

/// Append the endpoint sections from [`endpoint_coefficients`].
pub(crate) fn restore_endpoints(candidate: KernelTrajectory) -> Result<KernelTrajectory> {
    let (c0, c1) = endpoint_coefficients(&candidate)?;
    if c0.iter().chain(c1.iter()).all(|&v| v == 0.0) {
        return Ok(candidate);
    }
    candidate.updated(1.0, [(0.0, c0), (1.0, c1)])
}

/// Relative size below which a constraint's self-influence counts as zero.
const DEGENERATE_TOL: f64 = 1e-14;

/// Rounds of the dual active-set loop.
const MAX_ROUNDS: usize = 500;

/// One linear constraint on the correction `Δ`: the `dim` component at
/// time `t`. `sign` is +1 for lower bounds and equalities, −1 for upper
/// bounds, so every inequality reads `sign·(base + Δ)(t) ≥ sign·target`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Pin {
    t: f64,
    dim: usize,
    sign: f64,
    /// `sign·(target − base(t))`.
    rhs: f64,
    equality: bool,
    /// Scan sample the pin came from.
    sample: Option<usize>,
}

/// Signed violation of `value` against `[lo, hi]`, the bound it crosses and
/// the constraint sign.
fn violation(value: f64, (lo, hi): (f64, f64)) -> Option<(f64, f64, f64)> {
    if value < lo {
        Some((lo - value, lo, 1.0))
    } else if value > hi {
        Some((value - hi, hi, -1.0))
    } else {
        None
    }
}

/// Least-norm solve of `G x = rhs` through a truncated SVD with two rounds
/// of residual correction. Nearly coincident pins make `G` close to
/// singular without making the constraints inconsistent.
fn refined_solve(g: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if g.nrows() == 0 {
        return Ok(DVector::zeros(0));
    }
    let svd = g.clone().svd(true, true);
    let cutoff = SVD_RCOND * svd.singular_values.max();
    let solve = |b: &DVector<f64>| svd.solve(b, cutoff).map_err(|_| Error::Singular("joint-limit"));
    let mut x = solve(rhs)?;
    for _ in 0..2 {
        let r = rhs - g * &x;
        x += solve(&r)?;
    }
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Singular("joint-limit"))
    }
}

const SVD_RCOND: f64 = 1e-14;

/// Outcome of a joint-limit projection.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ProjectionReport {
    /// Joint-limit pins active at the end.
    pub active: usize,
    /// Rounds of the active-set loop.
    pub passes: usize,
    /// Largest violation left at the scanned times.
    pub residual: f64,
}

fn scan_times(samples: usize) -> Vec<f64> {
    let n = samples.max(2);
    (0..n).map(|s| s as f64 / (n - 1) as f64).collect()
}

/// Largest joint-limit violation of `path` over `samples` uniform times.
pub fn max_limit_violation<P: ConfigPath + ?Sized>(
    path: &P,
    arm: &PlanarArm,
    samples: usize,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for t in scan_times(samples) {
        let q = path.config(t)?;
        for (dim, &bounds) in arm.joint_limits().iter().enumerate() {
            if let Some((amount, _, _)) = violation(q[dim], bounds) {
                worst = worst.max(amount);
            }
        }
    }
    Ok(worst)
}

/// Smallest-norm correction satisfying the equalities and the joint limits
/// at every scan sample.
///
/// With `Δ = Σ_c x_c·sign_c·φ_c`, where `φ_c` represents evaluation of
/// component `dim_c` at `t_c` and `inner` gives `⟨φ_a, φ_b⟩`, the dual of the
/// projection is `min ½xᵀQx − rhsᵀx` over `x ≥ 0` on inequality pins. It is
/// solved with the Lawson-Hanson active-set scheme: add the most violated
/// sample, solve on the active set, and when an inequality multiplier would
/// turn negative step only to the boundary and drop it. Dual optimality is
/// primal feasibility at every sample.
///
/// Returns `(t, dim, coefficient)` for each nonzero section.
fn dual_projection(
    times: &[f64],
    base: &[DVector<f64>],
    limits: &[(f64, f64)],
    equalities: Vec<Pin>,
    inner: impl Fn(f64, usize, f64, usize) -> Result<f64>,
    report: &mut ProjectionReport,
) -> Result<Vec<(f64, usize, f64)>> {
    let q_entry = |a: &Pin, b: &Pin| -> Result<f64> { Ok(a.sign * b.sign * inner(a.t, a.dim, b.t, b.dim)?) };
    // equalities the kernel cannot influence must already hold
    let mut active: Vec<Pin> = Vec::new();
    let diag_scale = equalities
        .iter()
        .map(|p| q_entry(p, p))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    for p in equalities {
        if q_entry(&p, &p)? > DEGENERATE_TOL * diag_scale {
            active.push(p);
        } else if p.rhs.abs() > VIOLATION_TOL {
            return Err(Error::Singular("endpoint"));
        }
    }
    let solve_active = |active: &[Pin]| -> Result<DVector<f64>> {
        let n = active.len();
        let mut q = DMatrix::zeros(n, n);
        for (r, a) in active.iter().enumerate() {
            for (c, b) in active.iter().enumerate() {
                q[(r, c)] = q_entry(a, b)?;
            }
        }
        refined_solve(&q, &DVector::from_iterator(n, active.iter().map(|p| p.rhs)))
    };
    let mut x = solve_active(&active)?;
    let mut blocked: Vec<(usize, usize)> = Vec::new();
    for _ in 0..MAX_ROUNDS {
        // most violated (sample, joint) not already pinned
        let mut worst: Option<(f64, Pin)> = None;
        for (s, (&t, q)) in times.iter().zip(base).enumerate() {
            for (dim, &bounds) in limits.iter().enumerate() {
                if active.iter().any(|p| p.sample == Some(s) && p.dim == dim)
                    || blocked.contains(&(s, dim))
                {
                    continue;
                }
                let mut value = q[dim];
                for (p, &xp) in active.iter().zip(x.iter()) {
                    if xp != 0.0 {
                        value += xp * p.sign * inner(p.t, p.dim, t, dim)?;
                    }
                }
                if let Some((amount, target, sign)) = violation(value, bounds) {
                    if amount > VIOLATION_TOL && worst.is_none_or(|(w, _)| amount > w) {
                        let pin = Pin {
                            t,
                            dim,
                            sign,
                            rhs: sign * (target - q[dim]),
                            equality: false,
                            sample: Some(s),
                        };
                        worst = Some((amount, pin));
                    }
                }
            }
        }
        let Some((_, pin)) = worst else { break };
        report.passes += 1;
        active.push(pin);
        x = x.push(0.0);
        loop {
            let z = solve_active(&active)?;
            let leaving: Vec<usize> = (0..active.len())
                .filter(|&i| !active[i].equality && z[i] <= 0.0)
                .collect();
            if leaving.is_empty() {
                x = z;
                break;
            }
            let alpha = leaving
                .iter()
                .map(|&i| x[i] / (x[i] - z[i]))
                .fold(1.0f64, f64::min)
                .max(0.0);
            x = &x + (&z - &x) * alpha;
            let newest = active.len() - 1;
            let mut keep = Vec::with_capacity(active.len());
            for i in 0..active.len() {
                let drop = !active[i].equality && x[i] <= DEGENERATE_TOL * x.amax().max(1.0);
                if drop && i == newest && alpha == 0.0 {
                    // a pin that cannot enter would be re-added forever
                    let p = active[i];
                    blocked.push((p.sample.expect("inequality pins come from samples"), p.dim));
                }
                if !drop {
                    keep.push(i);
                }
            }
            active = keep.iter().map(|&i| active[i]).collect();
            x = DVector::from_iterator(keep.len(), keep.iter().map(|&i| x[i]));
        }
    }
    report.active = active.iter().filter(|p| !p.equality).count();
    Ok(active
        .iter()
        .zip(x.iter())
        .filter(|(_, &xp)| xp != 0.0)
        .map(|(p, &xp)| (p.t, p.dim, xp * p.sign))
        .collect())
}

/// Sampled projection onto the joint limits.
///
/// The correction is the smallest RKHS-norm change, built from sections
/// `K(t_c,·)e_d`, that keeps both endpoints and puts every scanned sample
/// inside its limits. Endpoint samples are governed by the equality
/// constraints only.
pub fn project_joint_limits(
    xi: &KernelTrajectory,
    arm: &PlanarArm,
    samples: usize,
) -> Result<(KernelTrajectory, ProjectionReport)> {
    let spec = xi.spec();
    let d = spec.dof();
    crate::error::check_dim(arm.dof(), d)?;
    let times = scan_times(samples);
    let interior = &times[1..times.len() - 1];
    let base: Vec<DVector<f64>> = interior.iter().map(|&t| xi.eval(t)).collect::<Result<_>>()?;
    let mut report = ProjectionReport::default();
    let violated = base
        .iter()
        .any(|q| arm.joint_limits().iter().enumerate().any(|(dim, &b)| {
            violation(q[dim], b).is_some_and(|(amount, _, _)| amount > VIOLATION_TOL)
        }));
    if !violated {
        return Ok((xi.clone(), report));
    }
    let (r0, r1) = (xi.eval(0.0)?, xi.eval(1.0)?);
    let mut equalities = Vec::with_capacity(2 * d);
    for dim in 0..d {
        for (t, target, value) in [(0.0, xi.q_start()[dim], r0[dim]), (1.0, xi.q_goal()[dim], r1[dim])] {
            equalities.push(Pin { t, dim, sign: 1.0, rhs: target - value, equality: true, sample: None });
        }
    }
    let b = spec.coupling();
    let sections = dual_projection(
        interior,
        &base,
        arm.joint_limits(),
        equalities,
        |ta, da, tb, db| Ok(spec.eval_scalar(ta, tb)? * b[(da, db)]),
        &mut report,
    )?;
    let projected = xi.updated(
        1.0,
        sections.into_iter().map(|(t, dim, c)| {
            let mut a = DVector::zeros(d);
            a[dim] = c;
            (t, a)
        }),
    )?;
    report.residual = max_limit_violation(&projected, arm, samples)?;
    Ok((projected, report))
}

/// Joint-limit projection for the waypoint baseline: the same dual scheme
/// with columns of `A⁻¹` in place of kernel sections, scanned at the
/// interior waypoints.
pub fn project_waypoint_limits(
    w: &WaypointTrajectory,
    arm: &PlanarArm,
) -> Result<(WaypointTrajectory, ProjectionReport)> {
    crate::error::check_dim(arm.dof(), w.dof())?;
    let m = w.len();
    let times: Vec<f64> = (1..m - 1).map(|i| w.time(i)).collect();
    let index = |t: f64| w.nearest_index(t) - 1;
    let ainv = w.metric().interior_inverse();
    let interior = w.interior();
    let base: Vec<DVector<f64>> = interior.row_iter().map(|r| r.transpose()).collect();
    let mut report = ProjectionReport::default();
    let sections = dual_projection(
        &times,
        &base,
        arm.joint_limits(),
        Vec::new(),
        |ta, da, tb, db| Ok(if da == db { ainv[(index(ta), index(tb))] } else { 0.0 }),
        &mut report,
    )?;
    if sections.is_empty() {
        return Ok((w.clone(), report));
    }
    let mut moved = interior;
    for (t, dim, c) in sections {
        moved.column_mut(dim).axpy(c, &ainv.column(index(t)), 1.0);
    }
    let projected = w.with_interior(moved);
    report.residual = max_limit_violation(&projected, arm, m)?;
    Ok((projected, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;

    fn traj(spec: KernelSpec, sections: Vec<(f64, Vec<f64>)>) -> KernelTrajectory {
        let d = spec.dof();
        KernelTrajectory::from_sections(
            DVector::zeros(d),
            DVector::from_element(d, 0.5),
            spec,
            sections.into_iter().map(|(t, a)| (t, DVector::from_vec(a))),
        )
        .unwrap()
    }

    #[test]
    fn feasible_candidate_needs_no_multipliers() {
        let spec = KernelSpec::gaussian(0.5, 2).unwrap();
        let xi = traj(spec, vec![]);
        let (g0, g1) = solve_equality_multipliers(&xi, 20.0).unwrap();
        assert_eq!(g0, DVector::zeros(2));
        assert_eq!(g1, DVector::zeros(2));
    }

    #[test]
    fn multipliers_match_dense_solve() {
        let spec = KernelSpec::gaussian(0.5, 1).unwrap();
        let xi = traj(spec, vec![(0.3, vec![0.7]), (0.8, vec![-0.2])]);
        let lambda = 20.0;
        let (g0, g1) = solve_equality_multipliers(&xi, lambda).unwrap();
        let e2 = (-2.0f64).exp();
        let sys = DMatrix::from_row_slice(2, 2, &[1.0, e2, e2, 1.0]);
        let r = DVector::from_row_slice(&[xi.deviation(0.0).unwrap()[0], xi.deviation(1.0).unwrap()[0]]);
        // −(1/λ)·sys·γ = −r
        let oracle = sys.lu().solve(&(r * lambda)).unwrap();
        assert!((g0[0] - oracle[0]).abs() < 1e-12);
        assert!((g1[0] - oracle[1]).abs() < 1e-12);
        let fixed = restore_endpoints(xi).unwrap();
        assert!(fixed.endpoint_residual().unwrap() <= 1e-12);
    }

    #[test]
    fn coupled_endpoints_restored() {
        let b = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let spec = KernelSpec::laplacian(0.2, 2).unwrap().with_coupling(b).unwrap();
        let xi = traj(spec, vec![(0.1, vec![0.3, -0.4]), (0.95, vec![1.0, 0.2])]);
        assert!(xi.endpoint_residual().unwrap() > 1e-3);
        let fixed = restore_endpoints(xi).unwrap();
        assert!(fixed.endpoint_residual().unwrap() <= 1e-12);
    }

    #[test]
    fn projection_pins_violations() {
        let arm = PlanarArm::new(vec![1.0, 1.0], vec![(-0.4, 0.55), (-1.0, 0.6)], 2).unwrap();
        let spec = KernelSpec::gaussian(0.15, 2).unwrap();
        let xi = traj(spec, vec![(0.4, vec![1.0, 0.3]), (0.7, vec![-0.9, 0.6])]);
        let xi = restore_endpoints(xi).unwrap();
        assert!(max_limit_violation(&xi, &arm, 200).unwrap() > 0.1);
        let (projected, report) = project_joint_limits(&xi, &arm, 200).unwrap();
        assert!(report.active > 0);
        assert!(report.residual <= 1e-9, "{report:?}");
        assert!(projected.endpoint_residual().unwrap() <= 1e-9);
    }

    #[test]
    fn projection_is_identity_when_feasible() {
        let arm = PlanarArm::uniform_limits(vec![1.0, 1.0], 3.0).unwrap();
        let spec = KernelSpec::gaussian(0.15, 2).unwrap();
        let xi = traj(spec, vec![(0.4, vec![0.1, 0.1])]);
        let (projected, report) = project_joint_limits(&xi, &arm, 100).unwrap();
        assert_eq!(report.passes, 0);
        assert_eq!(projected.coeffs(), xi.coeffs());
    }

    #[test]
    fn waypoint_projection_pins_violations() {
        let arm = PlanarArm::new(vec![1.0], vec![(-0.2, 0.9)], 1).unwrap();
        let m = 20;
        let mut w = WaypointTrajectory::straight_line(
            &DVector::from_row_slice(&[0.0]),
            &DVector::from_row_slice(&[0.5]),
            m,
        )
        .unwrap();
        let mut interior = w.interior();
        for i in 0..m - 2 {
            interior[(i, 0)] += 1.5 * ((i + 1) as f64 * std::f64::consts::PI / (m - 1) as f64).sin();
        }
        w = w.with_interior(interior);
        let (projected, report) = project_waypoint_limits(&w, &arm).unwrap();
        assert!(report.active > 0);
        assert!(report.residual <= 1e-9, "{report:?}");
        assert_eq!(projected.waypoints().row(0), w.waypoints().row(0));
    }

    #[test]
    fn random_violating_trajectories_are_projected() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let arm = PlanarArm::new(vec![1.0, 1.0, 1.0], vec![(-0.6, 0.7); 3], 1).unwrap();
        let mut worst = 0.0f64;
        for trial in 0..200 {
            let sigma = rng.random_range(0.05..0.3);
            let spec = match trial % 3 {
                0 => KernelSpec::gaussian(sigma, 3),
                1 => KernelSpec::laplacian(sigma, 3),
                _ => KernelSpec::bspline(3, 8, 3),
            }
            .unwrap();
            let n = rng.random_range(1..6);
            let sections: Vec<(f64, Vec<f64>)> = (0..n)
                .map(|_| (rng.random_range(0.05..0.95), (0..3).map(|_| rng.random_range(-1.5..1.5)).collect()))
                .collect();
            let xi = restore_endpoints(traj(spec, sections)).unwrap();
            let (projected, report) = project_joint_limits(&xi, &arm, 200).unwrap();
            worst = worst.max(report.residual);
            assert!(report.residual <= 1e-9, "trial {trial}: {report:?}");
            assert!(projected.endpoint_residual().unwrap() <= 1e-9, "trial {trial}");
        }
        assert!(worst <= 1e-9);
    }
}
