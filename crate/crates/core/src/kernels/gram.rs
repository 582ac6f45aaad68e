use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::KernelSpec;
use crate::error::{check_dim, check_time, Error, Result};

/// Relative jitter schedule applied to the Gram diagonal before factorizing.
const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;

/// Time-equality tolerance for support points.
pub(crate) const TIME_TOL: f64 = 1e-12;

/// The DN×DN Gram matrix `𝐊(𝒯, 𝒯)` with a cached Cholesky factorization.
#[derive(Clone, Debug)]
pub struct GramMatrix {
    support: Vec<f64>,
    dof: usize,
    values: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
}

impl GramMatrix {
    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    /// Unjittered kernel values; block `(i, j)` is `K(t_i, t_j)`.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Absolute diagonal jitter that made the factorization succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Solve `(𝐊 + jitter·I) x = rhs` for a stacked DN vector.
    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.values.nrows(), rhs.len())?;
        Ok(self.chol.solve(rhs))
    }

    /// `aᵀ 𝐊 a` for a stacked coefficient vector.
    pub fn quadratic_form(&self, a: &DVector<f64>) -> Result<f64> {
        check_dim(self.values.nrows(), a.len())?;
        Ok(a.dot(&(&self.values * a)))
    }
}

/// Build the Gram matrix over `support`. Blocks are exactly the values
/// returned by [`KernelSpec::eval_matrix`].
pub fn gram(spec: &KernelSpec, support: &[f64]) -> Result<GramMatrix> {
    for &t in support {
        check_time(t)?;
    }
    for (i, &a) in support.iter().enumerate() {
        if let Some(&b) = support[i + 1..].iter().find(|&&b| (a - b).abs() <= TIME_TOL) {
            return Err(Error::DuplicateTime(b));
        }
    }
    let d = spec.dof();
    let n = support.len();
    let mut values = DMatrix::zeros(n * d, n * d);
    for i in 0..n {
        for j in i..n {
            let block = spec.eval_matrix(support[i], support[j])?;
            values.view_mut((i * d, j * d), (d, d)).copy_from(&block);
            if i != j {
                values
                    .view_mut((j * d, i * d), (d, d))
                    .copy_from(&block.transpose());
            }
        }
    }
    let dn = (n * d).max(1) as f64;
    let scale = (values.trace() / dn).max(f64::MIN_POSITIVE);
    let mut rel = JITTER_START;
    loop {
        let jitter = rel * scale;
        let mut jittered = values.clone();
        for k in 0..jittered.nrows() {
            jittered[(k, k)] += jitter;
        }
        if let Some(chol) = Cholesky::new(jittered) {
            return Ok(GramMatrix {
                support: support.to_vec(),
                dof: d,
                values,
                chol,
                jitter,
            });
        }
        if rel >= JITTER_MAX {
            return Err(Error::Factorization(jitter));
        }
        rel *= 10.0;
    }
}

/// `⟨ξ¹, ξ²⟩_H = Σᵢⱼ aᵢᵀ K(tᵢ, tⱼ) bⱼ` for coefficient matrices `a` (N₁×D)
/// and `b` (N₂×D).
pub fn rkhs_inner(
    spec: &KernelSpec,
    times_a: &[f64],
    a: &DMatrix<f64>,
    times_b: &[f64],
    b: &DMatrix<f64>,
) -> Result<f64> {
    let d = spec.dof();
    check_dim(times_a.len(), a.nrows())?;
    check_dim(times_b.len(), b.nrows())?;
    check_dim(d, a.ncols())?;
    check_dim(d, b.ncols())?;
    let coupled_b = b * spec.coupling();
    let mut acc = 0.0;
    for (i, &ti) in times_a.iter().enumerate() {
        for (j, &tj) in times_b.iter().enumerate() {
            let k = spec.eval_scalar(ti, tj)?;
            if k != 0.0 {
                acc += k * a.row(i).dot(&coupled_b.row(j));
            }
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_point_gaussian() {
        let spec = KernelSpec::gaussian(0.5, 1).unwrap();
        let g = gram(&spec, &[0.0, 1.0]).unwrap();
        let e2 = (-2.0f64).exp();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, e2, e2, 1.0]);
        assert!((g.values() - expected).amax() < 1e-15);
    }

    #[test]
    fn single_point_is_identity_block() {
        let spec = KernelSpec::laplacian(0.3, 3).unwrap();
        let g = gram(&spec, &[0.42]).unwrap();
        assert_eq!(g.values(), &DMatrix::identity(3, 3));
    }

    #[test]
    fn symmetric_by_construction() {
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]);
        let spec = KernelSpec::gaussian(0.2, 2).unwrap().with_coupling(b).unwrap();
        let g = gram(&spec, &[0.1, 0.5, 0.8]).unwrap();
        assert_eq!(g.values().shape(), (6, 6));
        assert_eq!(g.values(), &g.values().transpose());
    }

    #[test]
    fn duplicate_times_rejected() {
        let spec = KernelSpec::gaussian(0.2, 1).unwrap();
        assert!(matches!(
            gram(&spec, &[0.1, 0.5, 0.1]),
            Err(Error::DuplicateTime(_))
        ));
    }

    #[test]
    fn inner_product_examples() {
        let spec = KernelSpec::gaussian(0.5, 1).unwrap();
        let a = DMatrix::from_row_slice(1, 1, &[2.0]);
        assert_eq!(rkhs_inner(&spec, &[0.3], &a, &[0.3], &a).unwrap(), 4.0);
        let zero = DMatrix::zeros(1, 1);
        assert_eq!(rkhs_inner(&spec, &[0.3], &zero, &[0.3], &zero).unwrap(), 0.0);
        let ones = DMatrix::from_element(2, 1, 1.0);
        let v = rkhs_inner(&spec, &[0.0, 1.0], &ones, &[0.0, 1.0], &ones).unwrap();
        assert!((v - (2.0 + 2.0 * (-2.0f64).exp())).abs() < 1e-14);
        assert!((v - 2.270671).abs() < 1e-6);
        assert!(matches!(
            rkhs_inner(&spec, &[0.0, 1.0], &ones, &[0.3], &DMatrix::zeros(1, 2)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn gram_is_psd_before_jitter() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let families = ["gaussian", "laplacian", "bspline"];
        for trial in 0..50 {
            let n = rng.random_range(1..=8);
            let d = rng.random_range(1..=3);
            let mut support: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            support.sort_by(f64::total_cmp);
            support.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
            let cfg = super::super::KernelConfig::family(families[trial % 3])
                .with_sigma(rng.random_range(0.05..0.5));
            let spec = cfg.build(d).unwrap();
            let g = gram(&spec, &support).unwrap();
            let min = SymmetricEigen::new(g.values().clone()).eigenvalues.min();
            assert!(min >= -1e-10, "trial {trial}: min eigenvalue {min}");
        }
    }

    #[test]
    fn bspline_gram_rank_is_bounded() {
        let spec = KernelSpec::bspline(3, 8, 2).unwrap();
        let support: Vec<f64> = (0..15).map(|i| i as f64 / 14.0).collect();
        let g = gram(&spec, &support).unwrap();
        let eig = SymmetricEigen::new(g.values().clone());
        let tol = 1e-9 * eig.eigenvalues.amax();
        let rank = eig.eigenvalues.iter().filter(|&&e| e > tol).count();
        assert!(rank <= 2 * 10, "rank {rank}");
        // rank deficiency still factorizes thanks to jitter
        assert!(g.jitter() > 0.0);
    }
}
