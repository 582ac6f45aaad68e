//! Scalar and matrix-valued kernels over the time interval [0, 1].
//!
//! Every kernel here is separable: `K(t, t') = k(t, t')·B` where `k` is a
//! scalar kernel and `B` a symmetric positive-definite joint-coupling matrix.
//! A kernel may also be a derivative kernel `k^j(t, t') = ∂ʲ_t ∂ʲ_t' k(t, t')`,
//! whose RKHS norm penalizes the `j`-th time derivative of a trajectory.

mod bspline;
mod gram;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_time, Error, Result};
use crate::trajectory::AccelerationMetric;

pub use bspline::BSplineBasis;
pub use gram::{gram, rkhs_inner, GramMatrix};

/// Highest derivative-kernel order supported for Gaussian kernels.
pub const MAX_GAUSSIAN_DERIVATIVE_ORDER: usize = 2;

/// Names accepted by [`FamilyKind::from_str`].
pub const FAMILY_NAMES: [&str; 4] = ["gaussian", "laplacian", "bspline", "waypoint"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    Gaussian,
    Laplacian,
    BSpline,
    Waypoint,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Gaussian => "gaussian",
            FamilyKind::Laplacian => "laplacian",
            FamilyKind::BSpline => "bspline",
            FamilyKind::Waypoint => "waypoint",
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "rbf" => Ok(FamilyKind::Gaussian),
            "laplacian" => Ok(FamilyKind::Laplacian),
            "bspline" | "b-spline" => Ok(FamilyKind::BSpline),
            "waypoint" | "delta" => Ok(FamilyKind::Waypoint),
            other => Err(Error::Config(format!(
                "unknown kernel family `{other}`; valid families: {}",
                FAMILY_NAMES.join(", ")
            ))),
        }
    }
}

/// Delta-basis kernel on a uniform grid of `m` waypoints.
///
/// On grid times the kernel equals the inverse of the acceleration metric
/// (zero on the clamped endpoints); between grid times both arguments are
/// linearly interpolated, so a trajectory built from it is exactly the
/// piecewise-linear waypoint path.
#[derive(Clone, Debug)]
pub struct WaypointBasis {
    m: usize,
    values: Arc<DMatrix<f64>>,
}

impl WaypointBasis {
    pub fn new(m: usize) -> Result<Self> {
        let metric = AccelerationMetric::new(m)?;
        Ok(Self {
            m,
            values: Arc::new(metric.padded_inverse()),
        })
    }

    pub fn waypoints(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Non-zero hat-function weights (index, weight) for `t`, or their
    /// derivatives when `deriv == 1`.
    fn hats(&self, t: f64, deriv: usize) -> [(usize, f64); 2] {
        let scale = (self.m - 1) as f64;
        let x = t * scale;
        let i = (x.floor() as usize).min(self.m - 2);
        let frac = x - i as f64;
        if deriv == 0 {
            [(i, 1.0 - frac), (i + 1, frac)]
        } else {
            [(i, -scale), (i + 1, scale)]
        }
    }

    fn partial(&self, t: f64, s: f64, a: usize, b: usize) -> Result<f64> {
        if a > 1 || b > 1 {
            return Err(Error::Unsupported(
                "waypoint kernel is piecewise linear; derivatives above order 1 are undefined"
                    .into(),
            ));
        }
        let mut acc = 0.0;
        for (i, wi) in self.hats(t, a) {
            for (j, wj) in self.hats(s, b) {
                acc += wi * wj * self.values[(i, j)];
            }
        }
        Ok(acc)
    }
}

#[derive(Clone, Debug)]
pub enum KernelFamily {
    Gaussian { sigma: f64 },
    Laplacian { sigma: f64 },
    BSpline(BSplineBasis),
    Waypoint(WaypointBasis),
}

impl KernelFamily {
    pub fn kind(&self) -> FamilyKind {
        match self {
            KernelFamily::Gaussian { .. } => FamilyKind::Gaussian,
            KernelFamily::Laplacian { .. } => FamilyKind::Laplacian,
            KernelFamily::BSpline(_) => FamilyKind::BSpline,
            KernelFamily::Waypoint(_) => FamilyKind::Waypoint,
        }
    }

    /// `∂ᵃ_t ∂ᵇ_s k(t, s)` of the base (non-derivative) scalar kernel.
    fn partial(&self, t: f64, s: f64, a: usize, b: usize) -> Result<f64> {
        match self {
            KernelFamily::Gaussian { sigma } => Ok(gaussian_partial(*sigma, t, s, a, b)),
            KernelFamily::Laplacian { sigma } => {
                if a + b > 0 {
                    Err(Error::Unsupported(
                        "laplacian kernel is not differentiable at t = t'".into(),
                    ))
                } else {
                    Ok((-(t - s).abs() / sigma).exp())
                }
            }
            KernelFamily::BSpline(basis) => {
                if a > basis.degree() || b > basis.degree() {
                    return Err(Error::Unsupported(format!(
                        "bspline kernel of degree {} has no derivative of order {}",
                        basis.degree(),
                        a.max(b)
                    )));
                }
                let phi_t = basis.eval(t, a);
                let phi_s = basis.eval(s, b);
                Ok(phi_t.iter().zip(&phi_s).map(|(x, y)| x * y).sum())
            }
            KernelFamily::Waypoint(w) => w.partial(t, s, a, b),
        }
    }
}

/// `∂ᵃ_t ∂ᵇ_s exp(−(t−s)²/(2σ²))` via probabilists' Hermite polynomials:
/// the result is `(−1)ᵃ σ⁻ⁿ Heₙ(r) e^{−r²/2}` with `r = (t−s)/σ`, `n = a+b`.
fn gaussian_partial(sigma: f64, t: f64, s: f64, a: usize, b: usize) -> f64 {
    let n = a + b;
    let r = (t - s) / sigma;
    let (mut he_prev, mut he) = (1.0, r);
    let he_n = if n == 0 {
        1.0
    } else {
        for k in 1..n {
            let next = r * he - k as f64 * he_prev;
            he_prev = he;
            he = next;
        }
        he
    };
    let sign = if a.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * sigma.powi(-(n as i32)) * he_n * (-0.5 * r * r).exp()
}

/// Serializable kernel description, shared by scene-independent config files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default = "default_family")]
    pub family: String,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_bspline_degree")]
    pub bspline_degree: usize,
    #[serde(default = "default_bspline_knots")]
    pub bspline_knots: usize,
    /// Row-major D×D coupling matrix; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<Vec<f64>>,
    #[serde(default)]
    pub derivative_order: usize,
    /// Grid size of the `waypoint` family.
    #[serde(default = "default_waypoints")]
    pub waypoints: usize,
}

fn default_family() -> String {
    "gaussian".into()
}
fn default_sigma() -> f64 {
    0.15
}
fn default_bspline_degree() -> usize {
    3
}
fn default_bspline_knots() -> usize {
    8
}
fn default_waypoints() -> usize {
    100
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            family: default_family(),
            sigma: default_sigma(),
            bspline_degree: default_bspline_degree(),
            bspline_knots: default_bspline_knots(),
            coupling: None,
            derivative_order: 0,
            waypoints: default_waypoints(),
        }
    }
}

impl KernelConfig {
    pub fn family(name: &str) -> Self {
        Self {
            family: name.into(),
            ..Self::default()
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    /// Build the kernel for a configuration space of dimension `dof`.
    pub fn build(&self, dof: usize) -> Result<KernelSpec> {
        let family = match self.family.parse::<FamilyKind>()? {
            FamilyKind::Gaussian => KernelFamily::Gaussian { sigma: self.sigma },
            FamilyKind::Laplacian => KernelFamily::Laplacian { sigma: self.sigma },
            FamilyKind::BSpline => {
                KernelFamily::BSpline(BSplineBasis::new(self.bspline_degree, self.bspline_knots)?)
            }
            FamilyKind::Waypoint => KernelFamily::Waypoint(WaypointBasis::new(self.waypoints)?),
        };
        let coupling = match &self.coupling {
            None => DMatrix::identity(dof, dof),
            Some(values) => {
                check_dim(dof * dof, values.len())?;
                DMatrix::from_row_slice(dof, dof, values)
            }
        };
        KernelSpec::new(family, self.derivative_order, coupling)
    }
}

/// A validated separable matrix-valued kernel `K(t, t') = k(t, t')·B`.
#[derive(Clone, Debug)]
pub struct KernelSpec {
    family: KernelFamily,
    derivative_order: usize,
    coupling: DMatrix<f64>,
    coupling_inv: DMatrix<f64>,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, derivative_order: usize, coupling: DMatrix<f64>) -> Result<Self> {
        if let KernelFamily::Gaussian { sigma } | KernelFamily::Laplacian { sigma } = &family {
            if !(sigma.is_finite() && *sigma > 0.0) {
                return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
            }
        }
        match (&family, derivative_order) {
            (_, 0) => {}
            (KernelFamily::Gaussian { .. }, j) if j <= MAX_GAUSSIAN_DERIVATIVE_ORDER => {}
            (KernelFamily::Gaussian { .. }, j) => {
                return Err(Error::Unsupported(format!(
                    "gaussian derivative kernels are implemented up to order {MAX_GAUSSIAN_DERIVATIVE_ORDER}, got {j}"
                )))
            }
            (KernelFamily::Laplacian { .. }, _) => {
                return Err(Error::Unsupported(
                    "laplacian kernel has no derivative kernels".into(),
                ))
            }
            (KernelFamily::BSpline(b), j) if j < b.degree() => {}
            (KernelFamily::BSpline(b), j) => {
                return Err(Error::Unsupported(format!(
                    "bspline degree {} supports derivative kernels below order {}, got {j}",
                    b.degree(),
                    b.degree()
                )))
            }
            (KernelFamily::Waypoint(_), _) => {
                return Err(Error::Unsupported(
                    "waypoint kernel has no derivative kernels".into(),
                ))
            }
        }
        let coupling_inv = validate_coupling(&coupling)?;
        Ok(Self {
            family,
            derivative_order,
            coupling,
            coupling_inv,
        })
    }

    pub fn gaussian(sigma: f64, dof: usize) -> Result<Self> {
        Self::new(KernelFamily::Gaussian { sigma }, 0, DMatrix::identity(dof, dof))
    }

    pub fn laplacian(sigma: f64, dof: usize) -> Result<Self> {
        Self::new(KernelFamily::Laplacian { sigma }, 0, DMatrix::identity(dof, dof))
    }

    pub fn bspline(degree: usize, knots: usize, dof: usize) -> Result<Self> {
        Self::new(
            KernelFamily::BSpline(BSplineBasis::new(degree, knots)?),
            0,
            DMatrix::identity(dof, dof),
        )
    }

    pub fn waypoint(m: usize, dof: usize) -> Result<Self> {
        Self::new(
            KernelFamily::Waypoint(WaypointBasis::new(m)?),
            0,
            DMatrix::identity(dof, dof),
        )
    }

    /// The derivative kernel `k^order` of this kernel's family.
    pub fn derivative(&self, order: usize) -> Result<Self> {
        Self::new(self.family.clone(), order, self.coupling.clone())
    }

    pub fn with_coupling(self, coupling: DMatrix<f64>) -> Result<Self> {
        Self::new(self.family, self.derivative_order, coupling)
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn derivative_order(&self) -> usize {
        self.derivative_order
    }

    pub fn dof(&self) -> usize {
        self.coupling.nrows()
    }

    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.coupling
    }

    pub fn coupling_inverse(&self) -> &DMatrix<f64> {
        &self.coupling_inv
    }

    pub fn to_config(&self) -> KernelConfig {
        let mut cfg = KernelConfig::family(self.family.kind().name());
        match &self.family {
            KernelFamily::Gaussian { sigma } | KernelFamily::Laplacian { sigma } => cfg.sigma = *sigma,
            KernelFamily::BSpline(b) => {
                cfg.bspline_degree = b.degree();
                cfg.bspline_knots = b.breakpoints();
            }
            KernelFamily::Waypoint(w) => cfg.waypoints = w.waypoints(),
        }
        cfg.derivative_order = self.derivative_order;
        if self.coupling != DMatrix::identity(self.dof(), self.dof()) {
            cfg.coupling = Some(self.coupling.transpose().as_slice().to_vec());
        }
        cfg
    }

    /// Scalar kernel value `k(t, t')`.
    pub fn eval_scalar(&self, t: f64, t_prime: f64) -> Result<f64> {
        check_time(t)?;
        check_time(t_prime)?;
        let j = self.derivative_order;
        self.family.partial(t, t_prime, j, j)
    }

    /// `K(t, t') = k(t, t')·B`.
    pub fn eval_matrix(&self, t: f64, t_prime: f64) -> Result<DMatrix<f64>> {
        Ok(&self.coupling * self.eval_scalar(t, t_prime)?)
    }

    /// `∂ᵐ/∂tᵐ k(t_i, t)`: the `m`-th time derivative of the scalar section
    /// centred at `t_i`, evaluated at `t`.
    pub fn section_derivative(&self, t_i: f64, t: f64, m: usize) -> Result<f64> {
        check_time(t_i)?;
        check_time(t)?;
        let j = self.derivative_order;
        self.family.partial(t_i, t, j, j + m)
    }

    /// `∂ʲ_s k(s, t)` at `s = t_i`: a one-sided derivative section of the
    /// base kernel (the representer of `f ↦ f⁽ʲ⁾(t_i)`).
    pub fn derivative_section(&self, t_i: f64, t: f64, order: usize) -> Result<f64> {
        check_time(t_i)?;
        check_time(t)?;
        let j = self.derivative_order;
        self.family.partial(t_i, t, j + order, j)
    }

    /// Raw mixed partial `∂ᵃ_t ∂ᵇ_s` of the configured scalar kernel.
    pub fn mixed_partial(&self, t: f64, s: f64, a: usize, b: usize) -> Result<f64> {
        check_time(t)?;
        check_time(s)?;
        let j = self.derivative_order;
        self.family.partial(t, s, a + j, b + j)
    }

    /// Explicit features `∂ᵐφ(t)` of a finite-dimensional kernel, so that
    /// `section_derivative(tᵢ, t, m) = φ(tᵢ)·∂ᵐφ(t)`. `None` for kernels
    /// without a finite feature map.
    pub(crate) fn features(&self, t: f64, m: usize) -> Option<Result<Vec<f64>>> {
        let KernelFamily::BSpline(basis) = &self.family else {
            return None;
        };
        let order = self.derivative_order + m;
        Some(if order > basis.degree() {
            Err(Error::Unsupported(format!(
                "bspline kernel of degree {} has no derivative of order {order}",
                basis.degree()
            )))
        } else {
            check_time(t).map(|_| basis.eval(t, order))
        })
    }

    /// Apply the coupling matrix `B` to a coefficient vector.
    pub fn couple(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.coupling * v
    }
}

fn validate_coupling(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !b.is_square() || b.nrows() == 0 {
        return Err(Error::Config("coupling must be a non-empty square matrix".into()));
    }
    let scale = b.amax().max(1.0);
    if (b - b.transpose()).amax() > 1e-12 * scale {
        return Err(Error::Config("coupling matrix must be symmetric".into()));
    }
    let eig = SymmetricEigen::new(b.clone());
    let min = eig.eigenvalues.min();
    if !(min > 0.0) {
        return Err(Error::Config(format!(
            "coupling matrix must be positive definite (min eigenvalue {min:e})"
        )));
    }
    b.clone()
        .try_inverse()
        .ok_or(Error::Singular("coupling"))
}
