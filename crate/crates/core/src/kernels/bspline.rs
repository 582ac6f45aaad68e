//! Clamped uniform B-spline basis used by the finite-dimensional spline
//! kernel `k(t, t') = φ(t)·φ(t')`.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct BSplineBasis {
    degree: usize,
    breakpoints: usize,
    knots: Vec<f64>,
}

impl BSplineBasis {
    /// Basis of the given degree on `breakpoints` uniform knots over [0, 1],
    /// clamped at both ends.
    pub fn new(degree: usize, breakpoints: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::Config("bspline_degree must be at least 1".into()));
        }
        if breakpoints < 2 {
            return Err(Error::Config("bspline_knots must be at least 2".into()));
        }
        let mut knots = vec![0.0; degree];
        let last = (breakpoints - 1) as f64;
        knots.extend((0..breakpoints).map(|i| i as f64 / last));
        knots.extend(std::iter::repeat_n(1.0, degree));
        Ok(Self {
            degree,
            breakpoints,
            knots,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn breakpoints(&self) -> usize {
        self.breakpoints
    }

    /// Number of basis functions.
    pub fn len(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Values of the `deriv`-th derivative of every basis function at `t`.
    pub fn eval(&self, t: f64, deriv: usize) -> Vec<f64> {
        self.basis(self.degree, deriv, t)
    }

    /// Cox-de Boor recursion carried out in place: degree-0 indicators are
    /// raised to degree `p − deriv` by the value recursion, then the
    /// remaining levels apply the derivative recursion.
    fn basis(&self, p: usize, deriv: usize, t: f64) -> Vec<f64> {
        let u = &self.knots;
        if deriv > p {
            return vec![0.0; u.len() - p - 1];
        }
        let end = *u.last().expect("non-empty knot vector");
        let mut b: Vec<f64> = (0..u.len() - 1)
            .map(|i| {
                let inside = u[i] <= t && t < u[i + 1];
                // the closed right end belongs to the last non-empty span
                let at_end = t == end && u[i] < u[i + 1] && u[i + 1] == end;
                if inside || at_end {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let ratio = |num: f64, den: f64| if den == 0.0 { 0.0 } else { num / den };
        let value_degree = p - deriv;
        for deg in 1..=p {
            let len = u.len() - deg - 1;
            for i in 0..len {
                let (lo, hi) = (u[i + deg] - u[i], u[i + deg + 1] - u[i + 1]);
                b[i] = if deg <= value_degree {
                    ratio(t - u[i], lo) * b[i] + ratio(u[i + deg + 1] - t, hi) * b[i + 1]
                } else {
                    deg as f64 * (ratio(b[i], lo) - ratio(b[i + 1], hi))
                };
            }
            b.truncate(len);
        }
        b
    }
}
