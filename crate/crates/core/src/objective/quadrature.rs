use crate::error::{Error, Result};

pub const MAX_NODES: usize = 64;

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITERS: usize = 100;

/// Gauss-Legendre rule on `[0, 1]`, nodes ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p_prev, mut p) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = next;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let nf = n as f64;
    (p, nf * (x * p - p_prev) / (x * x - 1.0))
}

/// n-point Gauss-Legendre rule mapped from `[−1, 1]` to `[0, 1]`.
///
/// Roots of `P_n` come from Newton's method started at
/// `cos(π(i + 3/4)/(n + 1/2))`; weights are `2/((1 − x²) P_n'(x)²)`,
/// halved by the map. Only the upper half is computed and mirrored, so the
/// nodes are exactly symmetric about 1/2.
pub fn legendre_rule(n: usize) -> Result<QuadratureRule> {
    if !(1..=MAX_NODES).contains(&n) {
        return Err(Error::Config(format!(
            "quadrature node count must be in 1..={MAX_NODES}, got {n}"
        )));
    }
    let half = n.div_ceil(2);
    let mut upper = Vec::with_capacity(half);
    for i in 0..half {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITERS {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= NEWTON_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Quadrature(n));
        }
        if n % 2 == 1 && i == half - 1 {
            x = 0.0;
        }
        let (_, dp) = legendre(n, x);
        upper.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    // mirror in the mapped coordinates so node pairs sum to exactly 1
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for &(x, w) in &upper {
        nodes.push(1.0 - 0.5 * (x + 1.0));
        weights.push(0.5 * w);
    }
    for &(x, w) in upper.iter().rev() {
        if x != 0.0 {
            nodes.push(0.5 * (x + 1.0));
            weights.push(0.5 * w);
        }
    }
    Ok(QuadratureRule { nodes, weights })
}
