//! Functional-gradient trajectory optimization in reproducing-kernel Hilbert
//! spaces.
//!
//! Trajectories are a straight line between the start and goal
//! configurations plus a finite sum of kernel sections `K(t_i, ·) a_i`.
//! Each optimizer iteration picks a small set of (time, body point) pairs
//! where the obstacle cost is high, pushes the trajectory away from them with
//! a closed-form regularized step, and restores the endpoint and joint-limit
//! constraints by a small Lagrange-multiplier solve.
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`kernels`] | scalar and matrix-valued kernels, Gram matrices, RKHS inner products |
//! | [`trajectory`] | kernel trajectories and the waypoint baseline |
//! | [`arm`] | planar revolute arm kinematics |
//! | [`world`] | circular obstacles, cost field, scene generation and files |
//! | [`objective`] | reduce operators, quadrature, functional gradients |
//! | [`optimizer`] | the iteration loop and constraint handling |
//! | [`bench`] | seeded comparison experiments and reports |

// NaN-rejecting checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arm;
pub mod bench;
pub mod config;
pub mod diagnostics;
mod error;
pub mod io;
pub mod kernels;
pub mod objective;
pub mod optimizer;
pub mod svg;
pub mod trajectory;
pub mod world;

pub use error::{Error, Result};

pub use nalgebra::{DMatrix, DVector};
