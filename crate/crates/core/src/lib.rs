//! Connection calculus on sub-Riemannian Lie groups and structured frames,
//! with exact polynomial operator identities and Monte Carlo verification of
//! stochastic gradient representations and Carnot-group gradient bounds.

pub mod algebra;
pub mod bounds;
pub mod connection;
pub mod curvature;
pub mod diffusion;
pub mod error;
pub mod expr;
pub mod identities;
pub mod frame;
pub mod linalg;
pub mod poly;
pub mod scalar;

pub use error::{CoreError, Result};
pub use scalar::{rat, Rational, Scalar};
