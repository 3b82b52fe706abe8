//! Small-dense-matrix numerics used throughout the crate.

mod eigen;
mod expm;
mod matrix;
mod newton;
mod roots;

pub use eigen::{eigenvalues, spectral_radius, ComplexEig, MAX_ORDER};
pub use expm::{affine_flow, mat_exp, AffineFlow};
pub use matrix::{Lu, Matrix, Vector};
pub use newton::{fd_jacobian, newton_solve, JacobianSource, NewtonOptions, NewtonOutcome};
pub use roots::{bracketed_root, try_bracketed_root};
