//! Numerical differential-geometry substrate.
//!
//! Finite-difference derivatives, Jacobi-Lie brackets on Euclidean charts and
//! on SO(n) in left trivialization, SPD linear algebra, skew-matrix utilities
//! and the Killing pairing.

mod fd;
mod fields;
mod group;
mod skew;
mod spd;

pub use fd::{default_step, fd_gradient, fd_jacobian};
pub use fields::{lie_bracket_euclidean, EuclideanVectorField};
pub use group::{
    check_special_orthogonal, expm_skew, lie_bracket_left_trivialized, orthogonality_defect,
    polar_project, LeftTrivializedField,
};
pub use skew::{killing_pairing, wedge, SkewBasis};
pub use spd::{spd_factor_check, spd_solve, spd_solve_matrix};
