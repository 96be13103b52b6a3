//! Low-rank alternating solvers for complex-scaled Helmholtz problems.
//!
//! The 2D solver represents the wave as a rank-`r` matrix `U Rᴴ Vᴴ`, the 3D
//! solvers use Tucker tensors. Both close the domain with exterior complex
//! scaling so homogeneous Dirichlet conditions at the contour ends absorb the
//! outgoing waves. A full-grid sparse direct solve is kept around as an oracle.
//!
//! Column-major `vec` is used throughout: `vec(A X Bᵀ) = (B ⊗ A) vec(X)`.

pub mod error;
pub mod farfield;
pub mod grid;
pub mod kron_linalg;
pub mod report;
pub mod solver2d;
pub mod solver3d;
pub mod rng;
pub mod special;
pub mod tensor;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Dense complex matrix used across the crate.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Crate version, echoed in run metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
