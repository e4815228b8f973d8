//! Nonlocal vector-valued operators with singular anisotropic kernels on
//! periodic boxes: kernels, Fourier matrix symbols, spectral and real-space
//! operator application, elliptic and parabolic solvers, and the empirical
//! checks that go with them.

pub mod error;
pub mod grid;
pub mod kernel;
pub mod linalg;
pub mod norms;
pub mod operator;
pub mod quadrature;
pub mod solver_elliptic;
pub mod solver_parabolic;
pub mod symbol;
pub mod verification;
pub mod verify;

pub use error::{Error, Result};
