//! Numerical toolkit for bipartite entanglement in finite-dimensional,
//! Gaussian, opto-mechanical and spin-bus settings.
//!
//! Modules are layered: [`qstate`] and [`gaussian`] hold the generic
//! measures, the physics modules build on them, and [`ed`] serves as an
//! exact oracle for the perturbative spin theory in [`lde`].

pub mod ed;
pub mod error;
pub mod fit;
pub mod gaussian;
pub mod linalg;
pub mod lde;
pub mod optomech;
pub mod quad;
pub mod qstate;
pub mod sample;
pub mod stationary;

pub use error::{Error, Result};
pub use gaussian::{GaussianState, TwoModeBlocks};
pub use lde::CanonicalParams;
pub use optomech::{OptoUnitaryParams, SubspaceSelector};
pub use qstate::{DensityMatrix, Subsystem};
pub use stationary::{StationaryParams, SteadyState};

pub use num_complex::Complex64 as C64;
pub type CMat = nalgebra::DMatrix<C64>;
pub type RMat = nalgebra::DMatrix<f64>;
