//! Reconstruction of a complex symmetric 3x3 admittivity tensor field
//! `gamma = sigma + i*omega*epsilon` on a voxel grid from six or more
//! internal magnetic-field measurements.
//!
//! The magnetic fields are solutions of the time-harmonic Maxwell system
//!
//! ```text
//!   curl E + i*omega*mu0*H = 0
//!   curl H - gamma E       = 0
//! ```
//!
//! sampled at voxel centers. From three fields one forms `Y_i = curl H_i`;
//! additional fields are expanded in that basis with coefficients computed
//! from determinant ratios, and the tensor is recovered voxel by voxel from
//! a small linear system over the six-dimensional space of complex symmetric
//! matrices. A separate pathway recovers a scalar (isotropic) admittivity
//! through a transport equation and a least-squares log-potential solve.
//!
//! Modules:
//! - [`field_model`]: grids, field containers, masks, and the on-disk format.
//! - [`tensor_algebra`]: small complex linear algebra and the Hodge star.
//! - [`diffops`]: central finite differences (gradient, curl, divergence).
//! - [`synthetic`]: closed-form plane-wave data, noise injection, and a
//!   staggered-grid frequency-domain forward solver.
//! - [`recon_aniso`]: the anisotropic tensor reconstruction pipeline.
//! - [`recon_iso`]: the isotropic pathway (CGO parameters, transport
//!   coefficients, log-integration).

pub mod diffops;
mod error;
pub mod field_model;
pub mod recon_aniso;
pub mod recon_iso;
pub mod synthetic;
pub mod tensor_algebra;

pub use error::Error;
pub use num_complex::Complex64;

/// Complex 3-vector used throughout the crate.
pub type CVec3 = nalgebra::Vector3<Complex64>;
/// Complex 3x3 matrix used throughout the crate.
pub type CMat3 = nalgebra::Matrix3<Complex64>;
/// Real 3x3 matrix (rotations, antisymmetric generators).
pub type RMat3 = nalgebra::Matrix3<f64>;

pub type Result<T> = std::result::Result<T, Error>;
