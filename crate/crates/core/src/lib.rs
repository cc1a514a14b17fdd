//! Semiclassical scattering of Gaussian states.

pub mod dynamics;
pub mod error;
pub mod fourier;
pub mod linalg;
pub mod ode;
pub mod oracle;
pub mod packet;
pub mod poly;
pub mod potential;
pub mod quad;
pub mod smatrix;
pub mod sphere;

pub use error::{Error, Result};
pub use linalg::{BranchTrackedDet, ComplexSymMatrix};
pub use poly::{MultiIndex, MultiPoly};
