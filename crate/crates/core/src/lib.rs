//! Numerical laboratory for lattice points in block-structured domains of
//! finite type: exact counting, remainder growth, Fourier decay of the
//! indicator, boundary caps, and the mollified Poisson-summation identity.

pub mod domain;
pub mod caps;
pub mod corpus;
pub mod counter;
pub mod error;
pub mod fourier;
pub mod poisson;
pub mod qmc;
pub mod quadrature;
pub mod remainder;
pub mod roots;
pub mod special;
pub mod stats;

pub use domain::{validate_spec, DomainSpec, ExponentReport, ExponentTable, RawSpec};
pub use counter::{count_lattice_points, CountResult, Scale};
pub use error::{Error, Result, SpecError};
