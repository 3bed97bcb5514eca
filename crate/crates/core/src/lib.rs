//! Multiscale geometry of discrete measures.
//!
//! Computes scale-by-scale flatness and density statistics of weighted point
//! clouds: Jones-type β numbers, transportation (α) coefficients, Wolff and
//! Jones energies with exact closed forms, square-function constituents,
//! symmetry diagnostics, and the domination filters that organize dyadic
//! cubes by energy contribution. A verification layer checks the library's
//! quantitative inequalities on generated example families.

pub mod bump;
pub mod calibration;
pub mod coeffs;
pub mod energy;
pub mod error;
pub mod filters;
pub mod generate;
pub mod lattice;
pub mod measure;
pub mod transport;
pub mod sqfn;
pub mod suites;
pub mod sum;
pub mod symmetry;

pub use bump::BumpProfile;
pub use error::{Error, Result};
pub use generate::{generate, perturb, GeneratorSpec};
pub use measure::{DiscreteMeasure, MeasureFile};
