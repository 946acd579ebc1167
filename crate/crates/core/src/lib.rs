//! Construction and verification of joint laws that match a reference
//! law in every marginal and in the law of the sum without being equal
//! to it.
//!
//! Two constructions are provided: finite orthogonal-polynomial
//! perturbations of a product law within the Meixner classes, and
//! symmetry-balancing copula densities assembled from reflections and
//! coordinate permutations. Numerical verification utilities (quadrature,
//! sampling, goodness-of-fit) close the loop.

pub mod copula;
pub mod density;
pub mod error;
pub mod expansion;
pub mod matcher;
pub mod meixner;
pub mod verify;

pub use error::{Error, Result};
pub use expansion::{CoefficientTable, MultiIndex};
pub use meixner::{MeixnerSpec, MeixnerType};
