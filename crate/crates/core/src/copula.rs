//! Symmetry-balanced copula perturbations: region algebra on the
//! hypercube, sign assignments with their marginalization conditions,
//! the perturbed copula density, and similarly-distributed matching for
//! non-uniform marginals.

pub mod epsilon;
pub mod region;
pub mod similar;
pub mod theta;
