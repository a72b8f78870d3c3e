//! Truncated series and superposition representations of completely random
//! measures (CRMs) and normalized CRMs, with truncation error bounds.
//!
//! The crate is organised in layers:
//!
//! * [`specialfn`]: Lambert W, exponential integral, gamma-family functions
//!   and adaptive quadrature.
//! * [`measures`]: rate measures and likelihoods.
//! * [`reps`]: the seven sequential representations and the sampler.
//! * [`bounds`]: truncation error bounds for CRMs.
//! * [`ncrm`]: bounds and sampling helpers for normalized CRMs.
//! * [`validate`]: Monte Carlo checks of the bounds and samplers.
//! * [`sweep`]: bound and cost curves over a grid of truncation levels.
//!
//! Replicate loops run on rayon when the `parallel` feature is enabled
//! (the default). Results do not depend on the number of threads.

pub mod bounds;
pub mod error;
pub mod exec;
pub mod measures;
pub mod ncrm;
pub mod reps;
pub mod specialfn;
pub mod sweep;
pub mod validate;

pub use error::{CrmError, Result};
