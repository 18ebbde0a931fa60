//! Symmetric error laws: kernels, δ moments, correction constants, samplers.

mod constants;
mod deltas;
mod family;
mod kernel;
mod sampling;

pub use constants::{correction_constants, m_terms, CorrectionConstants};
pub use deltas::{delta_constants, delta_oracle, oracle_deltas, DeltaConstants, DELTA_INDICES};
pub use family::Family;
pub use kernel::{kernel, logistic_i_constant, DistributionKernel};
pub use sampling::{sample, Sampler};
