//! Bayesian finite mixtures of normals with an unknown number of components.
//!
//! The marginal likelihood `f(x | k)` is estimated for every `k` up to a
//! bound from how often fixed-`k` Gibbs samplers leave components empty.
//! A variable-`k` sampler, exact enumeration for small data and a
//! quadrature check of the component marginal serve as references.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod marlik;
pub mod model;
pub mod oracle;
pub mod prior;
pub mod sampler;
pub mod special;
pub mod stats;
pub mod tables;

pub use data::{parse_dataset, read_dataset, Dataset};
pub use error::{Error, Result};
pub use marlik::{estimate, posterior_from_log_f, posterior_k, Estimator, MarlikResult, Pooling};
pub use model::{AllocationState, ModelSpec, OccupancyPattern, SuffStats};
pub use prior::{PriorFamily, PriorOnK};
pub use sampler::{ChainConfig, ChainSummary, Init, Scan};
