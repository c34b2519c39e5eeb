//! Seeded synthetic data for tests, examples and benchmarks.

mod clusters;
mod queries;

pub use clusters::GaussianClusters;
pub use queries::{SyntheticQueries, REFERENCE_COUNTS};
