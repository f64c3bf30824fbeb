//! Mutation-augmented execution-trace corpora for Python programs: program
//! mutation, traced execution, trace serialization, scoring and the
//! output-similarity downstream tasks.

pub mod codec;
pub mod dataset;
pub mod downstream;
pub mod harness;
pub mod manifest;
pub mod metrics;
pub mod mutation;
pub mod program;
pub mod pyrepr;
pub mod scalar;
pub mod trace;

pub use scalar::Scalar;

/// Exact rational used by the oracle checks.
pub type Exact = num_rational::Ratio<i64>;

pub type Scores = metrics::Prf<f64>;
pub type ExactScores = metrics::Prf<Exact>;
pub type Report = metrics::EvalReport<f64>;
pub type ExactReport = metrics::EvalReport<Exact>;
