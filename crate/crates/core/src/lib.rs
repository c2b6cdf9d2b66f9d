//! Label-noise-robust node classification: random-walk centrality,
//! noise simulation, a two-layer graph convolutional network and the
//! centrality-sorted curriculum that ties them together.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common double-precision instantiations.

pub mod centrality;
pub mod error;
pub mod gcn;
pub mod graph;
pub mod linalg;
pub mod noise;
pub mod ppr;
pub mod rng;
pub mod scalar;
pub mod tss;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Graph = graph::Graph<f64>;
pub type Graph32 = graph::Graph<f32>;
pub type DenseMatrix = linalg::DenseMatrix<f64>;
pub type PprMatrix = ppr::PprMatrix<f64>;
pub type PprMatrix32 = ppr::PprMatrix<f32>;
pub type CbcScores = centrality::CbcScores<f64>;
pub type GcnParams = gcn::GcnParams<f64>;
pub type GcnParams32 = gcn::GcnParams<f32>;
pub type GcnInputs = gcn::GcnInputs<f64>;
pub type TssOutcome = tss::TssOutcome<f64>;
