//! Turning black-box spatial predictions into contiguous segments.
//!
//! The pipeline: ingest point data, fit or load a sparse Gaussian-process
//! surrogate, build a spatial neighborhood graph, optionally aggregate
//! vertices into connected groups (with certified bounds on the objective
//! degradation), then partition the graph into connected clusters whose
//! members share a representative predicted value. Instances too large to
//! solve in-process can be exported as a mixed-integer quadratic program
//! with explicit flow-based contiguity constraints.

pub mod aggregate;
pub mod bounds;
pub mod error;
pub mod gp;
pub mod graph;
pub mod io;
pub mod miqp;
pub mod prediction;
pub mod solver;
pub mod testkit;

pub use error::{Error, Result};
pub use prediction::PredictionVector;
