//! Aggregation-based coarse spaces for weighted graph Laplacians, guaranteed
//! functional (hypercircle) a posteriori error bounds for coarse
//! approximations, and adaptive reshaping of aggregations driven by the
//! bound.
//!
//! The pipeline: build a [`graph::Graph`], coarsen it with the pairwise
//! matching hierarchy in [`aggregation`], assemble coarse vertex and edge
//! spaces in [`coarse`], certify the coarse solution with the estimator in
//! [`estimator`], and let [`adaptivity`] split the aggregates carrying the
//! largest share of the bound. [`experiment`] wires it all into the batch
//! CLI.

pub mod adaptivity;
pub mod aggregation;
pub mod coarse;
pub mod estimator;
pub mod experiment;
pub mod export;
pub mod generators;
pub mod graph;
pub mod linalg;
pub mod mtx;
