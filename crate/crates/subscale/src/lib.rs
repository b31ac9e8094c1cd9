//! Subgraph-centric graph analytics on a single machine.
//!
//! The pipeline has three phases: declarative extraction of k-hop subgraphs
//! of interest from a property graph, overlap-aware packing of those
//! subgraphs into capacity-bounded bins, and bitmap-scoped execution of user
//! graph programs over each subgraph. One-pass programs (clustering
//! coefficient, triangle/motif counting, personalized PageRank) run through
//! the scoped-view engine; iterative programs (connected components) run
//! under a BSP superstep loop with query-vertex ownership and ghost
//! propagation between partitions.

pub mod apps;
pub mod bitmap;
pub mod bsp;
pub mod engine;
pub mod error;
pub mod extraction;
pub mod graph;
pub mod hashing;
pub mod metrics;
pub mod packing;
pub mod pipeline;
pub mod predicate;
pub mod synth;

pub use error::Error;
pub use graph::{AttributeRecord, AttributeValue, PropertyGraph, VertexId, WeightConfig};
pub use packing::{PackingConfig, PackingSolution};
