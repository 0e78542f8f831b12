//! Near-linear-time approximation pipeline for Steiner tree and Steiner forest
//! in doubling metrics.
//!
//! The pipeline runs banyan construction (a light spanner over the real points
//! plus a small set of useful Steiner points), net-respecting rerouting,
//! sparsification into `q`-sparse pieces, hierarchical clustering with
//! portals, and a bottom-up dynamic program over cluster configurations.
//! Exact and 2-approximate solvers in [`oracles`] check every stage.

pub mod banyan;
pub mod clustering;
pub mod dp;
pub mod error;
pub mod forest;
pub mod graph;
pub mod hierarchy;
pub mod instance;
pub mod metric;
pub mod oracles;
pub mod pipeline;
pub mod spanner;
pub mod sparsifier;

pub use error::{Error, Result};
pub use forest::{ForestSolution, TerminalPair};
pub use graph::{Edge, WeightedGraph};
pub use hierarchy::NetHierarchy;
pub use metric::{PointId, PointSet};
