//! Filtered approximate k-nearest-neighbor search over spatio-temporal metadata.
//!
//! The metadata space is normalized to the unit hypercube and partitioned by a
//! hierarchy of uniform grids. Every non-empty cube at every layer carries its
//! own proximity graph, and nodes are linked to their nearest neighbors in the
//! face-adjacent cubes of the same layer. A query picks the layer whose cube
//! width matches the filter's extent and searches the graphs of the cubes the
//! filter touches as if they were one merged graph.
//!
//! Module map:
//!
//! - [`vecspace`]: vector storage, distance kernels, fvecs/ivecs IO
//! - [`metagrid`]: metadata normalization and grid geometry
//! - [`filters`]: filter predicates and their geometry
//! - [`proxgraph`]: per-cube navigable graphs and the shared beam search
//! - [`cubeindex`]: the layered index, updates and persistence
//! - [`hybridsearch`]: query strategies and the pre-/post-filter baselines
//! - [`benchkit`]: synthetic data, workloads, ground truth and metrics

pub mod benchkit;
pub mod cubeindex;
pub mod error;
pub mod filters;
pub mod hybridsearch;
pub mod metagrid;
pub mod proxgraph;
pub mod vecspace;

/// Global point identifier; also the row of the point in the vector and metadata stores.
pub type PointId = u32;

pub use cubeindex::{CubeGraphIndex, IndexParams, IndexStats};
pub use error::{Error, Result};
pub use filters::{Aabb, Filter, FilterGeometry};
pub use hybridsearch::{Hit, SearchCounters, SearchRequest, SearchResult, Strategy};
pub use metagrid::{CubeId, GridConfig, MetaStore};
pub use proxgraph::{LocalGraph, SearchParams};
pub use vecspace::{DistanceMetric, VectorStore};
