//! Region-adjacency graph and greedy optimal-transport merging.

mod graph;
mod marker;
mod roc;
mod unsupervised;

pub use graph::{build_rag, RegionGraph};
pub use marker::{
    marker_dissimilarity, run_marker, Marker, MarkerFile, MarkerOutcome, MarkerSet, UNASSIGNED,
};
pub use roc::{compute_roc, partition_at, Roc, RocPoint};
pub use unsupervised::{energy, merge_cost, run_unsupervised, MergeRecord, MergeTrace, Merger};
