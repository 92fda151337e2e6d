//! Image segmentation by greedy merging of superpixels under a regularized
//! squared 2-Wasserstein cost between region color histograms.
//!
//! The pipeline has three stages:
//!
//! 1. [`superpixel::power_slic`] oversegments the image into compact,
//!    connected superpixels (SLIC clustering followed by an anisotropic
//!    power-diagram assignment).
//! 2. [`histogram`] extracts a small palette of representative colors and
//!    builds one histogram per region over that palette.
//! 3. [`merge`] builds the region-adjacency graph and greedily merges
//!    neighbors, either down to a fixed region count, down to one region
//!    (for rate-of-change model selection), or under class markers.
//!
//! [`ot`] holds the exact transportation solver used for every distance.

pub mod error;
pub mod histogram;
pub mod image;
pub mod labels;
pub mod merge;
pub mod ot;
pub mod pipeline;
pub mod superpixel;

pub use crate::error::{Error, Result};
pub use crate::histogram::{Palette, RegionStats};
pub use crate::image::{ColorSpace, Image, LabelMap};
pub use crate::merge::{MarkerSet, MergeRecord, MergeTrace, RegionGraph};
pub use crate::ot::{Histogram, TransportPlan, TransportProblem};
pub use crate::superpixel::{Generator, SlicConfig};
