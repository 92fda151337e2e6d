//! Synthetic scenes, accuracy metrics and timing harness for `otseg`.

pub mod bench;
pub mod experiments;
pub mod metrics;
pub mod scenes;

pub use metrics::{
    best_ious, boundary_recall, dice, largest_component_background, majority_relabel, Counts, Truth,
};
pub use scenes::{generate_disks, generate_staged, generate_staged_cells, SyntheticScene};
