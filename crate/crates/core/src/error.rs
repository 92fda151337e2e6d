use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("expected color space {expected}, got {actual}")]
    ColorSpace {
        expected: &'static str,
        actual: &'static str,
    },
    #[error("channel index {index} out of range for {channels}-channel image")]
    ChannelOutOfRange { index: usize, channels: usize },
    #[error("duplicate channel index {0}")]
    DuplicateChannel(usize),
    #[error("label {label} does not fit the {format} format")]
    LabelOverflow { label: u32, format: &'static str },
    #[error("dimension mismatch: {0}")]
    Dimensions(String),
    #[error("unbalanced transport problem: supply {supply} vs demand {demand}")]
    Unbalanced { supply: f64, demand: f64 },
    #[error("invalid transport problem: {0}")]
    InvalidProblem(String),
    #[error("transport solver did not converge after {0} pivots")]
    NotConverged(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("target region count {target} unreachable (live {live}, components {components})")]
    Unreachable {
        target: usize,
        live: usize,
        components: usize,
    },
    #[error("region {0} is not live")]
    DeadRegion(usize),
    #[error("marker at ({x}, {y}) lies outside the {width}x{height} image")]
    MarkerOutOfBounds {
        x: i64,
        y: i64,
        width: usize,
        height: usize,
    },
    #[error("superpixel {superpixel} holds markers of classes {first:?} and {second:?}")]
    ConflictingMarkers {
        superpixel: usize,
        first: String,
        second: String,
    },
    #[error("merge trace too short: {0} records")]
    TraceTooShort(usize),
}
