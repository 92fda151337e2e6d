use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use otseg::histogram::{DEFAULT_AUX_REGIONS, DEFAULT_K};
use otseg::image::{load_image, rgb_to_lab, select_channels, to_gray};
use otseg::pipeline::PipelineConfig;
use otseg::{ColorSpace, Error, Image, Result};

#[derive(Debug, Parser)]
#[command(
    name = "otseg",
    version,
    about = "Superpixel merging under Wasserstein histogram costs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment an image into a fixed number of regions.
    Segment(SegmentArgs),
    /// Merge down to one region and rank region counts by the ROC curve.
    Autoregions(AutoregionsArgs),
    /// Class-consistent merging from seed markers.
    Markers(MarkersArgs),
    /// Run the HTTP session service used by the marker UI.
    Serve(ServeArgs),
    /// Dice scores of a segmentation against a mask or annotated points.
    Dsc(DscArgs),
    /// Per-phase timings on generated disk scenes.
    Bench(BenchArgs),
    /// Write a synthetic disks scene (image and truth).
    GenDisks(GenDisksArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SpaceArg {
    Rgb,
    Lab,
    Gray,
}

/// Input image and everything that shapes the superpixels and palette.
#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// PNG, PGM or PPM image.
    #[arg(long)]
    pub input: PathBuf,
    /// Requested superpixel count m.
    #[arg(long)]
    pub superpixels: usize,
    /// Palette size (representative colors).
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// SLIC compactness.
    #[arg(long, default_value_t = 10.0)]
    pub alpha: f64,
    /// Channel indices to keep after the color conversion, e.g. `0,1`.
    #[arg(long, value_delimiter = ',')]
    pub channels: Option<Vec<usize>>,
    /// Working color space. Defaults to lab for color input, gray otherwise.
    #[arg(long, value_enum)]
    pub colorspace: Option<SpaceArg>,
    /// Factor on unit-range channel values in the SLIC color term.
    #[arg(long, default_value_t = 100.0)]
    pub color_scale: f64,
    /// Superpixels of the auxiliary partition the palette is drawn from.
    #[arg(long, default_value_t = DEFAULT_AUX_REGIONS)]
    pub aux_regions: usize,
    /// SLIC sweeps.
    #[arg(long, default_value_t = 10)]
    pub iterations: usize,
}

impl PrepareArgs {
    pub fn config(&self) -> PipelineConfig {
        let mut cfg = PipelineConfig::new(self.superpixels);
        cfg.slic.compactness = self.alpha;
        cfg.slic.color_scale = self.color_scale;
        cfg.slic.iterations = self.iterations;
        cfg.palette_size = self.k;
        cfg.aux_regions = self.aux_regions;
        cfg
    }

    pub fn load(&self) -> Result<Image> {
        convert(
            load_image(&self.input)?,
            self.colorspace,
            self.channels.as_deref(),
        )
    }
}

/// Applies the color space choice, then the channel selection.
pub fn convert(img: Image, space: Option<SpaceArg>, channels: Option<&[usize]>) -> Result<Image> {
    let img = match (space, img.space()) {
        (None, ColorSpace::Rgb) | (Some(SpaceArg::Lab), _) => rgb_to_lab(&img)?,
        (Some(SpaceArg::Gray), _) => to_gray(&img)?,
        (Some(SpaceArg::Rgb), ColorSpace::Rgb) | (None, _) => img,
        (Some(SpaceArg::Rgb), other) => {
            return Err(Error::ColorSpace {
                expected: "rgb",
                actual: other.name(),
            })
        }
    };
    match channels {
        Some(idx) => select_channels(&img, idx),
        None => Ok(img),
    }
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[command(flatten)]
    pub prepare: PrepareArgs,
    /// Target region count n.
    #[arg(long)]
    pub regions: usize,
    /// Output label map; format from the extension (.png, .csv, .json).
    #[arg(long)]
    pub out: PathBuf,
    /// Merge trace output: CSV, or JSON for a `.json` path.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AutoregionsArgs {
    #[command(flatten)]
    pub prepare: PrepareArgs,
    /// Number of ranked candidates to write.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct MarkersArgs {
    #[command(flatten)]
    pub prepare: PrepareArgs,
    /// JSON file `{"markers":[{"x":..,"y":..,"class":".."}]}`.
    #[arg(long)]
    pub markers: PathBuf,
    /// Class map: 0 unassigned, classes numbered from 1 in name order.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the region partition here.
    #[arg(long)]
    pub regions_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: String,
    /// Idle minutes before a session is dropped.
    #[arg(long, default_value_t = 30)]
    pub idle_minutes: u64,
}

#[derive(Debug, Args)]
pub struct DscArgs {
    /// Predicted label map.
    #[arg(long)]
    pub pred: PathBuf,
    /// Truth mask (nonzero is foreground).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Annotated object points, JSON `[[x, y], ...]`.
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// Treat the prediction as a foreground map already instead of
    /// designating its largest connected component as background.
    #[arg(long)]
    pub foreground_given: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// `pixels:superpixels` pairs.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "262144:250,262144:500,262144:1000"
    )]
    pub sizes: Vec<String>,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Stop merging at this many regions instead of one.
    #[arg(long)]
    pub target: Option<usize>,
    /// Use all cores.
    #[arg(long)]
    pub parallel: bool,
    /// Also write the table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenDisksArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 25)]
    pub count: usize,
    /// Side of the square image.
    #[arg(long, default_value_t = 256)]
    pub size: usize,
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
    /// Let disks run past the image border.
    #[arg(long)]
    pub occlusion: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}
