//! End-to-end preparation: palette, superpixels, histograms and graph.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::histogram::{
    compute_palette, palette_from_regions, region_histograms, Palette, PaletteReport, RegionStats,
    DEFAULT_AUX_REGIONS, DEFAULT_K,
};
use crate::image::{Image, LabelMap};
use crate::merge::{build_rag, run_unsupervised, MergeTrace, RegionGraph};
use crate::superpixel::{power_slic, SlicConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub slic: SlicConfig,
    pub palette_size: usize,
    pub aux_regions: usize,
}

impl PipelineConfig {
    pub fn new(superpixels: usize) -> Self {
        PipelineConfig {
            slic: SlicConfig::new(superpixels),
            palette_size: DEFAULT_K,
            aux_regions: DEFAULT_AUX_REGIONS,
        }
    }

    fn aux_config(&self) -> SlicConfig {
        SlicConfig {
            superpixels: self.aux_regions,
            ..self.slic.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseTimings {
    pub palette: Duration,
    pub superpixels: Duration,
}

/// Everything the merge stage needs, computed once per image.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub palette: Palette,
    pub palette_requested: usize,
    pub superpixels: LabelMap,
    pub stats: Vec<RegionStats>,
    pub graph: RegionGraph,
    pub timings: PhaseTimings,
}

/// Computes the palette from an auxiliary partition, then the working
/// superpixels and their graph. When both partitions use the same settings
/// the auxiliary one is reused.
pub fn prepare(img: &Image, cfg: &PipelineConfig) -> Result<Prepared> {
    cfg.slic.validate(img.len())?;
    if cfg.palette_size == 0 {
        return Err(Error::Config("palette size must be at least 1".into()));
    }
    let aux = cfg.aux_config();
    let start = Instant::now();
    let (report, superpixels, palette_time, sp_time): (PaletteReport, LabelMap, _, _) =
        if aux.superpixels == cfg.slic.superpixels {
            let sp = power_slic(img, &cfg.slic)?;
            let report = palette_from_regions(img, &sp, cfg.palette_size);
            let t = start.elapsed();
            (report, sp, t, Duration::ZERO)
        } else {
            let report = compute_palette(img, cfg.palette_size, &aux)?;
            let palette_time = start.elapsed();
            let start = Instant::now();
            let sp = power_slic(img, &cfg.slic)?;
            (report, sp, palette_time, start.elapsed())
        };
    let start = Instant::now();
    let stats = region_histograms(img, &superpixels, &report.palette)?;
    let graph = build_rag(&superpixels, stats.clone(), &report.palette)?;
    let sp_time = sp_time + start.elapsed();
    Ok(Prepared {
        palette: report.palette,
        palette_requested: report.requested,
        superpixels,
        stats,
        graph,
        timings: PhaseTimings {
            palette: palette_time,
            superpixels: sp_time,
        },
    })
}

/// Unsupervised segmentation into `n` regions.
pub fn segment(img: &Image, cfg: &PipelineConfig, n: usize) -> Result<(LabelMap, MergeTrace)> {
    let prepared = prepare(img, cfg)?;
    run_unsupervised(prepared.graph, n)
}
