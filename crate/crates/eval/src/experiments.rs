//! The synthetic experiments behind the acceptance report, shared with the
//! command-line tool.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use otseg::merge::{compute_roc, run_unsupervised};
use otseg::pipeline::{prepare, PipelineConfig};
use otseg::{LabelMap, Result};

use crate::metrics::{best_ious, boundary_recall, majority_relabel};
use crate::scenes::{generate_disks, generate_staged_cells};

pub const DISK_COUNT: usize = 25;
pub const DISK_SIDE: usize = 256;
pub const DISK_SIGMA: f64 = 0.1;
pub const DISK_SUPERPIXELS: usize = 300;
/// Compactness for the disks run. Regular cells at this noise level need
/// more than `100 * sigma * sqrt(2)`, edge adherence less than 80.
pub const DISK_COMPACTNESS: f64 = 30.0;

/// 255 = 17 · 15, so 289 superpixels start on an exact 15 px grid and the
/// tiles are cut along it.
pub const STAGED_SIDE: usize = 255;
pub const STAGED_CELL: usize = 15;
pub const STAGED_SIGMA: f64 = 0.02;
pub const STAGED_SUPERPIXELS: usize = 289;

pub fn disk_config() -> PipelineConfig {
    let mut cfg = PipelineConfig::new(DISK_SUPERPIXELS);
    cfg.slic.compactness = DISK_COMPACTNESS;
    cfg
}

/// Outcome of one disks run, segmenting into `DISK_COUNT` regions.
#[derive(Clone, Debug)]
pub struct DiskRun {
    /// Best IoU per truth label; index 0 is the background.
    pub ious: Vec<f64>,
    /// Same, for the best possible union of the superpixels (each assigned
    /// to its majority truth label). Bounds what any merge order can reach.
    pub oracle_ious: Vec<f64>,
    pub superpixels: usize,
    /// Truth boundary pixels within 1 px of a superpixel boundary.
    pub boundary_recall: f64,
    /// Superpixels, palette, histograms, graph and merging.
    pub elapsed: Duration,
}

impl DiskRun {
    pub fn background_iou(&self) -> f64 {
        self.ious[0]
    }

    pub fn disks_at(&self, threshold: f64) -> usize {
        self.ious[1..].iter().filter(|&&v| v >= threshold).count()
    }

    pub fn oracle_disks_at(&self, threshold: f64) -> usize {
        self.oracle_ious[1..]
            .iter()
            .filter(|&&v| v >= threshold)
            .count()
    }

    /// At least 24 of 25 disks at IoU 0.9, background at 0.95, under 5 s.
    pub fn passes(&self) -> bool {
        self.disks_at(0.9) + 1 >= DISK_COUNT
            && self.background_iou() >= 0.95
            && self.elapsed < Duration::from_secs(5)
    }
}

pub fn run_disks(seed: u64) -> Result<DiskRun> {
    let scene = generate_disks(seed, DISK_COUNT, DISK_SIDE, DISK_SIDE, DISK_SIGMA, false)?;
    let start = Instant::now();
    let prepared = prepare(&scene.image, &disk_config())?;
    let superpixels = prepared.superpixels.clone();
    let (labels, _) = run_unsupervised(prepared.graph, DISK_COUNT)?;
    let elapsed = start.elapsed();
    Ok(DiskRun {
        ious: best_ious(&labels, &scene.truth)?,
        oracle_ious: best_ious(&majority_relabel(&superpixels, &scene.truth)?, &scene.truth)?,
        superpixels: superpixels.region_count(),
        boundary_recall: boundary_recall(&superpixels, &scene.truth, 1)?,
        elapsed,
    })
}

#[derive(Clone, Debug)]
pub struct StagedRun {
    /// Position of the true region count among the ranked ROC maxima, or
    /// `None` if it is not a local maximum.
    pub rank: Option<usize>,
    /// Cheapest merge across tiles over the costliest merge inside one,
    /// with superpixels labeled by their majority tile.
    pub separation: f64,
}

/// Runs the full hierarchy on a staged scene tiled into `regions` tiles.
pub fn run_staged(seed: u64, regions: usize) -> Result<StagedRun> {
    let scene = generate_staged_cells(
        seed,
        regions,
        STAGED_SIDE,
        STAGED_SIDE,
        STAGED_CELL,
        STAGED_SIGMA,
    )?;
    let prepared = prepare(&scene.image, &PipelineConfig::new(STAGED_SUPERPIXELS))?;
    let mut tile = majority_tiles(&prepared.superpixels, &scene.truth);
    let (_, trace) = run_unsupervised(prepared.graph, 1)?;
    let (mut intra, mut inter) = (0.0f64, f64::INFINITY);
    for rec in &trace.records {
        let (w, l) = (rec.winner as usize, rec.loser as usize);
        if tile[w].is_some() && tile[w] == tile[l] {
            intra = intra.max(rec.e);
        } else {
            inter = inter.min(rec.e);
            tile[w] = None;
        }
    }
    let roc = compute_roc(&trace)?;
    Ok(StagedRun {
        rank: roc.maxima.iter().position(|&r| r == regions),
        separation: inter / intra,
    })
}

fn majority_tiles(superpixels: &LabelMap, truth: &LabelMap) -> Vec<Option<u32>> {
    let n = superpixels
        .labels()
        .iter()
        .max()
        .map_or(0, |&l| l as usize + 1);
    let mut votes: Vec<BTreeMap<u32, usize>> = vec![BTreeMap::new(); n];
    for (&s, &t) in superpixels.labels().iter().zip(truth.labels()) {
        *votes[s as usize].entry(t).or_default() += 1;
    }
    votes
        .iter()
        .map(|v| v.iter().max_by_key(|(_, &c)| c).map(|(&t, _)| t))
        .collect()
}
