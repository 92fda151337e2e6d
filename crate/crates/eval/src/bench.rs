//! Per-phase timing of the pipeline on generated scenes.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use otseg::merge::Merger;
use otseg::pipeline::{prepare, PipelineConfig};
use otseg::{Error, Result};
use serde::Serialize;

use crate::scenes::generate_disks;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub pixels: usize,
    pub requested: usize,
    /// Superpixels actually produced.
    pub superpixels: usize,
    pub edges: usize,
    pub palette: f64,
    pub oversegment: f64,
    pub distances: f64,
    pub merge: f64,
}

impl BenchRow {
    /// `merge / (m² ln m)` with `m` the produced superpixel count.
    pub fn merge_constant(&self) -> f64 {
        let m = self.superpixels as f64;
        self.merge / (m * m * m.ln())
    }
}

#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub seed: u64,
    /// Timing repeats per phase; the minimum is kept.
    pub repeats: usize,
    /// Merge down to this many regions (1 exercises the full hierarchy).
    pub target: Option<usize>,
    /// Use all cores instead of a single thread.
    pub parallel: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            seed: 0,
            repeats: 3,
            target: Some(1),
            parallel: false,
        }
    }
}

fn min_time<T>(repeats: usize, mut f: impl FnMut() -> Result<T>) -> Result<(Duration, T)> {
    let mut best = Duration::MAX;
    let mut last = None;
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        let out = f()?;
        best = best.min(start.elapsed());
        last = Some(out);
    }
    Ok((best, last.expect("at least one repeat")))
}

/// Times every phase for each `(pixels, superpixels)` pair on a square
/// disks scene with `pixels` rounded to a square side.
pub fn scaling_bench(sizes: &[(usize, usize)], opts: &BenchOptions) -> Result<Vec<BenchRow>> {
    let threads = if opts.parallel { 0 } else { 1 };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| sizes.iter().map(|&(n, m)| bench_one(n, m, opts)).collect())
}

fn bench_one(pixels: usize, m: usize, opts: &BenchOptions) -> Result<BenchRow> {
    let side = (pixels as f64).sqrt().round() as usize;
    // Radii scale with the side, so 25 disks keep the same coverage.
    let count = (side * side / 2600).clamp(1, 25);
    let scene = generate_disks(opts.seed, count, side, side, 0.1, false)?;
    let cfg = PipelineConfig::new(m);
    let (_, prepared) = min_time(opts.repeats, || prepare(&scene.image, &cfg))?;
    let target = opts
        .target
        .unwrap_or(1)
        .max(prepared.graph.component_count());
    let (distances, _) = min_time(opts.repeats, || Merger::new(prepared.graph.clone()))?;
    let merge = merge_loop_time(&prepared.graph, target, opts.repeats)?;
    Ok(BenchRow {
        pixels: side * side,
        requested: m,
        superpixels: prepared.graph.live_count(),
        edges: prepared.graph.edges().len(),
        palette: prepared.timings.palette.as_secs_f64(),
        oversegment: prepared.timings.superpixels.as_secs_f64(),
        distances: distances.as_secs_f64(),
        merge,
    })
}

/// Minimum wall time of the merge loop alone, excluding queue setup.
pub fn merge_loop_time(graph: &otseg::RegionGraph, target: usize, repeats: usize) -> Result<f64> {
    let mut best = f64::INFINITY;
    for _ in 0..repeats.max(1) {
        let mut merger = Merger::new(graph.clone())?;
        let start = Instant::now();
        merger.run_to(target)?;
        best = best.min(start.elapsed().as_secs_f64());
    }
    Ok(best)
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(
        "pixels,requested,superpixels,edges,palette_s,superpixels_s,distances_s,merge_s,merge_c\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.3e}",
            r.pixels,
            r.requested,
            r.superpixels,
            r.edges,
            r.palette,
            r.oversegment,
            r.distances,
            r.merge,
            r.merge_constant()
        );
    }
    out
}

pub fn to_markdown(rows: &[BenchRow]) -> String {
    let mut out = String::from(
        "| N | m | m' | edges | palette (s) | superpixels (s) | distances (s) | merge (s) | merge / m'^2 ln m' |\n\
         |---|---|---|---|---|---|---|---|---|\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {:.4} | {:.4} | {:.4} | {:.4} | {:.3e} |",
            r.pixels,
            r.requested,
            r.superpixels,
            r.edges,
            r.palette,
            r.oversegment,
            r.distances,
            r.merge,
            r.merge_constant()
        );
    }
    out
}

/// Largest over smallest fitted constant.
pub fn constant_spread(rows: &[BenchRow]) -> f64 {
    let cs: Vec<f64> = rows.iter().map(BenchRow::merge_constant).collect();
    let max = cs.iter().copied().fold(f64::MIN, f64::max);
    let min = cs.iter().copied().fold(f64::MAX, f64::min);
    max / min
}
