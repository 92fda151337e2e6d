//! Representative colors and per-region color histograms.
//!
//! Histograms are kept as integer bin counts plus the region area, so merging
//! two regions is exact and normalization happens only when a distance is
//! evaluated.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Image, LabelMap};
use crate::ot::{GroundCost, Histogram};
use crate::superpixel::{power_slic, SlicConfig};

/// Default number of representative colors.
pub const DEFAULT_K: usize = 15;
/// Default number of auxiliary superpixels used to find them.
pub const DEFAULT_AUX_REGIONS: usize = 300;

/// Shared histogram bin centers.
#[derive(Clone, Debug, PartialEq)]
pub struct Palette {
    centers: Vec<Vec<f64>>,
    cost: GroundCost,
}

impl Palette {
    pub fn new(centers: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = centers.first() else {
            return Err(Error::Config("palette needs at least one color".into()));
        };
        let dim = first.len();
        if dim == 0 || centers.iter().any(|c| c.len() != dim) {
            return Err(Error::Config("palette colors differ in dimension".into()));
        }
        if centers.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Config("palette color is not finite".into()));
        }
        for (i, c) in centers.iter().enumerate() {
            if centers[..i].contains(c) {
                return Err(Error::Config(format!("duplicate palette color {c:?}")));
            }
        }
        let cost = GroundCost::from_centers(&centers);
        Ok(Palette { centers, cost })
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.centers[0].len()
    }

    pub fn ground_cost(&self) -> &GroundCost {
        &self.cost
    }

    /// Index of the nearest center; ties go to the lowest index.
    pub fn bin_index(&self, color: &[f64]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, c) in self.centers.iter().enumerate() {
            let d: f64 = c.iter().zip(color).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.centers).expect("finite floats serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let centers: Vec<Vec<f64>> =
            serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
        Palette::new(centers)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| Error::Write {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Palette::from_json(&text)
    }
}

impl Serialize for Palette {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.centers.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Palette {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let centers = Vec::<Vec<f64>>::deserialize(d)?;
        Palette::new(centers).map_err(serde::de::Error::custom)
    }
}

pub fn bin_index(color: &[f64], pal: &Palette) -> usize {
    pal.bin_index(color)
}

/// Palette extraction result: the palette plus the `k` that was asked for.
#[derive(Clone, Debug)]
pub struct PaletteReport {
    pub palette: Palette,
    pub requested: usize,
}

impl PaletteReport {
    pub fn reduced(&self) -> bool {
        self.palette.len() < self.requested
    }
}

/// Representative colors: the `k` most frequent 8-bit-quantized mean colors
/// of an auxiliary Power-SLIC partition, where frequency is total pixel
/// area. Ties go to the lexicographically lower quantized color. Fewer than
/// `k` colors are returned when the partition has fewer distinct means.
pub fn compute_palette(img: &Image, k: usize, aux: &SlicConfig) -> Result<PaletteReport> {
    if k == 0 {
        return Err(Error::Config("palette size must be at least 1".into()));
    }
    if aux.superpixels < k {
        return Err(Error::Config(format!(
            "{} auxiliary regions cannot yield {k} colors",
            aux.superpixels
        )));
    }
    let mut aux = aux.clone();
    aux.superpixels = aux.superpixels.min(img.len());
    let regions = power_slic(img, &aux)?;
    Ok(palette_from_regions(img, &regions, k))
}

/// [`compute_palette`] on an already computed auxiliary partition.
pub fn palette_from_regions(img: &Image, regions: &LabelMap, k: usize) -> PaletteReport {
    let c = img.channels();
    let count = regions.max_label() as usize + 1;
    let mut sums = vec![0.0; count * c];
    let mut areas = vec![0u64; count];
    for (i, &l) in regions.labels().iter().enumerate() {
        let l = l as usize;
        for (s, v) in sums[l * c..(l + 1) * c].iter_mut().zip(img.pixel_at(i)) {
            *s += v;
        }
        areas[l] += 1;
    }
    let mut freq: BTreeMap<Vec<u8>, u64> = BTreeMap::new();
    for l in (0..count).filter(|&l| areas[l] > 0) {
        let key: Vec<u8> = sums[l * c..(l + 1) * c]
            .iter()
            .map(|s| (s / areas[l] as f64 * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        *freq.entry(key).or_default() += areas[l];
    }
    let mut ranked: Vec<(Vec<u8>, u64)> = freq.into_iter().collect();
    // BTreeMap order is ascending by color; a stable sort by area keeps it.
    ranked.sort_by_key(|r| std::cmp::Reverse(r.1));
    let centers = ranked
        .into_iter()
        .take(k)
        .map(|(q, _)| q.iter().map(|&v| f64::from(v) / 255.0).collect())
        .collect();
    PaletteReport {
        palette: Palette::new(centers).expect("quantized colors are distinct and finite"),
        requested: k,
    }
}

/// Integer bin counts of one region.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RegionStats {
    counts: Vec<u64>,
    area: u64,
}

impl RegionStats {
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        let area = counts.iter().sum();
        if area == 0 {
            return Err(Error::Config("region has no pixels".into()));
        }
        Ok(RegionStats { counts, area })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn area(&self) -> u64 {
        self.area
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Normalized weights `count_i / area`.
    pub fn weights(&self) -> Vec<f64> {
        let area = self.area as f64;
        self.counts.iter().map(|&c| c as f64 / area).collect()
    }

    pub fn histogram(&self) -> Histogram {
        Histogram::from_counts(&self.counts).expect("area is positive")
    }

    /// Union of two disjoint regions.
    pub fn merged(&self, other: &RegionStats) -> RegionStats {
        merge_stats(self, other)
    }

    /// Exact equality of normalized histograms.
    pub fn same_distribution(&self, other: &RegionStats) -> bool {
        self.counts.len() == other.counts.len()
            && self.counts.iter().zip(&other.counts).all(|(&a, &b)| {
                u128::from(a) * u128::from(other.area) == u128::from(b) * u128::from(self.area)
            })
    }
}

pub fn merge_stats(a: &RegionStats, b: &RegionStats) -> RegionStats {
    assert_eq!(a.counts.len(), b.counts.len(), "palette length mismatch");
    RegionStats {
        counts: a.counts.iter().zip(&b.counts).map(|(x, y)| x + y).collect(),
        area: a.area + b.area,
    }
}

/// Squared 2-Wasserstein distance between two regions' histograms.
pub fn region_distance_sq(a: &RegionStats, b: &RegionStats, pal: &Palette) -> Result<f64> {
    if a.same_distribution(b) {
        return Ok(0.0);
    }
    pal.ground_cost().w2_sq(&a.weights(), &b.weights())
}

/// Histogram of every region `0..=max_label` of `lm`.
pub fn region_histograms(img: &Image, lm: &LabelMap, pal: &Palette) -> Result<Vec<RegionStats>> {
    if !lm.matches(img) {
        return Err(Error::Dimensions(format!(
            "labels {}x{} vs image {}x{}",
            lm.width(),
            lm.height(),
            img.width(),
            img.height()
        )));
    }
    if img.channels() != pal.channels() {
        return Err(Error::Dimensions(format!(
            "{}-channel image with {}-channel palette",
            img.channels(),
            pal.channels()
        )));
    }
    let bins: Vec<usize> = img
        .data()
        .par_chunks_exact(img.channels())
        .map(|px| pal.bin_index(px))
        .collect();
    let count = lm.max_label() as usize + 1;
    let k = pal.len();
    let mut counts = vec![0u64; count * k];
    for (&l, &b) in lm.labels().iter().zip(&bins) {
        counts[l as usize * k + b] += 1;
    }
    counts
        .chunks_exact(k)
        .enumerate()
        .map(|(l, c)| {
            RegionStats::from_counts(c.to_vec())
                .map_err(|_| Error::Config(format!("region {l} is empty")))
        })
        .collect()
}
