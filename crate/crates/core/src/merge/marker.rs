use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::graph::RegionGraph;
use super::unsupervised::{MergeTrace, Merger};
use crate::error::{Error, Result};
use crate::histogram::{merge_stats, region_distance_sq, RegionStats};
use crate::image::LabelMap;

/// Class id of pixels in regions without markers.
pub const UNASSIGNED: u32 = 0;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Marker {
    pub x: i64,
    pub y: i64,
    pub class: String,
}

/// On-disk and on-wire marker list: `{"markers":[{"x":..,"y":..,"class":".."}]}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MarkerFile {
    pub markers: Vec<Marker>,
}

/// In-bounds class markers for one image. Class ids are assigned by sorting
/// the distinct class names, starting at 1.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkerSet {
    points: Vec<Marker>,
    classes: Vec<String>,
    width: usize,
    height: usize,
}

impl MarkerSet {
    pub fn new(points: Vec<Marker>, width: usize, height: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config("marker list is empty".into()));
        }
        for p in &points {
            if p.x < 0 || p.y < 0 || p.x as u64 >= width as u64 || p.y as u64 >= height as u64 {
                return Err(Error::MarkerOutOfBounds {
                    x: p.x,
                    y: p.y,
                    width,
                    height,
                });
            }
            if p.class.is_empty() {
                return Err(Error::Config("marker class name is empty".into()));
            }
        }
        let classes: BTreeSet<String> = points.iter().map(|p| p.class.clone()).collect();
        Ok(MarkerSet {
            points,
            classes: classes.into_iter().collect(),
            width,
            height,
        })
    }

    pub fn from_json(text: &str, width: usize, height: usize) -> Result<Self> {
        let file: MarkerFile =
            serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
        MarkerSet::new(file.markers, width, height)
    }

    pub fn points(&self) -> &[Marker] {
        &self.points
    }

    /// Distinct class names in id order; `class_names()[c - 1]` has id `c`.
    pub fn class_names(&self) -> &[String] {
        &self.classes
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_id(&self, name: &str) -> Option<u32> {
        self.classes
            .binary_search_by(|c| c.as_str().cmp(name))
            .ok()
            .map(|i| i as u32 + 1)
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Class id per initial region, failing if one region holds two classes.
    fn seeds(&self, initial: &LabelMap) -> Result<BTreeMap<u32, u32>> {
        let mut seeds: BTreeMap<u32, u32> = BTreeMap::new();
        for p in &self.points {
            let region = initial.get(p.x as usize, p.y as usize);
            let class = self
                .class_id(&p.class)
                .expect("class collected at construction");
            match seeds.insert(region, class) {
                Some(prev) if prev != class => {
                    let (a, b) = (prev.min(class), prev.max(class));
                    return Err(Error::ConflictingMarkers {
                        superpixel: region as usize,
                        first: self.classes[a as usize - 1].clone(),
                        second: self.classes[b as usize - 1].clone(),
                    });
                }
                _ => {}
            }
        }
        Ok(seeds)
    }
}

/// Reference region per class: the union of the initial regions seeded with
/// that class, frozen before any merge.
fn references(
    g: &RegionGraph,
    seeds: &BTreeMap<u32, u32>,
    n_classes: usize,
) -> Result<Vec<RegionStats>> {
    let mut refs: Vec<Option<RegionStats>> = vec![None; n_classes];
    for (&region, &class) in seeds {
        let stats = g.stats(region)?;
        let slot = &mut refs[class as usize - 1];
        *slot = Some(match slot.take() {
            Some(acc) => merge_stats(&acc, stats),
            None => stats.clone(),
        });
    }
    Ok(refs
        .into_iter()
        .map(|r| r.expect("every class has a marker"))
        .collect())
}

/// Marker-aware dissimilarity: with `C` the reference of the only class
/// marked in `i ∪ j` (or region `i` itself otherwise), `d²(i, C) + d²(j, C)`.
pub fn marker_dissimilarity(
    i: u32,
    j: u32,
    g: &RegionGraph,
    references: &[RegionStats],
) -> Result<f64> {
    let (si, sj) = (g.stats(i)?, g.stats(j)?);
    let classes: BTreeSet<u32> = g
        .marker_classes(i)
        .union(g.marker_classes(j))
        .copied()
        .collect();
    let pal = g.palette();
    let reference = match classes.len() {
        1 => {
            let c = *classes.first().expect("one class");
            references
                .get(c as usize - 1)
                .ok_or_else(|| Error::Config(format!("no reference region for class {c}")))?
        }
        _ => si,
    };
    Ok(region_distance_sq(si, reference, pal)? + region_distance_sq(sj, reference, pal)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarkerOutcome {
    /// Final partition, compacted.
    pub labels: LabelMap,
    /// Per-pixel class id; [`UNASSIGNED`] for unmarked regions.
    pub classes: LabelMap,
    pub class_names: Vec<String>,
    pub trace: MergeTrace,
}

/// Class-consistent greedy merging. Runs until the region count reaches the
/// number of classes or no admissible pair is left.
pub fn run_marker(g: RegionGraph, markers: &MarkerSet) -> Result<MarkerOutcome> {
    let initial = g.initial_labels();
    if (initial.width(), initial.height()) != markers.dimensions() {
        return Err(Error::Dimensions(format!(
            "markers for {}x{}, image {}x{}",
            markers.width,
            markers.height,
            initial.width(),
            initial.height()
        )));
    }
    let seeds = markers.seeds(initial)?;
    let refs = references(&g, &seeds, markers.n_classes())?;
    let mut g = g;
    for (&region, &class) in &seeds {
        g.add_marker_class(region, class);
    }
    let mut merger = Merger::with_references(g, refs)?;
    merger.run_to(markers.n_classes())?;
    let (graph, trace) = merger.into_parts();

    let regions = graph.region_labels();
    let class_of = |id: u32| {
        graph
            .marker_classes(id)
            .first()
            .copied()
            .unwrap_or(UNASSIGNED)
    };
    let classes = regions.labels().iter().map(|&id| class_of(id)).collect();
    Ok(MarkerOutcome {
        classes: LabelMap::new(regions.width(), regions.height(), classes)?,
        labels: regions.compacted(),
        class_names: markers.class_names().to_vec(),
        trace,
    })
}
