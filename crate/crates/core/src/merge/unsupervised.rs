use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graph::RegionGraph;
use super::marker::marker_dissimilarity;
use crate::error::{Error, Result};
use crate::histogram::RegionStats;
use crate::image::LabelMap;

/// Regularized merge cost `E_ij - h_i - h_j`. Negative values are legal.
pub fn merge_cost(e: f64, h_i: f64, h_j: f64) -> f64 {
    e - h_i - h_j
}

/// One accepted merge: `loser` folded into `winner`, leaving `r` regions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub winner: u32,
    pub loser: u32,
    /// Dissimilarity of the two regions just before the merge.
    pub e: f64,
    /// Queue key the pair was extracted with.
    pub kappa: f64,
    pub r: usize,
    pub lt: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MergeTrace {
    pub initial_regions: usize,
    pub records: Vec<MergeRecord>,
    pub cumulative_energy: f64,
}

impl MergeTrace {
    pub fn new(initial_regions: usize) -> Self {
        MergeTrace {
            initial_regions,
            records: Vec::new(),
            cumulative_energy: 0.0,
        }
    }

    pub fn push(&mut self, record: MergeRecord) {
        self.cumulative_energy += record.kappa;
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Region count after the last merge.
    pub fn final_regions(&self) -> usize {
        self.records.last().map_or(self.initial_regions, |r| r.r)
    }

    /// `LT(r)` for the record that left `r` regions.
    pub fn lt(&self, r: usize) -> Option<f64> {
        let idx = self.initial_regions.checked_sub(r)?.checked_sub(1)?;
        self.records.get(idx).map(|rec| rec.lt)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,winner,loser,E,kappa,LT\n");
        for rec in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                rec.r, rec.winner, rec.loser, rec.e, rec.kappa, rec.lt
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace values are finite")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))
    }
}

/// Regularized energy of a merge sequence, summed afresh from the records.
pub fn energy(trace: &MergeTrace) -> f64 {
    trace.records.iter().map(|r| r.kappa).sum()
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    key: f64,
    i: u32,
    j: u32,
}

impl Entry {
    fn rank(&self) -> (u32, u32, u32) {
        (self.i.min(self.j), self.i.max(self.j), self.i)
    }
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Reversed so the std max-heap pops the smallest key first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .key
            .total_cmp(&self.key)
            .then_with(|| other.rank().cmp(&self.rank()))
    }
}

fn edge(i: u32, j: u32) -> (u32, u32) {
    (i.min(j), i.max(j))
}

/// Greedy merging driver shared by the unsupervised and marker modes.
///
/// Entries are popped in key order and accepted when both regions are live
/// (and, with markers, carry at most one class between them). Keys of
/// entries already in the queue are never refreshed; after a merge, fresh
/// entries are pushed for every neighbor of the winner.
pub struct Merger {
    graph: RegionGraph,
    queue: BinaryHeap<Entry>,
    dist: HashMap<(u32, u32), f64>,
    references: Option<Vec<RegionStats>>,
    trace: MergeTrace,
}

impl Merger {
    pub fn new(graph: RegionGraph) -> Result<Self> {
        Self::build(graph, None)
    }

    /// Marker mode: `references[c - 1]` is the frozen reference region of
    /// class id `c`.
    pub(crate) fn with_references(
        graph: RegionGraph,
        references: Vec<RegionStats>,
    ) -> Result<Self> {
        Self::build(graph, Some(references))
    }

    fn build(graph: RegionGraph, references: Option<Vec<RegionStats>>) -> Result<Self> {
        let mut merger = Merger {
            trace: MergeTrace::new(graph.live_count()),
            queue: BinaryHeap::new(),
            dist: HashMap::new(),
            graph,
            references,
        };
        let edges = merger.graph.edges();
        let values = edges
            .par_iter()
            .map(|&(i, j)| merger.dissimilarity(i, j))
            .collect::<Result<Vec<_>>>()?;
        for (&(i, j), value) in edges.iter().zip(values) {
            if let Some(e) = value {
                merger.insert(i, j, e);
            }
        }
        Ok(merger)
    }

    pub fn graph(&self) -> &RegionGraph {
        &self.graph
    }

    pub fn trace(&self) -> &MergeTrace {
        &self.trace
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn into_parts(self) -> (RegionGraph, MergeTrace) {
        (self.graph, self.trace)
    }

    /// Current dissimilarity of an adjacent live pair, if it is mergeable.
    pub fn current_distance(&self, i: u32, j: u32) -> Option<f64> {
        self.dist.get(&edge(i, j)).copied()
    }

    fn allowed(&self, i: u32, j: u32) -> bool {
        self.references.is_none()
            || self
                .graph
                .marker_classes(i)
                .union(self.graph.marker_classes(j))
                .nth(1)
                .is_none()
    }

    /// `None` when the pair may never merge (two marker classes).
    fn dissimilarity(&self, i: u32, j: u32) -> Result<Option<f64>> {
        let Some(refs) = &self.references else {
            return self.graph.distance_sq(i, j).map(Some);
        };
        if self.allowed(i, j) {
            marker_dissimilarity(i, j, &self.graph, refs).map(Some)
        } else {
            Ok(None)
        }
    }

    fn insert(&mut self, i: u32, j: u32, e: f64) {
        self.dist.insert(edge(i, j), e);
        let key = merge_cost(e, self.graph.heterogeneity(i), self.graph.heterogeneity(j));
        self.queue.push(Entry { key, i, j });
    }

    /// Pops until one entry is accepted and performs that merge. Returns
    /// `None` once the queue is exhausted.
    pub fn step(&mut self) -> Result<Option<MergeRecord>> {
        while let Some(Entry { key, i, j }) = self.queue.pop() {
            if !self.graph.is_live(i) || !self.graph.is_live(j) || !self.allowed(i, j) {
                continue;
            }
            let e = self.dist[&edge(i, j)];
            for &k in self.graph.neighbors(j) {
                self.dist.remove(&edge(j, k));
            }
            for &k in self.graph.neighbors(i) {
                self.dist.remove(&edge(i, k));
            }
            self.graph.absorb(i, j)?;
            self.graph.set_heterogeneity(i, e);
            let record = MergeRecord {
                winner: i,
                loser: j,
                e,
                kappa: key,
                r: self.graph.live_count(),
                lt: e,
            };
            self.trace.push(record);

            let neighbors: Vec<u32> = self.graph.neighbors(i).iter().copied().collect();
            let values = neighbors
                .par_iter()
                .map(|&k| self.dissimilarity(i, k))
                .collect::<Result<Vec<_>>>()?;
            for (k, value) in neighbors.into_iter().zip(values) {
                if let Some(e) = value {
                    self.insert(i, k, e);
                }
            }
            return Ok(Some(record));
        }
        Ok(None)
    }

    /// Merges until `n` regions remain or the queue runs dry.
    pub fn run_to(&mut self, n: usize) -> Result<()> {
        while self.graph.live_count() > n {
            if self.step()?.is_none() {
                break;
            }
        }
        Ok(())
    }
}

/// Greedy merging down to exactly `n` regions.
pub fn run_unsupervised(g: RegionGraph, n: usize) -> Result<(LabelMap, MergeTrace)> {
    let live = g.live_count();
    let components = g.component_count();
    if n == 0 || n > live || n < components {
        return Err(Error::Unreachable {
            target: n,
            live,
            components,
        });
    }
    let mut merger = Merger::new(g)?;
    merger.run_to(n)?;
    let (graph, trace) = merger.into_parts();
    debug_assert_eq!(graph.live_count(), n);
    Ok((graph.partition(), trace))
}
