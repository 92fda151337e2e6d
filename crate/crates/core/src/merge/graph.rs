use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::histogram::{merge_stats, region_distance_sq, Palette, RegionStats};
use crate::image::LabelMap;

/// Regions of a partition, their histograms and heterogeneity, and which
/// regions touch.
///
/// Region ids are the labels of the initial partition. A merge keeps the
/// winner's id and tombstones the loser, so ids stay stable for the whole
/// run and pixel ownership is resolved through a union-find over the
/// initial labels.
#[derive(Clone, Debug)]
pub struct RegionGraph {
    initial: LabelMap,
    palette: Palette,
    stats: Vec<Option<RegionStats>>,
    h: Vec<f64>,
    adj: Vec<BTreeSet<u32>>,
    markers: Vec<BTreeSet<u32>>,
    parent: Vec<u32>,
    live: usize,
}

/// Builds the graph of a compact label map. Two regions are adjacent when
/// some pair of their pixels are 4-neighbors.
pub fn build_rag(lm: &LabelMap, stats: Vec<RegionStats>, pal: &Palette) -> Result<RegionGraph> {
    if !lm.is_compact() {
        return Err(Error::Config("label map must be compact".into()));
    }
    let m = lm.max_label() as usize + 1;
    if stats.len() != m {
        return Err(Error::Dimensions(format!(
            "{} region histograms for {m} labels",
            stats.len()
        )));
    }
    if let Some(s) = stats.iter().find(|s| s.len() != pal.len()) {
        return Err(Error::Dimensions(format!(
            "{}-bin histogram for a {}-color palette",
            s.len(),
            pal.len()
        )));
    }
    let mut adj = vec![BTreeSet::new(); m];
    let (w, h) = (lm.width(), lm.height());
    let labels = lm.labels();
    for y in 0..h {
        for x in 0..w {
            let a = labels[y * w + x];
            if x + 1 < w {
                let b = labels[y * w + x + 1];
                if a != b {
                    adj[a as usize].insert(b);
                    adj[b as usize].insert(a);
                }
            }
            if y + 1 < h {
                let b = labels[(y + 1) * w + x];
                if a != b {
                    adj[a as usize].insert(b);
                    adj[b as usize].insert(a);
                }
            }
        }
    }
    Ok(RegionGraph {
        initial: lm.clone(),
        palette: pal.clone(),
        stats: stats.into_iter().map(Some).collect(),
        h: vec![0.0; m],
        adj,
        markers: vec![BTreeSet::new(); m],
        parent: (0..m as u32).collect(),
        live: m,
    })
}

impl RegionGraph {
    pub fn palette(&self) -> &Palette {
        &self.palette
    }

    pub fn initial_labels(&self) -> &LabelMap {
        &self.initial
    }

    /// Number of ids ever allocated (the initial region count).
    pub fn capacity(&self) -> usize {
        self.stats.len()
    }

    pub fn live_count(&self) -> usize {
        self.live
    }

    pub fn is_live(&self, i: u32) -> bool {
        self.stats.get(i as usize).is_some_and(Option::is_some)
    }

    pub fn live_ids(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.stats.len() as u32).filter(|&i| self.is_live(i))
    }

    pub fn stats(&self, i: u32) -> Result<&RegionStats> {
        self.stats
            .get(i as usize)
            .and_then(Option::as_ref)
            .ok_or(Error::DeadRegion(i as usize))
    }

    pub fn heterogeneity(&self, i: u32) -> f64 {
        self.h[i as usize]
    }

    pub(crate) fn set_heterogeneity(&mut self, i: u32, value: f64) {
        self.h[i as usize] = value;
    }

    pub fn neighbors(&self, i: u32) -> &BTreeSet<u32> {
        &self.adj[i as usize]
    }

    /// All adjacent live pairs `(i, j)` with `i < j`, in increasing order.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        self.live_ids()
            .flat_map(|i| self.adj[i as usize].range(i + 1..).map(move |&j| (i, j)))
            .collect()
    }

    pub fn marker_classes(&self, i: u32) -> &BTreeSet<u32> {
        &self.markers[i as usize]
    }

    pub(crate) fn add_marker_class(&mut self, i: u32, class: u32) {
        self.markers[i as usize].insert(class);
    }

    /// Squared 2-Wasserstein distance between two live regions.
    pub fn distance_sq(&self, i: u32, j: u32) -> Result<f64> {
        region_distance_sq(self.stats(i)?, self.stats(j)?, &self.palette)
    }

    /// Connected components of the adjacency graph over live regions.
    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.stats.len()];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for start in self.live_ids() {
            if seen[start as usize] {
                continue;
            }
            count += 1;
            seen[start as usize] = true;
            queue.push_back(start);
            while let Some(i) = queue.pop_front() {
                for &j in &self.adj[i as usize] {
                    if !seen[j as usize] {
                        seen[j as usize] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        count
    }

    /// Folds `loser` into `winner`: pixels, histogram, adjacency and marker
    /// classes. The loser's heterogeneity is discarded.
    pub(crate) fn absorb(&mut self, winner: u32, loser: u32) -> Result<()> {
        if winner == loser {
            return Err(Error::Config(format!(
                "cannot merge region {winner} into itself"
            )));
        }
        let lost = self.stats[loser as usize]
            .take()
            .ok_or(Error::DeadRegion(loser as usize))?;
        let Some(kept) = self.stats[winner as usize].as_mut() else {
            self.stats[loser as usize] = Some(lost);
            return Err(Error::DeadRegion(winner as usize));
        };
        *kept = merge_stats(kept, &lost);
        let loser_adj = std::mem::take(&mut self.adj[loser as usize]);
        for &k in &loser_adj {
            self.adj[k as usize].remove(&loser);
            if k != winner {
                self.adj[k as usize].insert(winner);
                self.adj[winner as usize].insert(k);
            }
        }
        self.adj[winner as usize].remove(&loser);
        let classes = std::mem::take(&mut self.markers[loser as usize]);
        self.markers[winner as usize].extend(classes);
        self.h[loser as usize] = 0.0;
        self.parent[loser as usize] = winner;
        self.live -= 1;
        Ok(())
    }

    /// Current owner of every initial region.
    pub fn owners(&self) -> Vec<u32> {
        let mut owner = self.parent.clone();
        for i in 0..owner.len() {
            let mut root = i as u32;
            while owner[root as usize] != root {
                root = owner[root as usize];
            }
            let mut cur = i as u32;
            while owner[cur as usize] != root {
                let next = owner[cur as usize];
                owner[cur as usize] = root;
                cur = next;
            }
        }
        owner
    }

    /// Per-pixel live region id.
    pub fn region_labels(&self) -> LabelMap {
        let owner = self.owners();
        let labels = self
            .initial
            .labels()
            .iter()
            .map(|&l| owner[l as usize])
            .collect();
        LabelMap::new(self.initial.width(), self.initial.height(), labels)
            .expect("same shape as the initial map")
    }

    /// Current partition, compacted in first-appearance order.
    pub fn partition(&self) -> LabelMap {
        self.region_labels().compacted()
    }
}
