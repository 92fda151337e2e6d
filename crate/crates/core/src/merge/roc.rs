use serde::Serialize;

use super::unsupervised::MergeTrace;
use crate::error::{Error, Result};
use crate::image::LabelMap;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RocPoint {
    pub r: usize,
    pub lt: f64,
    /// `(LT(r-1) - LT(r)) / LT(r)`; `None` where `LT(r) = 0`.
    pub roc: Option<f64>,
}

/// Rate-of-change curve of a full merge trace plus its ranked local maxima.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Roc {
    /// One point per `r` from `m - 1` down to 2.
    pub points: Vec<RocPoint>,
    /// Local maximizers `r`, best first.
    pub maxima: Vec<usize>,
}

impl Roc {
    pub fn value(&self, r: usize) -> Option<f64> {
        self.points.iter().find(|p| p.r == r).and_then(|p| p.roc)
    }

    pub fn top(&self, count: usize) -> &[usize] {
        &self.maxima[..count.min(self.maxima.len())]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,LT,ROC\n");
        for p in &self.points {
            let roc = p.roc.map_or(String::new(), |v| v.to_string());
            out.push_str(&format!("{},{},{}\n", p.r, p.lt, roc));
        }
        out
    }
}

/// ROC curve of a trace that ends at a single region.
///
/// A local maximum is strictly greater than both defined neighbors; a run of
/// equal values counts once, at its smallest `r`. Undefined values and the
/// ends of the curve never qualify and never serve as neighbors.
pub fn compute_roc(trace: &MergeTrace) -> Result<Roc> {
    if trace.len() < 2 {
        return Err(Error::TraceTooShort(trace.len()));
    }
    if trace.final_regions() != 1 {
        return Err(Error::Config(format!(
            "trace stops at {} regions; the curve needs a run down to 1",
            trace.final_regions()
        )));
    }
    let m = trace.initial_regions;
    let points: Vec<RocPoint> = (2..m)
        .rev()
        .map(|r| {
            let lt = trace.lt(r).expect("r within the trace");
            let prev = trace.lt(r - 1).expect("r-1 within the trace");
            let roc = (lt > 0.0).then(|| (prev - lt) / lt);
            RocPoint { r, lt, roc }
        })
        .collect();

    // Walk in increasing r so plateaus resolve to their smallest r.
    let ascending: Vec<&RocPoint> = points.iter().rev().collect();
    let mut maxima: Vec<(f64, usize)> = Vec::new();
    let mut a = 0;
    while a < ascending.len() {
        let Some(v) = ascending[a].roc else {
            a += 1;
            continue;
        };
        let mut b = a;
        while b + 1 < ascending.len() && ascending[b + 1].roc == Some(v) {
            b += 1;
        }
        let below = a.checked_sub(1).and_then(|i| ascending[i].roc);
        let above = ascending.get(b + 1).and_then(|p| p.roc);
        if matches!((below, above), (Some(lo), Some(hi)) if lo < v && hi < v) {
            maxima.push((v, ascending[a].r));
        }
        a = b + 1;
    }
    maxima.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    Ok(Roc {
        points,
        maxima: maxima.into_iter().map(|(_, r)| r).collect(),
    })
}

/// Partition with `n` regions, obtained by replaying the first `m - n`
/// merges of `trace` on the initial labels (equivalently, undoing the last
/// ones).
pub fn partition_at(initial: &LabelMap, trace: &MergeTrace, n: usize) -> Result<LabelMap> {
    let m = trace.initial_regions;
    if initial.max_label() as usize + 1 != m || !initial.is_compact() {
        return Err(Error::Dimensions(format!(
            "trace starts at {m} regions, label map has {}",
            initial.region_count()
        )));
    }
    if n < trace.final_regions() || n > m {
        return Err(Error::Unreachable {
            target: n,
            live: m,
            components: trace.final_regions(),
        });
    }
    let mut parent: Vec<u32> = (0..m as u32).collect();
    for rec in &trace.records[..m - n] {
        parent[rec.loser as usize] = rec.winner;
    }
    let root = |mut i: u32| {
        while parent[i as usize] != i {
            i = parent[i as usize];
        }
        i
    };
    let owner: Vec<u32> = (0..m as u32).map(root).collect();
    let labels = initial
        .labels()
        .iter()
        .map(|&l| owner[l as usize])
        .collect();
    Ok(LabelMap::new(initial.width(), initial.height(), labels)?.compacted())
}
