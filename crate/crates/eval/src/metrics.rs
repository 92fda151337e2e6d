//! Segmentation accuracy metrics.

use std::collections::HashMap;

use otseg::superpixel::connected_components;
use otseg::{Error, LabelMap, Result};
use serde::Serialize;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall, 0 when nothing is matched.
    pub fn dsc(&self) -> f64 {
        if self.tp == 0 {
            return 0.0;
        }
        2.0 / (1.0 / self.precision() + 1.0 / self.recall())
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Reference annotation for [`dice`].
#[derive(Clone, Debug, PartialEq)]
pub enum Truth {
    /// Per-pixel mask; nonzero is foreground. Scored pixel by pixel.
    Mask(LabelMap),
    /// Annotated object points `(x, y)`. A point inside the predicted
    /// foreground is a hit, one outside a miss, and a predicted object
    /// holding no point a false positive.
    Points(Vec<(usize, usize)>),
}

/// Dice score of a foreground prediction (nonzero labels; distinct labels
/// are distinct predicted objects).
pub fn dice(pred: &LabelMap, truth: &Truth) -> Result<Counts> {
    match truth {
        Truth::Mask(mask) => {
            if (mask.width(), mask.height()) != (pred.width(), pred.height()) {
                return Err(Error::Dimensions(format!(
                    "prediction {}x{} vs truth {}x{}",
                    pred.width(),
                    pred.height(),
                    mask.width(),
                    mask.height()
                )));
            }
            let mut c = Counts::default();
            for (&p, &t) in pred.labels().iter().zip(mask.labels()) {
                match (p != 0, t != 0) {
                    (true, true) => c.tp += 1,
                    (true, false) => c.fp += 1,
                    (false, true) => c.fn_ += 1,
                    (false, false) => {}
                }
            }
            if c.tp + c.fn_ == 0 {
                return Err(Error::Config("truth mask has no foreground".into()));
            }
            Ok(c)
        }
        Truth::Points(points) => {
            if points.is_empty() {
                return Err(Error::Config("truth has no points".into()));
            }
            let mut c = Counts::default();
            let mut hit: HashMap<u32, bool> = pred
                .labels()
                .iter()
                .filter(|&&l| l != 0)
                .map(|&l| (l, false))
                .collect();
            for &(x, y) in points {
                if x >= pred.width() || y >= pred.height() {
                    return Err(Error::MarkerOutOfBounds {
                        x: x as i64,
                        y: y as i64,
                        width: pred.width(),
                        height: pred.height(),
                    });
                }
                match pred.get(x, y) {
                    0 => c.fn_ += 1,
                    l => {
                        c.tp += 1;
                        hit.insert(l, true);
                    }
                }
            }
            c.fp = hit.values().filter(|&&h| !h).count() as u64;
            Ok(c)
        }
    }
}

/// Foreground/background split of a multi-region segmentation: the largest
/// 4-connected component becomes background (0), every other component a
/// foreground object numbered from 1 in first-appearance order.
pub fn largest_component_background(seg: &LabelMap) -> LabelMap {
    let (comp, sizes) = connected_components(seg);
    let Some(background) =
        (0..sizes.len()).max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a)))
    else {
        return seg.clone();
    };
    let mut ids = vec![u32::MAX; sizes.len()];
    ids[background] = 0;
    let mut next = 1;
    let labels = comp
        .iter()
        .map(|&c| {
            let id = &mut ids[c as usize];
            if *id == u32::MAX {
                *id = next;
                next += 1;
            }
            *id
        })
        .collect();
    LabelMap::new(seg.width(), seg.height(), labels).expect("same shape")
}

/// For every truth label `0..=max`, the best IoU against any predicted
/// region.
pub fn best_ious(pred: &LabelMap, truth: &LabelMap) -> Result<Vec<f64>> {
    if (pred.width(), pred.height()) != (truth.width(), truth.height()) {
        return Err(Error::Dimensions(
            "prediction and truth differ in size".into(),
        ));
    }
    let mut joint: HashMap<(u32, u32), u64> = HashMap::new();
    let mut pred_area: HashMap<u32, u64> = HashMap::new();
    let mut truth_area = vec![0u64; truth.max_label() as usize + 1];
    for (&p, &t) in pred.labels().iter().zip(truth.labels()) {
        *joint.entry((t, p)).or_default() += 1;
        *pred_area.entry(p).or_default() += 1;
        truth_area[t as usize] += 1;
    }
    let mut best = vec![0.0f64; truth_area.len()];
    for (&(t, p), &inter) in &joint {
        let union = truth_area[t as usize] + pred_area[&p] - inter;
        best[t as usize] = best[t as usize].max(inter as f64 / union as f64);
    }
    Ok(best)
}

/// Relabels every region of `pred` with the truth label covering most of
/// it (ties to the lower label).
pub fn majority_relabel(pred: &LabelMap, truth: &LabelMap) -> Result<LabelMap> {
    if (pred.width(), pred.height()) != (truth.width(), truth.height()) {
        return Err(Error::Dimensions(
            "prediction and truth differ in size".into(),
        ));
    }
    let mut votes: HashMap<u32, HashMap<u32, u64>> = HashMap::new();
    for (&p, &t) in pred.labels().iter().zip(truth.labels()) {
        *votes.entry(p).or_default().entry(t).or_default() += 1;
    }
    let winner: HashMap<u32, u32> = votes
        .into_iter()
        .map(|(p, v)| {
            let best = v
                .into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
                .expect("nonempty tally");
            (p, best.0)
        })
        .collect();
    let labels = pred.labels().iter().map(|p| winner[p]).collect();
    LabelMap::new(pred.width(), pred.height(), labels)
}

fn boundary_mask(lm: &LabelMap) -> Vec<bool> {
    let (w, h) = (lm.width(), lm.height());
    let mut out = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let l = lm.get(x, y);
            if (x + 1 < w && lm.get(x + 1, y) != l) || (y + 1 < h && lm.get(x, y + 1) != l) {
                out[y * w + x] = true;
            }
        }
    }
    out
}

/// Share of truth boundary pixels with a predicted boundary pixel within
/// Chebyshev distance `tol`.
pub fn boundary_recall(pred: &LabelMap, truth: &LabelMap, tol: usize) -> Result<f64> {
    if (pred.width(), pred.height()) != (truth.width(), truth.height()) {
        return Err(Error::Dimensions(
            "prediction and truth differ in size".into(),
        ));
    }
    let (w, h) = (pred.width(), pred.height());
    let pb = boundary_mask(pred);
    let tb = boundary_mask(truth);
    let (mut found, mut total) = (0usize, 0usize);
    for y in 0..h {
        for x in 0..w {
            if !tb[y * w + x] {
                continue;
            }
            total += 1;
            let near = (y.saturating_sub(tol)..=(y + tol).min(h - 1))
                .any(|yy| (x.saturating_sub(tol)..=(x + tol).min(w - 1)).any(|xx| pb[yy * w + xx]));
            found += usize::from(near);
        }
    }
    Ok(if total == 0 {
        1.0
    } else {
        found as f64 / total as f64
    })
}
