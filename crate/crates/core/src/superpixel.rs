//! Power-SLIC oversegmentation.
//!
//! SLIC clusters pixels in joint position/color space starting from a regular
//! grid. Each resulting cluster is then summarized by its spatial centroid,
//! covariance and size, and pixels are reassigned to the cell of an
//! anisotropic power diagram: pixel `x` goes to the generator minimizing
//! `(x - c_j)^T A_j (x - c_j) - mu_j`, with `A_j` the inverse covariance and
//! `mu_j` a size-dependent additive weight. A final pass makes every label
//! 4-connected.
//!
//! Coordinates are pixel centers: pixel `(x, y)` sits at `(x, y)`.

use std::collections::{BTreeMap, VecDeque};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{Image, LabelMap};

/// Spatial dimension of images.
pub const DIM: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct SlicConfig {
    /// Target number of superpixels.
    pub superpixels: usize,
    /// Compactness; larger values weigh position over color.
    pub compactness: f64,
    /// Number of assignment/update sweeps.
    pub iterations: usize,
    /// Factor applied to unit-range channel values before the color term,
    /// putting a full gray ramp on the scale of CIELAB lightness.
    pub color_scale: f64,
}

impl SlicConfig {
    pub fn new(superpixels: usize) -> Self {
        SlicConfig {
            superpixels,
            compactness: 10.0,
            iterations: 10,
            color_scale: 100.0,
        }
    }

    pub fn validate(&self, pixels: usize) -> Result<()> {
        if self.superpixels == 0 {
            return Err(Error::Config("superpixel count must be at least 1".into()));
        }
        if self.superpixels > pixels {
            return Err(Error::Config(format!(
                "{} superpixels requested for {pixels} pixels",
                self.superpixels
            )));
        }
        if !(self.compactness > 0.0 && self.compactness.is_finite()) {
            return Err(Error::Config(format!(
                "compactness must be positive, got {}",
                self.compactness
            )));
        }
        if !(self.color_scale > 0.0 && self.color_scale.is_finite()) {
            return Err(Error::Config("color scale must be positive".into()));
        }
        Ok(())
    }

    /// Grid spacing `h = sqrt(N / m)`.
    pub fn spacing(&self, pixels: usize) -> f64 {
        (pixels as f64 / self.superpixels as f64).sqrt()
    }
}

/// `||x_p - x_s||^2 + (h^2 / alpha^2) ||I_p - I_s||^2`.
pub fn slic_distance_sq(
    pos_p: [f64; 2],
    color_p: &[f64],
    pos_s: [f64; 2],
    color_s: &[f64],
    spacing: f64,
    compactness: f64,
) -> f64 {
    let dx = pos_p[0] - pos_s[0];
    let dy = pos_p[1] - pos_s[1];
    let dc: f64 = color_p
        .iter()
        .zip(color_s)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    dx * dx + dy * dy + spacing * spacing / (compactness * compactness) * dc
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlicCenter {
    pub position: [f64; 2],
    /// Mean color in scaled units (unit value times `color_scale`).
    pub color: Vec<f64>,
    pub size: usize,
}

#[derive(Clone, Debug)]
pub struct SlicClusters {
    /// Compact cluster ids `0..centers.len()`; every cluster is nonempty.
    pub labels: LabelMap,
    pub centers: Vec<SlicCenter>,
    pub spacing: f64,
    /// Total assigned distance after initialization and after every sweep.
    pub objective: Vec<f64>,
}

/// Regular-grid center layout: `(columns, rows)` with `columns * rows <= m`
/// and cells close to square.
pub fn grid_shape(width: usize, height: usize, m: usize) -> (usize, usize) {
    let nx = ((m as f64 * width as f64 / height as f64).sqrt().round() as usize)
        .clamp(1, m.min(width).max(1));
    let ny = (m / nx).clamp(1, height);
    (nx, ny)
}

/// Uniform bucket grid for finding centers near a pixel.
struct CenterIndex {
    cell: f64,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<u32>>,
}

impl CenterIndex {
    fn new(
        width: usize,
        height: usize,
        cell: f64,
        positions: impl Iterator<Item = [f64; 2]>,
    ) -> Self {
        let cell = cell.max(1.0);
        let cols = ((width as f64 / cell).ceil() as usize).max(1);
        let rows = ((height as f64 / cell).ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); cols * rows];
        for (k, p) in positions.enumerate() {
            let bx = ((p[0] / cell).floor().max(0.0) as usize).min(cols - 1);
            let by = ((p[1] / cell).floor().max(0.0) as usize).min(rows - 1);
            buckets[by * cols + bx].push(k as u32);
        }
        CenterIndex {
            cell,
            cols,
            rows,
            buckets,
        }
    }

    /// Calls `f` for every center in buckets overlapping the square of
    /// half-width `radius` around `(x, y)`. Callers filter exactly.
    fn for_each_near(&self, x: f64, y: f64, radius: f64, mut f: impl FnMut(usize)) {
        let span = |v: f64, n: usize| {
            let lo = ((v - radius) / self.cell).floor().max(0.0) as usize;
            let hi = (((v + radius) / self.cell).floor().max(0.0) as usize).min(n - 1);
            (lo.min(n - 1), hi)
        };
        let (x0, x1) = span(x, self.cols);
        let (y0, y1) = span(y, self.rows);
        for by in y0..=y1 {
            for bx in x0..=x1 {
                for &k in &self.buckets[by * self.cols + bx] {
                    f(k as usize);
                }
            }
        }
    }
}

fn scaled_colors(img: &Image, scale: f64) -> Vec<f64> {
    img.data().iter().map(|v| v * scale).collect()
}

/// SLIC clustering: grid initialization, windowed assignment and centroid
/// updates. Empty clusters are dropped from the result.
pub fn slic_phase1(img: &Image, cfg: &SlicConfig) -> Result<SlicClusters> {
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let n = img.len();
    cfg.validate(n)?;
    let spacing = cfg.spacing(n);
    let colors = scaled_colors(img, cfg.color_scale);
    let (nx, ny) = grid_shape(w, h, cfg.superpixels);

    // Initial partition: grid cells. Centers start at cell centroids.
    let cell_of = |x: usize, y: usize| {
        let gx = (x * nx / w).min(nx - 1);
        let gy = (y * ny / h).min(ny - 1);
        (gy * nx + gx) as u32
    };
    let mut labels: Vec<u32> = (0..n).map(|i| cell_of(i % w, i / w)).collect();
    let mut centers = update_centers(&labels, &colors, w, c, nx * ny, None);

    let window = spacing;
    let objective_of = |labels: &[u32], centers: &[SlicCenter]| -> f64 {
        labels
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let s = &centers[l as usize];
                slic_distance_sq(
                    [(i % w) as f64, (i / w) as f64],
                    &colors[i * c..(i + 1) * c],
                    s.position,
                    &s.color,
                    spacing,
                    cfg.compactness,
                )
            })
            .sum()
    };
    let mut objective = vec![objective_of(&labels, &centers)];

    for _ in 0..cfg.iterations {
        let index = CenterIndex::new(w, h, spacing, centers.iter().map(|s| s.position));
        labels.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
            for (x, label) in row.iter_mut().enumerate() {
                let i = y * w + x;
                let px = &colors[i * c..(i + 1) * c];
                let pos = [x as f64, y as f64];
                let cost = |k: usize| {
                    let s = &centers[k];
                    slic_distance_sq(pos, px, s.position, &s.color, spacing, cfg.compactness)
                };
                let current = *label as usize;
                let mut best = (cost(current), current);
                index.for_each_near(pos[0], pos[1], window, |k| {
                    let s = &centers[k];
                    if s.size == 0
                        || (s.position[0] - pos[0]).abs() > window
                        || (s.position[1] - pos[1]).abs() > window
                    {
                        return;
                    }
                    let d = cost(k);
                    if d < best.0 || (d == best.0 && k < best.1) {
                        best = (d, k);
                    }
                });
                *label = best.1 as u32;
            }
        });
        centers = update_centers(&labels, &colors, w, c, centers.len(), Some(&centers));
        objective.push(objective_of(&labels, &centers));
    }

    // Drop empty clusters and compact ids.
    let mut remap = vec![u32::MAX; centers.len()];
    let mut kept = Vec::new();
    for (k, s) in centers.into_iter().enumerate() {
        if s.size > 0 {
            remap[k] = kept.len() as u32;
            kept.push(s);
        }
    }
    for l in labels.iter_mut() {
        *l = remap[*l as usize];
    }
    Ok(SlicClusters {
        labels: LabelMap::new(w, h, labels)?,
        centers: kept,
        spacing,
        objective,
    })
}

/// Centroids of the current clusters; empty clusters keep their previous
/// center (or the origin when there is none) with size 0.
fn update_centers(
    labels: &[u32],
    colors: &[f64],
    width: usize,
    channels: usize,
    count: usize,
    previous: Option<&[SlicCenter]>,
) -> Vec<SlicCenter> {
    let mut sums = vec![0.0; count * (2 + channels)];
    let mut sizes = vec![0usize; count];
    for (i, &l) in labels.iter().enumerate() {
        let l = l as usize;
        let acc = &mut sums[l * (2 + channels)..(l + 1) * (2 + channels)];
        acc[0] += (i % width) as f64;
        acc[1] += (i / width) as f64;
        for (a, v) in acc[2..]
            .iter_mut()
            .zip(&colors[i * channels..(i + 1) * channels])
        {
            *a += v;
        }
        sizes[l] += 1;
    }
    (0..count)
        .map(|k| {
            let size = sizes[k];
            if size == 0 {
                let mut s = previous.map_or_else(
                    || SlicCenter {
                        position: [0.0, 0.0],
                        color: vec![0.0; channels],
                        size: 0,
                    },
                    |p| p[k].clone(),
                );
                s.size = 0;
                return s;
            }
            let acc = &sums[k * (2 + channels)..(k + 1) * (2 + channels)];
            let inv = 1.0 / size as f64;
            SlicCenter {
                position: [acc[0] * inv, acc[1] * inv],
                color: acc[2..].iter().map(|v| v * inv).collect(),
                size,
            }
        })
        .collect()
}

/// Volume of the unit ball in `d` dimensions.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(d - 2) * 2.0 * std::f64::consts::PI / d as f64,
    }
}

/// Additive power weight `(size / kappa_d * sqrt(det A))^(2/d)`.
pub fn power_weight(size: f64, det_a: f64, d: usize) -> f64 {
    (size / unit_ball_volume(d) * det_a.sqrt()).powf(2.0 / d as f64)
}

/// One cell generator of an anisotropic power diagram.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub center: [f64; 2],
    /// Symmetric positive-definite shape matrix (inverse covariance).
    pub shape: [[f64; 2]; 2],
    pub mu: f64,
    pub size: usize,
}

impl Generator {
    /// Builds a generator from a centroid, covariance and size, applying the
    /// covariance regularization `eps = 1e-6 * trace / d + 1e-9`.
    pub fn from_covariance(center: [f64; 2], cov: [[f64; 2]; 2], size: usize) -> Self {
        let eps = 1e-6 * (cov[0][0] + cov[1][1]) / DIM as f64 + 1e-9;
        let (a, b, d) = (cov[0][0] + eps, cov[0][1], cov[1][1] + eps);
        let det = a * d - b * b;
        let shape = [[d / det, -b / det], [-b / det, a / det]];
        let mu = power_weight(size as f64, shape_det(&shape), DIM);
        Generator {
            center,
            shape,
            mu,
            size,
        }
    }

    /// `(p - c)^T A (p - c)`.
    pub fn ellipsoidal_sq(&self, p: [f64; 2]) -> f64 {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let a = &self.shape;
        a[0][0] * dx * dx + 2.0 * a[0][1] * dx * dy + a[1][1] * dy * dy
    }

    /// Power distance `(p - c)^T A (p - c) - mu`.
    pub fn power_distance(&self, p: [f64; 2]) -> f64 {
        self.ellipsoidal_sq(p) - self.mu
    }
}

pub fn shape_det(a: &[[f64; 2]; 2]) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

/// Fits one generator per cluster from the spatial centroid, sample
/// covariance (divisor `n - 1`, zero for a single pixel) and pixel count. `clusters` must be compact with no empty id.
pub fn fit_generators(clusters: &LabelMap) -> Result<Vec<Generator>> {
    let count = clusters.max_label() as usize + 1;
    let w = clusters.width();
    let mut acc = vec![[0.0f64; 5]; count];
    let mut sizes = vec![0usize; count];
    for (i, &l) in clusters.labels().iter().enumerate() {
        let (x, y) = ((i % w) as f64, (i / w) as f64);
        let a = &mut acc[l as usize];
        a[0] += x;
        a[1] += y;
        a[2] += x * x;
        a[3] += x * y;
        a[4] += y * y;
        sizes[l as usize] += 1;
    }
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::Config(format!("cluster {empty} is empty")));
    }
    // Second pass around the centroid for numerically stable covariance.
    let centers: Vec<[f64; 2]> = acc
        .iter()
        .zip(&sizes)
        .map(|(a, &s)| [a[0] / s as f64, a[1] / s as f64])
        .collect();
    let mut cov = vec![[0.0f64; 3]; count];
    for (i, &l) in clusters.labels().iter().enumerate() {
        let c = centers[l as usize];
        let (dx, dy) = ((i % w) as f64 - c[0], (i / w) as f64 - c[1]);
        let s = &mut cov[l as usize];
        s[0] += dx * dx;
        s[1] += dx * dy;
        s[2] += dy * dy;
    }
    Ok((0..count)
        .map(|k| {
            let inv = if sizes[k] > 1 {
                1.0 / (sizes[k] - 1) as f64
            } else {
                0.0
            };
            let s = cov[k];
            Generator::from_covariance(
                centers[k],
                [[s[0] * inv, s[1] * inv], [s[1] * inv, s[2] * inv]],
                sizes[k],
            )
        })
        .collect())
}

/// Labels every pixel with the generator of minimal power distance, ties to
/// the lowest index. Evaluates every generator for every pixel.
pub fn assign_power_diagram(width: usize, height: usize, gens: &[Generator]) -> LabelMap {
    let mut labels = vec![0u32; width * height];
    labels
        .par_chunks_mut(width)
        .enumerate()
        .for_each(|(y, row)| {
            for (x, label) in row.iter_mut().enumerate() {
                *label = argmin_power([x as f64, y as f64], gens, 0..gens.len()) as u32;
            }
        });
    LabelMap::new(width, height, labels).expect("dimensions match")
}

/// As [`assign_power_diagram`], but each pixel only considers generators whose
/// center lies within `radius` (Chebyshev distance). Pixels with no
/// generator in range fall back to the full scan.
pub fn assign_power_diagram_windowed(
    width: usize,
    height: usize,
    gens: &[Generator],
    radius: f64,
) -> LabelMap {
    let index = CenterIndex::new(width, height, radius, gens.iter().map(|g| g.center));
    let mut labels = vec![0u32; width * height];
    labels
        .par_chunks_mut(width)
        .enumerate()
        .for_each(|(y, row)| {
            let mut near = Vec::new();
            for (x, label) in row.iter_mut().enumerate() {
                let p = [x as f64, y as f64];
                near.clear();
                index.for_each_near(p[0], p[1], radius, |k| {
                    let c = gens[k].center;
                    if (c[0] - p[0]).abs() <= radius && (c[1] - p[1]).abs() <= radius {
                        near.push(k);
                    }
                });
                *label = if near.is_empty() {
                    argmin_power(p, gens, 0..gens.len())
                } else {
                    argmin_power(p, gens, near.iter().copied())
                } as u32;
            }
        });
    LabelMap::new(width, height, labels).expect("dimensions match")
}

fn argmin_power(p: [f64; 2], gens: &[Generator], candidates: impl Iterator<Item = usize>) -> usize {
    let mut best = (f64::INFINITY, usize::MAX);
    for k in candidates {
        let d = gens[k].power_distance(p);
        if d < best.0 || (d == best.0 && k < best.1) {
            best = (d, k);
        }
    }
    best.1
}

/// 4-connected components: per-pixel component id and component sizes.
pub fn connected_components(lm: &LabelMap) -> (Vec<u32>, Vec<usize>) {
    let (w, h) = (lm.width(), lm.height());
    let labels = lm.labels();
    let mut comp = vec![u32::MAX; labels.len()];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..labels.len() {
        if comp[start] != u32::MAX {
            continue;
        }
        let id = sizes.len() as u32;
        let label = labels[start];
        comp[start] = id;
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if comp[j] == u32::MAX && labels[j] == label {
                    comp[j] = id;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        sizes.push(size);
    }
    (comp, sizes)
}

/// Makes every label 4-connected. For each label the largest component
/// survives if it has at least `min_size` pixels; every other component is
/// absorbed into the adjacent surviving region that shares the longest
/// boundary with it. Labels are compacted in first-appearance order.
pub fn enforce_connectivity(lm: &LabelMap, min_size: usize) -> LabelMap {
    let (w, h) = (lm.width(), lm.height());
    if lm.is_empty() {
        return lm.clone();
    }
    let (comp, sizes) = connected_components(lm);
    let ncomp = sizes.len();
    let labels = lm.labels();
    let comp_label: Vec<u32> = {
        let mut v = vec![0; ncomp];
        for (i, &c) in comp.iter().enumerate() {
            v[c as usize] = labels[i];
        }
        v
    };

    // Largest component per label (ties: lowest component id).
    let mut largest: BTreeMap<u32, usize> = BTreeMap::new();
    for c in 0..ncomp {
        largest
            .entry(comp_label[c])
            .and_modify(|best| {
                if sizes[c] > sizes[*best] {
                    *best = c;
                }
            })
            .or_insert(c);
    }
    let mut owner: Vec<Option<u32>> = vec![None; ncomp];
    for &c in largest.values() {
        if sizes[c] >= min_size {
            owner[c] = Some(c as u32);
        }
    }
    if owner.iter().all(Option::is_none) {
        let biggest = (0..ncomp)
            .max_by_key(|&c| (sizes[c], std::cmp::Reverse(c)))
            .unwrap();
        owner[biggest] = Some(biggest as u32);
    }

    // Shared boundary lengths between components.
    let mut boundary: Vec<BTreeMap<u32, usize>> = vec![BTreeMap::new(); ncomp];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let mut touch = |j: usize| {
                let (a, b) = (comp[i], comp[j]);
                if a != b {
                    *boundary[a as usize].entry(b).or_default() += 1;
                    *boundary[b as usize].entry(a).or_default() += 1;
                }
            };
            if x + 1 < w {
                touch(i + 1);
            }
            if y + 1 < h {
                touch(i + w);
            }
        }
    }

    // Resolve orphans in rounds, each round against the ownership at its start.
    loop {
        let snapshot = owner.clone();
        let mut changed = false;
        for c in 0..ncomp {
            if snapshot[c].is_some() {
                continue;
            }
            let mut shared: BTreeMap<u32, usize> = BTreeMap::new();
            for (&nb, &len) in &boundary[c] {
                if let Some(o) = snapshot[nb as usize] {
                    *shared.entry(o).or_default() += len;
                }
            }
            if let Some((&target, _)) = shared
                .iter()
                .max_by_key(|(&o, &len)| (len, std::cmp::Reverse(o)))
            {
                owner[c] = Some(target);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let out: Vec<u32> = comp
        .iter()
        .map(|&c| owner[c as usize].expect("image is connected"))
        .collect();
    LabelMap::new(w, h, out)
        .expect("dimensions match")
        .compacted()
}

/// Default minimum component size `N / (4 m)`, at least one pixel.
pub fn default_min_size(pixels: usize, superpixels: usize) -> usize {
    (pixels / (4 * superpixels.max(1))).max(1)
}

/// Full oversegmentation: SLIC clustering, generator fitting, windowed
/// power-diagram assignment (radius `3h`) and connectivity enforcement.
/// Returns at most `m` compact, 4-connected superpixels.
pub fn power_slic(img: &Image, cfg: &SlicConfig) -> Result<LabelMap> {
    let clusters = slic_phase1(img, cfg)?;
    let gens = fit_generators(&clusters.labels)?;
    let cells =
        assign_power_diagram_windowed(img.width(), img.height(), &gens, 3.0 * clusters.spacing);
    Ok(enforce_connectivity(
        &cells,
        default_min_size(img.len(), cfg.superpixels),
    ))
}
