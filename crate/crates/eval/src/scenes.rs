//! Synthetic test scenes with exact ground truth.

use std::path::Path;

use otseg::image::save_image;
use otseg::labels::{save_labels, LabelFormat};
use otseg::superpixel::connected_components;
use otseg::{ColorSpace, Error, Image, LabelMap, Result};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const BACKGROUND_LEVEL: f64 = 0.2;
pub const OBJECT_LEVEL: f64 = 1.0;

/// Gray levels used to paint staged tilings; neighbors never share one.
pub const STAGE_LEVELS: [f64; 6] = [0.05, 0.23, 0.41, 0.59, 0.77, 0.95];

const PLACEMENT_ATTEMPTS: usize = 20_000;

#[derive(Clone, Debug)]
pub struct SyntheticScene {
    pub image: Image,
    /// 0 is the background, objects are numbered from 1.
    pub truth: LabelMap,
    pub objects: usize,
    pub sigma: f64,
}

impl SyntheticScene {
    /// Number of distinct truth regions, background included.
    pub fn regions(&self) -> usize {
        self.objects + 1
    }

    /// Writes `image.png` and a 16-bit `truth.png` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|source| Error::Write {
            path: dir.to_path_buf(),
            source,
        })?;
        save_image(&self.image, dir.join("image.png"))?;
        save_labels(&self.truth, dir.join("truth.png"), LabelFormat::Png16)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Disk {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

impl Disk {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        let (dx, dy) = (x as f64 - self.cx, y as f64 - self.cy);
        dx * dx + dy * dy <= self.r * self.r
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiskOptions {
    pub radius_min: f64,
    pub radius_max: f64,
    /// Minimum empty space between two disks.
    pub gap: f64,
    /// Lets disks extend past the canvas border.
    pub allow_occlusion: bool,
}

impl DiskOptions {
    /// Radii between 5.5% and 8% of the shorter side, 6 px apart. At 256²
    /// with 300 superpixels the smallest radius is about one grid spacing.
    pub fn for_canvas(width: usize, height: usize) -> Self {
        let side = width.min(height) as f64;
        DiskOptions {
            radius_min: (0.055 * side).max(2.0),
            radius_max: (0.08 * side).max(2.0),
            gap: 6.0,
            allow_occlusion: false,
        }
    }
}

/// White disks on a dark background with clipped Gaussian noise.
pub fn generate_disks(
    seed: u64,
    count: usize,
    width: usize,
    height: usize,
    noise_sigma: f64,
    allow_occlusion: bool,
) -> Result<SyntheticScene> {
    let opts = DiskOptions {
        allow_occlusion,
        ..DiskOptions::for_canvas(width, height)
    };
    generate_disks_with(seed, count, width, height, noise_sigma, &opts)
}

pub fn generate_disks_with(
    seed: u64,
    count: usize,
    width: usize,
    height: usize,
    noise_sigma: f64,
    opts: &DiskOptions,
) -> Result<SyntheticScene> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::Config(format!("invalid noise sigma {noise_sigma}")));
    }
    if !(0.0 < opts.radius_min && opts.radius_min <= opts.radius_max) {
        return Err(Error::Config("invalid radius range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let disks = place_disks(&mut rng, count, width, height, opts)?;
    let truth = LabelMap::from_fn(width, height, |x, y| {
        disks
            .iter()
            .position(|d| d.contains(x, y))
            .map_or(0, |k| k as u32 + 1)
    });
    let levels: Vec<f64> = truth
        .labels()
        .iter()
        .map(|&l| {
            if l == 0 {
                BACKGROUND_LEVEL
            } else {
                OBJECT_LEVEL
            }
        })
        .collect();
    Ok(SyntheticScene {
        image: noisy_gray(width, height, &levels, noise_sigma, &mut rng)?,
        truth,
        objects: count,
        sigma: noise_sigma,
    })
}

fn place_disks(
    rng: &mut ChaCha8Rng,
    count: usize,
    width: usize,
    height: usize,
    opts: &DiskOptions,
) -> Result<Vec<Disk>> {
    let mut disks: Vec<Disk> = Vec::with_capacity(count);
    for _ in 0..count {
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let r = rng.random_range(opts.radius_min..=opts.radius_max);
            let margin = if opts.allow_occlusion { 0.0 } else { r + 1.0 };
            let (xmax, ymax) = (width as f64 - 1.0 - margin, height as f64 - 1.0 - margin);
            if margin > xmax || margin > ymax {
                continue;
            }
            let d = Disk {
                cx: rng.random_range(margin..=xmax),
                cy: rng.random_range(margin..=ymax),
                r,
            };
            let clear = disks
                .iter()
                .all(|o| (d.cx - o.cx).hypot(d.cy - o.cy) >= d.r + o.r + opts.gap);
            if clear {
                disks.push(d);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Config(format!(
                "could not place disk {} of {count} in {width}x{height}",
                disks.len() + 1
            )));
        }
    }
    Ok(disks)
}

fn noisy_gray(
    width: usize,
    height: usize,
    levels: &[f64],
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Image> {
    let data = if sigma > 0.0 {
        let noise = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
        levels
            .iter()
            .map(|&v| (v + noise.sample(rng)).clamp(0.0, 1.0))
            .collect()
    } else {
        levels.to_vec()
    };
    Image::new(width, height, 1, data, ColorSpace::Gray)
}

/// A random Voronoi tiling into `regions` tiles, each painted one of
/// [`STAGE_LEVELS`] so that touching tiles differ, plus noise. Tile 0 plays
/// the background. Level gaps make merges across tiles far costlier than
/// merges inside one.
pub fn generate_staged(
    seed: u64,
    regions: usize,
    width: usize,
    height: usize,
    noise_sigma: f64,
) -> Result<SyntheticScene> {
    generate_staged_cells(seed, regions, width, height, 1, noise_sigma)
}

/// Like [`generate_staged`], but tiles are unions of `cell`×`cell` blocks:
/// each block goes to the site nearest its center. With `cell` equal to the
/// superpixel grid spacing no superpixel straddles two tiles.
pub fn generate_staged_cells(
    seed: u64,
    regions: usize,
    width: usize,
    height: usize,
    cell: usize,
    noise_sigma: f64,
) -> Result<SyntheticScene> {
    let cell = cell.max(1);
    if regions == 0 || regions > width.div_ceil(cell) * height.div_ceil(cell) {
        return Err(Error::Config(format!("cannot tile into {regions} regions")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Coarse cells can leave a site without blocks or split its tile;
    // redraw until every tile is one connected piece.
    let truth = loop {
        let sites = spread_sites(regions, width, height, &mut rng)?;
        let truth = LabelMap::from_fn(width, height, |x, y| {
            let half = (cell as f64 - 1.0) / 2.0;
            let px = (x / cell * cell) as f64 + half;
            let py = (y / cell * cell) as f64 + half;
            let mut best = (f64::INFINITY, 0);
            for (k, s) in sites.iter().enumerate() {
                let d = (s[0] - px).powi(2) + (s[1] - py).powi(2);
                if d < best.0 {
                    best = (d, k);
                }
            }
            best.1 as u32
        });
        if cell == 1 || connected_components(&truth).1.len() == regions {
            break truth;
        }
    };
    let colors = color_tiles(&truth, regions, &mut rng);
    let levels: Vec<f64> = truth
        .labels()
        .iter()
        .map(|&l| STAGE_LEVELS[colors[l as usize]])
        .collect();
    Ok(SyntheticScene {
        image: noisy_gray(width, height, &levels, noise_sigma, &mut rng)?,
        truth,
        objects: regions - 1,
        sigma: noise_sigma,
    })
}

fn spread_sites(
    regions: usize,
    width: usize,
    height: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<[f64; 2]>> {
    let min_sep = 0.6 * ((width * height) as f64 / regions as f64).sqrt();
    let mut sites: Vec<[f64; 2]> = Vec::with_capacity(regions);
    let mut attempts = 0;
    while sites.len() < regions {
        attempts += 1;
        if attempts > PLACEMENT_ATTEMPTS * regions {
            return Err(Error::Config(format!(
                "could not spread {regions} sites over {width}x{height}"
            )));
        }
        let p = [
            rng.random_range(0.0..width as f64),
            rng.random_range(0.0..height as f64),
        ];
        if sites
            .iter()
            .all(|s| (s[0] - p[0]).hypot(s[1] - p[1]) >= min_sep)
        {
            sites.push(p);
        }
    }
    Ok(sites)
}

/// Smallest-last greedy coloring of the tile adjacency graph with a random
/// free color at each step. Planar graphs are 5-degenerate, so six colors
/// always suffice.
fn color_tiles(truth: &LabelMap, regions: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut adj = vec![std::collections::BTreeSet::new(); regions];
    let (w, h) = (truth.width(), truth.height());
    for y in 0..h {
        for x in 0..w {
            let a = truth.get(x, y) as usize;
            for (nx, ny) in [(x + 1, y), (x, y + 1)] {
                if nx < w && ny < h {
                    let b = truth.get(nx, ny) as usize;
                    if a != b {
                        adj[a].insert(b);
                        adj[b].insert(a);
                    }
                }
            }
        }
    }
    let mut removed = vec![false; regions];
    let mut order = Vec::with_capacity(regions);
    for _ in 0..regions {
        let v = (0..regions)
            .filter(|&v| !removed[v])
            .min_by_key(|&v| adj[v].iter().filter(|&&u| !removed[u]).count())
            .expect("vertices remain");
        removed[v] = true;
        order.push(v);
    }
    let mut colors = vec![usize::MAX; regions];
    for &v in order.iter().rev() {
        let free: Vec<usize> = (0..STAGE_LEVELS.len())
            .filter(|c| adj[v].iter().all(|&u| colors[u] != *c))
            .collect();
        colors[v] = *free
            .choose(rng)
            .expect("six colors suffice for planar tilings");
    }
    colors
}
