//! Oracles and randomized checks shared by the integration tests and the
//! acceptance report. Every check panics with a description on violation.
#![allow(dead_code)]

use std::collections::BTreeSet;

use otseg::histogram::{merge_stats, region_distance_sq, region_histograms};
use otseg::merge::{
    build_rag, energy, partition_at, run_marker, run_unsupervised, Marker, MarkerOutcome, Merger,
    UNASSIGNED,
};
use otseg::ot::{solve_transportation, GroundCost};
use otseg::pipeline::{prepare, PipelineConfig};
use otseg::superpixel::connected_components;
use otseg::{
    ColorSpace, Error, Image, LabelMap, MarkerSet, MergeTrace, Palette, RegionStats,
    TransportProblem,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Minimum cost over every nonnegative integer table with the given row and
/// column sums. Transportation polytopes with integral margins have integral
/// vertices, so this equals the LP optimum.
pub fn enumerate_tables(supply: &[u32], demand: &[u32], cost: &[f64]) -> f64 {
    fn rec(
        cell: usize,
        rows: &mut [u32],
        cols: &mut [u32],
        cost: &[f64],
        acc: f64,
        best: &mut f64,
    ) {
        let b = cols.len();
        if cell == rows.len() * b {
            if rows.iter().chain(cols.iter()).all(|&r| r == 0) {
                *best = best.min(acc);
            }
            return;
        }
        let (i, j) = (cell / b, cell % b);
        // The last cell of a row must take whatever remains in it.
        let range = if j + 1 == b {
            rows[i]..=rows[i]
        } else {
            0..=rows[i].min(cols[j])
        };
        for x in range {
            if x > cols[j] {
                continue;
            }
            rows[i] -= x;
            cols[j] -= x;
            rec(
                cell + 1,
                rows,
                cols,
                cost,
                acc + f64::from(x) * cost[cell],
                best,
            );
            rows[i] += x;
            cols[j] += x;
        }
    }
    let mut best = f64::INFINITY;
    rec(
        0,
        &mut supply.to_vec(),
        &mut demand.to_vec(),
        cost,
        0.0,
        &mut best,
    );
    best
}

pub fn random_margin(rng: &mut ChaCha8Rng, len: usize, total: u32) -> Vec<u32> {
    let mut out = vec![0u32; len];
    for _ in 0..total {
        out[rng.random_range(0..len)] += 1;
    }
    out
}

pub fn random_histogram(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..k)
            .map(|_| {
                if rng.random_bool(0.25) {
                    0.0
                } else {
                    rng.random_range(0.0..1.0)
                }
            })
            .collect();
        if w.iter().sum::<f64>() > 0.0 {
            return w;
        }
    }
}

/// Solver optimum against vertex enumeration on `problems` random
/// integral instances with at most 5 rows and columns. Returns the count.
pub fn check_transport_oracle(problems: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    for _ in 0..problems {
        let (a, b) = (rng.random_range(1..=5), rng.random_range(1..=5));
        let total = rng.random_range(1..=7);
        let supply = random_margin(&mut rng, a, total);
        let demand = random_margin(&mut rng, b, total);
        // Rational costs with denominator 8.
        let cost: Vec<f64> = (0..a * b)
            .map(|_| f64::from(rng.random_range(0..=40u32)) / 8.0)
            .collect();
        let want = enumerate_tables(&supply, &demand, &cost);
        // Masses scaled into probabilities; the optimum scales alike.
        let scale = f64::from(total);
        let p = TransportProblem::new(
            supply.iter().map(|&s| f64::from(s) / scale).collect(),
            demand.iter().map(|&d| f64::from(d) / scale).collect(),
            cost.clone(),
        )
        .unwrap();
        let got = solve_transportation(&p).unwrap().objective * scale;
        assert!(
            (got - want).abs() <= 1e-9 * want.abs().max(1.0),
            "supply {supply:?} demand {demand:?} cost {cost:?}: {got} vs {want}"
        );
        checked += 1;
    }
    checked
}

/// Metric axioms of `sqrt(W2²)` on `triples` random histogram triples.
pub fn check_metric_axioms(triples: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..triples {
        let k = rng.random_range(1..=6);
        let dim = rng.random_range(1..=3);
        let centers: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let cost = GroundCost::from_centers(&centers);
        let [u, v, w] = [0; 3].map(|_| random_histogram(&mut rng, k));
        let d = |x: &[f64], y: &[f64]| cost.w2_sq(x, y).unwrap().sqrt();
        assert_eq!(d(&u, &v), d(&v, &u), "symmetry");
        assert_eq!(d(&u, &u), 0.0);
        assert!(
            cost.w2_sq(&u, &u.iter().map(|x| 3.0 * x).collect::<Vec<_>>())
                .unwrap()
                < 1e-12
        );
        if u.iter()
            .zip(&v)
            .any(|(a, b)| (a / u.iter().sum::<f64>() - b / v.iter().sum::<f64>()).abs() > 1e-6)
        {
            assert!(d(&u, &v) > 0.0, "distinct histograms at distance zero");
        }
        assert!(d(&u, &w) <= d(&u, &v) + d(&v, &w) + 1e-9, "triangle");
    }
}

pub fn random_palette(rng: &mut ChaCha8Rng, k: usize) -> Palette {
    // Distinct by construction: spaced gray levels with jitter.
    let centers = (0..k)
        .map(|i| {
            vec![
                (i as f64 + rng.random_range(0.1..0.9)) / k as f64,
                rng.random_range(0.0..1.0),
            ]
        })
        .collect();
    Palette::new(centers).unwrap()
}

pub fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Image {
    Image::from_fn(w, h, 2, ColorSpace::Custom, |_, _, px| {
        px[0] = rng.random_range(0.0..1.0);
        px[1] = rng.random_range(0.0..1.0);
    })
    .unwrap()
}

/// Bin counts of the pixels whose label is in `members`, tallied directly.
pub fn direct_counts(img: &Image, lm: &LabelMap, pal: &Palette, members: &[u32]) -> Vec<u64> {
    let mut counts = vec![0u64; pal.len()];
    for (i, &l) in lm.labels().iter().enumerate() {
        if members.contains(&l) {
            let px = img.pixel_at(i);
            let nearest = (0..pal.len())
                .min_by(|&a, &b| {
                    let d = |c: usize| {
                        pal.centers()[c]
                            .iter()
                            .zip(px)
                            .map(|(u, v)| (u - v) * (u - v))
                            .sum::<f64>()
                    };
                    d(a).total_cmp(&d(b)).then(a.cmp(&b))
                })
                .unwrap();
            counts[nearest] += 1;
        }
    }
    counts
}

/// Folding region histograms in random orders against direct tallies of
/// the union, over `partitions` random partitions.
pub fn check_merge_equivalence(partitions: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..partitions {
        let (w, h) = (rng.random_range(2..16), rng.random_range(2..16));
        let img = random_image(&mut rng, w, h);
        let k = rng.random_range(1..8);
        let pal = random_palette(&mut rng, k);
        // Arbitrary partition; regions need not be connected.
        let regions = rng.random_range(1..=(w * h).min(12)) as u32;
        let mut labels: Vec<u32> = (0..w * h).map(|i| (i as u32) % regions).collect();
        labels.shuffle(&mut rng);
        let lm = LabelMap::new(w, h, labels).unwrap();
        let stats = region_histograms(&img, &lm, &pal).unwrap();
        for (l, s) in stats.iter().enumerate() {
            assert_eq!(s.counts(), direct_counts(&img, &lm, &pal, &[l as u32]));
        }
        // Fold a random subset in a random binary-tree order.
        let mut members: Vec<u32> = (0..regions).filter(|_| rng.random_bool(0.6)).collect();
        if members.is_empty() {
            members.push(0);
        }
        let mut pool: Vec<RegionStats> =
            members.iter().map(|&l| stats[l as usize].clone()).collect();
        while pool.len() > 1 {
            let a = pool.swap_remove(rng.random_range(0..pool.len()));
            let b = pool.swap_remove(rng.random_range(0..pool.len()));
            pool.push(if rng.random_bool(0.5) {
                merge_stats(&a, &b)
            } else {
                b.merged(&a)
            });
        }
        let want = direct_counts(&img, &lm, &pal, &members);
        assert_eq!(pool[0].counts(), want);
        assert_eq!(pool[0].area(), want.iter().sum::<u64>());
    }
}

/// Random connected regions: Voronoi cells of random sites, split into
/// 4-connected pieces. Returns at most `max_regions` regions.
pub fn random_regions(rng: &mut ChaCha8Rng, w: usize, h: usize, max_regions: usize) -> LabelMap {
    loop {
        let sites: Vec<(f64, f64)> = (0..rng.random_range(1..=max_regions))
            .map(|_| {
                (
                    rng.random_range(0.0..w as f64),
                    rng.random_range(0.0..h as f64),
                )
            })
            .collect();
        let vor = LabelMap::from_fn(w, h, |x, y| {
            let d = |s: &(f64, f64)| (s.0 - x as f64).powi(2) + (s.1 - y as f64).powi(2);
            (0..sites.len())
                .min_by(|&a, &b| d(&sites[a]).total_cmp(&d(&sites[b])))
                .unwrap() as u32
        });
        let (comp, sizes) = connected_components(&vor);
        if sizes.len() <= max_regions {
            return LabelMap::new(w, h, comp).unwrap().compacted();
        }
    }
}

/// Image whose regions draw colors from region-specific mixtures, so some
/// neighbors look alike and others do not.
pub fn random_scene(rng: &mut ChaCha8Rng, lm: &LabelMap, palette_size: usize) -> (Image, Palette) {
    let levels: Vec<f64> = (0..palette_size)
        .map(|i| (i as f64 + 0.5) / palette_size as f64)
        .collect();
    let regions = lm.region_count();
    let bias: Vec<usize> = (0..regions)
        .map(|_| rng.random_range(0..palette_size))
        .collect();
    let img = Image::from_fn(lm.width(), lm.height(), 1, ColorSpace::Gray, |x, y, px| {
        let b = bias[lm.get(x, y) as usize];
        let idx = if rng.random_bool(0.7) {
            b
        } else {
            rng.random_range(0..palette_size)
        };
        px[0] = levels[idx];
    })
    .unwrap();
    let pal = Palette::new(levels.iter().map(|&v| vec![v]).collect()).unwrap();
    (img, pal)
}

pub struct Instance {
    pub lm: LabelMap,
    pub pal: Palette,
    pub stats: Vec<RegionStats>,
}

pub fn instance(seed: u64, max_regions: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (rng.random_range(4..14), rng.random_range(4..14));
    let lm = random_regions(&mut rng, w, h, max_regions);
    let k = rng.random_range(2..5);
    let (img, pal) = random_scene(&mut rng, &lm, k);
    let stats = region_histograms(&img, &lm, &pal).unwrap();
    Instance { lm, pal, stats }
}

/// Independent re-simulation of the greedy loop: a flat list of
/// `(key, i, j)` entries scanned for the minimum, with histograms rebuilt
/// from the initial ones and distances recomputed from scratch.
pub struct Shadow<'a> {
    pal: &'a Palette,
    stats: Vec<Option<RegionStats>>,
    h: Vec<f64>,
    adj: Vec<BTreeSet<u32>>,
    entries: Vec<(f64, u32, u32)>,
}

impl<'a> Shadow<'a> {
    pub fn new(inst: &'a Instance) -> Self {
        let m = inst.stats.len();
        let mut adj = vec![BTreeSet::new(); m];
        let (w, h) = (inst.lm.width(), inst.lm.height());
        for y in 0..h {
            for x in 0..w {
                let a = inst.lm.get(x, y);
                for (nx, ny) in [(x + 1, y), (x, y + 1)] {
                    if nx < w && ny < h {
                        let b = inst.lm.get(nx, ny);
                        if a != b {
                            adj[a as usize].insert(b);
                            adj[b as usize].insert(a);
                        }
                    }
                }
            }
        }
        let mut shadow = Shadow {
            pal: &inst.pal,
            stats: inst.stats.iter().cloned().map(Some).collect(),
            h: vec![0.0; m],
            adj,
            entries: Vec::new(),
        };
        for i in 0..m as u32 {
            let later: Vec<u32> = shadow.adj[i as usize].range(i + 1..).copied().collect();
            for j in later {
                shadow.push(i, j);
            }
        }
        shadow
    }

    fn d2(&self, i: u32, j: u32) -> f64 {
        let (a, b) = (
            self.stats[i as usize].as_ref().unwrap(),
            self.stats[j as usize].as_ref().unwrap(),
        );
        region_distance_sq(a, b, self.pal).unwrap()
    }

    fn push(&mut self, i: u32, j: u32) {
        let key = self.d2(i, j) - self.h[i as usize] - self.h[j as usize];
        self.entries.push((key, i, j));
    }

    fn live(&self, i: u32) -> bool {
        self.stats[i as usize].is_some()
    }

    /// Expected next merge as `(winner, loser, E, kappa)`.
    pub fn step(&mut self) -> Option<(u32, u32, f64, f64)> {
        let rank = |e: &(f64, u32, u32)| (e.1.min(e.2), e.1.max(e.2), e.1);
        let (pos, &(key, i, j)) = self
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| self.live(e.1) && self.live(e.2))
            .min_by(|(_, a), (_, b)| a.0.total_cmp(&b.0).then(rank(a).cmp(&rank(b))))?;
        self.entries.swap_remove(pos);
        let e = self.d2(i, j);
        let merged = merge_stats(
            self.stats[i as usize].as_ref().unwrap(),
            self.stats[j as usize].as_ref().unwrap(),
        );
        self.stats[i as usize] = Some(merged);
        self.stats[j as usize] = None;
        let lost = std::mem::take(&mut self.adj[j as usize]);
        for k in lost {
            self.adj[k as usize].remove(&j);
            if k != i {
                self.adj[k as usize].insert(i);
                self.adj[i as usize].insert(k);
            }
        }
        self.h[i as usize] = e;
        let around: Vec<u32> = self.adj[i as usize].iter().copied().collect();
        for k in around {
            self.push(i, k);
        }
        Some((i, j, e, key))
    }
}

/// Steps of the merger against the shadow simulation on `instances`
/// random instances with at most 30 regions. Returns the merges compared.
pub fn check_shadow_argmin(instances: usize) -> usize {
    let mut checked = 0;
    for seed in 0..instances as u64 {
        let inst = instance(seed, 30);
        let m = inst.stats.len();
        let g = build_rag(&inst.lm, inst.stats.clone(), &inst.pal).unwrap();
        let mut merger = Merger::new(g).unwrap();
        let mut shadow = Shadow::new(&inst);
        loop {
            let got = merger.step().unwrap();
            let want = shadow.step();
            match (got, want) {
                (None, None) => break,
                (Some(rec), Some((i, j, e, kappa))) => {
                    assert_eq!((rec.winner, rec.loser), (i, j), "seed {seed}");
                    assert!((rec.e - e).abs() <= 1e-9 * e.max(1.0), "seed {seed}");
                    assert!((rec.kappa - kappa).abs() <= 1e-9 * kappa.abs().max(1.0));
                    // h_i <- E_ij exactly.
                    assert_eq!(merger.graph().heterogeneity(i), rec.e);
                    checked += 1;
                }
                (got, want) => panic!("seed {seed}: merger {got:?} vs shadow {want:?}"),
            }
        }
        assert_eq!(
            merger.graph().live_count(),
            1,
            "connected instance with m = {m}"
        );
    }
    checked
}

pub fn assert_contract(inst: &Instance, n: usize, out: &LabelMap, trace: &MergeTrace) {
    let m = inst.stats.len();
    assert_eq!(out.region_count(), n);
    assert!(out.is_compact());
    assert_eq!(trace.len(), m - n);
    assert_eq!(trace.initial_regions, m);
    let rs: Vec<usize> = trace.records.iter().map(|r| r.r).collect();
    assert!(rs.windows(2).all(|p| p[0] > p[1]), "r strictly decreasing");
    assert_eq!(rs.first().copied(), (m > n).then_some(m - 1));
    // Every final region is one 4-connected piece.
    assert_eq!(connected_components(out).1.len(), n);
    // Replaying the records rebuilds the pre-merge histograms.
    let mut stats: Vec<Option<RegionStats>> = inst.stats.iter().cloned().map(Some).collect();
    for rec in &trace.records {
        let (a, b) = (
            stats[rec.winner as usize].take().unwrap(),
            stats[rec.loser as usize].take().unwrap(),
        );
        let d2 = region_distance_sq(&a, &b, &inst.pal).unwrap();
        assert!(
            (rec.lt - d2).abs() <= 1e-9 * d2.max(1.0),
            "LT({}) {} vs {d2}",
            rec.r,
            rec.lt
        );
        assert_eq!(rec.lt, rec.e);
        stats[rec.winner as usize] = Some(merge_stats(&a, &b));
    }
    let sum: f64 = trace.records.iter().map(|r| r.kappa).sum();
    assert!((energy(trace) - sum).abs() <= 1e-12);
    assert!((trace.cumulative_energy - sum).abs() <= 1e-12);
    assert_eq!(&partition_at(&inst.lm, trace, n).unwrap(), out);
}

/// Algorithm contract of `run_unsupervised` for random targets.
pub fn check_unsupervised_contract(instances: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..instances as u64 {
        let inst = instance(seed.wrapping_mul(7919).wrapping_add(1000 + t), 30);
        let m = inst.stats.len();
        let n = rng.random_range(1..=m);
        let g = build_rag(&inst.lm, inst.stats.clone(), &inst.pal).unwrap();
        let (out, trace) = run_unsupervised(g, n).unwrap();
        assert_contract(&inst, n, &out, &trace);
    }
}

pub fn marker(x: usize, y: usize, class: &str) -> Marker {
    Marker {
        x: x as i64,
        y: y as i64,
        class: class.into(),
    }
}

/// Checks that every partition the run passes through keeps marker classes
/// apart, and that the class map agrees with the final regions.
pub fn assert_safe(lm: &LabelMap, markers: &[Marker], out: &MarkerOutcome) {
    let names = &out.class_names;
    let m = lm.region_count();
    for n in (out.trace.final_regions()..=m).rev() {
        let part = partition_at(lm, &out.trace, n).unwrap();
        let mut classes = vec![BTreeSet::new(); n];
        for p in markers {
            classes[part.get(p.x as usize, p.y as usize) as usize].insert(p.class.clone());
        }
        assert!(
            classes.iter().all(|c| c.len() <= 1),
            "two classes in one region at n = {n}"
        );
    }
    let mut marked = vec![None; m];
    for p in markers {
        marked[out.labels.get(p.x as usize, p.y as usize) as usize] = Some(p.class.clone());
    }
    for (i, &region) in out.labels.labels().iter().enumerate() {
        let want = match &marked[region as usize] {
            Some(name) => names.iter().position(|c| c == name).unwrap() as u32 + 1,
            None => UNASSIGNED,
        };
        assert_eq!(out.classes.labels()[i], want);
    }
}

/// Marker safety over every layout of two classes on a 4x2 grid of
/// one-pixel superpixels. Returns the number of runs.
pub fn check_marker_exhaustive() -> usize {
    // Every pixel is its own superpixel on a 4x2 grid; all 3^8 - 1 marker
    // layouts over {none, a, b} are tried.
    let (w, h) = (4, 2);
    let img = Image::new(
        w,
        h,
        1,
        vec![0.1, 0.9, 0.5, 0.1, 0.5, 0.5, 0.9, 0.1],
        ColorSpace::Gray,
    )
    .unwrap();
    let pal = Palette::new(vec![vec![0.1], vec![0.5], vec![0.9]]).unwrap();
    let lm = LabelMap::from_fn(w, h, |x, y| (y * w + x) as u32);
    let stats = region_histograms(&img, &lm, &pal).unwrap();
    let g = build_rag(&lm, stats, &pal).unwrap();
    let mut runs = 0;
    for code in 1..3usize.pow(8) {
        let markers: Vec<Marker> = (0..8)
            .filter_map(|p| match code / 3usize.pow(p as u32) % 3 {
                0 => None,
                1 => Some(marker(p % w, p / w, "a")),
                _ => Some(marker(p % w, p / w, "b")),
            })
            .collect();
        let set = MarkerSet::new(markers.clone(), w, h).unwrap();
        let out = run_marker(g.clone(), &set).unwrap();
        assert_safe(&lm, &markers, &out);
        assert!(out.labels.region_count() >= set.n_classes());
        runs += 1;
    }
    runs
}

/// Noisy gray scene with three disks.
pub fn disks_scene(seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let disks = [
        (18.0, 20.0, 10.0, 0.8),
        (46.0, 22.0, 9.0, 0.3),
        (30.0, 48.0, 11.0, 0.6),
    ];
    Image::from_fn(64, 64, 1, ColorSpace::Gray, |x, y, px| {
        let base = disks
            .iter()
            .find(|d| (x as f64 - d.0).powi(2) + (y as f64 - d.1).powi(2) <= d.2 * d.2)
            .map_or(0.05, |d| d.3);
        px[0] = base + rng.random_range(-0.05..0.05);
    })
    .unwrap()
}

pub fn marker_config() -> PipelineConfig {
    let mut cfg = PipelineConfig::new(60);
    cfg.aux_regions = 60;
    cfg.slic.compactness = 20.0;
    cfg
}

/// Bit-identical marker output under reordering and under moving each
/// marker within its superpixel, on `sets` random marker sets.
pub fn check_marker_stability(sets: usize, seed: u64) {
    let img = disks_scene(1);
    let prepared = prepare(&img, &marker_config()).unwrap();
    let sp = &prepared.superpixels;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut compared = 0;
    while compared < sets {
        let count = rng.random_range(1..8);
        let classes = ["f", "b", "g"];
        let markers: Vec<Marker> = (0..count)
            .map(|_| {
                let c = classes[rng.random_range(0..classes.len())];
                marker(rng.random_range(0..64), rng.random_range(0..64), c)
            })
            .collect();
        let set = MarkerSet::new(markers.clone(), 64, 64).unwrap();
        let base = match run_marker(prepared.graph.clone(), &set) {
            Ok(out) => out,
            Err(Error::ConflictingMarkers { .. }) => continue,
            Err(e) => panic!("{e}"),
        };
        assert_safe(sp, &markers, &base);

        let mut shuffled = markers.clone();
        shuffled.shuffle(&mut rng);
        let set = MarkerSet::new(shuffled, 64, 64).unwrap();
        assert_eq!(run_marker(prepared.graph.clone(), &set).unwrap(), base);

        let moved: Vec<Marker> = markers
            .iter()
            .map(|p| {
                let region = sp.get(p.x as usize, p.y as usize);
                let pixels: Vec<usize> = (0..sp.len())
                    .filter(|&i| sp.labels()[i] == region)
                    .collect();
                let i = pixels[rng.random_range(0..pixels.len())];
                marker(i % 64, i / 64, &p.class)
            })
            .collect();
        let set = MarkerSet::new(moved, 64, 64).unwrap();
        assert_eq!(run_marker(prepared.graph.clone(), &set).unwrap(), base);
        compared += 1;
    }
}
