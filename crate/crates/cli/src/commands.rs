//! Subcommand bodies. Each returns `Ok` or an [`otseg::Error`] that
//! [`exit_code`] maps to the process status.

use std::fs;
use std::path::{Path, PathBuf};

use otseg::labels::{load_labels, save_labels, LabelFormat};
use otseg::merge::{compute_roc, partition_at, run_marker, run_unsupervised, MarkerSet};
use otseg::pipeline::prepare;
use otseg::{Error, LabelMap, Result};
use otseg_eval::bench::{scaling_bench, to_csv, to_markdown, BenchOptions};
use otseg_eval::metrics::{dice, largest_component_background, Counts, Truth};
use otseg_eval::scenes::generate_disks;
use serde::Serialize;

use crate::args::{AutoregionsArgs, BenchArgs, DscArgs, GenDisksArgs, MarkersArgs, SegmentArgs};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_INFEASIBLE: u8 = 4;
pub const EXIT_MARKER_BOUNDS: u8 = 5;
pub const EXIT_MARKER_CONFLICT: u8 = 6;

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Read { .. }
        | Error::Write { .. }
        | Error::UnsupportedFormat(_)
        | Error::Malformed(_)
        | Error::LabelOverflow { .. }
        | Error::Dimensions(_) => EXIT_IO,
        Error::Unreachable { .. } => EXIT_INFEASIBLE,
        Error::MarkerOutOfBounds { .. } => EXIT_MARKER_BOUNDS,
        Error::ConflictingMarkers { .. } => EXIT_MARKER_CONFLICT,
        _ => EXIT_USAGE,
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })
}

fn format_for(path: &Path) -> LabelFormat {
    LabelFormat::from_path(path).unwrap_or(LabelFormat::Png16)
}

pub fn segment(args: &SegmentArgs) -> Result<()> {
    let img = args.prepare.load()?;
    let cfg = args.prepare.config();
    let prepared = prepare(&img, &cfg)?;
    let live = prepared.graph.live_count();
    let mut n = args.regions;
    // Asking for as many regions as superpixels means "no merging", even
    // when connectivity cleanup left fewer cells than requested.
    if n > live && n <= cfg.slic.superpixels {
        eprintln!("warning: only {live} superpixels were produced; writing them unmerged");
        n = live;
    }
    let (labels, trace) = run_unsupervised(prepared.graph, n)?;
    save_labels(&labels, &args.out, format_for(&args.out))?;
    if let Some(path) = &args.trace {
        let text = if path.extension().is_some_and(|e| e == "json") {
            trace.to_json()
        } else {
            trace.to_csv()
        };
        write_text(path, &text)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Candidate {
    regions: usize,
    roc: f64,
    labels: String,
}

pub fn autoregions(args: &AutoregionsArgs) -> Result<()> {
    let img = args.prepare.load()?;
    let prepared = prepare(&img, &args.prepare.config())?;
    let initial = prepared.graph.initial_labels().clone();
    let (_, trace) = run_unsupervised(prepared.graph, 1)?;
    let dir = &args.out_dir;
    fs::create_dir_all(dir).map_err(|source| Error::Write {
        path: dir.clone(),
        source,
    })?;
    write_text(&dir.join("trace.csv"), &trace.to_csv())?;

    let mut candidates = Vec::new();
    match compute_roc(&trace) {
        Ok(roc) => {
            write_text(&dir.join("roc.csv"), &roc.to_csv())?;
            for &r in roc.top(args.top) {
                let name = format!("regions_{r}.png");
                let labels = partition_at(&initial, &trace, r)?;
                save_labels(&labels, dir.join(&name), LabelFormat::Png16)?;
                candidates.push(Candidate {
                    regions: r,
                    roc: roc.value(r).unwrap_or(f64::NAN),
                    labels: name,
                });
            }
        }
        Err(Error::TraceTooShort(len)) => {
            eprintln!("warning: only {len} merges; no rate-of-change curve");
            write_text(&dir.join("roc.csv"), "r,LT,ROC\n")?;
        }
        Err(e) => return Err(e),
    }
    if candidates.is_empty() {
        eprintln!("warning: the rate-of-change curve has no local maxima; no candidates");
    }
    for c in &candidates {
        println!("{}\t{}", c.regions, c.roc);
    }
    let json = serde_json::json!({ "candidates": candidates });
    write_text(&dir.join("candidates.json"), &format!("{json:#}\n"))
}

pub fn markers(args: &MarkersArgs) -> Result<()> {
    let img = args.prepare.load()?;
    let set = MarkerSet::from_json(&read_text(&args.markers)?, img.width(), img.height())?;
    let prepared = prepare(&img, &args.prepare.config())?;
    let outcome = run_marker(prepared.graph, &set)?;
    save_labels(&outcome.classes, &args.out, format_for(&args.out))?;
    if let Some(path) = &args.regions_out {
        save_labels(&outcome.labels, path, format_for(path))?;
    }
    for (id, name) in outcome.class_names.iter().enumerate() {
        println!("{}\t{name}", id + 1);
    }
    Ok(())
}

fn load_any(path: &PathBuf) -> Result<LabelMap> {
    load_labels(path, format_for(path))
}

fn scores(c: &Counts) -> serde_json::Value {
    serde_json::json!({
        "tp": c.tp,
        "fp": c.fp,
        "fn": c.fn_,
        "precision": c.precision(),
        "recall": c.recall(),
        "dsc": c.dsc(),
    })
}

pub fn dsc(args: &DscArgs) -> Result<()> {
    if args.truth.is_none() && args.points.is_none() {
        return Err(Error::Config("give --truth, --points or both".into()));
    }
    let pred = load_any(&args.pred)?;
    let fg = if args.foreground_given {
        pred
    } else {
        largest_component_background(&pred)
    };
    let mut out = serde_json::Map::new();
    if let Some(path) = &args.truth {
        let c = dice(&fg, &Truth::Mask(load_any(path)?))?;
        out.insert("pixel".into(), scores(&c));
    }
    if let Some(path) = &args.points {
        let pts: Vec<(usize, usize)> = serde_json::from_str(&read_text(path)?)
            .map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?;
        let c = dice(&fg, &Truth::Points(pts))?;
        out.insert("point".into(), scores(&c));
    }
    println!("{:#}", serde_json::Value::Object(out));
    Ok(())
}

fn parse_size(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("size {s:?} is not pixels:superpixels"));
    let (n, m) = s.split_once(':').ok_or_else(bad)?;
    Ok((
        n.trim().parse().map_err(|_| bad())?,
        m.trim().parse().map_err(|_| bad())?,
    ))
}

pub fn bench(args: &BenchArgs) -> Result<()> {
    let sizes = args
        .sizes
        .iter()
        .map(|s| parse_size(s))
        .collect::<Result<Vec<_>>>()?;
    let opts = BenchOptions {
        seed: args.seed,
        repeats: args.repeats,
        target: args.target,
        parallel: args.parallel,
    };
    let rows = scaling_bench(&sizes, &opts)?;
    print!("{}", to_markdown(&rows));
    if let Some(path) = &args.csv {
        write_text(path, &to_csv(&rows))?;
    }
    Ok(())
}

pub fn gen_disks(args: &GenDisksArgs) -> Result<()> {
    let scene = generate_disks(
        args.seed,
        args.count,
        args.size,
        args.size,
        args.sigma,
        args.occlusion,
    )?;
    scene.save(&args.out_dir)?;
    println!("{} regions -> {}", scene.regions(), args.out_dir.display());
    Ok(())
}
