//! Label-map serialization.
//!
//! Three formats are supported:
//!
//! * `png16`: single-channel 16-bit PNG, one label per pixel (labels < 65536).
//! * `csv`: one text row per image row, comma-separated, rows joined by `\n`.
//! * `rle-json`: `{"width":W,"height":H,"runs":[[label,length],...]}` with runs
//!   taken over the row-major pixel sequence.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::LabelMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelFormat {
    Png16,
    Csv,
    RleJson,
}

impl LabelFormat {
    /// Picks a format from a file extension: `.png`, `.csv` or `.json`.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "png" => Some(LabelFormat::Png16),
            "csv" => Some(LabelFormat::Csv),
            "json" => Some(LabelFormat::RleJson),
            _ => None,
        }
    }
}

impl std::str::FromStr for LabelFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "png16" => Ok(LabelFormat::Png16),
            "csv" => Ok(LabelFormat::Csv),
            "rle-json" => Ok(LabelFormat::RleJson),
            other => Err(Error::UnsupportedFormat(format!("label format {other:?}"))),
        }
    }
}

/// Run-length encoded label map, the wire format shared with the HTTP service.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleLabels {
    pub width: usize,
    pub height: usize,
    pub runs: Vec<[u32; 2]>,
}

impl RleLabels {
    pub fn encode(lm: &LabelMap) -> Self {
        let mut runs: Vec<[u32; 2]> = Vec::new();
        for &l in lm.labels() {
            match runs.last_mut() {
                Some(run) if run[0] == l => run[1] += 1,
                _ => runs.push([l, 1]),
            }
        }
        RleLabels {
            width: lm.width(),
            height: lm.height(),
            runs,
        }
    }

    pub fn decode(&self) -> Result<LabelMap> {
        let total: u64 = self.runs.iter().map(|r| u64::from(r[1])).sum();
        if total != (self.width * self.height) as u64 {
            return Err(Error::Malformed(format!(
                "runs cover {total} pixels, expected {}",
                self.width * self.height
            )));
        }
        let mut labels = Vec::with_capacity(self.width * self.height);
        for &[label, len] in &self.runs {
            labels.extend(std::iter::repeat_n(label, len as usize));
        }
        LabelMap::new(self.width, self.height, labels)
    }
}

pub fn to_csv(lm: &LabelMap) -> String {
    lm.labels()
        .chunks(lm.width())
        .map(|row| row.iter().map(u32::to_string).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn from_csv(text: &str) -> Result<LabelMap> {
    let mut width = None;
    let mut labels = Vec::new();
    let mut height = 0;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let row = line
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<u32>()
                    .map_err(|e| Error::Malformed(format!("bad label {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Malformed(format!(
                    "ragged csv: row {height} has {} labels, expected {w}",
                    row.len()
                )))
            }
            _ => {}
        }
        labels.extend(row);
        height += 1;
    }
    LabelMap::new(width.unwrap_or(0), height, labels)
}

pub fn save_labels(lm: &LabelMap, path: impl AsRef<Path>, format: LabelFormat) -> Result<()> {
    let path = path.as_ref();
    let write_err = |source| Error::Write {
        path: path.to_path_buf(),
        source,
    };
    match format {
        LabelFormat::Png16 => {
            if lm.max_label() > u32::from(u16::MAX) {
                return Err(Error::LabelOverflow {
                    label: lm.max_label(),
                    format: "png16",
                });
            }
            let raw: Vec<u16> = lm.labels().iter().map(|&l| l as u16).collect();
            let buf: ::image::ImageBuffer<::image::Luma<u16>, Vec<u16>> =
                ::image::ImageBuffer::from_raw(lm.width() as u32, lm.height() as u32, raw)
                    .ok_or_else(|| Error::Dimensions("label buffer size".into()))?;
            buf.save_with_format(path, ::image::ImageFormat::Png)
                .map_err(|e| write_err(std::io::Error::other(e)))
        }
        LabelFormat::Csv => std::fs::write(path, to_csv(lm)).map_err(write_err),
        LabelFormat::RleJson => {
            let json =
                serde_json::to_string(&RleLabels::encode(lm)).expect("label runs always serialize");
            std::fs::write(path, json).map_err(write_err)
        }
    }
}

pub fn load_labels(path: impl AsRef<Path>, format: LabelFormat) -> Result<LabelMap> {
    let path = path.as_ref();
    let read_err = |source| Error::Read {
        path: path.to_path_buf(),
        source,
    };
    match format {
        LabelFormat::Png16 => {
            let img = ::image::open(path).map_err(|e| match e {
                ::image::ImageError::IoError(io) => read_err(io),
                other => Error::Malformed(other.to_string()),
            })?;
            let (w, h) = (img.width() as usize, img.height() as usize);
            let labels: Vec<u32> = match img {
                ::image::DynamicImage::ImageLuma16(buf) => {
                    buf.into_raw().into_iter().map(u32::from).collect()
                }
                ::image::DynamicImage::ImageLuma8(buf) => {
                    buf.into_raw().into_iter().map(u32::from).collect()
                }
                other => {
                    return Err(Error::UnsupportedFormat(format!(
                        "label png must be single-channel, got {:?}",
                        other.color()
                    )))
                }
            };
            LabelMap::new(w, h, labels)
        }
        LabelFormat::Csv => from_csv(&std::fs::read_to_string(path).map_err(read_err)?),
        LabelFormat::RleJson => {
            let text = std::fs::read_to_string(path).map_err(read_err)?;
            let rle: RleLabels =
                serde_json::from_str(&text).map_err(|e| Error::Malformed(e.to_string()))?;
            rle.decode()
        }
    }
}
