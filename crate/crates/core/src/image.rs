//! Pixel containers and color handling.
//!
//! Pixel storage is row-major and channel-interleaved: component `c` of pixel
//! `(x, y)` lives at `(y * width + x) * channels + c`. [`LabelMap`] uses the
//! same row-major pixel order, so a pixel index is interchangeable between
//! the two.
//!
//! All channel values are stored in `[0, 1]`. CIELAB values are mapped into
//! that range with fixed affine constants, see [`lab_to_unit`].

use std::fmt;
use std::path::Path;

use ::image::{DynamicImage, ImageFormat};

use crate::error::{Error, Result};

/// Upper bound on channel count accepted anywhere in the pipeline.
pub const MAX_CHANNELS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ColorSpace {
    Gray,
    Rgb,
    Lab,
    Custom,
}

impl ColorSpace {
    pub fn name(self) -> &'static str {
        match self {
            ColorSpace::Gray => "gray",
            ColorSpace::Rgb => "rgb",
            ColorSpace::Lab => "lab",
            ColorSpace::Custom => "custom",
        }
    }
}

impl fmt::Display for ColorSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A `width x height` grid of `channels`-dimensional color vectors in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
    space: ColorSpace,
}

impl Image {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f64>,
        space: ColorSpace,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimensions(format!("empty image {width}x{height}")));
        }
        if channels == 0 || channels > MAX_CHANNELS {
            return Err(Error::Dimensions(format!(
                "{channels} channels (expected 1..={MAX_CHANNELS})"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::Dimensions(format!(
                "data length {} != {width}x{height}x{channels}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Malformed(format!(
                "channel value {bad} outside [0, 1]"
            )));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
            space,
        })
    }

    /// Builds an image by evaluating `f(x, y, out)` for every pixel.
    /// Values are clamped into `[0, 1]`.
    pub fn from_fn<F>(
        width: usize,
        height: usize,
        channels: usize,
        space: ColorSpace,
        mut f: F,
    ) -> Result<Self>
    where
        F: FnMut(usize, usize, &mut [f64]),
    {
        let mut data = vec![0.0; width * height * channels];
        for y in 0..height {
            for x in 0..width {
                let start = (y * width + x) * channels;
                let px = &mut data[start..start + channels];
                f(x, y, px);
                for v in px.iter_mut() {
                    *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
                }
            }
        }
        Image::new(width, height, channels, data, space)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn space(&self) -> ColorSpace {
        self.space
    }

    /// Number of pixels.
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        self.pixel_at(y * self.width + x)
    }

    /// Color of the pixel with row-major index `idx`.
    pub fn pixel_at(&self, idx: usize) -> &[f64] {
        let start = idx * self.channels;
        &self.data[start..start + self.channels]
    }

    pub fn pixels(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.channels)
    }

    /// Returns the image with its color-space tag replaced.
    pub fn with_space(mut self, space: ColorSpace) -> Self {
        self.space = space;
        self
    }
}

/// Per-pixel region identifiers, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::Dimensions(format!(
                "label count {} != {width}x{height}",
                labels.len()
            )));
        }
        Ok(LabelMap {
            width,
            height,
            labels,
        })
    }

    pub fn filled(width: usize, height: usize, label: u32) -> Self {
        LabelMap {
            width,
            height,
            labels: vec![label; width * height],
        }
    }

    pub fn from_fn<F>(width: usize, height: usize, mut f: F) -> Self
    where
        F: FnMut(usize, usize) -> u32,
    {
        let mut labels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                labels.push(f(x, y));
            }
        }
        LabelMap {
            width,
            height,
            labels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<u32> {
        self.labels
    }

    pub fn max_label(&self) -> u32 {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    /// Number of distinct labels.
    pub fn region_count(&self) -> usize {
        let mut seen = vec![false; self.max_label() as usize + 1];
        let mut count = 0;
        for &l in &self.labels {
            if !seen[l as usize] {
                seen[l as usize] = true;
                count += 1;
            }
        }
        count
    }

    /// True when the label set is exactly `0..region_count()`.
    pub fn is_compact(&self) -> bool {
        self.labels.is_empty() || self.max_label() as usize + 1 == self.region_count()
    }

    /// Renumbers labels to `0..r` in order of first appearance (row-major).
    pub fn compacted(&self) -> LabelMap {
        let mut map = vec![u32::MAX; self.max_label() as usize + 1];
        let mut next = 0;
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                let slot = &mut map[l as usize];
                if *slot == u32::MAX {
                    *slot = next;
                    next += 1;
                }
                *slot
            })
            .collect();
        LabelMap {
            width: self.width,
            height: self.height,
            labels,
        }
    }

    pub fn matches(&self, img: &Image) -> bool {
        self.width == img.width() && self.height == img.height()
    }
}

/// Loads an 8- or 16-bit PNG, PGM or PPM file. Alpha is discarded.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    decode_image(&bytes)
}

/// Decodes PNG/PGM/PPM bytes. See [`load_image`].
pub fn decode_image(bytes: &[u8]) -> Result<Image> {
    let format = sniff_format(bytes)?;
    let dynamic = ::image::load_from_memory_with_format(bytes, format)
        .map_err(|e| Error::Malformed(e.to_string()))?;
    let (width, height) = (dynamic.width() as usize, dynamic.height() as usize);
    let (channels, data): (usize, Vec<f64>) = match dynamic {
        DynamicImage::ImageLuma8(buf) => (1, unit8(buf.as_raw())),
        DynamicImage::ImageLuma16(buf) => (1, unit16(buf.as_raw())),
        DynamicImage::ImageLumaA8(_) => (1, unit8(dynamic.to_luma8().as_raw())),
        DynamicImage::ImageLumaA16(_) => (1, unit16(dynamic.to_luma16().as_raw())),
        DynamicImage::ImageRgb8(buf) => (3, unit8(buf.as_raw())),
        DynamicImage::ImageRgb16(buf) => (3, unit16(buf.as_raw())),
        DynamicImage::ImageRgba8(_) => (3, unit8(dynamic.to_rgb8().as_raw())),
        DynamicImage::ImageRgba16(_) => (3, unit16(dynamic.to_rgb16().as_raw())),
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "bit depth of {:?}",
                other.color()
            )))
        }
    };
    let space = if channels == 1 {
        ColorSpace::Gray
    } else {
        ColorSpace::Rgb
    };
    Image::new(width, height, channels, data, space)
}

fn sniff_format(bytes: &[u8]) -> Result<ImageFormat> {
    match bytes {
        [0x89, b'P', b'N', b'G', ..] => Ok(ImageFormat::Png),
        [b'P', b'1'..=b'6', ..] => Ok(ImageFormat::Pnm),
        [0xFF, 0xD8, ..] => Err(Error::UnsupportedFormat("jpeg".into())),
        _ => Err(Error::UnsupportedFormat("unrecognized image header".into())),
    }
}

fn unit8(raw: &[u8]) -> Vec<f64> {
    raw.iter().map(|&v| f64::from(v) / 255.0).collect()
}

fn unit16(raw: &[u16]) -> Vec<f64> {
    raw.iter().map(|&v| f64::from(v) / 65535.0).collect()
}

/// Writes a gray or RGB image as an 8-bit PNG (values rounded).
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = img
        .data()
        .iter()
        .map(|v| (v * 255.0).round() as u8)
        .collect();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let dynamic = match img.channels() {
        1 => DynamicImage::ImageLuma8(
            ::image::GrayImage::from_raw(w, h, bytes).expect("length checked by Image"),
        ),
        3 => DynamicImage::ImageRgb8(
            ::image::RgbImage::from_raw(w, h, bytes).expect("length checked by Image"),
        ),
        c => {
            return Err(Error::UnsupportedFormat(format!(
                "cannot write {c}-channel image as PNG"
            )))
        }
    };
    dynamic
        .save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::Write {
            path: path.to_path_buf(),
            source: std::io::Error::other(e),
        })
}

// D65 reference white.
const WHITE_X: f64 = 0.950_47;
const WHITE_Y: f64 = 1.0;
const WHITE_Z: f64 = 1.088_83;

/// Affine map from CIELAB `(L, a, b)` with `L in [0, 100]`, `a, b in [-128, 127]`
/// into the stored unit cube: `(L / 100, (a + 128) / 255, (b + 128) / 255)`.
pub fn lab_to_unit(lab: [f64; 3]) -> [f64; 3] {
    [
        lab[0] / 100.0,
        (lab[1] + 128.0) / 255.0,
        (lab[2] + 128.0) / 255.0,
    ]
}

/// Inverse of [`lab_to_unit`].
pub fn unit_to_lab(unit: [f64; 3]) -> [f64; 3] {
    [
        unit[0] * 100.0,
        unit[1] * 255.0 - 128.0,
        unit[2] * 255.0 - 128.0,
    ]
}

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// sRGB (D65) to CIELAB for a single color, unscaled.
pub fn srgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let [r, g, b] = rgb.map(srgb_to_linear);
    let x = 0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b;
    let z = 0.019_333_9 * r + 0.119_192_0 * g + 0.950_304_1 * b;
    let (fx, fy, fz) = (lab_f(x / WHITE_X), lab_f(y / WHITE_Y), lab_f(z / WHITE_Z));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Converts an RGB image to CIELAB stored in unit range.
pub fn rgb_to_lab(img: &Image) -> Result<Image> {
    if img.space() != ColorSpace::Rgb || img.channels() != 3 {
        return Err(Error::ColorSpace {
            expected: "rgb",
            actual: img.space().name(),
        });
    }
    let mut data = Vec::with_capacity(img.data().len());
    for px in img.pixels() {
        let unit = lab_to_unit(srgb_to_lab([px[0], px[1], px[2]]));
        data.extend(unit.iter().map(|v| v.clamp(0.0, 1.0)));
    }
    Image::new(img.width(), img.height(), 3, data, ColorSpace::Lab)
}

/// Rec. 709 luma of an RGB image; gray images pass through.
pub fn to_gray(img: &Image) -> Result<Image> {
    match img.space() {
        ColorSpace::Gray => Ok(img.clone()),
        ColorSpace::Rgb => {
            let data = img
                .pixels()
                .map(|p| (0.2126 * p[0] + 0.7152 * p[1] + 0.0722 * p[2]).clamp(0.0, 1.0))
                .collect();
            Image::new(img.width(), img.height(), 1, data, ColorSpace::Gray)
        }
        other => Err(Error::ColorSpace {
            expected: "rgb",
            actual: other.name(),
        }),
    }
}

/// Restricts an image to the listed channels, in the given order.
///
/// Selecting every channel in order returns the image unchanged; any other
/// selection of a multi-channel image is tagged [`ColorSpace::Custom`]
/// (or gray, for a single channel of a gray image).
pub fn select_channels(img: &Image, idx: &[usize]) -> Result<Image> {
    if idx.is_empty() {
        return Err(Error::Config("no channels selected".into()));
    }
    for (pos, &i) in idx.iter().enumerate() {
        if i >= img.channels() {
            return Err(Error::ChannelOutOfRange {
                index: i,
                channels: img.channels(),
            });
        }
        if idx[..pos].contains(&i) {
            return Err(Error::DuplicateChannel(i));
        }
    }
    if idx.iter().copied().eq(0..img.channels()) {
        return Ok(img.clone());
    }
    let data = img
        .pixels()
        .flat_map(|p| idx.iter().map(move |&i| p[i]))
        .collect();
    let space = if img.space() == ColorSpace::Gray {
        ColorSpace::Gray
    } else {
        ColorSpace::Custom
    };
    Image::new(img.width(), img.height(), idx.len(), data, space)
}
