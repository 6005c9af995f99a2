//! Grayscale rasters, binary masks, and their binary PGM (P5) encoding.
//!
//! Coordinates are `(row, col)` with row 0 at the top. "Left" and "right"
//! always mean low and high column index.

use std::fs;
use std::io::ErrorKind;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fbb::BoundingBox;

/// Row-major raster of real intensities, nominally in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidRaster(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidRaster(format!(
                "{} pixels supplied for a {width}x{height} raster",
                pixels.len()
            )));
        }
        if let Some(index) = pixels.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidRaster(format!(
                "non-finite intensity at pixel index {index}"
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds an image from a row-generating closure, `f(row, col)`.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                pixels.push(f(r, c));
            }
        }
        Self::new(width, height, pixels)
    }

    /// Internal constructor for buffers whose invariants the caller upholds.
    pub(crate) fn from_raw(width: usize, height: usize, pixels: Vec<f64>) -> Self {
        debug_assert_eq!(pixels.len(), width * height);
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.pixels
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Column-flipped copy (mirror about the vertical center line).
    pub fn mirror_columns(&self) -> Self {
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for row in self.pixels.chunks_exact(self.width) {
            pixels.extend(row.iter().rev());
        }
        Self::from_raw(self.width, self.height, pixels)
    }

    pub fn same_shape(&self, mask: &BinaryMask) -> bool {
        self.width == mask.width() && self.height == mask.height()
    }
}

/// Row-major boolean raster.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidRaster(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if bits.len() != width * height {
            return Err(Error::InvalidRaster(format!(
                "{} bits supplied for a {width}x{height} mask",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn full(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![true; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        let mut bits = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                bits.push(f(r, c));
            }
        }
        Self::new(width, height, bits)
    }

    pub(crate) fn from_raw(width: usize, height: usize, bits: Vec<bool>) -> Self {
        debug_assert_eq!(bits.len(), width * height);
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn same_shape(&self, other: &BinaryMask) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn mirror_columns(&self) -> Self {
        let mut bits = Vec::with_capacity(self.bits.len());
        for row in self.bits.chunks_exact(self.width) {
            bits.extend(row.iter().rev());
        }
        Self::from_raw(self.width, self.height, bits)
    }

    pub fn not(&self) -> Self {
        Self::from_raw(self.width, self.height, self.bits.iter().map(|b| !b).collect())
    }

    /// Pixelwise AND. Panics on shape mismatch.
    pub fn and(&self, other: &BinaryMask) -> Self {
        assert!(self.same_shape(other), "mask shapes differ");
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect();
        Self::from_raw(self.width, self.height, bits)
    }

    /// Smallest box containing every true pixel, or `None` for an empty mask.
    pub fn bounding_box(&self) -> Option<BoundingBox> {
        let mut bbox: Option<BoundingBox> = None;
        for (i, _) in self.bits.iter().enumerate().filter(|(_, b)| **b) {
            let (r, c) = (i / self.width, i % self.width);
            bbox = Some(match bbox {
                None => BoundingBox::new_unchecked(r, r, c, c),
                Some(b) => BoundingBox::new_unchecked(
                    b.row_min.min(r),
                    b.row_max.max(r),
                    b.col_min.min(c),
                    b.col_max.max(c),
                ),
            });
        }
        bbox
    }
}

/// Quantizes to a byte: round to nearest, ties away from zero.
fn quantize(index: usize, value: f64) -> Result<u8> {
    if !(0.0..=255.0).contains(&value) {
        return Err(Error::IntensityOutOfRange { index, value });
    }
    Ok(value.round() as u8)
}

fn pgm_bytes(width: usize, height: usize, data: impl Iterator<Item = u8>) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.reserve(width * height);
    out.extend(data);
    out
}

/// Encodes an image as binary PGM bytes.
pub fn encode_gray_pgm(image: &GrayImage) -> Result<Vec<u8>> {
    let data = image
        .pixels
        .iter()
        .enumerate()
        .map(|(i, &v)| quantize(i, v))
        .collect::<Result<Vec<u8>>>()?;
    Ok(pgm_bytes(image.width, image.height, data.into_iter()))
}

/// Encodes a mask as binary PGM bytes: true → 255, false → 0.
pub fn encode_mask_pgm(mask: &BinaryMask) -> Vec<u8> {
    pgm_bytes(
        mask.width,
        mask.height,
        mask.bits.iter().map(|&b| if b { 255 } else { 0 }),
    )
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::MalformedHeader(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::MalformedHeader(format!("{what} is not a valid integer")))
    }
}

/// Decodes binary PGM bytes.
pub fn decode_gray_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 {
        return Err(Error::MalformedHeader("file too short for magic".into()));
    }
    let magic = &bytes[..2];
    if magic != b"P5" {
        if magic[0] == b'P' && magic[1].is_ascii_digit() {
            return Err(Error::UnsupportedPgmVariant(
                String::from_utf8_lossy(magic).into_owned(),
            ));
        }
        return Err(Error::MalformedHeader("missing P5 magic".into()));
    }
    let mut cursor = HeaderCursor { bytes, pos: 2 };
    if cursor.pos < bytes.len() && !bytes[cursor.pos].is_ascii_whitespace() && bytes[cursor.pos] != b'#' {
        return Err(Error::MalformedHeader("no separator after magic".into()));
    }
    let width = cursor.number("width")? as usize;
    let height = cursor.number("height")? as usize;
    let maxval = cursor.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    if maxval != 255 {
        return Err(Error::UnsupportedMaxval(maxval));
    }
    match bytes.get(cursor.pos) {
        Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
        _ => {
            return Err(Error::MalformedHeader(
                "missing whitespace byte after maxval".into(),
            ))
        }
    }
    let expected = width * height;
    let data = &bytes[cursor.pos..];
    if data.len() < expected {
        return Err(Error::TruncatedPixels {
            expected,
            found: data.len(),
        });
    }
    let pixels = data[..expected].iter().map(|&b| f64::from(b)).collect();
    Ok(GrayImage::from_raw(width, height, pixels))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| {
        if source.kind() == ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_gray_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    decode_gray_pgm(&read_file(path.as_ref())?)
}

pub fn write_gray_pgm(image: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_gray_pgm(image)?;
    write_file(path.as_ref(), &bytes)
}

pub fn write_mask_pgm(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_mask_pgm(mask))
}

/// Loads a PGM and thresholds it at 128 (`>= 128` is true).
pub fn load_mask_pgm(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let image = load_gray_pgm(path)?;
    Ok(threshold_mask(&image, 128.0))
}

pub fn threshold_mask(image: &GrayImage, level: f64) -> BinaryMask {
    BinaryMask::from_raw(
        image.width,
        image.height,
        image.pixels.iter().map(|&v| v >= level).collect(),
    )
}

/// Mask pixels with at least one 4-neighbor outside the mask. Pixels on the
/// raster border count as boundary since their outer neighbor is outside.
pub fn mask_boundary(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width, mask.height);
    let mut bits = vec![false; w * h];
    for r in 0..h {
        for c in 0..w {
            if !mask.get(r, c) {
                continue;
            }
            let interior = r > 0
                && c > 0
                && r + 1 < h
                && c + 1 < w
                && mask.get(r - 1, c)
                && mask.get(r + 1, c)
                && mask.get(r, c - 1)
                && mask.get(r, c + 1);
            bits[r * w + c] = !interior;
        }
    }
    BinaryMask::from_raw(w, h, bits)
}

/// Burns the mask contour and optional box outline into a copy of `image` at 255.
pub fn render_overlay(
    image: &GrayImage,
    mask: &BinaryMask,
    bbox: Option<&BoundingBox>,
) -> Result<GrayImage> {
    if !image.same_shape(mask) {
        return Err(Error::DimensionMismatch(format!(
            "image {}x{} vs mask {}x{}",
            image.width, image.height, mask.width, mask.height
        )));
    }
    let mut pixels = image.pixels.clone();
    for (p, &edge) in pixels.iter_mut().zip(mask_boundary(mask).bits()) {
        if edge {
            *p = 255.0;
        }
    }
    if let Some(b) = bbox {
        b.check_within(image.width, image.height)?;
        let w = image.width;
        for c in b.col_min..=b.col_max {
            pixels[b.row_min * w + c] = 255.0;
            pixels[b.row_max * w + c] = 255.0;
        }
        for r in b.row_min..=b.row_max {
            pixels[r * w + b.col_min] = 255.0;
            pixels[r * w + b.col_max] = 255.0;
        }
    }
    Ok(GrayImage::from_raw(image.width, image.height, pixels))
}
