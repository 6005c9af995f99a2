//! Otsu's global threshold and head-mask extraction.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::imgio::{BinaryMask, GrayImage};
use crate::morphology::{fill_holes, largest_component};

/// Gray level bin of an intensity. `ceil` makes `v > t` and `bin(v) > t`
/// agree for every integer threshold `t`.
#[inline]
fn gray_level(v: f64) -> usize {
    v.ceil().clamp(0.0, 255.0) as usize
}

pub fn gray_histogram(image: &GrayImage) -> Result<[u64; 256]> {
    let mut hist = [0u64; 256];
    for (index, &v) in image.pixels().iter().enumerate() {
        if !(0.0..=255.0).contains(&v) {
            return Err(Error::IntensityOutOfRange { index, value: v });
        }
        hist[gray_level(v)] += 1;
    }
    Ok(hist)
}

/// Between-class variance of a split, kept as the exact fraction
/// `(N*S0 - n0*S)^2 / (n0*n1)` (a positive multiple of the variance).
#[derive(Clone, Copy)]
struct SplitScore {
    num: u128,
    den: u128,
}

impl SplitScore {
    fn cmp(&self, other: &SplitScore) -> Ordering {
        match (
            self.num.checked_mul(other.den),
            other.num.checked_mul(self.den),
        ) {
            (Some(a), Some(b)) => a.cmp(&b),
            _ => {
                let a = self.num as f64 / self.den as f64;
                let b = other.num as f64 / other.den as f64;
                a.partial_cmp(&b).unwrap_or(Ordering::Equal)
            }
        }
    }
}

/// Threshold `t` maximizing between-class variance of `{<= t}` vs `{> t}`.
/// Ties resolve to the lowest `t`. Only splits with both classes nonempty
/// are considered, so a constant image is an error.
pub fn otsu_threshold(image: &GrayImage) -> Result<u8> {
    let hist = gray_histogram(image)?;
    let total: u64 = hist.iter().sum();
    let weighted: u128 = hist
        .iter()
        .enumerate()
        .map(|(i, &n)| i as u128 * n as u128)
        .sum();

    let mut best: Option<(usize, SplitScore)> = None;
    let (mut n0, mut s0) = (0u64, 0u128);
    for (t, &count) in hist.iter().enumerate().take(255) {
        n0 += count;
        s0 += t as u128 * count as u128;
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let diff = (total as i128 * s0 as i128 - n0 as i128 * weighted as i128).unsigned_abs();
        let score = SplitScore {
            num: diff * diff,
            den: n0 as u128 * n1 as u128,
        };
        if best.is_none_or(|(_, b)| score.cmp(&b) == Ordering::Greater) {
            best = Some((t, score));
        }
    }
    best.map(|(t, _)| t as u8).ok_or(Error::DegenerateHistogram)
}

#[derive(Debug, Clone)]
pub struct HeadMaskResult {
    pub mask: BinaryMask,
    pub threshold: u8,
    /// Input with every pixel outside `mask` set to 0.
    pub stripped: GrayImage,
}

/// Otsu foreground, reduced to its largest 8-connected component with
/// enclosed holes filled.
pub fn skull_strip(image: &GrayImage) -> Result<HeadMaskResult> {
    let threshold = otsu_threshold(image)?;
    let t = f64::from(threshold);
    let foreground = BinaryMask::from_raw(
        image.width(),
        image.height(),
        image.pixels().iter().map(|&v| v > t).collect(),
    );
    let head = largest_component(&foreground).ok_or(Error::NoHeadRegion)?;
    let mask = fill_holes(&head);
    let stripped = image
        .pixels()
        .iter()
        .zip(mask.bits())
        .map(|(&v, &keep)| if keep { v } else { 0.0 })
        .collect();
    Ok(HeadMaskResult {
        stripped: GrayImage::from_raw(image.width(), image.height(), stripped),
        mask,
        threshold,
    })
}
