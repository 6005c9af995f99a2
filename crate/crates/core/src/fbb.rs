//! Fast bounding box: find the rectangle on one side of the left-right
//! symmetry axis whose gray-level histogram differs most from its mirror
//! image, while everything outside it stays similar.
//!
//! Axis positions are handled in half-column units (`2 * axis_col`), so
//! reflection `x -> 2c - x` is exact integer arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgio::{BinaryMask, GrayImage};

/// Inclusive, axis-aligned rectangle in `(row, col)` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub row_min: usize,
    pub row_max: usize,
    pub col_min: usize,
    pub col_max: usize,
}

impl BoundingBox {
    pub fn new(row_min: usize, row_max: usize, col_min: usize, col_max: usize) -> Result<Self> {
        if row_min > row_max || col_min > col_max {
            return Err(Error::InvalidRegion(format!(
                "rows [{row_min}, {row_max}], cols [{col_min}, {col_max}] are inverted"
            )));
        }
        Ok(Self::new_unchecked(row_min, row_max, col_min, col_max))
    }

    pub(crate) fn new_unchecked(row_min: usize, row_max: usize, col_min: usize, col_max: usize) -> Self {
        Self {
            row_min,
            row_max,
            col_min,
            col_max,
        }
    }

    /// The whole raster.
    pub fn full(width: usize, height: usize) -> Self {
        Self::new_unchecked(0, height - 1, 0, width - 1)
    }

    pub fn check_within(&self, width: usize, height: usize) -> Result<()> {
        if self.row_min > self.row_max || self.col_min > self.col_max {
            return Err(Error::InvalidRegion(format!("{self:?} is inverted")));
        }
        if self.row_max >= height || self.col_max >= width {
            return Err(Error::InvalidRegion(format!(
                "{self:?} exceeds a {width}x{height} raster"
            )));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.row_max - self.row_min + 1
    }

    pub fn cols(&self) -> usize {
        self.col_max - self.col_min + 1
    }

    pub fn area(&self) -> usize {
        self.rows() * self.cols()
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.row_min..=self.row_max).contains(&row) && (self.col_min..=self.col_max).contains(&col)
    }

    pub fn intersection(&self, other: &BoundingBox) -> Option<BoundingBox> {
        let r0 = self.row_min.max(other.row_min);
        let r1 = self.row_max.min(other.row_max);
        let c0 = self.col_min.max(other.col_min);
        let c1 = self.col_max.min(other.col_max);
        (r0 <= r1 && c0 <= c1).then(|| Self::new_unchecked(r0, r1, c0, c1))
    }

    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let inter = self.intersection(other).map_or(0, |b| b.area());
        inter as f64 / (self.area() + other.area() - inter) as f64
    }

    /// Reflection through the vertical center line of a raster of `width`.
    pub fn mirror(&self, width: usize) -> Self {
        Self::new_unchecked(
            self.row_min,
            self.row_max,
            width - 1 - self.col_max,
            width - 1 - self.col_min,
        )
    }
}

/// Normalized gray-level histogram over `[0, 256)` with uniform bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    probs: Vec<f64>,
    pixel_count: u64,
}

pub const INTENSITY_RANGE: (f64, f64) = (0.0, 256.0);

#[inline]
fn bin_of(v: f64, bins: usize) -> usize {
    ((v * bins as f64 / INTENSITY_RANGE.1).floor().max(0.0) as usize).min(bins - 1)
}

impl Histogram {
    /// Normalizes raw counts. An all-zero input yields the empty histogram.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "bin_count",
                reason: format!("{} < 2", counts.len()),
            });
        }
        let total: u64 = counts.iter().sum();
        let probs = if total == 0 {
            vec![0.0; counts.len()]
        } else {
            counts.iter().map(|&n| n as f64 / total as f64).collect()
        };
        Ok(Self {
            probs,
            pixel_count: total,
        })
    }

    /// Builds directly from probabilities (must be non-negative, summing to 1).
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "bin_count",
                reason: format!("{} < 2", probs.len()),
            });
        }
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter {
                name: "probs",
                reason: format!("not a distribution (sum {sum})"),
            });
        }
        Ok(Self {
            probs,
            pixel_count: 0,
        })
    }

    pub fn bin_count(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn range(&self) -> (f64, f64) {
        INTENSITY_RANGE
    }

    /// Number of pixels counted; zero for histograms built from probabilities.
    pub fn pixel_count(&self) -> u64 {
        self.pixel_count
    }

    pub fn is_empty(&self) -> bool {
        self.probs.iter().all(|&p| p == 0.0)
    }
}

/// Raw bin counts of the pixels that lie in both `region` and `mask`.
pub fn region_counts(
    image: &GrayImage,
    mask: &BinaryMask,
    region: &BoundingBox,
    bin_count: usize,
) -> Result<Vec<u64>> {
    if !image.same_shape(mask) {
        return Err(Error::DimensionMismatch("image and mask differ".into()));
    }
    if bin_count < 2 {
        return Err(Error::InvalidParameter {
            name: "bin_count",
            reason: format!("{bin_count} < 2"),
        });
    }
    region.check_within(image.width(), image.height())?;
    let mut counts = vec![0u64; bin_count];
    for r in region.row_min..=region.row_max {
        for c in region.col_min..=region.col_max {
            if mask.get(r, c) {
                counts[bin_of(image.get(r, c), bin_count)] += 1;
            }
        }
    }
    Ok(counts)
}

pub fn build_histogram(
    image: &GrayImage,
    mask: &BinaryMask,
    region: &BoundingBox,
    bin_count: usize,
) -> Result<Histogram> {
    Histogram::from_counts(&region_counts(image, mask, region, bin_count)?)
}

/// Bhattacharyya coefficient `sum_i sqrt(p_i q_i)`, clamped to `[0, 1]`.
pub fn bhattacharyya(p: &Histogram, q: &Histogram) -> Result<f64> {
    if p.bin_count() != q.bin_count() {
        return Err(Error::BinCountMismatch(p.bin_count(), q.bin_count()));
    }
    if p.is_empty() || q.is_empty() {
        return Err(Error::EmptyHistogram);
    }
    if p.probs == q.probs {
        return Ok(1.0);
    }
    let s: f64 = p.probs.iter().zip(&q.probs).map(|(a, b)| (a * b).sqrt()).sum();
    Ok(s.clamp(0.0, 1.0))
}

/// Coefficient on bin masses. Empty operands count as fully dissimilar.
fn bc_mass(a: &[f64], b: &[f64]) -> f64 {
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    if sa <= 0.0 || sb <= 0.0 {
        return 0.0;
    }
    if a == b {
        return 1.0;
    }
    let s: f64 = a.iter().zip(b).map(|(&x, &y)| (x * y).sqrt()).sum();
    (s / (sa * sb).sqrt()).clamp(0.0, 1.0)
}

/// Per-pixel bin weights. Each pixel spreads unit mass over neighboring
/// bins with a Gaussian of `sigma` bins (truncated at three sigma and
/// renormalized); `sigma == 0` is plain binning. Smoothing keeps slowly
/// varying intensity offsets near a bin edge from looking like a change of
/// tissue.
struct SoftBins {
    first: Vec<u32>,
    offsets: Vec<u32>,
    weights: Vec<f64>,
}

impl SoftBins {
    fn new(values: impl Iterator<Item = f64>, bins: usize, sigma: f64) -> Self {
        let mut first = Vec::new();
        let mut offsets = vec![0u32];
        let mut weights = Vec::new();
        for v in values {
            if sigma <= 0.0 {
                first.push(bin_of(v, bins) as u32);
                weights.push(1.0);
            } else {
                // Bin i is centered at coordinate i.
                let x = (v * bins as f64 / INTENSITY_RANGE.1 - 0.5).clamp(0.0, (bins - 1) as f64);
                let reach = (3.0 * sigma).ceil() as isize;
                let lo = (x.floor() as isize - reach).max(0) as usize;
                let hi = (x.ceil() as isize + reach).min(bins as isize - 1) as usize;
                let start = weights.len();
                let mut total = 0.0;
                for bin in lo..=hi {
                    let d = (bin as f64 - x) / sigma;
                    let g = (-0.5 * d * d).exp();
                    weights.push(g);
                    total += g;
                }
                weights[start..].iter_mut().for_each(|g| *g /= total);
                first.push(lo as u32);
            }
            offsets.push(weights.len() as u32);
        }
        Self {
            first,
            offsets,
            weights,
        }
    }

    #[inline]
    fn add(&self, index: usize, mass: &mut [f64]) {
        let lo = self.first[index] as usize;
        let ws = &self.weights[self.offsets[index] as usize..self.offsets[index + 1] as usize];
        for (slot, w) in mass[lo..lo + ws.len()].iter_mut().zip(ws) {
            *slot += w;
        }
    }
}

/// Interval score: inside dissimilarity plus outside similarity, in `[0, 2]`.
#[inline]
pub fn interval_score(bc_inside: f64, bc_outside: f64) -> f64 {
    (1.0 - bc_inside) + bc_outside
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Self {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FbbParams {
    pub bin_count: usize,
    pub detection_threshold: f64,
    /// Shortest interval (rows or columns) the search may return.
    pub min_extent: usize,
    /// Gaussian histogram smoothing, in bins, used by the search (0 disables).
    pub histogram_sigma: f64,
}

impl Default for FbbParams {
    fn default() -> Self {
        Self {
            bin_count: 64,
            detection_threshold: 0.2,
            min_extent: 8,
            histogram_sigma: 1.0,
        }
    }
}

impl FbbParams {
    pub fn validate(&self) -> Result<()> {
        if self.bin_count < 2 {
            return Err(Error::InvalidParameter {
                name: "bin_count",
                reason: format!("{} < 2", self.bin_count),
            });
        }
        if !(0.0..=1.0).contains(&self.detection_threshold) {
            return Err(Error::InvalidParameter {
                name: "detection_threshold",
                reason: format!("{} not in [0, 1]", self.detection_threshold),
            });
        }
        if !(self.histogram_sigma >= 0.0 && self.histogram_sigma <= 16.0) {
            return Err(Error::InvalidParameter {
                name: "histogram_sigma",
                reason: format!("{} not in [0, 16]", self.histogram_sigma),
            });
        }
        if self.min_extent == 0 {
            return Err(Error::InvalidParameter {
                name: "min_extent",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FbbResult {
    /// Present only when `found`.
    pub bbox: Option<BoundingBox>,
    pub side: Side,
    pub axis_col: f64,
    pub inside_dissimilarity: f64,
    pub found: bool,
    /// Best box even when below the detection threshold.
    pub candidate: Option<BoundingBox>,
}

const AXIS_BAND_ROWS: usize = 8;

/// Candidate axes in half-column units: within 10% of the width around the
/// mask centroid column, and inside the raster.
fn axis_candidates(mask: &BinaryMask) -> Result<(Vec<usize>, u64, u64)> {
    let w = mask.width();
    let (mut n, mut sum) = (0u64, 0u64);
    for (i, _) in mask.bits().iter().enumerate().filter(|(_, b)| **b) {
        n += 1;
        sum += (i % w) as u64;
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    // |k/2 - sum/n| <= w/10  <=>  5|k*n - 2*sum| <= w*n
    let within = |k: u64| 5 * (k * n).abs_diff(2 * sum) <= w as u64 * n;
    let ks: Vec<usize> = (0..=2 * (w - 1)).filter(|&k| within(k as u64)).collect();
    Ok((ks, n, sum))
}

/// Left-right symmetry axis (a column, possibly half-integer).
///
/// Every candidate compares mirrored column windows of fixed half-width,
/// band by band (eight rows each). Pixels outside the mask count as
/// intensity 0, so the head outline contributes as well as its texture. The
/// candidate with the highest median band coefficient wins; ties go to the
/// candidate closest to the mask centroid.
pub fn estimate_axis(image: &GrayImage, mask: &BinaryMask) -> Result<f64> {
    let p = FbbParams::default();
    estimate_axis_with_bins(image, mask, p.bin_count, p.histogram_sigma)
}

pub fn estimate_axis_with_bins(
    image: &GrayImage,
    mask: &BinaryMask,
    bin_count: usize,
    sigma: f64,
) -> Result<f64> {
    if !image.same_shape(mask) {
        return Err(Error::DimensionMismatch("image and mask differ".into()));
    }
    let (ks, n, sum) = axis_candidates(mask)?;
    let (w, h) = (image.width(), image.height());
    let k_lo = *ks.first().expect("centroid candidate always exists");
    let k_hi = *ks.last().expect("centroid candidate always exists");
    // Fixed half-width (in half-columns) that fits every candidate.
    let reach = k_lo.min(2 * (w - 1) - k_hi);

    let soft = SoftBins::new(
        image
            .pixels()
            .iter()
            .zip(mask.bits())
            .map(|(&v, &m)| if m { v } else { 0.0 }),
        bin_count,
        sigma,
    );
    let bands: Vec<(usize, usize)> = (0..h)
        .step_by(AXIS_BAND_ROWS)
        .map(|r0| (r0, (r0 + AXIS_BAND_ROWS).min(h)))
        .filter(|&(r0, r1)| (r0..r1).any(|r| (0..w).any(|c| mask.get(r, c))))
        .collect();

    let mut left = vec![0.0; bin_count];
    let mut right = vec![0.0; bin_count];
    let mut best: Option<(usize, f64, u64)> = None;
    for &k in &ks {
        let mut band_scores = Vec::with_capacity(bands.len());
        for &(r0, r1) in &bands {
            left.iter_mut().for_each(|x| *x = 0.0);
            right.iter_mut().for_each(|x| *x = 0.0);
            // Right-hand columns x with 0 < 2x - k <= reach; mirror is k - x.
            for x in (k / 2 + 1)..w {
                if 2 * x - k > reach {
                    break;
                }
                let m = k - x;
                for r in r0..r1 {
                    soft.add(r * w + x, &mut right);
                    soft.add(r * w + m, &mut left);
                }
            }
            band_scores.push(bc_mass(&left, &right));
        }
        let score = median(&mut band_scores);
        let dist = (k as u64 * n).abs_diff(2 * sum);
        let better = match best {
            None => true,
            Some((_, s, d)) => score > s || (score == s && dist < d),
        };
        if better {
            best = Some((k, score, dist));
        }
    }
    let (k, _, _) = best.expect("at least one candidate");
    Ok(k as f64 / 2.0)
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

/// One slice (a row or a column) of the search: its bin masses and how
/// many head pixels it holds.
struct Slice {
    mass: Vec<f64>,
    pixels: u32,
}

/// Prefix sums over slices: entry `i` covers slices `0..i`.
struct PrefixCounts {
    bins: usize,
    mass: Vec<f64>,
    pixels: Vec<u32>,
}

impl PrefixCounts {
    fn new(slices: &[Slice], bins: usize) -> Self {
        let mut mass = vec![0.0; (slices.len() + 1) * bins];
        let mut pixels = vec![0u32; slices.len() + 1];
        for (i, s) in slices.iter().enumerate() {
            for b in 0..bins {
                mass[(i + 1) * bins + b] = mass[i * bins + b] + s.mass[b];
            }
            pixels[i + 1] = pixels[i] + s.pixels;
        }
        Self { bins, mass, pixels }
    }

    fn len(&self) -> usize {
        self.pixels.len() - 1
    }

    fn pixels_in(&self, a: usize, b: usize) -> u32 {
        self.pixels[b + 1] - self.pixels[a]
    }

    /// Masses over slices `a..=b` into `inside`, the remainder into `outside`.
    fn split(&self, a: usize, b: usize, inside: &mut [f64], outside: &mut [f64]) {
        let n = self.len();
        let bins = self.bins;
        for k in 0..bins {
            let total = self.mass[n * bins + k];
            let v = (self.mass[(b + 1) * bins + k] - self.mass[a * bins + k]).max(0.0);
            inside[k] = v;
            outside[k] = (total - v).max(0.0);
        }
    }
}

struct IntervalWinner {
    a: usize,
    b: usize,
    bc_inside: f64,
}

/// Exhaustive search over intervals `[a, b]` of paired slice histograms.
fn best_interval(
    test: &PrefixCounts,
    reference: &PrefixCounts,
    min_len: usize,
    min_pixels: u32,
) -> Option<IntervalWinner> {
    let n = test.len();
    let bins = test.bins;
    let min_len = min_len.clamp(1, n.max(1));
    let (mut ti, mut to, mut ri, mut ro) = (
        vec![0.0; bins],
        vec![0.0; bins],
        vec![0.0; bins],
        vec![0.0; bins],
    );
    let mut best: Option<(f64, IntervalWinner)> = None;
    for a in 0..n {
        for b in (a + min_len - 1)..n {
            if test.pixels_in(a, b) < min_pixels || reference.pixels_in(a, b) < min_pixels {
                continue;
            }
            test.split(a, b, &mut ti, &mut to);
            reference.split(a, b, &mut ri, &mut ro);
            let bc_in = bc_mass(&ti, &ri);
            let score = interval_score(bc_in, bc_mass(&to, &ro));
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, IntervalWinner { a, b, bc_inside: bc_in }));
            }
        }
    }
    best.map(|(_, w)| w)
}

/// Locates the most asymmetric rectangle.
///
/// Rows are chosen first by pairing each row's right half with its mirrored
/// left half; columns are then chosen within those rows, indexed by distance
/// from the axis. Because the coefficient is symmetric the two half-planes
/// share one search and produce mirror-image boxes; the reported side is
/// the one whose box differs more from the rest of the head.
pub fn find_bounding_box(image: &GrayImage, mask: &BinaryMask, params: &FbbParams) -> Result<FbbResult> {
    params.validate()?;
    let axis = estimate_axis_with_bins(image, mask, params.bin_count, params.histogram_sigma)?;
    let k = (2.0 * axis) as usize;
    let (w, h) = (image.width(), image.height());
    let bins = params.bin_count;

    // Right-hand test columns, nearest to the axis first, with their mirrors.
    let test_cols: Vec<usize> = ((k / 2 + 1)..w).take_while(|&x| x <= k).collect();
    let not_found = |dissim: f64| FbbResult {
        bbox: None,
        side: Side::Right,
        axis_col: axis,
        inside_dissimilarity: dissim,
        found: false,
        candidate: None,
    };
    if test_cols.is_empty() {
        return Ok(not_found(0.0));
    }
    let min_pixels = (params.min_extent * params.min_extent / 2).max(1) as u32;

    let soft = SoftBins::new(image.pixels().iter().copied(), bins, params.histogram_sigma);
    let hist_of = |cells: &mut dyn Iterator<Item = (usize, usize)>| {
        let mut slice = Slice {
            mass: vec![0.0; bins],
            pixels: 0,
        };
        for (r, c) in cells {
            if mask.get(r, c) {
                soft.add(r * w + c, &mut slice.mass);
                slice.pixels += 1;
            }
        }
        slice
    };

    let row_test: Vec<Slice> = (0..h)
        .map(|r| hist_of(&mut test_cols.iter().map(|&x| (r, x))))
        .collect();
    let row_ref: Vec<Slice> = (0..h)
        .map(|r| hist_of(&mut test_cols.iter().map(|&x| (r, k - x))))
        .collect();
    let Some(rows) = best_interval(
        &PrefixCounts::new(&row_test, bins),
        &PrefixCounts::new(&row_ref, bins),
        params.min_extent,
        min_pixels,
    ) else {
        return Ok(not_found(0.0));
    };
    let (r0, r1) = (rows.a, rows.b);

    let col_test: Vec<Slice> = test_cols
        .iter()
        .map(|&x| hist_of(&mut (r0..=r1).map(|r| (r, x))))
        .collect();
    let col_ref: Vec<Slice> = test_cols
        .iter()
        .map(|&x| hist_of(&mut (r0..=r1).map(|r| (r, k - x))))
        .collect();
    let Some(cols) = best_interval(
        &PrefixCounts::new(&col_test, bins),
        &PrefixCounts::new(&col_ref, bins),
        params.min_extent,
        min_pixels,
    ) else {
        return Ok(not_found(1.0 - rows.bc_inside));
    };

    let right_box = BoundingBox::new_unchecked(r0, r1, test_cols[cols.a], test_cols[cols.b]);
    let left_box = BoundingBox::new_unchecked(r0, r1, k - test_cols[cols.b], k - test_cols[cols.a]);
    let side = anomalous_side(&soft, mask, &right_box, &left_box, bins);
    let bbox = match side {
        Side::Right => right_box,
        Side::Left => left_box,
    };
    let inside_dissimilarity = 1.0 - cols.bc_inside;
    let found = inside_dissimilarity >= params.detection_threshold;
    Ok(FbbResult {
        bbox: found.then_some(bbox),
        side,
        axis_col: axis,
        inside_dissimilarity,
        found,
        candidate: Some(bbox),
    })
}

/// The side whose box histogram is further from the rest of the head mask.
/// Exact ties go to the right.
fn anomalous_side(
    soft: &SoftBins,
    mask: &BinaryMask,
    right_box: &BoundingBox,
    left_box: &BoundingBox,
    bins: usize,
) -> Side {
    let mut right = vec![0.0; bins];
    let mut left = vec![0.0; bins];
    let mut rest = vec![0.0; bins];
    for r in 0..mask.height() {
        for c in 0..mask.width() {
            if !mask.get(r, c) {
                continue;
            }
            let target = if right_box.contains(r, c) {
                &mut right
            } else if left_box.contains(r, c) {
                &mut left
            } else {
                &mut rest
            };
            soft.add(r * mask.width() + c, target);
        }
    }
    if bc_mass(&right, &rest) <= bc_mass(&left, &rest) {
        Side::Right
    } else {
        Side::Left
    }
}
