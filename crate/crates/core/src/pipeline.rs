//! End-to-end segmentation: skull strip, denoise, localize, train on the
//! center of the box, classify the head, and score against ground truth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fbb::{find_bounding_box, BoundingBox, FbbParams, FbbResult};
use crate::imgio::{BinaryMask, GrayImage};
use crate::morphology::largest_component;
use crate::ocsvm::{train, FeatureVector, Label, OcsvmModel, TrainConfig};
use crate::preprocess::{diffuse, skull_strip, DiffusionParams, HeadMaskResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub diffusion: DiffusionParams,
    pub bin_count: usize,
    pub detection_threshold: f64,
    pub min_extent: usize,
    pub histogram_sigma: f64,
    /// Share of each box side kept for training samples. The search already
    /// trims boxes to the anomaly's core, so the default keeps all of it.
    pub central_fraction: f64,
    pub patch_size: usize,
    pub train: TrainConfig,
    /// Keep only the largest 8-connected tumor component.
    pub cleanup: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let fbb = FbbParams::default();
        Self {
            diffusion: DiffusionParams::default(),
            bin_count: fbb.bin_count,
            detection_threshold: fbb.detection_threshold,
            min_extent: fbb.min_extent,
            histogram_sigma: fbb.histogram_sigma,
            central_fraction: 1.0,
            patch_size: 3,
            train: TrainConfig::default(),
            cleanup: false,
        }
    }
}

impl PipelineConfig {
    pub fn fbb_params(&self) -> FbbParams {
        FbbParams {
            bin_count: self.bin_count,
            detection_threshold: self.detection_threshold,
            min_extent: self.min_extent,
            histogram_sigma: self.histogram_sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.diffusion.validate()?;
        self.fbb_params().validate()?;
        self.train.validate()?;
        check_fraction(self.central_fraction)?;
        check_patch_size(self.patch_size)
    }
}

fn check_fraction(fraction: f64) -> Result<()> {
    if fraction > 0.0 && fraction <= 1.0 {
        Ok(())
    } else {
        Err(invalid("central_fraction", format!("{fraction} not in (0, 1]")))
    }
}

fn check_patch_size(patch_size: usize) -> Result<()> {
    if matches!(patch_size, 1 | 3 | 5) {
        Ok(())
    } else {
        Err(invalid("patch_size", format!("{patch_size} not in {{1, 3, 5}}")))
    }
}

/// Centered sub-box whose half-extent per axis is `floor(fraction / 2 * extent)`.
pub fn central_region(bbox: &BoundingBox, fraction: f64) -> Result<BoundingBox> {
    check_fraction(fraction)?;
    let shrink = |lo: usize, hi: usize| {
        let extent = hi - lo + 1;
        let half = (fraction / 2.0 * extent as f64).floor() as usize;
        let trim = extent.saturating_sub(2 * half + 1) / 2;
        (lo + trim, hi - trim)
    };
    let (r0, r1) = shrink(bbox.row_min, bbox.row_max);
    let (c0, c1) = shrink(bbox.col_min, bbox.col_max);
    Ok(BoundingBox::new_unchecked(r0, r1, c0, c1))
}

/// `patch_size`² intensities around `(row, col)` scaled by 1/255, with
/// out-of-range positions replaced by the nearest edge pixel.
pub fn patch_feature(image: &GrayImage, row: usize, col: usize, patch_size: usize) -> FeatureVector {
    let half = (patch_size / 2) as isize;
    let (h, w) = (image.height() as isize, image.width() as isize);
    let mut values = Vec::with_capacity(patch_size * patch_size);
    for dr in -half..=half {
        let r = (row as isize + dr).clamp(0, h - 1) as usize;
        for dc in -half..=half {
            let c = (col as isize + dc).clamp(0, w - 1) as usize;
            values.push(image.get(r, c) / 255.0);
        }
    }
    FeatureVector::new(values).expect("image intensities are finite")
}

/// One feature per in-mask pixel of `region`, in raster order.
pub fn extract_features(
    image: &GrayImage,
    mask: &BinaryMask,
    region: &BoundingBox,
    patch_size: usize,
) -> Result<Vec<FeatureVector>> {
    check_patch_size(patch_size)?;
    if !image.same_shape(mask) {
        return Err(Error::DimensionMismatch("image and mask differ".into()));
    }
    region.check_within(image.width(), image.height())?;
    let mut out = Vec::new();
    for r in region.row_min..=region.row_max {
        for c in region.col_min..=region.col_max {
            if mask.get(r, c) {
                out.push(patch_feature(image, r, c, patch_size));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SegmentOutput {
    pub mask: BinaryMask,
    pub fbb: FbbResult,
    /// Absent when nothing was detected.
    pub model: Option<OcsvmModel>,
    pub head: HeadMaskResult,
    pub denoised: GrayImage,
}

pub fn segment(image: &GrayImage, config: &PipelineConfig) -> Result<SegmentOutput> {
    config.validate()?;
    let head = skull_strip(image)?;
    let denoised = diffuse(&head.stripped, &config.diffusion)?;
    let fbb = find_bounding_box(&denoised, &head.mask, &config.fbb_params())?;
    let (w, h) = (image.width(), image.height());

    let Some(bbox) = fbb.bbox.filter(|_| fbb.found) else {
        return Ok(SegmentOutput {
            mask: BinaryMask::empty(w, h)?,
            fbb,
            model: None,
            head,
            denoised,
        });
    };

    let center = central_region(&bbox, config.central_fraction)?;
    let samples = extract_features(&denoised, &head.mask, &center, config.patch_size)?;
    let model = train(&samples, &config.train)?;

    let bits: Vec<bool> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (r, c) = (i / w, i % w);
            head.mask.get(r, c) && {
                let x = patch_feature(&denoised, r, c, config.patch_size);
                model.decide(&x).map(|d| d.label == Label::Tumor).unwrap_or(false)
            }
        })
        .collect();
    let mut mask = BinaryMask::new(w, h, bits)?;
    if config.cleanup {
        mask = largest_component(&mask).unwrap_or(mask);
    }
    Ok(SegmentOutput {
        mask,
        fbb,
        model: Some(model),
        head,
        denoised,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            1.0
        } else {
            (self.tp + self.tn) as f64 / total as f64
        }
    }

    /// Dice overlap; 1 when there is nothing to overlap.
    pub fn similarity_index(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            (2 * self.tp) as f64 / denom as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    pub si: f64,
}

#[derive(Serialize, Deserialize)]
struct MetricsJson {
    tp: u64,
    fp: u64,
    #[serde(rename = "fn")]
    fn_: u64,
    tn: u64,
    accuracy: f64,
    si: f64,
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

impl MetricsReport {
    pub fn from_counts(counts: ConfusionCounts) -> Self {
        Self {
            counts,
            accuracy: counts.accuracy(),
            si: counts.similarity_index(),
        }
    }

    /// `{tp, fp, fn, tn, accuracy, si}` with the ratios rounded to 6 places.
    pub fn to_json(&self) -> Result<String> {
        let c = self.counts;
        Ok(serde_json::to_string_pretty(&MetricsJson {
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            tn: c.tn,
            accuracy: round6(self.accuracy),
            si: round6(self.si),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: MetricsJson = serde_json::from_str(text)?;
        Ok(Self {
            counts: ConfusionCounts {
                tp: m.tp,
                fp: m.fp,
                fn_: m.fn_,
                tn: m.tn,
            },
            accuracy: m.accuracy,
            si: m.si,
        })
    }
}

/// Confusion counts over the pixels where `domain` is true.
pub fn evaluate(predicted: &BinaryMask, truth: &BinaryMask, domain: &BinaryMask) -> Result<MetricsReport> {
    if !predicted.same_shape(truth) || !predicted.same_shape(domain) {
        return Err(Error::DimensionMismatch(format!(
            "predicted {}x{}, truth {}x{}, domain {}x{}",
            predicted.width(),
            predicted.height(),
            truth.width(),
            truth.height(),
            domain.width(),
            domain.height()
        )));
    }
    let mut counts = ConfusionCounts::default();
    for ((&p, &t), &d) in predicted.bits().iter().zip(truth.bits()).zip(domain.bits()) {
        if !d {
            continue;
        }
        match (p, t) {
            (true, true) => counts.tp += 1,
            (true, false) => counts.fp += 1,
            (false, true) => counts.fn_ += 1,
            (false, false) => counts.tn += 1,
        }
    }
    Ok(MetricsReport::from_counts(counts))
}
