//! Synthetic head phantoms with exact ground truth.
//!
//! Noise is reproducible across platforms: a ChaCha8 stream seeded with
//! `seed` supplies 53-bit uniforms, and the Box–Muller transform turns each
//! consecutive pair into two standard normals (cosine branch first), used
//! in raster order.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgio::{BinaryMask, GrayImage};

pub const BACKGROUND: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ellipse {
    /// `[row, col]`
    pub center: [f64; 2],
    /// `[row semi-axis, col semi-axis]`
    pub semi_axes: [f64; 2],
    pub intensity: f64,
}

impl Ellipse {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        let dr = (row as f64 - self.center[0]) / self.semi_axes[0];
        let dc = (col as f64 - self.center[1]) / self.semi_axes[1];
        dr * dr + dc * dc <= 1.0
    }

    fn rasterize(&self, width: usize, height: usize) -> BinaryMask {
        BinaryMask::from_fn(width, height, |r, c| self.contains(r, c)).expect("positive dimensions")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    pub head: Ellipse,
    /// Right-hand ventricle; its partner is mirrored about the head's
    /// center column.
    pub ventricle: Ellipse,
    #[serde(default)]
    pub lesion: Option<Ellipse>,
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl PhantomSpec {
    /// 128x128 head, lesion filling rows 40-60 / cols 70-90, sigma 8.
    pub fn standard(seed: u64) -> Self {
        Self {
            lesion: Some(Ellipse {
                center: [50.0, 80.0],
                semi_axes: [10.0, 10.0],
                intensity: 200.0,
            }),
            seed,
            ..Self::symmetric(seed)
        }
    }

    /// The standard phantom without a lesion.
    pub fn symmetric(seed: u64) -> Self {
        Self {
            width: 128,
            height: 128,
            head: Ellipse {
                center: [63.5, 63.5],
                semi_axes: [50.0, 40.0],
                intensity: 120.0,
            },
            ventricle: Ellipse {
                center: [72.0, 73.5],
                semi_axes: [10.0, 4.0],
                intensity: 60.0,
            },
            lesion: None,
            noise_sigma: 8.0,
            seed,
        }
    }

    /// Standard head with a seeded elliptical lesion on a random side; every
    /// lesion covers at least 1% of the head.
    pub fn random_lesion(seed: u64) -> Self {
        let mut spec = Self::symmetric(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1e51_0000_0000);
        let head_area = spec.head.rasterize(spec.width, spec.height).count() as f64;
        loop {
            let semi = [rng.random_range(6.0..12.0), rng.random_range(6.0..12.0)];
            let offset = rng.random_range(semi[1] + 2.0..36.0);
            let col = if rng.random_bool(0.5) { 63.5 + offset } else { 63.5 - offset };
            let row: f64 = rng.random_range(20.0..108.0);
            let lesion = Ellipse {
                center: [row.round(), col],
                semi_axes: semi,
                intensity: 200.0,
            };
            spec.lesion = Some(lesion);
            let area = lesion.rasterize(spec.width, spec.height).count() as f64;
            if area >= 0.01 * head_area && spec.validate().is_ok() {
                return spec;
            }
        }
    }

    fn mirrored_ventricle(&self) -> BinaryMask {
        let right = self.ventricle.rasterize(self.width, self.height);
        // Reflect about the head center column: c -> 2*cc - c.
        let twice = (2.0 * self.head.center[1]).round() as isize;
        let (w, h) = (self.width, self.height);
        BinaryMask::from_fn(w, h, |r, c| {
            let m = twice - c as isize;
            right.get(r, c) || (m >= 0 && (m as usize) < w && right.get(r, m as usize))
        })
        .expect("positive dimensions")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason: String| Err(Error::InvalidPhantom { field, reason });
        if self.width == 0 || self.height == 0 {
            return bad("width", "dimensions must be positive".into());
        }
        for (field, e) in [("head", &self.head), ("ventricle", &self.ventricle)]
            .into_iter()
            .chain(self.lesion.as_ref().map(|l| ("lesion", l)))
        {
            if e.semi_axes.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
                return bad(field, "semi-axes must be positive".into());
            }
            if !(0.0..=255.0).contains(&e.intensity) {
                return bad(field, format!("intensity {} outside [0, 255]", e.intensity));
            }
        }
        let [cr, cc] = self.head.center;
        let [ar, ac] = self.head.semi_axes;
        if cr - ar < 0.0 || cc - ac < 0.0 || cr + ar > (self.height - 1) as f64 || cc + ac > (self.width - 1) as f64 {
            return bad("head", "ellipse does not fit inside the raster".into());
        }
        if (2.0 * cc).fract() != 0.0 {
            return bad("head", "center column must be a multiple of 0.5".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma", format!("{} must be >= 0", self.noise_sigma));
        }
        let head = self.head.rasterize(self.width, self.height);
        let ventricles = self.mirrored_ventricle();
        if ventricles.bits().iter().zip(head.bits()).any(|(&v, &h)| v && !h) {
            return bad("ventricle", "must lie inside the head".into());
        }
        if let Some(lesion) = &self.lesion {
            let mask = lesion.rasterize(self.width, self.height);
            if mask.is_empty() {
                return bad("lesion", "covers no pixel".into());
            }
            if mask.bits().iter().zip(head.bits()).any(|(&l, &h)| l && !h) {
                return bad("lesion", "must lie inside the head".into());
            }
            let bbox = mask.bounding_box().expect("nonempty");
            let left = (bbox.col_max as f64) < cc;
            let right = (bbox.col_min as f64) > cc;
            if !(left || right) {
                return bad("lesion", "crosses the mirror axis".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Phantom {
    pub image: GrayImage,
    pub head_truth: BinaryMask,
    pub lesion_truth: BinaryMask,
}

/// Standard normals from a uniform stream (Box–Muller, cosine branch first).
pub struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

pub fn generate(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let head = spec.head.rasterize(w, h);
    let ventricles = spec.mirrored_ventricle();
    let lesion = match &spec.lesion {
        Some(l) => l.rasterize(w, h),
        None => BinaryMask::empty(w, h)?,
    };
    let mut pixels: Vec<f64> = (0..w * h)
        .map(|i| {
            if lesion.bits()[i] {
                spec.lesion.expect("lesion present").intensity
            } else if ventricles.bits()[i] {
                spec.ventricle.intensity
            } else if head.bits()[i] {
                spec.head.intensity
            } else {
                BACKGROUND
            }
        })
        .collect();
    if spec.noise_sigma > 0.0 {
        let mut noise = GaussianStream::new(spec.seed);
        for p in &mut pixels {
            *p = (*p + spec.noise_sigma * noise.next_normal()).clamp(0.0, 255.0);
        }
    }
    Ok(Phantom {
        image: GrayImage::new(w, h, pixels)?,
        head_truth: head,
        lesion_truth: lesion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_symmetric_is_mirror_exact() {
        let spec = PhantomSpec {
            noise_sigma: 0.0,
            ..PhantomSpec::symmetric(0)
        };
        let p = generate(&spec).unwrap();
        assert_eq!(p.image.mirror_columns(), p.image);
        assert!(p.lesion_truth.is_empty());
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate(&PhantomSpec::standard(3)).unwrap();
        let b = generate(&PhantomSpec::standard(3)).unwrap();
        let c = generate(&PhantomSpec::standard(4)).unwrap();
        assert_eq!(a.image, b.image);
        assert_ne!(a.image, c.image);
        assert_eq!(a.lesion_truth, c.lesion_truth);
        assert_eq!(a.head_truth, c.head_truth);
    }

    #[test]
    fn lesion_area_matches_point_scan() {
        let spec = PhantomSpec::standard(1);
        let p = generate(&spec).unwrap();
        // Independent scan using the implicit ellipse inequality in integer-free form.
        let mut count = 0;
        for r in 0..128i64 {
            for c in 0..128i64 {
                let dr = r - 50;
                let dc = c - 80;
                if dr * dr + dc * dc <= 100 {
                    count += 1;
                }
            }
        }
        assert_eq!(p.lesion_truth.count(), count);
        assert_eq!(p.lesion_truth.bounding_box().unwrap(), crate::fbb::BoundingBox::new(40, 60, 70, 90).unwrap());
    }

    #[test]
    fn truth_nesting_and_noise_independence() {
        for seed in 0..10 {
            let spec = PhantomSpec::random_lesion(seed);
            let p = generate(&spec).unwrap();
            let quiet = generate(&PhantomSpec { noise_sigma: 0.0, seed: 99, ..spec.clone() }).unwrap();
            assert_eq!(p.lesion_truth, quiet.lesion_truth);
            assert!(p.lesion_truth.and(&p.head_truth) == p.lesion_truth);
            assert!(p.lesion_truth.count() as f64 >= 0.01 * p.head_truth.count() as f64);
        }
    }

    #[test]
    fn invalid_specs_name_the_field() {
        let mut spec = PhantomSpec::standard(0);
        spec.lesion.as_mut().unwrap().center = [50.0, 64.0];
        assert!(matches!(generate(&spec), Err(Error::InvalidPhantom { field: "lesion", .. })));
        let mut spec = PhantomSpec::standard(0);
        spec.head.semi_axes = [70.0, 40.0];
        assert!(matches!(generate(&spec), Err(Error::InvalidPhantom { field: "head", .. })));
        let mut spec = PhantomSpec::standard(0);
        spec.noise_sigma = -1.0;
        assert!(matches!(generate(&spec), Err(Error::InvalidPhantom { field: "noise_sigma", .. })));
    }

    #[test]
    fn gaussian_stream_moments() {
        let mut g = GaussianStream::new(7);
        let xs: Vec<f64> = (0..20000).map(|_| g.next_normal()).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.03 && (var - 1.0).abs() < 0.05);
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = PhantomSpec::standard(11);
        let text = serde_json::to_string(&spec).unwrap();
        let back: PhantomSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        assert!(serde_json::from_str::<PhantomSpec>(&text.replace("\"seed\"", "\"sed\"")).is_err());
    }
}
