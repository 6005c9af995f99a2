//! Perona–Malik anisotropic diffusion on an 8-connected (or classic
//! 4-connected) neighborhood.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::imgio::GrayImage;

/// Edge-stopping function applied to each directional difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ConductionFn {
    /// `exp(-(g/k)^2)`
    #[default]
    Exponential,
    /// `1 / (1 + (g/k)^2)`
    Rational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Neighborhood {
    /// Up, down, left, right only.
    #[serde(rename = "4")]
    Four,
    /// Adds the four diagonals, all weighted equally.
    #[default]
    #[serde(rename = "8")]
    Eight,
}

impl Neighborhood {
    pub fn from_count(n: u32) -> Option<Self> {
        match n {
            4 => Some(Self::Four),
            8 => Some(Self::Eight),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionParams {
    pub lambda: f64,
    pub k: f64,
    pub iterations: usize,
    pub function: ConductionFn,
    pub neighborhood: Neighborhood,
}

/// Largest step weight accepted: with eight unit conductions the update
/// stays a convex combination only while `8 * lambda <= 1`.
pub const MAX_LAMBDA: f64 = 0.125;

impl Default for DiffusionParams {
    fn default() -> Self {
        Self {
            lambda: 0.125,
            k: 15.0,
            iterations: 10,
            function: ConductionFn::Exponential,
            neighborhood: Neighborhood::Eight,
        }
    }
}

impl DiffusionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= MAX_LAMBDA) {
            return Err(invalid("lambda", format!("{} not in (0, {MAX_LAMBDA}]", self.lambda)));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(invalid("k", format!("{} must be positive and finite", self.k)));
        }
        if self.iterations == 0 {
            return Err(invalid("iterations", "must be at least 1"));
        }
        Ok(())
    }
}

/// Conduction coefficient for a gradient magnitude. Equals 1 at zero and
/// decreases strictly towards 0.
#[inline]
pub fn conduction(gradient_magnitude: f64, k: f64, function: ConductionFn) -> f64 {
    let s = gradient_magnitude / k;
    match function {
        ConductionFn::Exponential => (-(s * s)).exp(),
        ConductionFn::Rational => 1.0 / (1.0 + s * s),
    }
}

pub fn diffuse(image: &GrayImage, params: &DiffusionParams) -> Result<GrayImage> {
    params.validate()?;
    let (w, h) = (image.width(), image.height());
    let mut current = image.pixels().to_vec();
    let mut next = vec![0.0; current.len()];
    for _ in 0..params.iterations {
        next.par_chunks_mut(w).enumerate().for_each(|(r, out_row)| {
            for (c, out) in out_row.iter_mut().enumerate() {
                *out = step_pixel(&current, w, h, r, c, params);
            }
        });
        std::mem::swap(&mut current, &mut next);
    }
    Ok(GrayImage::from_raw(w, h, current))
}

#[inline]
fn step_pixel(img: &[f64], w: usize, h: usize, r: usize, c: usize, p: &DiffusionParams) -> f64 {
    let center = img[r * w + c];
    // Replicated boundary: an out-of-range neighbor reads as the center.
    let at = |dr: isize, dc: isize| -> f64 {
        let (nr, nc) = (r as isize + dr, c as isize + dc);
        if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
            center
        } else {
            img[nr as usize * w + nc as usize]
        }
    };
    let (mut lo, mut hi) = (center, center);
    let mut flux = |v: f64| {
        lo = lo.min(v);
        hi = hi.max(v);
        let grad = v - center;
        conduction(grad.abs(), p.k, p.function) * grad
    };
    // Left/right partners are added together first so that a mirrored
    // image produces bit-identical sums.
    let axial = (flux(at(0, -1)) + flux(at(0, 1))) + (flux(at(-1, 0)) + flux(at(1, 0)));
    let total = match p.neighborhood {
        Neighborhood::Four => axial,
        Neighborhood::Eight => {
            let diagonal =
                (flux(at(-1, -1)) + flux(at(-1, 1))) + (flux(at(1, -1)) + flux(at(1, 1)));
            axial + diagonal
        }
    };
    // Mathematically a convex combination of the neighborhood; the clamp
    // only absorbs rounding.
    (center + p.lambda * total).clamp(lo, hi)
}
