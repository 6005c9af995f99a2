//! Skull stripping and edge-preserving denoising.

mod diffusion;
mod threshold;

pub use diffusion::{conduction, diffuse, ConductionFn, DiffusionParams, Neighborhood, MAX_LAMBDA};
pub use threshold::{gray_histogram, otsu_threshold, skull_strip, HeadMaskResult};
