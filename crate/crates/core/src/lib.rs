//! Unsupervised segmentation of asymmetric anomalies in 2-D grayscale
//! head scans.
//!
//! The pipeline strips everything outside the head with an Otsu threshold,
//! smooths with 8-connected Perona–Malik diffusion, finds the most
//! asymmetric rectangle about the left-right symmetry axis, trains a
//! one-class SVM on the center of that rectangle, and classifies every head
//! pixel with it.

pub mod error;
pub mod fbb;
pub mod imgio;
pub mod morphology;
pub mod ocsvm;
pub mod phantom;
pub mod pipeline;
pub mod preprocess;

pub use error::{Error, Result};
pub use fbb::{BoundingBox, FbbParams, FbbResult, Histogram, Side};
pub use imgio::{BinaryMask, GrayImage};
pub use ocsvm::{FeatureVector, Label, OcsvmModel, TrainConfig};
pub use phantom::{Phantom, PhantomSpec};
pub use pipeline::{ConfusionCounts, MetricsReport, PipelineConfig, SegmentOutput};
pub use preprocess::{ConductionFn, DiffusionParams, HeadMaskResult, Neighborhood};
