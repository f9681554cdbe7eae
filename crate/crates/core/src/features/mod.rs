//! Per-IPU feature extraction, from segmentation to standardized vectors.

pub mod bong;
pub mod embedding;
pub mod lexicon;
pub mod patterns;
pub mod pipeline;
pub mod resources;
pub mod segment;
pub mod standardize;
pub mod text;

pub use pipeline::{FeatureBlock, FeatureConfig, FeatureLevel, FeatureResources, FeatureSchema, FittedPipeline};
pub use segment::{segment_into_ipus, Ipu};
