//! Progressive, bandwidth-metered region-of-interest recognition.
//!
//! A provider holds full-resolution images and serves downsampled overviews
//! and cropped regions over a framed TCP protocol while metering every pixel
//! it sends. Cascades on the consumer side walk from a small overview down to
//! a native-resolution plate crop and read it with a template OCR. The
//! geometry layer is generic over `f32`/`f64`; the rest of the crate works in
//! `f64` through the aliases below.

pub mod baseline;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod orchestrator;
pub mod provider;
pub mod raster;
pub mod scalar;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Real;

/// Axis-aligned box in `f64` pixel coordinates.
pub type BBox = geometry::BBox<f64>;
/// Offset/scale mapping between a child image and its parent.
pub type Frame = geometry::Frame<f64>;
pub type Detection = geometry::Detection<f64>;
pub type SubEstimate = geometry::SubEstimate<f64>;
pub type MarginBox = geometry::MarginBox<f64>;
