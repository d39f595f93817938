//! Domain labeling of underwater images along appearance, scene and
//! geometry axes, and detection evaluation stratified by those labels.

pub mod appearance;
pub mod calibration;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod labels;
pub mod pipeline;
pub mod scene;
pub mod vision;

pub use calibration::{CalibrationProfile, MetricKey, NormEntry};
pub use dataset::{DatasetIndex, Detection, DetectionSet};
pub use error::{Error, Result};
pub use geometry::DepthMap;
pub use labels::{Category, DomainLabelRecord};
pub use pipeline::{run_job, LabelingJob, Labeler};
pub use scene::BoundingBox;
pub use vision::{GrayImage, PixelMask, RasterImage};
