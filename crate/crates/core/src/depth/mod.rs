//! Depth frames, capsule ray-casting and the occlusion-aware pixel model.

mod image;
mod likelihood;
mod render;

use thiserror::Error;

pub use image::{read_frame_index, write_frame_index, DepthImage, FrameIndexEntry, FRAME_MAGIC};
pub use likelihood::{
    image_log_likelihood, pixel_density, pixel_log_likelihood, posterior_occlusion,
    CompensatedSum, PixelModel, PixelModelParams, PixelSubset, PixelTerms,
};
pub use render::{
    raster_capsule, ray_capsule, render, render_capsules, render_with_extra, scene_capsules_into,
    RenderedDepth, SparseRenderer,
};

#[derive(Debug, Error)]
pub enum DepthError {
    #[error("invalid pixel model parameters: {0}")]
    InvalidParams(String),
    #[error("invalid observed depth {0}")]
    InvalidDepth(f64),
    #[error("observed frame is {observed:?}, rendered frame is {rendered:?}")]
    DimensionMismatch {
        observed: (usize, usize),
        rendered: (usize, usize),
    },
    #[error("pixel index {index} out of range for {len} pixels")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("bad depth frame: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
