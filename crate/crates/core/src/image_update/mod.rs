//! Depth-image update of the joint belief: coordinate-wise particle sampling
//! of the angles, a per-joint Gaussian fit, and closed-form recombination
//! with the bias.

mod cpf;
mod gaussian;
mod particles;

use thiserror::Error;

pub use cpf::{
    cpf_update, image_update_detailed, image_update_full, CpfConfig, DimensionOrder, ImageUpdate,
    LikelihoodEvaluator, PixelSubsetStrategy, TIMESTAMP_TOLERANCE,
};
pub use gaussian::{
    angle_prior_marginals, moment_match, recombine_bias, Gaussian1, MomentMatch,
    MIN_ANGLE_VARIANCE, VARIANCE_FLOOR,
};
pub use particles::{log_sum_exp, systematic_indices, ParticleSet};

use crate::depth::DepthError;
use crate::kinematics::KinematicsError;

#[derive(Debug, Error)]
pub enum ImageUpdateError {
    #[error("image timestamp {image} does not match belief timestamp {belief}")]
    TimestampMismatch { image: f64, belief: f64 },
    #[error("invalid particle filter configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite image likelihood")]
    NonFiniteLikelihood,
    #[error("angle variance {0} too small to recombine")]
    DegenerateVariance(f64),
    #[error("image is {image:?} pixels, camera is {camera:?}")]
    ImageSize {
        image: (usize, usize),
        camera: (usize, usize),
    },
    #[error("{beliefs} joint beliefs for a model with {joints} joints")]
    BeliefSize { beliefs: usize, joints: usize },
    #[error(transparent)]
    Depth(#[from] DepthError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}
