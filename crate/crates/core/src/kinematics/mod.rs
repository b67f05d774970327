//! Articulated chain model, forward kinematics and camera-offset joints.

mod fk;
mod model;
mod transform;

use thiserror::Error;

pub use fk::LinkPoses;
pub use model::{
    model_from_document, parse_model, CameraDoc, CameraIntrinsics, Capsule, CapsuleDoc, JointDoc,
    JointKind, JointSpec, KinematicModel, LinkDoc, LinkGeometry, ModelDocument, OriginDoc,
    EFFECTIVE_CAMERA_LINK, VIRTUAL_JOINT_COUNT,
};
pub use transform::{geodesic_angle, RigidTransform};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("malformed model document: {0}")]
    Json(String),
    #[error("cycle in joint graph")]
    Cycle,
    #[error("joint graph is not a tree: {0}")]
    NotATree(String),
    #[error("duplicate name '{0}'")]
    DuplicateName(String),
    #[error("non-unit axis on joint '{0}'")]
    NonUnitAxis(String),
    #[error("missing camera link '{0}'")]
    MissingCameraLink(String),
    #[error("unknown link '{0}'")]
    UnknownLink(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid joint: {0}")]
    InvalidJoint(String),
    #[error("invalid camera intrinsics: {0}")]
    InvalidCamera(String),
    #[error("virtual joints already injected")]
    AlreadyInjected,
    #[error("joint vector has {actual} values, model has {expected} joints")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("non-finite value for joint '{0}'")]
    NonFinite(String),
}

/// Joint values with a timestamp (radians for revolute, meters for prismatic).
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct JointVector {
    pub values: Vec<f64>,
    pub timestamp: f64,
}

impl JointVector {
    pub fn new(values: Vec<f64>, timestamp: f64) -> Self {
        Self { values, timestamp }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn forward_kinematics<'a>(
    model: &'a KinematicModel,
    angles: &JointVector,
) -> Result<LinkPoses<'a>, KinematicsError> {
    model.forward_kinematics(&angles.values)
}

pub fn end_effector_in_camera(
    model: &KinematicModel,
    angles: &JointVector,
) -> Result<RigidTransform, KinematicsError> {
    model.end_effector_in_camera(&angles.values)
}
