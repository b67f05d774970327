use super::model::{KinematicModel, EFFECTIVE_CAMERA_LINK};
use super::transform::RigidTransform;
use super::KinematicsError;

/// World-frame poses of every link, indexed like [`KinematicModel::links`].
#[derive(Clone, Debug)]
pub struct LinkPoses<'a> {
    model: &'a KinematicModel,
    poses: Vec<RigidTransform>,
}

impl<'a> LinkPoses<'a> {
    pub fn get(&self, link: &str) -> Option<&RigidTransform> {
        self.model.link_index(link).map(|i| &self.poses[i])
    }

    pub fn as_slice(&self) -> &[RigidTransform] {
        &self.poses
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'a str, &RigidTransform)> + '_ {
        self.model
            .links()
            .iter()
            .map(|l| l.link.as_str())
            .zip(self.poses.iter())
    }

    pub fn camera(&self) -> RigidTransform {
        self.model.camera_pose(&self.poses)
    }

    pub fn end_effector(&self) -> &RigidTransform {
        &self.poses[self.model.end_effector_index()]
    }

    pub fn into_vec(self) -> Vec<RigidTransform> {
        self.poses
    }
}

impl KinematicModel {
    pub fn check_values(&self, values: &[f64]) -> Result<(), KinematicsError> {
        if values.len() != self.joint_count() {
            return Err(KinematicsError::LengthMismatch {
                expected: self.joint_count(),
                actual: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(KinematicsError::NonFinite(self.joints()[i].name.clone()));
        }
        Ok(())
    }

    /// Composes `parent ∘ origin ∘ motion(value)` joint by joint. Identity
    /// origins and zero-valued motions are skipped, so a chain of neutral
    /// virtual joints reproduces its parent pose bit for bit.
    pub fn forward_kinematics_into(
        &self,
        values: &[f64],
        out: &mut Vec<RigidTransform>,
    ) -> Result<(), KinematicsError> {
        self.check_values(values)?;
        out.clear();
        out.resize(self.links().len(), RigidTransform::identity());
        for (j, joint) in self.joints().iter().enumerate() {
            let mut pose = out[self.joint_parent(j)];
            if !joint.origin.is_identity() {
                pose = pose.compose(&joint.origin);
            }
            if values[j] != 0.0 {
                pose = pose.compose(&joint.motion(values[j]));
            }
            out[self.joint_child(j)] = pose;
        }
        Ok(())
    }

    pub fn forward_kinematics(&self, values: &[f64]) -> Result<LinkPoses<'_>, KinematicsError> {
        let mut poses = Vec::with_capacity(self.links().len());
        self.forward_kinematics_into(values, &mut poses)?;
        Ok(LinkPoses { model: self, poses })
    }

    /// Camera pose given link poses from [`Self::forward_kinematics_into`]:
    /// the effective camera link once virtual joints are injected, the
    /// nominal mount pose otherwise.
    pub fn camera_pose(&self, poses: &[RigidTransform]) -> RigidTransform {
        if self.is_injected() {
            poses[self
                .link_index(EFFECTIVE_CAMERA_LINK)
                .expect("injected model has an effective camera link")]
        } else {
            let mount = poses[self.camera_link()];
            if self.camera_origin().is_identity() {
                mount
            } else {
                mount.compose(self.camera_origin())
            }
        }
    }

    pub fn end_effector_in_camera(&self, values: &[f64]) -> Result<RigidTransform, KinematicsError> {
        let mut poses = Vec::with_capacity(self.links().len());
        self.forward_kinematics_into(values, &mut poses)?;
        Ok(self.end_effector_in_camera_from(&poses))
    }

    pub fn end_effector_in_camera_from(&self, poses: &[RigidTransform]) -> RigidTransform {
        self.camera_pose(poses)
            .inverse()
            .compose(&poses[self.end_effector_index()])
    }
}
