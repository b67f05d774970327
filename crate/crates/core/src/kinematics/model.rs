use std::collections::HashMap;

use nalgebra::{Unit, Vector3};
use serde::{Deserialize, Serialize};

use super::transform::RigidTransform;
use super::KinematicsError;

/// Tolerance on axis norms in model documents; accepted axes are renormalized.
const AXIS_NORM_TOLERANCE: f64 = 1e-6;

pub const VIRTUAL_JOINT_COUNT: usize = 6;
pub const EFFECTIVE_CAMERA_LINK: &str = "camera_effective";
const VIRTUAL_SUFFIXES: [&str; VIRTUAL_JOINT_COUNT] = ["tx", "ty", "tz", "rx", "ry", "rz"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JointKind {
    Revolute,
    Prismatic,
    VirtualRevolute,
    VirtualPrismatic,
}

impl JointKind {
    pub fn is_virtual(self) -> bool {
        matches!(self, JointKind::VirtualRevolute | JointKind::VirtualPrismatic)
    }

    pub fn is_prismatic(self) -> bool {
        matches!(self, JointKind::Prismatic | JointKind::VirtualPrismatic)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointSpec {
    pub name: String,
    pub parent: String,
    pub child: String,
    pub origin: RigidTransform,
    pub axis: Unit<Vector3<f64>>,
    pub kind: JointKind,
    pub has_encoder: bool,
}

impl JointSpec {
    /// Motion of the child frame relative to the joint origin for `value`.
    pub fn motion(&self, value: f64) -> RigidTransform {
        if self.kind.is_prismatic() {
            RigidTransform::from_translation(self.axis.into_inner() * value)
        } else {
            RigidTransform::from_axis_angle(&self.axis, value)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Capsule {
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
    pub radius: f64,
}

impl Capsule {
    pub fn new(a: Vector3<f64>, b: Vector3<f64>, radius: f64) -> Self {
        Self { a, b, radius }
    }

    pub fn sphere(center: Vector3<f64>, radius: f64) -> Self {
        Self::new(center, center, radius)
    }

    pub fn transformed(&self, t: &RigidTransform) -> Capsule {
        Capsule {
            a: t.transform_point(&self.a),
            b: t.transform_point(&self.b),
            radius: self.radius,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.radius > 0.0
            && self.radius.is_finite()
            && self.a.iter().chain(self.b.iter()).all(|v| v.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkGeometry {
    pub link: String,
    pub capsules: Vec<Capsule>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub z_min: f64,
    pub z_max: f64,
}

impl CameraIntrinsics {
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Same camera at a different resolution, keeping the field of view.
    pub fn scaled(&self, width: usize, height: usize) -> CameraIntrinsics {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        CameraIntrinsics {
            fx: self.fx * sx,
            fy: self.fy * sy,
            cx: self.cx * sx,
            cy: self.cy * sy,
            width,
            height,
            ..*self
        }
    }
}

/// Articulated chain: links with capsule geometry, joints in topological
/// order, and a pinhole depth camera mounted on one of the links.
#[derive(Clone, Debug)]
pub struct KinematicModel {
    joints: Vec<JointSpec>,
    links: Vec<LinkGeometry>,
    camera_mount_link: String,
    camera_origin: RigidTransform,
    intrinsics: CameraIntrinsics,
    end_effector_link: String,
    root_link: usize,
    link_index: HashMap<String, usize>,
    joint_parent: Vec<usize>,
    joint_child: Vec<usize>,
    camera_link: usize,
    end_effector: usize,
    virtual_offset: Option<usize>,
}

impl KinematicModel {
    /// Validates the pieces and orders the joints from the root outward.
    pub fn new(
        links: Vec<LinkGeometry>,
        joints: Vec<JointSpec>,
        camera_mount_link: String,
        camera_origin: RigidTransform,
        intrinsics: CameraIntrinsics,
        end_effector_link: Option<String>,
    ) -> Result<Self, KinematicsError> {
        let mut link_index = HashMap::new();
        for (i, l) in links.iter().enumerate() {
            if link_index.insert(l.link.clone(), i).is_some() {
                return Err(KinematicsError::DuplicateName(l.link.clone()));
            }
            if let Some(c) = l.capsules.iter().find(|c| !c.is_valid()) {
                return Err(KinematicsError::InvalidGeometry(format!(
                    "link '{}' has capsule with radius {} or non-finite endpoints",
                    l.link, c.radius
                )));
            }
        }
        let mut joint_names = HashMap::new();
        for j in &joints {
            if joint_names.insert(j.name.clone(), ()).is_some() {
                return Err(KinematicsError::DuplicateName(j.name.clone()));
            }
            for l in [&j.parent, &j.child] {
                if !link_index.contains_key(l) {
                    return Err(KinematicsError::UnknownLink(l.clone()));
                }
            }
            if (j.axis.norm() - 1.0).abs() > 1e-9 {
                return Err(KinematicsError::NonUnitAxis(j.name.clone()));
            }
            if j.kind.is_virtual() == j.has_encoder {
                return Err(KinematicsError::InvalidJoint(format!(
                    "joint '{}': virtual joints carry no encoder, physical joints do",
                    j.name
                )));
            }
        }

        // each link has at most one parent joint
        let mut parent_joint: HashMap<&str, &str> = HashMap::new();
        for j in &joints {
            if let Some(prev) = parent_joint.insert(j.child.as_str(), j.name.as_str()) {
                return Err(KinematicsError::NotATree(format!(
                    "link '{}' is the child of both '{}' and '{}'",
                    j.child, prev, j.name
                )));
            }
        }
        let roots: Vec<&LinkGeometry> = links
            .iter()
            .filter(|l| !parent_joint.contains_key(l.link.as_str()))
            .collect();
        if roots.is_empty() {
            return Err(KinematicsError::Cycle);
        }
        if roots.len() > 1 {
            return Err(KinematicsError::NotATree(format!(
                "multiple root links: {}",
                roots.iter().map(|l| l.link.as_str()).collect::<Vec<_>>().join(", ")
            )));
        }
        let root_link = link_index[&roots[0].link];

        // Kahn-style ordering that keeps document order among ready joints.
        let mut reached = vec![false; links.len()];
        reached[root_link] = true;
        let mut placed = vec![false; joints.len()];
        let mut ordered = Vec::with_capacity(joints.len());
        loop {
            let mut progress = false;
            for (i, j) in joints.iter().enumerate() {
                if !placed[i] && reached[link_index[&j.parent]] {
                    placed[i] = true;
                    reached[link_index[&j.child]] = true;
                    ordered.push(j.clone());
                    progress = true;
                }
            }
            if !progress {
                break;
            }
        }
        if ordered.len() != joints.len() {
            return Err(KinematicsError::Cycle);
        }

        let camera_link = *link_index
            .get(&camera_mount_link)
            .ok_or_else(|| KinematicsError::MissingCameraLink(camera_mount_link.clone()))?;
        let end_effector_link = match end_effector_link {
            Some(l) => l,
            None => ordered
                .iter()
                .rev()
                .find(|j| !j.kind.is_virtual())
                .map(|j| j.child.clone())
                .unwrap_or_else(|| links[root_link].link.clone()),
        };
        let end_effector = *link_index
            .get(&end_effector_link)
            .ok_or_else(|| KinematicsError::UnknownLink(end_effector_link.clone()))?;
        if !(intrinsics.fx > 0.0
            && intrinsics.fy > 0.0
            && intrinsics.width > 0
            && intrinsics.height > 0
            && intrinsics.z_min >= 0.0
            && intrinsics.z_min < intrinsics.z_max)
        {
            return Err(KinematicsError::InvalidCamera(format!("{intrinsics:?}")));
        }

        let joint_parent = ordered.iter().map(|j| link_index[&j.parent]).collect();
        let joint_child = ordered.iter().map(|j| link_index[&j.child]).collect();
        let virtual_offset = ordered.iter().position(|j| j.kind.is_virtual());
        if let Some(first) = virtual_offset {
            let virtual_count = ordered.iter().filter(|j| j.kind.is_virtual()).count();
            if virtual_count != VIRTUAL_JOINT_COUNT
                || first + VIRTUAL_JOINT_COUNT != ordered.len()
                || !link_index.contains_key(EFFECTIVE_CAMERA_LINK)
            {
                return Err(KinematicsError::InvalidJoint(
                    "virtual joints must be the six injected camera-offset joints".into(),
                ));
            }
        }

        Ok(Self {
            joints: ordered,
            links,
            camera_mount_link,
            camera_origin,
            intrinsics,
            end_effector_link,
            root_link,
            link_index,
            joint_parent,
            joint_child,
            camera_link,
            end_effector,
            virtual_offset,
        })
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.joints
    }

    pub fn links(&self) -> &[LinkGeometry] {
        &self.links
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    pub fn physical_joint_count(&self) -> usize {
        self.joints.iter().filter(|j| !j.kind.is_virtual()).count()
    }

    pub fn encoder_joint_indices(&self) -> Vec<usize> {
        (0..self.joints.len()).filter(|&i| self.joints[i].has_encoder).collect()
    }

    pub fn is_injected(&self) -> bool {
        self.virtual_offset.is_some()
    }

    /// Index of the first virtual joint, when injected.
    pub fn virtual_joint_offset(&self) -> Option<usize> {
        self.virtual_offset
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intrinsics
    }

    pub fn camera_mount_link(&self) -> &str {
        &self.camera_mount_link
    }

    pub fn camera_origin(&self) -> &RigidTransform {
        &self.camera_origin
    }

    pub fn end_effector_link(&self) -> &str {
        &self.end_effector_link
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.link_index.get(name).copied()
    }

    pub fn root_link(&self) -> usize {
        self.root_link
    }

    pub(crate) fn joint_parent(&self, j: usize) -> usize {
        self.joint_parent[j]
    }

    pub(crate) fn joint_child(&self, j: usize) -> usize {
        self.joint_child[j]
    }

    pub(crate) fn camera_link(&self) -> usize {
        self.camera_link
    }

    pub(crate) fn end_effector_index(&self) -> usize {
        self.end_effector
    }

    /// Same model with a different camera resolution.
    pub fn with_intrinsics(&self, intrinsics: CameraIntrinsics) -> KinematicModel {
        KinematicModel {
            intrinsics,
            ..self.clone()
        }
    }

    /// Inserts the six camera-offset joints (tx, ty, tz, rx, ry, rz) between
    /// the camera mount and a new effective-camera link. At zero they leave
    /// the camera pose untouched.
    pub fn inject_virtual_joints(&self) -> Result<KinematicModel, KinematicsError> {
        if self.is_injected() {
            return Err(KinematicsError::AlreadyInjected);
        }
        let mut links = self.links.clone();
        let mut joints = self.joints.clone();
        let mut parent = self.camera_mount_link.clone();
        for (i, suffix) in VIRTUAL_SUFFIXES.iter().enumerate() {
            let child = if i + 1 == VIRTUAL_JOINT_COUNT {
                EFFECTIVE_CAMERA_LINK.to_string()
            } else {
                format!("camera_virtual_{suffix}")
            };
            if self.link_index.contains_key(&child) {
                return Err(KinematicsError::DuplicateName(child));
            }
            links.push(LinkGeometry {
                link: child.clone(),
                capsules: Vec::new(),
            });
            let axis = match i % 3 {
                0 => Vector3::x_axis(),
                1 => Vector3::y_axis(),
                _ => Vector3::z_axis(),
            };
            joints.push(JointSpec {
                name: format!("camera_offset_{suffix}"),
                parent: parent.clone(),
                child: child.clone(),
                origin: if i == 0 {
                    self.camera_origin
                } else {
                    RigidTransform::identity()
                },
                axis,
                kind: if i < 3 {
                    JointKind::VirtualPrismatic
                } else {
                    JointKind::VirtualRevolute
                },
                has_encoder: false,
            });
            parent = child;
        }
        KinematicModel::new(
            links,
            joints,
            self.camera_mount_link.clone(),
            self.camera_origin,
            self.intrinsics,
            Some(self.end_effector_link.clone()),
        )
    }

    /// Joint indices whose motion moves `link` (its ancestors in the tree).
    pub fn ancestor_joints(&self, link: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut current = link;
        while current != self.root_link {
            let j = (0..self.joints.len())
                .find(|&j| self.joint_child[j] == current)
                .expect("non-root link has a parent joint");
            out.push(j);
            current = self.joint_parent[j];
        }
        out.reverse();
        out
    }
}

// ---- document format -------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub links: Vec<LinkDoc>,
    pub joints: Vec<JointDoc>,
    pub camera: CameraDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_effector: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkDoc {
    pub name: String,
    #[serde(default)]
    pub capsules: Vec<CapsuleDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapsuleDoc {
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub r: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OriginDoc {
    #[serde(default)]
    pub xyz: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointDoc {
    pub name: String,
    pub parent: String,
    pub child: String,
    #[serde(default)]
    pub origin: Option<OriginDoc>,
    pub axis: [f64; 3],
    pub kind: JointKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraDoc {
    pub mount_link: String,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub z_min: f64,
    pub z_max: f64,
    /// Camera frame relative to the mount link; identity when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<OriginDoc>,
}

/// Parses a JSON model document. Virtual joints are not allowed in documents;
/// use [`KinematicModel::inject_virtual_joints`] afterwards.
pub fn parse_model(text: &str) -> Result<KinematicModel, KinematicsError> {
    let doc: ModelDocument =
        serde_json::from_str(text).map_err(|e| KinematicsError::Json(e.to_string()))?;
    model_from_document(doc)
}

pub fn model_from_document(doc: ModelDocument) -> Result<KinematicModel, KinematicsError> {
    let links = doc
        .links
        .into_iter()
        .map(|l| LinkGeometry {
            link: l.name,
            capsules: l
                .capsules
                .into_iter()
                .map(|c| Capsule::new(Vector3::from(c.a), Vector3::from(c.b), c.r))
                .collect(),
        })
        .collect();
    let mut joints = Vec::with_capacity(doc.joints.len());
    for j in doc.joints {
        if j.kind.is_virtual() {
            return Err(KinematicsError::InvalidJoint(format!(
                "joint '{}': virtual joints are injected, not declared",
                j.name
            )));
        }
        let axis = Vector3::from(j.axis);
        let norm = axis.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > AXIS_NORM_TOLERANCE {
            return Err(KinematicsError::NonUnitAxis(j.name));
        }
        let origin = j
            .origin
            .map(|o| RigidTransform::from_xyz_rpy(o.xyz, o.rpy))
            .unwrap_or_default();
        joints.push(JointSpec {
            name: j.name,
            parent: j.parent,
            child: j.child,
            origin,
            axis: Unit::new_normalize(axis),
            kind: j.kind,
            has_encoder: true,
        });
    }
    let c = doc.camera;
    let camera_origin = c
        .origin
        .map(|o| RigidTransform::from_xyz_rpy(o.xyz, o.rpy))
        .unwrap_or_default();
    KinematicModel::new(
        links,
        joints,
        c.mount_link,
        camera_origin,
        CameraIntrinsics {
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            width: c.width,
            height: c.height,
            z_min: c.z_min,
            z_max: c.z_max,
        },
        doc.end_effector,
    )
}
