use nalgebra::{Quaternion, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// Rigid-body transform stored as a unit quaternion plus a translation.
///
/// `a.compose(&b)` maps points expressed in `b`'s child frame into `a`'s
/// parent frame, i.e. it is the usual `a * b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(UnitQuaternion::identity(), translation)
    }

    pub fn from_rotation(rotation: UnitQuaternion<f64>) -> Self {
        Self::new(rotation, Vector3::zeros())
    }

    /// Builds a transform from a translation and extrinsic x-y-z Euler angles
    /// (roll about fixed x, then pitch about fixed y, then yaw about fixed z).
    pub fn from_xyz_rpy(xyz: [f64; 3], rpy: [f64; 3]) -> Self {
        Self::new(
            UnitQuaternion::from_euler_angles(rpy[0], rpy[1], rpy[2]),
            Vector3::new(xyz[0], xyz[1], xyz[2]),
        )
    }

    /// Pure rotation of `angle` radians about a unit `axis`.
    pub fn from_axis_angle(axis: &Unit<Vector3<f64>>, angle: f64) -> Self {
        Self::from_rotation(UnitQuaternion::from_axis_angle(axis, angle))
    }

    /// Exact bitwise identity check (used to skip no-op compositions).
    pub fn is_identity(&self) -> bool {
        let q = self.rotation.quaternion();
        q.w == 1.0 && q.i == 0.0 && q.j == 0.0 && q.k == 0.0 && self.translation == Vector3::zeros()
    }

    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        let mut rotation = self.rotation * other.rotation;
        rotation.renormalize();
        RigidTransform {
            rotation,
            translation: self.translation + self.rotation * other.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rotation = self.rotation.inverse();
        RigidTransform {
            rotation,
            translation: -(rotation * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Rotation angle in `[0, pi]`.
    pub fn rotation_angle(&self) -> f64 {
        geodesic_angle(&self.rotation, &UnitQuaternion::identity())
    }

    /// Quaternion components in `(w, x, y, z)` order.
    pub fn quaternion_wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn from_quaternion_wxyz(wxyz: [f64; 4], translation: Vector3<f64>) -> RigidTransform {
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        Self::new(UnitQuaternion::from_quaternion(q), translation)
    }

    pub fn is_finite(&self) -> bool {
        self.translation.iter().all(|v| v.is_finite())
            && self.rotation.coords.iter().all(|v| v.is_finite())
    }
}

/// Geodesic distance between two rotations, `2 acos |<qa, qb>|`, in `[0, pi]`.
///
/// Evaluated through `atan2` on the relative rotation, which keeps full
/// precision near the identity where `acos` loses about half the digits.
pub fn geodesic_angle(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    let rel = a.inverse() * b;
    let q = rel.quaternion();
    let s = q.imag().norm();
    (2.0 * s.atan2(q.w.abs())).clamp(0.0, std::f64::consts::PI)
}
