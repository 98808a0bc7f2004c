use nalgebra::{Isometry3, Quaternion, Translation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoseError {
    #[error("pose component is not finite")]
    NonFinite,
    #[error("orientation quaternion has zero norm")]
    ZeroQuaternion,
}

/// Rigid transform of an element relative to its spatial parent.
///
/// Position in meters, orientation as a unit quaternion stored `(w, x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRecord", into = "PoseRecord")]
pub struct Pose {
    iso: Isometry3<f64>,
}

#[derive(Serialize, Deserialize)]
struct PoseRecord {
    position: [f64; 3],
    orientation: [f64; 4],
}

impl TryFrom<PoseRecord> for Pose {
    type Error = PoseError;

    fn try_from(r: PoseRecord) -> Result<Self, Self::Error> {
        Pose::new(r.position, r.orientation)
    }
}

impl From<Pose> for PoseRecord {
    fn from(p: Pose) -> Self {
        PoseRecord {
            position: p.position(),
            orientation: p.orientation(),
        }
    }
}

impl Default for Pose {
    fn default() -> Self {
        Pose::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            iso: Isometry3::identity(),
        }
    }

    /// Builds a pose, normalizing the quaternion.
    pub fn new(position: [f64; 3], orientation_wxyz: [f64; 4]) -> Result<Self, PoseError> {
        if position.iter().chain(orientation_wxyz.iter()).any(|v| !v.is_finite()) {
            return Err(PoseError::NonFinite);
        }
        let [w, x, y, z] = orientation_wxyz;
        let q = Quaternion::new(w, x, y, z);
        if q.norm() == 0.0 {
            return Err(PoseError::ZeroQuaternion);
        }
        Ok(Pose {
            iso: Isometry3::from_parts(
                Translation3::new(position[0], position[1], position[2]),
                UnitQuaternion::from_quaternion(q),
            ),
        })
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Pose {
            iso: Isometry3::translation(x, y, z),
        }
    }

    /// Rotation of `angle` radians about `axis`, then translation.
    pub fn from_axis_angle(position: [f64; 3], axis: [f64; 3], angle: f64) -> Self {
        let axis = Unit::new_normalize(Vector3::new(axis[0], axis[1], axis[2]));
        Pose {
            iso: Isometry3::from_parts(
                Translation3::new(position[0], position[1], position[2]),
                UnitQuaternion::from_axis_angle(&axis, angle),
            ),
        }
    }

    pub fn from_isometry(iso: Isometry3<f64>) -> Self {
        let mut p = Pose { iso };
        p.iso.rotation.renormalize();
        p
    }

    pub fn isometry(&self) -> &Isometry3<f64> {
        &self.iso
    }

    pub fn position(&self) -> [f64; 3] {
        let t = self.iso.translation.vector;
        [t.x, t.y, t.z]
    }

    /// `(w, x, y, z)`.
    pub fn orientation(&self) -> [f64; 4] {
        let q = self.iso.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    /// `self ∘ child`: maps child-frame coordinates into this pose's parent
    /// frame. The result quaternion is re-normalized.
    pub fn compose(&self, child: &Pose) -> Pose {
        Pose::from_isometry(self.iso * child.iso)
    }

    pub fn inverse(&self) -> Pose {
        Pose::from_isometry(self.iso.inverse())
    }

    pub fn quaternion_norm(&self) -> f64 {
        self.iso.rotation.quaternion().norm()
    }
}
