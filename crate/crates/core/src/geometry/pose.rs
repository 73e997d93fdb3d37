use serde::{Deserialize, Serialize};

use super::quat::{Quaternion, Vec3};

/// Camera-to-world rigid transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Quaternion,
    #[serde(with = "vec3_serde")]
    pub translation: Vec3,
}

impl Pose {
    pub fn new(rotation: Quaternion, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Quaternion::IDENTITY, Vec3::zeros())
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self::new(Quaternion::IDENTITY, t)
    }

    /// `self ∘ other`: first apply `other`, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: (self.rotation * other.rotation).renormalized(),
            translation: self.rotation.rotate(&other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.rotation.inverse();
        Pose {
            rotation: inv,
            translation: -inv.rotate(&self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation.rotate(v)
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

pub(crate) mod vec3_serde {
    use super::Vec3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vec3, s: S) -> Result<S::Ok, S::Error> {
        [v.x, v.y, v.z].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec3, D::Error> {
        let a = <[f64; 3]>::deserialize(d)?;
        Ok(Vec3::new(a[0], a[1], a[2]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compose_with_inverse_is_identity() {
        let p = Pose::new(
            Quaternion::from_axis_angle(&Vec3::new(0.2, 0.9, -0.4), 1.234),
            Vec3::new(0.5, -3.0, 2.0),
        );
        let id = p.compose(&p.inverse());
        assert!(id.rotation.same_rotation(&Quaternion::IDENTITY, 1e-9));
        assert!(id.translation.norm() < 1e-9);
        let id = p.inverse().compose(&p);
        assert!(id.translation.norm() < 1e-9);
    }

    #[test]
    fn transform_point_round_trip() {
        let p = Pose::new(
            Quaternion::from_axis_angle(&Vec3::z(), 0.5),
            Vec3::new(1.0, 2.0, 3.0),
        );
        let x = Vec3::new(-0.3, 0.4, 7.0);
        let y = p.inverse().transform_point(&p.transform_point(&x));
        assert!((x - y).norm() < 1e-12);
    }
}
