use std::ops::Mul;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Unit quaternion representing a rotation, stored as `(w, x, y, z)`.
///
/// `q` and `-q` encode the same rotation; [`Quaternion::same_rotation`] and
/// [`Quaternion::angle_to`] treat them as equal, while `PartialEq` compares
/// components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 4]", try_from = "[f64; 4]")]
pub struct Quaternion {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn identity() -> Self {
        Self::IDENTITY
    }

    /// Builds a rotation from raw components, normalizing them.
    pub fn from_wxyz(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || norm < 1e-300 {
            return Err(Error::Invalid(format!(
                "quaternion ({w}, {x}, {y}, {z}) cannot be normalized"
            )));
        }
        Ok(Self {
            w: w / norm,
            x: x / norm,
            y: y / norm,
            z: z / norm,
        })
    }

    /// Rotation of `angle` radians about `axis` (right-handed).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::IDENTITY;
        }
        let a = axis / n;
        let (s, c) = (0.5 * angle).sin_cos();
        Self::from_wxyz(c, a.x * s, a.y * s, a.z * s).unwrap_or(Self::IDENTITY)
    }

    /// Rotation vector (axis times angle) to quaternion.
    pub fn from_rotation_vector(v: &Vec3) -> Self {
        Self::from_axis_angle(v, v.norm())
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn negated(&self) -> Self {
        Self {
            w: -self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Representative with nonnegative scalar part.
    pub fn canonical(&self) -> Self {
        if self.w < 0.0 {
            self.negated()
        } else {
            *self
        }
    }

    pub fn inverse(&self) -> Self {
        Self {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        // v' = v + 2w (u x v) + 2 u x (u x v)
        let u = Vec3::new(self.x, self.y, self.z);
        let uv = u.cross(v);
        let uuv = u.cross(&uv);
        v + (uv * self.w + uuv) * 2.0
    }

    /// Geodesic distance between the two rotations, in radians, in `[0, pi]`.
    pub fn angle_to(&self, other: &Self) -> f64 {
        let d = self.inverse() * *other;
        let v = (d.x * d.x + d.y * d.y + d.z * d.z).sqrt();
        2.0 * v.atan2(d.w.abs())
    }

    pub fn same_rotation(&self, other: &Self, tol: f64) -> bool {
        self.angle_to(other) <= tol
    }

    pub fn to_rotation_matrix(&self) -> nalgebra::Matrix3<f64> {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        nalgebra::Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Re-normalizes after accumulated floating point drift.
    pub fn renormalized(&self) -> Self {
        Self::from_wxyz(self.w, self.x, self.y, self.z).unwrap_or(Self::IDENTITY)
    }
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    /// Hamilton product; `(a * b).rotate(v) == a.rotate(&b.rotate(v))`.
    fn mul(self, b: Quaternion) -> Quaternion {
        let a = self;
        Quaternion {
            w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            x: a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            y: a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            z: a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        }
    }
}

impl From<Quaternion> for [f64; 4] {
    fn from(q: Quaternion) -> Self {
        q.to_array()
    }
}

impl TryFrom<[f64; 4]> for Quaternion {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        Quaternion::from_wxyz(v[0], v[1], v[2], v[3])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn constructor_normalizes() {
        let q = Quaternion::from_wxyz(1.0, 2.0, 3.0, 4.0).unwrap();
        assert!((q.norm() - 1.0).abs() < 1e-12);
        assert!(Quaternion::from_wxyz(0.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn rotate_about_z() {
        let q = Quaternion::from_axis_angle(&Vec3::z(), FRAC_PI_2);
        let v = q.rotate(&Vec3::x());
        assert!((v - Vec3::y()).norm() < 1e-12);
        let m = q.to_rotation_matrix() * Vec3::x();
        assert!((m - v).norm() < 1e-12);
    }

    #[test]
    fn negation_is_same_rotation() {
        let q = Quaternion::from_axis_angle(&Vec3::new(1.0, -2.0, 0.5), 2.3);
        assert!(q.same_rotation(&q.negated(), 1e-12));
        assert!(q.angle_to(&q.negated()) < 1e-12);
        assert_ne!(q, q.negated());
    }

    #[test]
    fn angle_to_is_precise_near_zero() {
        let q = Quaternion::from_axis_angle(&Vec3::x(), 0.3);
        let r = q * Quaternion::from_axis_angle(&Vec3::y(), 1e-11);
        let a = q.angle_to(&r);
        assert!((a - 1e-11).abs() < 1e-15, "{a}");
    }

    #[test]
    fn product_composes_rotations() {
        let a = Quaternion::from_axis_angle(&Vec3::new(0.3, 1.0, -0.2), 0.7);
        let b = Quaternion::from_axis_angle(&Vec3::new(-1.0, 0.1, 0.4), 1.9);
        let v = Vec3::new(0.2, -0.7, 1.1);
        let lhs = (a * b).rotate(&v);
        let rhs = a.rotate(&b.rotate(&v));
        assert!((lhs - rhs).norm() < 1e-12);
        assert!((a * a.inverse()).same_rotation(&Quaternion::IDENTITY, 1e-12));
    }
}
