//! Relative pose between the two rigidly mounted cameras.
//!
//! Pairs are `(target, reference)`: the estimated offset maps a reference
//! (well-exposed) pose onto the target (fast-exposed) pose. Both the rotation
//! and the translation offsets live in the world frame.

use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use serde::{Deserialize, Serialize};

use super::pose::{vec3_serde, Pose};
use super::quat::{Quaternion, Vec3};
use crate::error::{Error, Result};

/// Relative eigenvalue gap below which the dominant eigenvector is ambiguous.
const EIGEN_GAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativePose {
    pub delta_rotation: Quaternion,
    #[serde(with = "vec3_serde")]
    pub delta_translation: Vec3,
}

impl RelativePose {
    pub fn identity() -> Self {
        Self {
            delta_rotation: Quaternion::IDENTITY,
            delta_translation: Vec3::zeros(),
        }
    }
}

/// Mean of `t_target - t_reference` over all pairs.
pub fn average_translations(pairs: &[(Pose, Pose)]) -> Result<Vec3> {
    if pairs.is_empty() {
        return Err(Error::NoPosePairs);
    }
    let sum = pairs.iter().fold(Vec3::zeros(), |acc, (a, b)| {
        acc + (a.translation - b.translation)
    });
    Ok(sum / pairs.len() as f64)
}

/// Average of the relative rotations `q_target * q_reference^-1`.
///
/// The average is the dominant eigenvector of `M = sum q q^T` (each `q`
/// sign-aligned with the first before accumulation). Fails when the two
/// largest eigenvalues coincide, which happens for antipodal sets.
pub fn average_quaternions(pairs: &[(Quaternion, Quaternion)]) -> Result<Quaternion> {
    let relative: Vec<Quaternion> = pairs.iter().map(|(a, b)| *a * b.inverse()).collect();
    average_rotations(&relative)
}

/// Eigenvector average of a set of rotations.
pub fn average_rotations(rotations: &[Quaternion]) -> Result<Quaternion> {
    let first = *rotations.first().ok_or(Error::NoPosePairs)?;
    let mut m = Matrix4::<f64>::zeros();
    for q in rotations {
        let q = if q.dot(&first) < 0.0 { q.negated() } else { *q };
        let v = Vector4::from(q.to_array());
        m += v * v.transpose();
    }
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let (top, second) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]);
    if top - second <= EIGEN_GAP_TOL * top.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateRotations);
    }
    let v = eig.eigenvectors.column(order[0]);
    Ok(Quaternion::from_wxyz(v[0], v[1], v[2], v[3])?.canonical())
}

/// Estimates the rig offset from synchronized `(target, reference)` pose pairs.
pub fn estimate_relative_pose(pairs: &[(Pose, Pose)]) -> Result<RelativePose> {
    let delta_translation = average_translations(pairs)?;
    let rotations: Vec<(Quaternion, Quaternion)> = pairs
        .iter()
        .map(|(a, b)| (a.rotation, b.rotation))
        .collect();
    let delta_rotation = average_quaternions(&rotations)?;
    Ok(RelativePose {
        delta_rotation,
        delta_translation,
    })
}

/// Pose of the target camera given the reference pose and the rig offset.
pub fn apply_relative_pose(reference: &Pose, rel: &RelativePose) -> Pose {
    Pose {
        rotation: (rel.delta_rotation * reference.rotation).renormalized(),
        translation: reference.translation + rel.delta_translation,
    }
}

/// Per-pair residuals of an estimated offset: (rotation radians, translation).
pub fn rig_residuals(pairs: &[(Pose, Pose)], rel: &RelativePose) -> Vec<(f64, f64)> {
    pairs
        .iter()
        .map(|(target, reference)| {
            let predicted = apply_relative_pose(reference, rel);
            (
                predicted.rotation.angle_to(&target.rotation),
                (predicted.translation - target.translation).norm(),
            )
        })
        .collect()
}
