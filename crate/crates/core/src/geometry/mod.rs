//! Rigid poses, rig calibration and camera ray models.

mod camera;
mod pose;
mod quat;
mod rig;
mod views;

pub use camera::{
    direction_angles, equirect_ray, perspective_ray, EquirectCamera, PerspectiveCamera, Ray,
};
pub use pose::Pose;
pub use quat::{Quaternion, Vec3};
pub use rig::{
    apply_relative_pose, average_quaternions, average_rotations, average_translations,
    estimate_relative_pose, rig_residuals, RelativePose,
};
pub use views::{default_view_layout, extract_perspective_views, view_pose, ViewAngles};
