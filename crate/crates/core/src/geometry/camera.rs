//! Camera ray models.
//!
//! Both models share one local frame: +x forward (panorama centre), +y to the
//! right as `u` grows, +z up. Pixel `(u, v)` has its centre at `(u + 0.5, v + 0.5)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::pose::Pose;
use super::quat::Vec3;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

/// Full 360x180 degree panorama.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquirectCamera {
    width: usize,
    height: usize,
    pub pose: Pose,
}

impl EquirectCamera {
    pub fn new(width: usize, height: usize, pose: Pose) -> Result<Self> {
        if height == 0 || width != 2 * height {
            return Err(Error::InvalidCamera(format!(
                "equirectangular camera needs width == 2 * height, got {width}x{height}"
            )));
        }
        Ok(Self {
            width,
            height,
            pose,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Direction in the camera frame for continuous pixel coordinates.
    pub fn local_direction(&self, u: f64, v: f64) -> Vec3 {
        let phi = 2.0 * PI * ((u + 0.5) / self.width as f64) - PI;
        let theta = PI * ((v + 0.5) / self.height as f64);
        let (sp, cp) = phi.sin_cos();
        let (st, ct) = theta.sin_cos();
        Vec3::new(cp * st, sp * st, ct)
    }

    pub fn ray(&self, u: f64, v: f64) -> Result<Ray> {
        if !(0.0..self.width as f64).contains(&u) || !(0.0..self.height as f64).contains(&v) {
            return Err(Error::PixelOutOfRange {
                u,
                v,
                width: self.width,
                height: self.height,
            });
        }
        Ok(self.ray_unchecked(u, v))
    }

    pub(crate) fn ray_unchecked(&self, u: f64, v: f64) -> Ray {
        let d = self.pose.rotation.rotate(&self.local_direction(u, v));
        Ray {
            origin: self.pose.translation,
            direction: d.normalize(),
        }
    }

    /// Continuous pixel coordinates of a camera-frame direction, the inverse of
    /// [`EquirectCamera::local_direction`].
    pub fn project_local(&self, d: &Vec3) -> (f64, f64) {
        let (phi, theta) = direction_angles(d);
        let u = (phi + PI) / (2.0 * PI) * self.width as f64 - 0.5;
        let v = theta / PI * self.height as f64 - 0.5;
        (u, v)
    }

    pub fn project_world(&self, d: &Vec3) -> (f64, f64) {
        self.project_local(&self.pose.rotation.inverse().rotate(d))
    }
}

/// Azimuth in `(-pi, pi]` and polar angle in `[0, pi]` of a direction (z-up).
pub fn direction_angles(d: &Vec3) -> (f64, f64) {
    let n = d.norm();
    let phi = d.y.atan2(d.x);
    let theta = (d.z / n).clamp(-1.0, 1.0).acos();
    (phi, theta)
}

/// Pinhole camera with the principal point at the image centre and square pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerspectiveCamera {
    width: usize,
    height: usize,
    fov_deg: f64,
    pub pose: Pose,
}

impl PerspectiveCamera {
    /// `fov_deg` is the horizontal field of view.
    pub fn new(width: usize, height: usize, fov_deg: f64, pose: Pose) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidCamera("empty image".into()));
        }
        if !(fov_deg > 0.0 && fov_deg < 180.0) {
            return Err(Error::InvalidCamera(format!(
                "field of view {fov_deg} outside (0, 180)"
            )));
        }
        Ok(Self {
            width,
            height,
            fov_deg,
            pose,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn fov_deg(&self) -> f64 {
        self.fov_deg
    }

    pub fn focal_px(&self) -> f64 {
        0.5 * self.width as f64 / (0.5 * self.fov_deg.to_radians()).tan()
    }

    pub fn local_direction(&self, u: f64, v: f64) -> Vec3 {
        let f = self.focal_px();
        let x = u + 0.5 - 0.5 * self.width as f64;
        let y = v + 0.5 - 0.5 * self.height as f64;
        Vec3::new(f, x, -y).normalize()
    }

    pub fn ray(&self, u: f64, v: f64) -> Result<Ray> {
        if !(0.0..self.width as f64).contains(&u) || !(0.0..self.height as f64).contains(&v) {
            return Err(Error::PixelOutOfRange {
                u,
                v,
                width: self.width,
                height: self.height,
            });
        }
        Ok(Ray {
            origin: self.pose.translation,
            direction: self
                .pose
                .rotation
                .rotate(&self.local_direction(u, v))
                .normalize(),
        })
    }

    /// Continuous pixel coordinates of a camera-frame direction, or `None`
    /// when the direction points behind the camera.
    pub fn project_local(&self, d: &Vec3) -> Option<(f64, f64)> {
        if d.x <= 0.0 {
            return None;
        }
        let f = self.focal_px();
        let u = f * d.y / d.x + 0.5 * self.width as f64 - 0.5;
        let v = -f * d.z / d.x + 0.5 * self.height as f64 - 0.5;
        Some((u, v))
    }
}

/// Free function form of [`EquirectCamera::ray`].
pub fn equirect_ray(cam: &EquirectCamera, u: f64, v: f64) -> Result<Ray> {
    cam.ray(u, v)
}

/// Free function form of [`PerspectiveCamera::ray`].
pub fn perspective_ray(cam: &PerspectiveCamera, u: f64, v: f64) -> Result<Ray> {
    cam.ray(u, v)
}
