use serde::{Deserialize, Serialize};

use super::camera::{EquirectCamera, PerspectiveCamera};
use super::pose::Pose;
use super::quat::{Quaternion, Vec3};
use crate::error::{Error, Result};
use crate::imaging::{ImageBuffer, ImageKind};

/// Viewing direction of a perspective crop relative to the panorama, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct ViewAngles {
    pub yaw_deg: f64,
    pub pitch_deg: f64,
}

impl From<[f64; 2]> for ViewAngles {
    fn from(v: [f64; 2]) -> Self {
        Self {
            yaw_deg: v[0],
            pitch_deg: v[1],
        }
    }
}

impl From<ViewAngles> for [f64; 2] {
    fn from(v: ViewAngles) -> Self {
        [v.yaw_deg, v.pitch_deg]
    }
}

/// Eight horizontal views 45 degrees apart; the poles are not covered.
pub fn default_view_layout() -> Vec<ViewAngles> {
    (0..8)
        .map(|i| ViewAngles {
            yaw_deg: 45.0 * i as f64,
            pitch_deg: 0.0,
        })
        .collect()
}

/// Pose of a perspective view looking along `angles` from the panorama pose.
pub fn view_pose(pano_pose: &Pose, angles: ViewAngles) -> Pose {
    let yaw = Quaternion::from_axis_angle(&Vec3::z(), angles.yaw_deg.to_radians());
    let pitch = Quaternion::from_axis_angle(&Vec3::y(), -angles.pitch_deg.to_radians());
    Pose::new(
        (pano_pose.rotation * yaw * pitch).renormalized(),
        pano_pose.translation,
    )
}

/// Resamples square perspective crops out of a panorama.
///
/// Colours are bilinear; a crop pixel is invalid when any bilinear tap with
/// nonzero weight is invalid in the source mask.
pub fn extract_perspective_views(
    pano: &ImageBuffer,
    cam: &EquirectCamera,
    fov_deg: f64,
    size: usize,
    layout: &[ViewAngles],
) -> Result<Vec<(ImageBuffer, PerspectiveCamera)>> {
    if pano.width() != cam.width() || pano.height() != cam.height() {
        return Err(Error::DimensionMismatch(format!(
            "panorama {}x{} vs camera {}x{}",
            pano.width(),
            pano.height(),
            cam.width(),
            cam.height()
        )));
    }
    let to_pano_local = cam.pose.rotation.inverse();
    layout
        .iter()
        .map(|&angles| {
            let view = PerspectiveCamera::new(size, size, fov_deg, view_pose(&cam.pose, angles))?;
            let mut img = ImageBuffer::new(size, size, pano.kind());
            let mut mask = pano.mask().map(|_| vec![true; size * size]);
            for v in 0..size {
                for u in 0..size {
                    let d = view.ray(u as f64, v as f64)?.direction;
                    let (pu, pv) = cam.project_local(&to_pano_local.rotate(&d));
                    let (rgb, valid) = pano.sample_bilinear_wrap(pu, pv);
                    let rgb = match pano.kind() {
                        ImageKind::Ldr => rgb.map(|c| c.clamp(0.0, 1.0)),
                        ImageKind::Hdr => rgb.map(|c| c.max(0.0)),
                    };
                    img.set(u, v, rgb);
                    if let Some(m) = mask.as_mut() {
                        m[v * size + u] = valid;
                    }
                }
            }
            img.set_mask(mask)?;
            Ok((img, view))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::camera::direction_angles;

    fn pano_cam(h: usize, pose: Pose) -> EquirectCamera {
        EquirectCamera::new(2 * h, h, pose).unwrap()
    }

    #[test]
    fn constant_panorama_gives_constant_crops() {
        let cam = pano_cam(32, Pose::identity());
        let pano = ImageBuffer::filled(64, 32, ImageKind::Ldr, [0.25, 0.5, 0.75]);
        let views =
            extract_perspective_views(&pano, &cam, 120.0, 16, &default_view_layout()).unwrap();
        for (img, _) in &views {
            for px in img.pixels() {
                assert!((px[0] - 0.25).abs() < 1e-6);
                assert!((px[1] - 0.5).abs() < 1e-6);
                assert!((px[2] - 0.75).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn default_layout_has_eight_views() {
        let cam = pano_cam(64, Pose::identity());
        let pano = ImageBuffer::new(128, 64, ImageKind::Ldr);
        let views = extract_perspective_views(&pano, &cam, 120.0, 960, &default_view_layout()[..1])
            .unwrap();
        assert_eq!(views[0].0.width(), 960);
        assert_eq!(views[0].0.height(), 960);
        assert_eq!(default_view_layout().len(), 8);
    }

    #[test]
    fn crop_centres_project_back_to_layout() {
        let pose = Pose::new(
            Quaternion::from_axis_angle(&Vec3::new(0.2, -0.4, 1.0), 0.9),
            Vec3::new(1.0, 0.0, 0.5),
        );
        let cam = pano_cam(16, pose);
        let layout = vec![
            ViewAngles {
                yaw_deg: 0.0,
                pitch_deg: 0.0,
            },
            ViewAngles {
                yaw_deg: 135.0,
                pitch_deg: 20.0,
            },
            ViewAngles {
                yaw_deg: -60.0,
                pitch_deg: -35.0,
            },
        ];
        let pano = ImageBuffer::new(32, 16, ImageKind::Ldr);
        let views = extract_perspective_views(&pano, &cam, 120.0, 33, &layout).unwrap();
        for ((_, view), angles) in views.iter().zip(&layout) {
            let d = view.ray(16.0, 16.0).unwrap().direction;
            let local = pose.rotation.inverse().rotate(&d);
            let (phi, theta) = direction_angles(&local);
            let yaw = phi.to_degrees();
            let pitch = 90.0 - theta.to_degrees();
            let dyaw = (yaw - angles.yaw_deg + 540.0).rem_euclid(360.0) - 180.0;
            assert!(dyaw.abs() < 0.1, "{yaw} vs {}", angles.yaw_deg);
            assert!((pitch - angles.pitch_deg).abs() < 0.1);
        }
    }

    #[test]
    fn masks_propagate() {
        let cam = pano_cam(16, Pose::identity());
        let mut mask = vec![true; 32 * 16];
        // Invalidate the column straight ahead (u = 15, 16 straddle phi = 0).
        for v in 0..16 {
            mask[v * 32 + 16] = false;
        }
        let pano = ImageBuffer::new(32, 16, ImageKind::Ldr)
            .with_mask(mask)
            .unwrap();
        let views = extract_perspective_views(
            &pano,
            &cam,
            90.0,
            9,
            &[
                ViewAngles {
                    yaw_deg: 0.0,
                    pitch_deg: 0.0,
                },
                ViewAngles {
                    yaw_deg: 180.0,
                    pitch_deg: 0.0,
                },
            ],
        )
        .unwrap();
        let front = views[0].0.mask().unwrap();
        assert!(!front[4 * 9 + 4]);
        assert!(views[1].0.mask().unwrap().iter().all(|m| *m));
    }
}
