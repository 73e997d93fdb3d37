//! Minimal image-based lighting: a diffuse sphere resting on a diffuse ground
//! square, lit only by an equirectangular environment map.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{view_pose, EquirectCamera, PerspectiveCamera, Pose, Vec3, ViewAngles};
use crate::imaging::{ImageBuffer, ImageKind};

#[derive(Debug, Clone, PartialEq)]
pub struct IblScene {
    pub camera: PerspectiveCamera,
    pub sphere_center: Vec3,
    pub sphere_radius: f64,
    pub sphere_albedo: [f64; 3],
    pub ground_height: f64,
    /// The ground is the square `|x|, |y| <= ground_half_extent`.
    pub ground_half_extent: f64,
    pub ground_albedo: [f64; 3],
    /// Cosine-weighted hemisphere samples per shaded pixel.
    pub samples: usize,
}

impl Default for IblScene {
    fn default() -> Self {
        let eye = Pose::from_translation(Vec3::new(-4.5, 0.0, 0.4));
        let pose = view_pose(
            &eye,
            ViewAngles {
                yaw_deg: 0.0,
                pitch_deg: -10.0,
            },
        );
        Self {
            camera: PerspectiveCamera::new(96, 64, 50.0, pose).expect("valid default camera"),
            sphere_center: Vec3::zeros(),
            sphere_radius: 1.0,
            sphere_albedo: [0.8, 0.8, 0.8],
            ground_height: -1.0,
            ground_half_extent: 4.0,
            ground_albedo: [0.5, 0.5, 0.5],
            samples: 512,
        }
    }
}

enum Hit {
    Sphere(Vec3),
    Ground(Vec3),
}

impl IblScene {
    fn hit_sphere(&self, o: &Vec3, d: &Vec3) -> Option<f64> {
        let oc = o - self.sphere_center;
        let b = oc.dot(d);
        let c = oc.norm_squared() - self.sphere_radius * self.sphere_radius;
        let disc = b * b - c;
        if disc < 0.0 {
            return None;
        }
        let s = disc.sqrt();
        [-b - s, -b + s].into_iter().find(|t| *t > 1e-9)
    }

    fn hit_ground(&self, o: &Vec3, d: &Vec3) -> Option<f64> {
        if d.z.abs() < 1e-12 {
            return None;
        }
        let t = (self.ground_height - o.z) / d.z;
        let p = o + d * t;
        (t > 1e-9 && p.x.abs() <= self.ground_half_extent && p.y.abs() <= self.ground_half_extent)
            .then_some(t)
    }

    fn hit(&self, o: &Vec3, d: &Vec3) -> Option<Hit> {
        match (self.hit_sphere(o, d), self.hit_ground(o, d)) {
            (Some(ts), Some(tg)) if tg < ts => Some(Hit::Ground(o + d * tg)),
            (Some(ts), _) => Some(Hit::Sphere(o + d * ts)),
            (None, Some(tg)) => Some(Hit::Ground(o + d * tg)),
            (None, None) => None,
        }
    }
}

fn radical_inverse(mut i: u32) -> f64 {
    i = i.reverse_bits();
    i as f64 / (1u64 << 32) as f64
}

/// Cosine-weighted directions around +z from a Hammersley set.
fn hemisphere_samples(n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|k| {
            let u1 = (k as f64 + 0.5) / n as f64;
            let phi = 2.0 * std::f64::consts::PI * radical_inverse(k as u32);
            let r = u1.sqrt();
            Vec3::new(r * phi.cos(), r * phi.sin(), (1.0 - u1).sqrt())
        })
        .collect()
}

fn basis(n: &Vec3) -> (Vec3, Vec3) {
    let a = if n.x.abs() < 0.9 {
        Vec3::x()
    } else {
        Vec3::y()
    };
    let t = n.cross(&a).normalize();
    (t, n.cross(&t))
}

/// Renders `scene` lit by `env`, an equirectangular HDR map in world
/// orientation. Background pixels show the environment directly.
pub fn render_ibl(scene: &IblScene, env: &ImageBuffer) -> Result<ImageBuffer> {
    if scene.samples == 0 {
        return Err(Error::Invalid("IBL needs at least one sample".into()));
    }
    let env_cam = EquirectCamera::new(env.width(), env.height(), Pose::identity())?;
    let lookup = |d: &Vec3| -> [f64; 3] {
        let (u, v) = env_cam.project_world(d);
        env.sample_bilinear_wrap(u, v).0.map(|c| c as f64)
    };
    let dirs = hemisphere_samples(scene.samples);
    let cam = &scene.camera;
    let (w, h) = (cam.width(), cam.height());
    let rows: Vec<Result<Vec<f32>>> = (0..h)
        .into_par_iter()
        .map(|v| {
            let mut row = Vec::with_capacity(3 * w);
            for u in 0..w {
                let ray = cam.ray(u as f64, v as f64)?;
                let (p, n, albedo) = match scene.hit(&ray.origin, &ray.direction) {
                    None => {
                        row.extend(lookup(&ray.direction).map(|c| c as f32));
                        continue;
                    }
                    Some(Hit::Sphere(p)) => (
                        p,
                        (p - scene.sphere_center).normalize(),
                        scene.sphere_albedo,
                    ),
                    Some(Hit::Ground(p)) => (p, Vec3::z(), scene.ground_albedo),
                };
                let (t, b) = basis(&n);
                let o = p + n * 1e-6;
                let mut acc = [0.0; 3];
                for s in &dirs {
                    let d = t * s.x + b * s.y + n * s.z;
                    if scene.hit(&o, &d).is_some() {
                        continue;
                    }
                    let l = lookup(&d);
                    for c in 0..3 {
                        acc[c] += l[c];
                    }
                }
                let k = 1.0 / dirs.len() as f64;
                row.extend([0, 1, 2].map(|c| (albedo[c] * acc[c] * k) as f32));
            }
            Ok(row)
        })
        .collect();
    let mut data = Vec::with_capacity(3 * w * h);
    for r in rows {
        data.extend(r?);
    }
    ImageBuffer::from_data(w, h, ImageKind::Hdr, data)
}
