//! Synthetic rooms with rectangular emitters, a direct-lighting reference
//! renderer, and generators for rig trajectories and capture datasets.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Aabb;
use crate::geometry::{
    apply_relative_pose, EquirectCamera, PerspectiveCamera, Pose, Quaternion, Ray, RelativePose,
    Vec3,
};
use crate::imaging::{expose, write_pfm, CrfPair, ExposureFactor, ImageBuffer, ImageKind};
use crate::train::{create_dir, read_json, write_json, CaptureDataset, Frame};

/// Quadrature points per emitter side.
const QUAD_SIDE: usize = 8;

/// A face of the room, named by its axis and side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Face {
    XMin,
    XMax,
    YMin,
    YMax,
    ZMin,
    ZMax,
}

impl Face {
    pub const ALL: [Face; 6] = [
        Face::XMin,
        Face::XMax,
        Face::YMin,
        Face::YMax,
        Face::ZMin,
        Face::ZMax,
    ];

    pub fn axis(self) -> usize {
        self as usize / 2
    }

    pub fn is_max(self) -> bool {
        self as usize % 2 == 1
    }

    /// Unit normal pointing into the room.
    pub fn inward_normal(self) -> Vec3 {
        let mut n = Vec3::zeros();
        n[self.axis()] = if self.is_max() { -1.0 } else { 1.0 };
        n
    }

    /// The two in-plane axes, ascending.
    pub fn plane_axes(self) -> [usize; 2] {
        match self.axis() {
            0 => [1, 2],
            1 => [0, 2],
            _ => [0, 1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaceAlbedo {
    pub x_min: [f64; 3],
    pub x_max: [f64; 3],
    pub y_min: [f64; 3],
    pub y_max: [f64; 3],
    pub z_min: [f64; 3],
    pub z_max: [f64; 3],
}

impl FaceAlbedo {
    pub fn uniform(a: [f64; 3]) -> Self {
        Self {
            x_min: a,
            x_max: a,
            y_min: a,
            y_max: a,
            z_min: a,
            z_max: a,
        }
    }

    pub fn get(&self, f: Face) -> [f64; 3] {
        match f {
            Face::XMin => self.x_min,
            Face::XMax => self.x_max,
            Face::YMin => self.y_min,
            Face::YMax => self.y_max,
            Face::ZMin => self.z_min,
            Face::ZMax => self.z_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Room {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub albedo: FaceAlbedo,
}

impl Room {
    pub fn aabb(&self) -> Aabb {
        Aabb {
            min: self.min,
            max: self.max,
        }
    }
}

/// Rectangular patch on a room face. `min`/`max` are coordinates along the
/// face's two in-plane axes (x before y before z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Emitter {
    pub face: Face,
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub radiance: [f64; 3],
}

impl Emitter {
    pub fn area(&self) -> f64 {
        (self.max[0] - self.min[0]) * (self.max[1] - self.min[1])
    }

    fn contains(&self, p: &Vec3) -> bool {
        let [a, b] = self.face.plane_axes();
        p[a] >= self.min[0] && p[a] <= self.max[0] && p[b] >= self.min[1] && p[b] <= self.max[1]
    }

    /// World-space centre of the patch.
    pub fn center(&self, room: &Room) -> Vec3 {
        let [a, b] = self.face.plane_axes();
        let k = self.face.axis();
        let mut c = Vec3::zeros();
        c[a] = 0.5 * (self.min[0] + self.max[0]);
        c[b] = 0.5 * (self.min[1] + self.max[1]);
        c[k] = if self.face.is_max() {
            room.max[k]
        } else {
            room.min[k]
        };
        c
    }

    /// Quadrature nodes of the patch, each carrying an equal share of its area.
    fn nodes(&self, room: &Room) -> Vec<Vec3> {
        let [a, b] = self.face.plane_axes();
        let k = self.face.axis();
        let plane = if self.face.is_max() {
            room.max[k]
        } else {
            room.min[k]
        };
        let n = QUAD_SIDE;
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut p = Vec3::zeros();
                p[a] = self.min[0] + (i as f64 + 0.5) / n as f64 * (self.max[0] - self.min[0]);
                p[b] = self.min[1] + (j as f64 + 0.5) / n as f64 * (self.max[1] - self.min[1]);
                p[k] = plane;
                out.push(p);
            }
        }
        out
    }
}

/// A closed box room lit by an ambient term and rectangular emitters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthScene {
    pub room: Room,
    #[serde(default)]
    pub emitters: Vec<Emitter>,
    #[serde(default)]
    pub ambient: [f64; 3],
}

impl SynthScene {
    pub fn validate(&self) -> Result<()> {
        self.room.aabb().validate()?;
        for f in Face::ALL {
            if self
                .room
                .albedo
                .get(f)
                .iter()
                .any(|a| !(0.0..=1.0).contains(a))
            {
                return Err(Error::Invalid(format!("albedo of {f:?} outside [0, 1]")));
            }
        }
        if self.ambient.iter().any(|a| !(*a >= 0.0)) {
            return Err(Error::Invalid("ambient must be nonnegative".into()));
        }
        for (i, e) in self.emitters.iter().enumerate() {
            if e.radiance.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
                return Err(Error::Invalid(format!("emitter {i} has negative radiance")));
            }
            let [a, b] = e.face.plane_axes();
            let r = &self.room;
            let inside = r.min[a] <= e.min[0]
                && e.min[0] < e.max[0]
                && e.max[0] <= r.max[a]
                && r.min[b] <= e.min[1]
                && e.min[1] < e.max[1]
                && e.max[1] <= r.max[b];
            if !inside {
                return Err(Error::Invalid(format!(
                    "emitter {i} does not lie on its face"
                )));
            }
        }
        Ok(())
    }

    /// Reads a scene from TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let scene: SynthScene = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::format(path, e))?
        } else {
            toml::from_str(&text).map_err(|e| Error::format(path, e))?
        };
        scene.validate().map_err(|e| Error::format(path, e))?;
        Ok(scene)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = if path.extension().is_some_and(|e| e == "json") {
            serde_json::to_string_pretty(self).map_err(|e| Error::format(path, e))?
        } else {
            toml::to_string(self).map_err(|e| Error::format(path, e))?
        };
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Radiance leaving the first surface hit by `ray`, which must start
    /// inside the room.
    pub fn trace(&self, ray: &Ray, nodes: &[Vec<Vec3>]) -> [f64; 3] {
        let (p, face) = self.hit(ray);
        for e in self.emitters.iter().filter(|e| e.face == face) {
            if e.contains(&p) {
                return e.radiance;
            }
        }
        let n = face.inward_normal();
        let mut irr = self.ambient;
        for (e, pts) in self.emitters.iter().zip(nodes) {
            if e.face == face {
                continue;
            }
            let da = e.area() / pts.len() as f64;
            let ne = e.face.inward_normal();
            let mut g = 0.0;
            for q in pts {
                let d = q - p;
                let r2 = d.norm_squared();
                let dir = d / r2.sqrt();
                let cos_p = n.dot(&dir).max(0.0);
                let cos_e = (-ne.dot(&dir)).max(0.0);
                g += cos_p * cos_e / r2 * da;
            }
            for c in 0..3 {
                irr[c] += e.radiance[c] * g;
            }
        }
        let a = self.room.albedo.get(face);
        [0, 1, 2].map(|c| a[c] * irr[c] / std::f64::consts::PI)
    }

    fn hit(&self, ray: &Ray) -> (Vec3, Face) {
        let r = &self.room;
        let mut best = (f64::INFINITY, Face::XMin);
        for k in 0..3 {
            let d = ray.direction[k];
            if d == 0.0 {
                continue;
            }
            let (plane, face) = if d > 0.0 {
                (r.max[k], Face::ALL[2 * k + 1])
            } else {
                (r.min[k], Face::ALL[2 * k])
            };
            let t = (plane - ray.origin[k]) / d;
            if t < best.0 {
                best = (t, face);
            }
        }
        let mut p = ray.origin + ray.direction * best.0;
        let k = best.1.axis();
        p[k] = if best.1.is_max() { r.max[k] } else { r.min[k] };
        (p, best.1)
    }

    fn quadrature(&self) -> Vec<Vec<Vec3>> {
        self.emitters.iter().map(|e| e.nodes(&self.room)).collect()
    }

    /// Radiance along a single ray.
    pub fn radiance(&self, ray: &Ray) -> [f64; 3] {
        self.trace(ray, &self.quadrature())
    }

    /// Mean radiance over the non-emitter part of a panorama taken at the
    /// room centre, averaged over channels.
    pub fn mean_wall_radiance(&self, height: usize) -> Result<f64> {
        let cam = EquirectCamera::new(
            2 * height,
            height,
            Pose::from_translation(self.room.aabb().center()),
        )?;
        let nodes = self.quadrature();
        let (mut sum, mut n) = (0.0, 0usize);
        for v in 0..height {
            for u in 0..2 * height {
                let ray = cam.ray(u as f64, v as f64)?;
                let (p, face) = self.hit(&ray);
                if self
                    .emitters
                    .iter()
                    .any(|e| e.face == face && e.contains(&p))
                {
                    continue;
                }
                let rgb = self.trace(&ray, &nodes);
                sum += (rgb[0] + rgb[1] + rgb[2]) / 3.0;
                n += 1;
            }
        }
        if n == 0 {
            return Err(Error::Invalid("no wall pixels visible".into()));
        }
        Ok(sum / n as f64)
    }

    /// Rescales every emitter's radiance by a common factor so that the
    /// brightest emitter channel is `ratio` times the mean wall radiance.
    /// Wall radiance is affine in emitter radiance, so this is solved exactly.
    pub fn with_emitter_ratio(&self, ratio: f64, height: usize) -> Result<SynthScene> {
        let peak = self
            .emitters
            .iter()
            .flat_map(|e| e.radiance)
            .fold(0.0f64, f64::max);
        if peak <= 0.0 {
            return Err(Error::Invalid("scene has no lit emitter".into()));
        }
        let scaled = |s: f64| {
            let mut out = self.clone();
            for e in &mut out.emitters {
                e.radiance = e.radiance.map(|r| r / peak * s);
            }
            out
        };
        let w0 = scaled(0.0).mean_wall_radiance(height)?;
        let w1 = scaled(1.0).mean_wall_radiance(height)? - w0;
        let denom = 1.0 - ratio * w1;
        if denom <= 0.0 || w0 <= 0.0 {
            return Err(Error::Invalid(format!(
                "no emitter radiance gives a {ratio}x ratio for this scene"
            )));
        }
        Ok(scaled(ratio * w0 / denom))
    }
}

/// A 4 x 3 x 2.5 room with tinted walls, a small ceiling lamp at `ratio`
/// times the mean wall radiance, and walls around 0.2 to 0.5 in radiance.
pub fn demo_room(ratio: f64) -> Result<SynthScene> {
    let scene = SynthScene {
        room: Room {
            min: [0.0, 0.0, 0.0],
            max: [4.0, 3.0, 2.5],
            albedo: FaceAlbedo {
                x_min: [0.75, 0.45, 0.35],
                x_max: [0.35, 0.55, 0.75],
                y_min: [0.55, 0.7, 0.45],
                y_max: [0.7, 0.65, 0.55],
                z_min: [0.4, 0.3, 0.25],
                z_max: [0.85, 0.85, 0.8],
            },
        },
        emitters: vec![Emitter {
            face: Face::ZMax,
            min: [1.4, 1.0],
            max: [2.6, 2.0],
            radiance: [1.0, 0.95, 0.85],
        }],
        ambient: [0.9, 0.9, 0.9],
    };
    scene.with_emitter_ratio(ratio, 64)
}

/// Cameras the oracle can render.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleCamera {
    Equirect(EquirectCamera),
    Perspective(PerspectiveCamera),
}

impl From<EquirectCamera> for OracleCamera {
    fn from(c: EquirectCamera) -> Self {
        OracleCamera::Equirect(c)
    }
}

impl From<PerspectiveCamera> for OracleCamera {
    fn from(c: PerspectiveCamera) -> Self {
        OracleCamera::Perspective(c)
    }
}

impl OracleCamera {
    fn dims(&self) -> (usize, usize) {
        match self {
            OracleCamera::Equirect(c) => (c.width(), c.height()),
            OracleCamera::Perspective(c) => (c.width(), c.height()),
        }
    }

    fn ray(&self, u: usize, v: usize) -> Result<Ray> {
        match self {
            OracleCamera::Equirect(c) => c.ray(u as f64, v as f64),
            OracleCamera::Perspective(c) => c.ray(u as f64, v as f64),
        }
    }

    fn position(&self) -> Vec3 {
        match self {
            OracleCamera::Equirect(c) => c.pose.translation,
            OracleCamera::Perspective(c) => c.pose.translation,
        }
    }
}

/// Reference HDR image of `scene` seen from `cam`.
pub fn oracle_render(scene: &SynthScene, cam: impl Into<OracleCamera>) -> Result<ImageBuffer> {
    let cam = cam.into();
    let inside = {
        let (p, r) = (cam.position(), &scene.room);
        (0..3).all(|k| p[k] > r.min[k] && p[k] < r.max[k])
    };
    if !inside {
        return Err(Error::Invalid(
            "camera must be strictly inside the room".into(),
        ));
    }
    let (w, h) = cam.dims();
    let nodes = scene.quadrature();
    let rows: Vec<Result<Vec<f32>>> = (0..h)
        .into_par_iter()
        .map(|v| {
            let mut row = Vec::with_capacity(3 * w);
            for u in 0..w {
                let rgb = scene.trace(&cam.ray(u, v)?, &nodes);
                row.extend(rgb.map(|c| c as f32));
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

/// The rig offset used by [`make_rig_trajectory`]: the fast camera is turned
/// 90 degrees about the vertical monopod axis and sits 0.05 units above.
pub fn default_rig() -> RelativePose {
    RelativePose {
        delta_rotation: Quaternion::from_axis_angle(&Vec3::z(), std::f64::consts::FRAC_PI_2),
        delta_translation: Vec3::new(0.0, 0.0, 0.05),
    }
}

/// Smooth random walk of `(well, fast)` pose pairs inside `room`, keeping
/// `margin` from every wall, with slowly tumbling orientations and the
/// [`default_rig`] offset applied in the world frame.
pub fn make_rig_trajectory(
    n_frames: usize,
    room: &Room,
    margin: f64,
    seed: u64,
) -> Result<Vec<(Pose, Pose)>> {
    let lo = room.min.map(|v| v + margin);
    let hi = room.max.map(|v| v - margin);
    if (0..3).any(|k| hi[k] <= lo[k] || room.max[k] - margin - 0.05 <= lo[k]) {
        return Err(Error::Invalid(
            "room too small for the requested margin".into(),
        ));
    }
    // The fast camera sits above the well camera; leave it room too.
    let hi = [hi[0], hi[1], hi[2] - 0.05];
    let rig = default_rig();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos = Vec3::from_fn(|k, _| rng.gen_range(lo[k]..hi[k]));
    let span = Vec3::from_fn(|k, _| hi[k] - lo[k]);
    let mut vel = Vec3::zeros();
    let mut rot = Quaternion::from_rotation_vector(&Vec3::from_fn(|_, _| rng.gen_range(-3.0..3.0)));
    let mut spin = Vec3::zeros();
    let mut out = Vec::with_capacity(n_frames);
    for _ in 0..n_frames {
        let well = Pose::new(rot, pos);
        out.push((well, apply_relative_pose(&well, &rig)));
        for k in 0..3 {
            vel[k] = 0.7 * vel[k] + 0.12 * span[k] * rng.gen_range(-1.0..1.0);
            pos[k] += vel[k];
            // Reflect at the walls of the allowed box.
            if pos[k] < lo[k] {
                pos[k] = (2.0 * lo[k] - pos[k]).min(hi[k]);
                vel[k] = -vel[k];
            } else if pos[k] > hi[k] {
                pos[k] = (2.0 * hi[k] - pos[k]).max(lo[k]);
                vel[k] = -vel[k];
            }
        }
        for k in 0..3 {
            spin[k] = 0.8 * spin[k] + 0.25 * rng.gen_range(-1.0..1.0);
        }
        rot = (Quaternion::from_rotation_vector(&spin) * rot).renormalized();
    }
    Ok(out)
}

/// A held-out position with its ground-truth HDR panorama.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub id: String,
    pub pose: Pose,
    pub hdr: ImageBuffer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ProbeRecord {
    id: String,
    q: [f64; 4],
    t: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ProbeFile {
    probes: Vec<ProbeRecord>,
}

/// Writes `probes.json` and `probes/<id>.pfm` under `dir`.
pub fn save_probes(dir: &Path, probes: &[Probe]) -> Result<()> {
    create_dir(&dir.join("probes"))?;
    let mut records = Vec::new();
    for p in probes {
        write_pfm(&dir.join("probes").join(format!("{}.pfm", p.id)), &p.hdr)?;
        let t = p.pose.translation;
        records.push(ProbeRecord {
            id: p.id.clone(),
            q: p.pose.rotation.to_array(),
            t: [t.x, t.y, t.z],
        });
    }
    write_json(&dir.join("probes.json"), &ProbeFile { probes: records })
}

pub fn load_probes(dir: &Path) -> Result<Vec<Probe>> {
    let file: ProbeFile = read_json(&dir.join("probes.json"))?;
    file.probes
        .into_iter()
        .map(|r| {
            let [w, x, y, z] = r.q;
            let pose = Pose::new(Quaternion::from_wxyz(w, x, y, z)?, Vec3::from(r.t));
            let hdr = crate::imaging::read_pfm(&dir.join("probes").join(format!("{}.pfm", r.id)))?;
            Ok(Probe {
                id: r.id,
                pose,
                hdr,
            })
        })
        .collect()
}

/// Options for [`make_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    /// Panorama height; width is twice this.
    pub height: usize,
    pub exposure_factor: ExposureFactor,
    pub crf: CrfPair,
    pub fps: f64,
    /// Padding added around the room to form the scene bounds.
    pub bounds_padding: f64,
    pub probe_poses: Vec<Pose>,
}

/// Output of [`make_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub dataset: CaptureDataset,
    pub probes: Vec<Probe>,
}

impl SynthDataset {
    pub fn save(&self, dir: &Path) -> Result<()> {
        self.dataset.save(dir)?;
        save_probes(dir, &self.probes)
    }
}

/// Quantizes to the 8-bit grid used by PNG so the in-memory dataset matches
/// what a reload would produce.
fn quantize(img: &ImageBuffer) -> ImageBuffer {
    img.map(ImageKind::Ldr, |v| (v * 255.0).round() / 255.0)
}

/// Renders every pose pair with the oracle and exposes the well frame at
/// scale 1 and the fast frame at `1 / factor`.
pub fn make_dataset(
    scene: &SynthScene,
    trajectory: &[(Pose, Pose)],
    spec: &DatasetSpec,
) -> Result<SynthDataset> {
    scene.validate()?;
    if trajectory.is_empty() {
        return Err(Error::Invalid("empty trajectory".into()));
    }
    let (w, h) = (2 * spec.height, spec.height);
    let fast_scale = 1.0 / spec.exposure_factor.value();
    let mut well_frames = Vec::with_capacity(trajectory.len());
    let mut fast_frames = Vec::with_capacity(trajectory.len());
    for (i, (pw, pf)) in trajectory.iter().enumerate() {
        let id = format!("{i:04}");
        let hw = oracle_render(scene, EquirectCamera::new(w, h, *pw)?)?;
        let hf = oracle_render(scene, EquirectCamera::new(w, h, *pf)?)?;
        well_frames.push(Frame {
            id: id.clone(),
            image: quantize(&expose(&hw, 1.0, &spec.crf.well)?),
            pose: *pw,
        });
        fast_frames.push(Frame {
            id,
            image: quantize(&expose(&hf, fast_scale, &spec.crf.fast)?),
            pose: *pf,
        });
    }
    let probes = spec
        .probe_poses
        .iter()
        .enumerate()
        .map(|(i, pose)| {
            Ok(Probe {
                id: format!("probe{i:02}"),
                pose: *pose,
                hdr: oracle_render(scene, EquirectCamera::new(w, h, *pose)?)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let dataset = CaptureDataset {
        well_frames,
        fast_frames,
        exposure_factor: spec.exposure_factor,
        crf: spec.crf,
        bounds: Some(scene.room.aabb().padded(spec.bounds_padding)),
        fps: spec.fps,
    };
    dataset.validate()?;
    Ok(SynthDataset { dataset, probes })
}

/// Removes `n_probes` evenly spaced pairs from a trajectory and returns the
/// remaining pairs together with the held-out well poses.
pub fn hold_out_probes(
    trajectory: &[(Pose, Pose)],
    n_probes: usize,
) -> Result<(Vec<(Pose, Pose)>, Vec<Pose>)> {
    let n = trajectory.len();
    if n_probes >= n {
        return Err(Error::Invalid(format!(
            "cannot hold out {n_probes} of {n} frames"
        )));
    }
    let picks: Vec<usize> = (0..n_probes)
        .map(|k| (2 * k + 1) * n / (2 * n_probes))
        .collect();
    let probes = picks.iter().map(|&i| trajectory[i].0).collect();
    let rest = trajectory
        .iter()
        .enumerate()
        .filter(|(i, _)| !picks.contains(i))
        .map(|(_, p)| *p)
        .collect();
    Ok((rest, probes))
}

/// Seeded probe positions inside the room, keeping `margin` from the walls.
pub fn random_probe_poses(room: &Room, n: usize, margin: f64, seed: u64) -> Vec<Pose> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let t = Vec3::from_fn(|k, _| rng.gen_range(room.min[k] + margin..room.max[k] - margin));
            Pose::from_translation(t)
        })
        .collect()
}
