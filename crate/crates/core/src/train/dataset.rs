//! On-disk capture datasets.
//!
//! ```text
//! <dir>/meta.json            exposure factor, gamma, frame size, fps, bounds
//! <dir>/poses.json           {"frames": [{"id", "camera", "q", "t"}]}
//! <dir>/well/<id>.png
//! <dir>/fast/<id>.png
//! <dir>/masks/<camera>/<id>.png   optional, 255 = valid
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Aabb;
use crate::geometry::{Pose, Quaternion, Vec3};
use crate::imaging::{
    read_mask, read_png, write_mask, write_png, Crf, CrfPair, ExposureFactor, ImageBuffer,
    ImageKind,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub exposure_factor: f64,
    pub gamma: f64,
    /// Response of the fast camera when it differs from the well camera.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_fast: Option<f64>,
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Aabb>,
}

impl Meta {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn crf(&self) -> Result<CrfPair> {
        let well = Crf::new(self.gamma)?;
        let fast = self.gamma_fast.map(Crf::new).transpose()?.unwrap_or(well);
        Ok(CrfPair { well, fast })
    }

    pub fn factor(&self) -> Result<ExposureFactor> {
        ExposureFactor::new(self.exposure_factor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CameraRole {
    Well,
    Fast,
}

impl CameraRole {
    pub fn dir_name(self) -> &'static str {
        match self {
            CameraRole::Well => "well",
            CameraRole::Fast => "fast",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub id: String,
    pub camera: CameraRole,
    pub q: [f64; 4],
    pub t: [f64; 3],
}

impl PoseRecord {
    pub fn new(id: impl Into<String>, camera: CameraRole, pose: &Pose) -> Self {
        let t = pose.translation;
        Self {
            id: id.into(),
            camera,
            q: pose.rotation.to_array(),
            t: [t.x, t.y, t.z],
        }
    }

    pub fn pose(&self) -> Result<Pose> {
        let [w, x, y, z] = self.q;
        let q = Quaternion::from_wxyz(w, x, y, z)?;
        Ok(Pose::new(q, Vec3::from(self.t)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseFile {
    pub frames: Vec<PoseRecord>,
}

impl PoseFile {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    /// `(well, fast)` pose pairs matched by frame id, in well-frame order.
    pub fn pairs(&self) -> Result<Vec<(String, Pose, Pose)>> {
        let mut fast = BTreeMap::new();
        for r in self.frames.iter().filter(|r| r.camera == CameraRole::Fast) {
            fast.insert(r.id.as_str(), r.pose()?);
        }
        let mut out = Vec::new();
        for r in self.frames.iter().filter(|r| r.camera == CameraRole::Well) {
            let f = fast.get(r.id.as_str()).ok_or_else(|| {
                Error::Invalid(format!("well frame {} has no fast partner", r.id))
            })?;
            out.push((r.id.clone(), r.pose()?, *f));
        }
        Ok(out)
    }
}

/// One panorama with its camera-to-world pose; the mask travels inside the
/// image.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub id: String,
    pub image: ImageBuffer,
    pub pose: Pose,
}

/// Synchronized well/fast panorama pairs plus the capture constants.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureDataset {
    pub well_frames: Vec<Frame>,
    pub fast_frames: Vec<Frame>,
    pub exposure_factor: ExposureFactor,
    pub crf: CrfPair,
    pub bounds: Option<Aabb>,
    pub fps: f64,
}

impl CaptureDataset {
    pub fn len(&self) -> usize {
        self.well_frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.well_frames.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.well_frames
            .first()
            .map(|f| (f.image.width(), f.image.height()))
            .unwrap_or((0, 0))
    }

    pub fn validate(&self) -> Result<()> {
        if self.well_frames.is_empty() {
            return Err(Error::Invalid("dataset has no frames".into()));
        }
        if self.well_frames.len() != self.fast_frames.len() {
            return Err(Error::Invalid(format!(
                "{} well frames but {} fast frames",
                self.well_frames.len(),
                self.fast_frames.len()
            )));
        }
        let (w, h) = self.dims();
        if w != 2 * h {
            return Err(Error::Invalid(format!(
                "frames are {w}x{h}, not 2:1 panoramas"
            )));
        }
        for (a, b) in self.well_frames.iter().zip(&self.fast_frames) {
            if a.id != b.id {
                return Err(Error::Invalid(format!(
                    "frame ids {} and {} are not paired",
                    a.id, b.id
                )));
            }
            for f in [a, b] {
                if f.image.width() != w || f.image.height() != h {
                    return Err(Error::DimensionMismatch(format!(
                        "frame {} is {}x{}, expected {w}x{h}",
                        f.id,
                        f.image.width(),
                        f.image.height()
                    )));
                }
                if f.image.kind() != ImageKind::Ldr {
                    return Err(Error::Invalid(format!("frame {} is not LDR", f.id)));
                }
            }
        }
        if let Some(b) = &self.bounds {
            b.validate()?;
        }
        Ok(())
    }

    pub fn meta(&self) -> Meta {
        let (width, height) = self.dims();
        let gamma = self.crf.well.gamma();
        let gamma_fast = self.crf.fast.gamma();
        Meta {
            exposure_factor: self.exposure_factor.value(),
            gamma,
            gamma_fast: (gamma_fast != gamma).then_some(gamma_fast),
            width,
            height,
            fps: self.fps,
            bounds: self.bounds,
        }
    }

    pub fn poses(&self) -> PoseFile {
        let mut frames = Vec::new();
        for f in &self.well_frames {
            frames.push(PoseRecord::new(&f.id, CameraRole::Well, &f.pose));
        }
        for f in &self.fast_frames {
            frames.push(PoseRecord::new(&f.id, CameraRole::Fast, &f.pose));
        }
        PoseFile { frames }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        self.validate()?;
        for role in [CameraRole::Well, CameraRole::Fast] {
            create_dir(&dir.join(role.dir_name()))?;
        }
        write_json(&dir.join("meta.json"), &self.meta())?;
        self.poses().save(&dir.join("poses.json"))?;
        for (role, frames) in [
            (CameraRole::Well, &self.well_frames),
            (CameraRole::Fast, &self.fast_frames),
        ] {
            for f in frames {
                write_png(&frame_path(dir, role, &f.id), &f.image)?;
                if let Some(m) = f.image.mask() {
                    let p = mask_path(dir, role, &f.id);
                    create_dir(p.parent().unwrap())?;
                    write_mask(&p, f.image.width(), f.image.height(), m)?;
                }
            }
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta: Meta = read_json(&dir.join("meta.json"))?;
        let poses = PoseFile::load(&dir.join("poses.json"))?;
        let mut well_frames = Vec::new();
        let mut fast_frames = Vec::new();
        for (id, well_pose, fast_pose) in poses.pairs()? {
            for (role, pose, out) in [
                (CameraRole::Well, well_pose, &mut well_frames),
                (CameraRole::Fast, fast_pose, &mut fast_frames),
            ] {
                let mut image = read_png(&frame_path(dir, role, &id))?;
                let mp = mask_path(dir, role, &id);
                if mp.exists() {
                    let (w, h, m) = read_mask(&mp)?;
                    if (w, h) != (image.width(), image.height()) {
                        return Err(Error::format(&mp, "mask size differs from its frame"));
                    }
                    image.set_mask(Some(m))?;
                }
                out.push(Frame {
                    id: id.clone(),
                    image,
                    pose,
                });
            }
        }
        let crf = meta.crf()?;
        let ds = CaptureDataset {
            well_frames,
            fast_frames,
            exposure_factor: ExposureFactor::new(meta.exposure_factor)?,
            crf,
            bounds: meta.bounds,
            fps: meta.fps,
        };
        ds.validate()?;
        let (w, h) = ds.dims();
        if (w, h) != (meta.width, meta.height) {
            return Err(Error::format(
                dir.join("meta.json"),
                format!(
                    "declares {}x{} but frames are {w}x{h}",
                    meta.width, meta.height
                ),
            ));
        }
        Ok(ds)
    }
}

fn frame_path(dir: &Path, role: CameraRole, id: &str) -> PathBuf {
    dir.join(role.dir_name()).join(format!("{id}.png"))
}

fn mask_path(dir: &Path, role: CameraRole, id: &str) -> PathBuf {
    dir.join("masks")
        .join(role.dir_name())
        .join(format!("{id}.png"))
}

pub(crate) fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
