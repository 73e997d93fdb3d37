use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pixel encoding of an [`ImageBuffer`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageKind {
    /// Nonlinear (CRF-encoded) pixel values in `[0, 1]`.
    Ldr,
    /// Linear radiance, nonnegative and unbounded.
    Hdr,
}

/// Row-major `height x width x 3` raster with an optional validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    kind: ImageKind,
    data: Vec<f32>,
    mask: Option<Vec<bool>>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, kind: ImageKind) -> Self {
        Self {
            width,
            height,
            kind,
            data: vec![0.0; width * height * 3],
            mask: None,
        }
    }

    pub fn filled(width: usize, height: usize, kind: ImageKind, rgb: [f32; 3]) -> Self {
        let mut img = Self::new(width, height, kind);
        for px in img.data.chunks_exact_mut(3) {
            px.copy_from_slice(&rgb);
        }
        img
    }

    /// Wraps raw data, checking the length and the value range of `kind`.
    pub fn from_data(width: usize, height: usize, kind: ImageKind, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {width}x{height}x3 image",
                data.len()
            )));
        }
        let bad = match kind {
            ImageKind::Ldr => data.iter().position(|v| !(0.0..=1.0).contains(v)),
            ImageKind::Hdr => data.iter().position(|v| !(v.is_finite() && *v >= 0.0)),
        };
        if let Some(i) = bad {
            return Err(Error::Invalid(format!(
                "{kind:?} value {} at index {i} out of range",
                data[i]
            )));
        }
        Ok(Self {
            width,
            height,
            kind,
            data,
            mask: None,
        })
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        self.set_mask(Some(mask))?;
        Ok(self)
    }

    pub fn set_mask(&mut self, mask: Option<Vec<bool>>) -> Result<()> {
        if let Some(m) = &mask {
            if m.len() != self.width * self.height {
                return Err(Error::DimensionMismatch(format!(
                    "mask of {} pixels for a {}x{} image",
                    m.len(),
                    self.width,
                    self.height
                )));
            }
        }
        self.mask = mask;
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn kind(&self) -> ImageKind {
        self.kind
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn same_dims(&self, other: &ImageBuffer) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn check_same_dims(&self, other: &ImageBuffer) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }

    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.mask.as_ref().map_or(true, |m| m[y * self.width + x])
    }

    pub fn is_valid_index(&self, i: usize) -> bool {
        self.mask.as_ref().map_or(true, |m| m[i])
    }

    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn pixels(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(3)
    }

    /// Applies `f` to every channel value and relabels the result.
    pub fn map(&self, kind: ImageKind, f: impl Fn(f32) -> f32) -> ImageBuffer {
        ImageBuffer {
            width: self.width,
            height: self.height,
            kind,
            data: self.data.iter().map(|&v| f(v)).collect(),
            mask: self.mask.clone(),
        }
    }

    /// Validity mask combining both images' masks (None when neither has one).
    pub fn intersect_masks(&self, other: &ImageBuffer) -> Option<Vec<bool>> {
        match (&self.mask, &other.mask) {
            (None, None) => None,
            (Some(a), None) => Some(a.clone()),
            (None, Some(b)) => Some(b.clone()),
            (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(x, y)| *x && *y).collect()),
        }
    }

    /// Bilinear sample at continuous pixel coordinates (pixel centres at
    /// integers). `u` wraps around horizontally; `v` clamps.
    ///
    /// Returns the colour and whether every tap with nonzero weight is valid.
    pub fn sample_bilinear_wrap(&self, u: f64, v: f64) -> ([f32; 3], bool) {
        let w = self.width as i64;
        let h = self.height as i64;
        let v = v.clamp(0.0, (h - 1) as f64);
        let u0 = u.floor();
        let v0 = v.floor();
        let fu = u - u0;
        let fv = v - v0;
        let (u0, v0) = (u0 as i64, v0 as i64);
        let mut acc = [0f64; 3];
        let mut valid = true;
        for (dv, wv) in [(0i64, 1.0 - fv), (1, fv)] {
            for (du, wu) in [(0i64, 1.0 - fu), (1, fu)] {
                let wgt = wu * wv;
                if wgt == 0.0 {
                    continue;
                }
                let x = (u0 + du).rem_euclid(w) as usize;
                let y = (v0 + dv).clamp(0, h - 1) as usize;
                let px = self.get(x, y);
                for c in 0..3 {
                    acc[c] += wgt * px[c] as f64;
                }
                valid &= self.is_valid(x, y);
            }
        }
        ([acc[0] as f32, acc[1] as f32, acc[2] as f32], valid)
    }
}
