//! Two-exposure HDR fusion with binary validity weights.

use serde::{Deserialize, Serialize};

use super::buffer::{ImageBuffer, ImageKind};
use crate::error::{Error, Result};

/// Ratio of the well-exposed to the fast-exposed exposure time (`>= 1` in
/// practice). Multiplying a linearized fast value by it brings the value into
/// the well-exposed radiance frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ExposureFactor(f64);

impl ExposureFactor {
    pub fn new(factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::Invalid(format!(
                "exposure factor must be positive, got {factor}"
            )));
        }
        Ok(Self(factor))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for ExposureFactor {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ExposureFactor> for f64 {
    fn from(f: ExposureFactor) -> f64 {
        f.0
    }
}

/// Cut-offs of the binary weighting functions, in linear units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeThresholds {
    /// Well-exposed values must be strictly below this to count.
    pub well_max: f64,
    /// Fast-exposed values must be strictly above this to count.
    pub fast_min: f64,
}

impl Default for MergeThresholds {
    fn default() -> Self {
        Self {
            well_max: 0.98,
            fast_min: 0.1,
        }
    }
}

impl MergeThresholds {
    pub fn weight_well(&self, p: f64) -> f64 {
        if p < self.well_max {
            1.0
        } else {
            0.0
        }
    }

    pub fn weight_fast(&self, p: f64) -> f64 {
        if p > self.fast_min {
            1.0
        } else {
            0.0
        }
    }

    /// Fuses one channel. Returns the radiance and whether neither
    /// observation carried weight.
    pub fn merge_value(&self, p_well: f64, p_fast: f64, factor: f64) -> (f64, bool) {
        let ww = self.weight_well(p_well);
        let wf = self.weight_fast(p_fast);
        let denom = ww + wf;
        if denom == 0.0 {
            (factor * p_fast, true)
        } else {
            ((ww * p_well + factor * wf * p_fast) / denom, false)
        }
    }
}

pub fn merge_weight_well(p: f64) -> f64 {
    MergeThresholds::default().weight_well(p)
}

pub fn merge_weight_fast(p: f64) -> f64 {
    MergeThresholds::default().weight_fast(p)
}

/// Result of [`merge_hdr`].
#[derive(Debug, Clone, PartialEq)]
pub struct MergedHdr {
    pub radiance: ImageBuffer,
    /// `true` where some channel had no usable observation; the radiance there
    /// falls back to the re-exposed fast value, a lower bound.
    pub holes: Vec<bool>,
}

impl MergedHdr {
    pub fn hole_count(&self) -> usize {
        self.holes.iter().filter(|h| **h).count()
    }
}

/// Per-channel fusion of two linearized exposures.
pub fn merge_hdr(
    p_well: &ImageBuffer,
    p_fast: &ImageBuffer,
    factor: ExposureFactor,
    thresholds: &MergeThresholds,
) -> Result<MergedHdr> {
    p_well.check_same_dims(p_fast)?;
    if p_well.kind() != ImageKind::Hdr || p_fast.kind() != ImageKind::Hdr {
        return Err(Error::Invalid("merge_hdr expects linearized inputs".into()));
    }
    let k = factor.value();
    let mut data = Vec::with_capacity(p_well.data().len());
    let mut holes = vec![false; p_well.pixel_count()];
    for (i, (w, f)) in p_well.pixels().zip(p_fast.pixels()).enumerate() {
        for c in 0..3 {
            let (r, hole) = thresholds.merge_value(w[c] as f64, f[c] as f64, k);
            data.push(r as f32);
            holes[i] |= hole;
        }
    }
    let mut radiance =
        ImageBuffer::from_data(p_well.width(), p_well.height(), ImageKind::Hdr, data)?;
    radiance.set_mask(p_well.intersect_masks(p_fast))?;
    Ok(MergedHdr { radiance, holes })
}
