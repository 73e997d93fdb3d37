use serde::{Deserialize, Serialize};

use super::buffer::{ImageBuffer, ImageKind};
use crate::error::{Error, Result};

const GAMMA_SEARCH_MIN: f64 = 1.0;
const GAMMA_SEARCH_MAX: f64 = 4.0;
const GAMMA_SEARCH_TOL: f64 = 1e-6;

/// Gamma-curve camera response: `z = p^(1/gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crf {
    gamma: f64,
}

impl Crf {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::Invalid(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        Ok(Self { gamma })
    }

    pub fn linear() -> Self {
        Self { gamma: 1.0 }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Linear irradiance to pixel value. Inputs are clamped to `[0, 1]`.
    pub fn forward(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        if self.gamma == 1.0 {
            p
        } else {
            p.powf(1.0 / self.gamma)
        }
    }

    /// Pixel value to linear irradiance.
    pub fn inverse(&self, z: f64) -> f64 {
        let z = z.clamp(0.0, 1.0);
        if self.gamma == 1.0 {
            z
        } else {
            z.powf(self.gamma)
        }
    }

    /// Derivative of [`Crf::inverse`] with respect to `z`.
    pub fn inverse_derivative(&self, z: f64) -> f64 {
        if self.gamma == 1.0 {
            1.0
        } else {
            let z = z.clamp(1e-12, 1.0);
            self.gamma * z.powf(self.gamma - 1.0)
        }
    }
}

impl Default for Crf {
    fn default() -> Self {
        Self { gamma: 2.2 }
    }
}

/// Response curves of the two cameras.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrfPair {
    pub well: Crf,
    pub fast: Crf,
}

impl CrfPair {
    pub fn shared(crf: Crf) -> Self {
        Self {
            well: crf,
            fast: crf,
        }
    }
}

/// Least-squares gamma from `(linear reflectance, observed pixel)` pairs.
///
/// Golden-section search on `ln(gamma)` over `[ln 1, ln 4]`.
pub fn fit_gamma(pairs: &[(f64, f64)]) -> Result<Crf> {
    if pairs.len() < 3 {
        return Err(Error::DegenerateCalibration(format!(
            "need at least 3 pairs, got {}",
            pairs.len()
        )));
    }
    if let Some((p, z)) = pairs
        .iter()
        .find(|(p, z)| !(*p > 0.0 && *p < 1.0 && *z > 0.0 && *z < 1.0))
    {
        return Err(Error::DegenerateCalibration(format!(
            "pair ({p}, {z}) outside the open unit interval"
        )));
    }
    let (p0, _) = pairs[0];
    if pairs.iter().all(|(p, _)| (*p - p0).abs() < 1e-12) {
        return Err(Error::DegenerateCalibration(
            "all reflectances are equal".into(),
        ));
    }

    let cost = |log_gamma: f64| {
        let inv = (-log_gamma).exp();
        pairs
            .iter()
            .map(|(p, z)| (p.powf(inv) - z).powi(2))
            .sum::<f64>()
    };

    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (GAMMA_SEARCH_MIN.ln(), GAMMA_SEARCH_MAX.ln());
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (cost(c), cost(d));
    while (b - a).abs() > GAMMA_SEARCH_TOL {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = cost(d);
        }
    }
    Crf::new((0.5 * (a + b)).exp())
}

/// Maps an LDR image to linear values in `[0, 1]` through the inverse CRF.
pub fn linearize(img: &ImageBuffer, crf: &Crf) -> Result<ImageBuffer> {
    if img.kind() != ImageKind::Ldr {
        return Err(Error::Invalid("linearize expects an LDR image".into()));
    }
    if crf.gamma == 1.0 {
        return Ok(img.map(ImageKind::Hdr, |z| z));
    }
    Ok(img.map(ImageKind::Hdr, |z| crf.inverse(z as f64) as f32))
}

/// Simulates a capture: `z = f(clamp(scale * r, 0, 1))`.
pub fn expose(hdr: &ImageBuffer, exposure_scale: f64, crf: &Crf) -> Result<ImageBuffer> {
    if !(exposure_scale > 0.0) {
        return Err(Error::Invalid(format!(
            "exposure scale must be positive, got {exposure_scale}"
        )));
    }
    Ok(hdr.map(ImageKind::Ldr, |r| {
        crf.forward(exposure_scale * r as f64) as f32
    }))
}
