//! PU21 perceptually uniform encoding of absolute luminance.

use crate::error::{Error, Result};
use crate::imaging::{ImageBuffer, ImageKind};

/// Published PU21 "banding + glare" fit.
pub const PU21_BANDING_GLARE: [f64; 7] = [
    0.353487901,
    0.3734658629,
    8.277049286e-05,
    0.9062562627,
    0.09150303166,
    0.9099517204,
    596.3148142,
];

/// Valid luminance domain of the encoding, in cd/m².
pub const PU_MIN_LUMINANCE: f64 = 0.005;
pub const PU_MAX_LUMINANCE: f64 = 10_000.0;

/// Luminance that the reference median is mapped to by default.
pub const DEFAULT_MEDIAN_LUMINANCE: f64 = 100.0;

/// Encodes one absolute luminance value.
pub fn pu21(y: f64) -> f64 {
    let p = &PU21_BANDING_GLARE;
    let y = y.clamp(PU_MIN_LUMINANCE, PU_MAX_LUMINANCE);
    let yp = y.powf(p[3]);
    let v = p[6] * (((p[0] + p[1] * yp) / (1.0 + p[2] * yp)).powf(p[4]) - p[5]);
    v.max(0.0)
}

/// Largest encoded value, reached at [`PU_MAX_LUMINANCE`].
pub fn pu_peak() -> f64 {
    pu21(PU_MAX_LUMINANCE)
}

/// Applies [`pu21`] per channel after multiplying by `scale` (cd/m² per unit
/// of radiance).
pub fn pu_encode(img: &ImageBuffer, scale: f64) -> Result<ImageBuffer> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Invalid(format!(
            "luminance scale must be positive, got {scale}"
        )));
    }
    Ok(img.map(ImageKind::Hdr, |v| pu21(scale * v as f64) as f32))
}

/// Scale that maps the median Rec.709 luminance of the valid pixels of `img`
/// to `target` cd/m².
pub fn median_scale(img: &ImageBuffer, target: f64) -> Result<f64> {
    let mut lum: Vec<f64> = img
        .pixels()
        .enumerate()
        .filter(|(i, _)| img.is_valid_index(*i))
        .map(|(_, p)| super::luma(p))
        .collect();
    if lum.is_empty() {
        return Err(Error::Invalid("no valid pixels".into()));
    }
    lum.sort_by(f64::total_cmp);
    let n = lum.len();
    let median = if n % 2 == 1 {
        lum[n / 2]
    } else {
        0.5 * (lum[n / 2 - 1] + lum[n / 2])
    };
    if !(median > 0.0) {
        return Err(Error::Invalid("median luminance is not positive".into()));
    }
    Ok(target / median)
}
