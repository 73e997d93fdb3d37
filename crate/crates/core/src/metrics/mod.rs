//! Image quality metrics for LDR and HDR panoramas and their renders.
//!
//! Every metric only looks at pixels that are valid in both inputs' masks.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{expose, Crf, ImageBuffer};

mod ibl;
mod pu;

pub use ibl::{render_ibl, IblScene};
pub use pu::{
    median_scale, pu21, pu_encode, pu_peak, DEFAULT_MEDIAN_LUMINANCE, PU21_BANDING_GLARE,
    PU_MAX_LUMINANCE, PU_MIN_LUMINANCE,
};

/// PSNR reported for identical images.
pub const PSNR_CAP: f64 = 99.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;

pub(crate) fn luma(p: &[f32]) -> f64 {
    0.2126 * p[0] as f64 + 0.7152 * p[1] as f64 + 0.0722 * p[2] as f64
}

fn valid_pixels(a: &ImageBuffer, b: &ImageBuffer) -> Result<Vec<bool>> {
    a.check_same_dims(b)?;
    let valid = a
        .intersect_masks(b)
        .unwrap_or_else(|| vec![true; a.pixel_count()]);
    if !valid.iter().any(|v| *v) {
        return Err(Error::Invalid("no valid pixels to compare".into()));
    }
    Ok(valid)
}

fn valid_pairs<'a>(
    a: &'a ImageBuffer,
    b: &'a ImageBuffer,
    valid: &'a [bool],
) -> impl Iterator<Item = (&'a [f32], &'a [f32])> {
    a.pixels()
        .zip(b.pixels())
        .zip(valid)
        .filter(|(_, v)| **v)
        .map(|(p, _)| p)
}

/// Mean squared error over valid pixels and all channels.
pub fn mse(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    let valid = valid_pixels(a, b)?;
    let (mut sum, mut n) = (0.0, 0usize);
    for (pa, pb) in valid_pairs(a, b, &valid) {
        for c in 0..3 {
            let d = pa[c] as f64 - pb[c] as f64;
            sum += d * d;
        }
        n += 3;
    }
    Ok(sum / n as f64)
}

pub fn psnr(a: &ImageBuffer, b: &ImageBuffer, peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(Error::Invalid(format!("peak must be positive, got {peak}")));
    }
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((-10.0 * (m / (peak * peak)).log10()).min(PSNR_CAP))
}

pub fn rmse(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    Ok(mse(a, b)?.sqrt())
}

/// RMSE after scaling `a` by the nonnegative factor that best fits `b`.
/// Not symmetric: the scale is always fitted on the first argument.
pub fn si_rmse(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    let valid = valid_pixels(a, b)?;
    let (mut ab, mut aa) = (0.0, 0.0);
    for (pa, pb) in valid_pairs(a, b, &valid) {
        for c in 0..3 {
            ab += pa[c] as f64 * pb[c] as f64;
            aa += pa[c] as f64 * pa[c] as f64;
        }
    }
    let alpha = if aa > 0.0 { (ab / aa).max(0.0) } else { 0.0 };
    let (mut sum, mut n) = (0.0, 0usize);
    for (pa, pb) in valid_pairs(a, b, &valid) {
        for c in 0..3 {
            let d = alpha * pa[c] as f64 - pb[c] as f64;
            sum += d * d;
        }
        n += 3;
    }
    Ok((sum / n as f64).sqrt())
}

/// Mean angle in degrees between RGB vectors, skipping near-black pixels.
pub fn rgb_angular(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    let valid = valid_pixels(a, b)?;
    let (mut sum, mut n) = (0.0, 0usize);
    for (pa, pb) in valid_pairs(a, b, &valid) {
        let va = [0, 1, 2].map(|c| pa[c] as f64);
        let vb = [0, 1, 2].map(|c| pb[c] as f64);
        let na = va.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = vb.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na < 1e-8 || nb < 1e-8 {
            continue;
        }
        // atan2 of |a x b| and a.b stays accurate near 0 and 180 degrees.
        let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
        let cross = [
            va[1] * vb[2] - va[2] * vb[1],
            va[2] * vb[0] - va[0] * vb[2],
            va[0] * vb[1] - va[1] * vb[0],
        ];
        let cn = cross.iter().map(|x| x * x).sum::<f64>().sqrt();
        sum += cn.atan2(dot).to_degrees();
        n += 1;
    }
    if n == 0 {
        return Err(Error::Invalid(
            "every pixel is black in one of the images".into(),
        ));
    }
    Ok(sum / n as f64)
}

fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-(i as f64 - r).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// SSIM on Rec.709 luma with dynamic range `l`, averaged over the 11x11
/// windows whose pixels are all valid.
fn ssim_range(a: &ImageBuffer, b: &ImageBuffer, l: f64) -> Result<f64> {
    let valid = valid_pixels(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::Invalid(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels"
        )));
    }
    let ya: Vec<f64> = a.pixels().map(luma).collect();
    let yb: Vec<f64> = b.pixels().map(luma).collect();
    // Summed-area table of invalid pixels, to reject windows quickly.
    let mut bad = vec![0u32; (w + 1) * (h + 1)];
    for y in 0..h {
        for x in 0..w {
            bad[(y + 1) * (w + 1) + x + 1] =
                !valid[y * w + x] as u32 + bad[y * (w + 1) + x + 1] + bad[(y + 1) * (w + 1) + x]
                    - bad[y * (w + 1) + x];
        }
    }
    let g = gaussian_window();
    let c1 = (0.01 * l).powi(2);
    let c2 = (0.03 * l).powi(2);
    let k = SSIM_WINDOW;
    let rows: Vec<(f64, usize)> = (0..=h - k)
        .into_par_iter()
        .map(|y0| {
            let (mut sum, mut n) = (0.0, 0usize);
            for x0 in 0..=w - k {
                let at = |y: usize, x: usize| bad[y * (w + 1) + x];
                if at(y0 + k, x0 + k) + at(y0, x0) - at(y0, x0 + k) - at(y0 + k, x0) > 0 {
                    continue;
                }
                let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for (dy, gy) in g.iter().enumerate() {
                    let row = (y0 + dy) * w + x0;
                    for (dx, gx) in g.iter().enumerate() {
                        let wt = gy * gx;
                        let (pa, pb) = (ya[row + dx], yb[row + dx]);
                        ma += wt * pa;
                        mb += wt * pb;
                        saa += wt * pa * pa;
                        sbb += wt * pb * pb;
                        sab += wt * pa * pb;
                    }
                }
                let va = saa - ma * ma;
                let vb = sbb - mb * mb;
                let cov = sab - ma * mb;
                sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                    / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                n += 1;
            }
            (sum, n)
        })
        .collect();
    let (sum, n) = rows.iter().fold((0.0, 0), |(s, m), (a, b)| (s + a, m + b));
    if n == 0 {
        return Err(Error::Invalid("no fully valid SSIM window".into()));
    }
    Ok(sum / n as f64)
}

pub fn ssim(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    ssim_range(a, b, 1.0)
}

/// PSNR of PU-encoded images with the encoded peak. `scale` maps radiance to
/// cd/m².
pub fn pu_psnr(a: &ImageBuffer, b: &ImageBuffer, scale: f64) -> Result<f64> {
    psnr(&pu_encode(a, scale)?, &pu_encode(b, scale)?, pu_peak())
}

pub fn pu_ssim(a: &ImageBuffer, b: &ImageBuffer, scale: f64) -> Result<f64> {
    ssim_range(&pu_encode(a, scale)?, &pu_encode(b, scale)?, pu_peak())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricGroup {
    LdrPano,
    HdrPano,
    HdrRender,
    LdrRender,
}

impl MetricGroup {
    pub const ALL: [MetricGroup; 4] = [
        MetricGroup::LdrPano,
        MetricGroup::HdrPano,
        MetricGroup::HdrRender,
        MetricGroup::LdrRender,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricGroup::LdrPano => "ldr_pano",
            MetricGroup::HdrPano => "hdr_pano",
            MetricGroup::HdrRender => "hdr_render",
            MetricGroup::LdrRender => "ldr_render",
        }
    }

    /// Metrics computed for this group, in report order.
    pub fn metrics(self) -> &'static [&'static str] {
        match self {
            MetricGroup::LdrPano => &["psnr", "ssim"],
            MetricGroup::HdrPano => &["pu_psnr", "pu_ssim"],
            MetricGroup::HdrRender => &["rmse", "si_rmse", "rgb_angular"],
            MetricGroup::LdrRender => &["psnr"],
        }
    }

    /// Columns the report reserves but never fills.
    pub fn absent(self) -> &'static [&'static str] {
        match self {
            MetricGroup::LdrPano => &["lpips"],
            MetricGroup::HdrPano => &["hdr_vdp3"],
            _ => &[],
        }
    }

    /// Parses a comma-separated list. `ldr` and `hdr` name the panorama
    /// groups and `render` both render groups.
    pub fn parse_list(s: &str) -> Result<Vec<MetricGroup>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let add: &[MetricGroup] = match part {
                "ldr" => &[MetricGroup::LdrPano],
                "hdr" => &[MetricGroup::HdrPano],
                "render" => &[MetricGroup::HdrRender, MetricGroup::LdrRender],
                "all" => &MetricGroup::ALL,
                other => &[other.parse()?],
            };
            for g in add {
                if !out.contains(g) {
                    out.push(*g);
                }
            }
        }
        if out.is_empty() {
            return Err(Error::Invalid("no metric groups selected".into()));
        }
        out.sort();
        Ok(out)
    }
}

impl FromStr for MetricGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricGroup::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown metric group '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub groups: BTreeMap<MetricGroup, BTreeMap<String, f64>>,
    /// Columns that are part of the schema but not computed.
    pub absent: Vec<String>,
    /// cd/m² per unit radiance used for the PU metrics.
    pub pu_luminance_scale: Option<f64>,
    /// Tone mapping for the LDR groups: exposure scale and CRF gamma.
    pub ldr_exposure: f64,
    pub ldr_gamma: f64,
    pub valid_pixels: usize,
}

impl MetricReport {
    pub fn get(&self, group: MetricGroup, metric: &str) -> Option<f64> {
        self.groups.get(&group)?.get(metric).copied()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        crate::train::read_json(path)
    }

    /// Aligned plain-text table, one row per metric.
    pub fn to_text(&self) -> String {
        let mut rows = vec![(
            "group".to_string(),
            "metric".to_string(),
            "value".to_string(),
        )];
        for (g, metrics) in &self.groups {
            for name in g.metrics() {
                if let Some(v) = metrics.get(*name) {
                    rows.push((g.name().into(), name.to_string(), format!("{v:.4}")));
                }
            }
            for name in g.absent() {
                rows.push((g.name().into(), name.to_string(), "n/a".into()));
            }
        }
        let w0 = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        let w1 = rows.iter().map(|r| r.1.len()).max().unwrap_or(0);
        let w2 = rows.iter().map(|r| r.2.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (a, b, c) in rows {
            let _ = writeln!(out, "{a:<w0$}  {b:<w1$}  {c:>w2$}");
        }
        if let Some(s) = self.pu_luminance_scale {
            let _ = writeln!(out, "pu luminance scale: {s:.6} cd/m2 per unit");
        }
        let _ = writeln!(
            out,
            "ldr tone map: exposure {} gamma {}",
            self.ldr_exposure, self.ldr_gamma
        );
        out
    }
}

/// Externally produced HDR renders of a virtual scene lit by each panorama.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderPair {
    pub pred: ImageBuffer,
    pub gt: ImageBuffer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub groups: Vec<MetricGroup>,
    /// Tone mapping for the LDR groups.
    pub crf: Crf,
    pub ldr_exposure: f64,
    /// Extra validity mask, e.g. excluding merge holes.
    pub valid: Option<Vec<bool>>,
    /// Fixed cd/m² per unit radiance; by default the reference median maps
    /// to 100 cd/m².
    pub pu_scale: Option<f64>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            groups: MetricGroup::ALL.to_vec(),
            crf: Crf::default(),
            ldr_exposure: 1.0,
            valid: None,
            pu_scale: None,
        }
    }
}

/// Compares a predicted HDR panorama with ground truth. Render groups use
/// `renders` when given and otherwise light the default [`IblScene`] with
/// each panorama.
pub fn evaluate(
    pred: &ImageBuffer,
    gt: &ImageBuffer,
    opts: &EvalOptions,
    renders: Option<&RenderPair>,
) -> Result<MetricReport> {
    pred.check_same_dims(gt)?;
    let mut pred = pred.clone();
    let mut gt = gt.clone();
    if let Some(extra) = &opts.valid {
        if extra.len() != pred.pixel_count() {
            return Err(Error::DimensionMismatch("validity mask size".into()));
        }
        let merged = |img: &ImageBuffer| -> Vec<bool> {
            match img.mask() {
                Some(m) => m.iter().zip(extra).map(|(a, b)| *a && *b).collect(),
                None => extra.clone(),
            }
        };
        pred.set_mask(Some(merged(&pred)))?;
        gt.set_mask(Some(merged(&gt)))?;
    }
    let valid = valid_pixels(&pred, &gt)?;

    let mut groups = BTreeMap::new();
    let mut absent = Vec::new();
    let mut pu_scale = None;
    let mut rendered = None;
    for &g in &opts.groups {
        let mut m = BTreeMap::new();
        match g {
            MetricGroup::LdrPano => {
                let a = expose(&pred, opts.ldr_exposure, &opts.crf)?;
                let b = expose(&gt, opts.ldr_exposure, &opts.crf)?;
                m.insert("psnr".into(), psnr(&a, &b, 1.0)?);
                m.insert("ssim".into(), ssim(&a, &b)?);
            }
            MetricGroup::HdrPano => {
                let s = match opts.pu_scale {
                    Some(s) => s,
                    None => median_scale(&gt, DEFAULT_MEDIAN_LUMINANCE)?,
                };
                pu_scale = Some(s);
                m.insert("pu_psnr".into(), pu_psnr(&pred, &gt, s)?);
                m.insert("pu_ssim".into(), pu_ssim(&pred, &gt, s)?);
            }
            MetricGroup::HdrRender | MetricGroup::LdrRender => {
                let pair = match renders {
                    Some(r) => r,
                    None => rendered.get_or_insert(render_pair(&pred, &gt)?),
                };
                pair.pred.check_same_dims(&pair.gt)?;
                if g == MetricGroup::HdrRender {
                    m.insert("rmse".into(), rmse(&pair.pred, &pair.gt)?);
                    m.insert("si_rmse".into(), si_rmse(&pair.pred, &pair.gt)?);
                    m.insert("rgb_angular".into(), rgb_angular(&pair.pred, &pair.gt)?);
                } else {
                    let a = expose(&pair.pred, opts.ldr_exposure, &opts.crf)?;
                    let b = expose(&pair.gt, opts.ldr_exposure, &opts.crf)?;
                    m.insert("psnr".into(), psnr(&a, &b, 1.0)?);
                }
            }
        }
        absent.extend(g.absent().iter().map(|s| s.to_string()));
        groups.insert(g, m);
    }
    Ok(MetricReport {
        groups,
        absent,
        pu_luminance_scale: pu_scale,
        ldr_exposure: opts.ldr_exposure,
        ldr_gamma: opts.crf.gamma(),
        valid_pixels: valid.iter().filter(|v| **v).count(),
    })
}

fn render_pair(pred: &ImageBuffer, gt: &ImageBuffer) -> Result<RenderPair> {
    let scene = IblScene::default();
    Ok(RenderPair {
        pred: render_ibl(&scene, pred)?,
        gt: render_ibl(&scene, gt)?,
    })
}
