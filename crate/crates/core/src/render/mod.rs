//! Differentiable volume rendering along rays.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldSample, FieldTape, Gradients, Heads, RadianceFieldParams, SampleGrad};
use crate::geometry::{EquirectCamera, Ray, Vec3};
use crate::imaging::{ImageBuffer, ImageKind};

/// Closest sample distance for rays cast from a camera.
pub const DEFAULT_NEAR: f64 = 0.05;

/// Rays per work unit. Fixed so that gradient reduction order does not
/// depend on the thread count.
const CHUNK: usize = 64;

/// Which heads a render evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderMode {
    WellOnly,
    /// Fast head only; `z_well` is left at zero. Used for fast-exposure
    /// supervision where the well prediction would be discarded.
    FastOnly,
    Both,
}

impl RenderMode {
    fn heads(self) -> Heads {
        match self {
            RenderMode::WellOnly => Heads::Well,
            RenderMode::FastOnly => Heads::Fast,
            RenderMode::Both => Heads::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderOptions {
    pub n_samples: usize,
    /// Jitter one sample per bin, seeded per ray from `seed`.
    pub stratified: bool,
    pub seed: u64,
}

impl RenderOptions {
    pub fn uniform(n_samples: usize) -> Self {
        Self {
            n_samples,
            stratified: false,
            seed: 0,
        }
    }

    pub fn stratified(n_samples: usize, seed: u64) -> Self {
        Self {
            n_samples,
            stratified: true,
            seed,
        }
    }
}

/// Sample distances and interval lengths on `[t_near, t_far]`.
///
/// The interval is split into `n` equal bins; each bin contributes its
/// midpoint, or one jittered point when `stratified`. Interval lengths are
/// gaps to the next sample, the last one closing at `t_far`.
pub fn sample_points(
    t_near: f64,
    t_far: f64,
    n: usize,
    stratified: bool,
    seed: u64,
) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    let mut rng = stratified.then(|| ChaCha8Rng::seed_from_u64(seed));
    sample_into(t_near, t_far, n, rng.as_mut(), &mut out);
    out
}

fn sample_into(
    t_near: f64,
    t_far: f64,
    n: usize,
    mut rng: Option<&mut ChaCha8Rng>,
    out: &mut Vec<(f64, f64)>,
) {
    out.clear();
    let step = (t_far - t_near) / n as f64;
    for i in 0..n {
        let u = match rng.as_deref_mut() {
            Some(r) => r.gen::<f64>(),
            None => 0.5,
        };
        out.push((t_near + (i as f64 + u) * step, 0.0));
    }
    for i in 0..n {
        let next = if i + 1 < n { out[i + 1].0 } else { t_far };
        out[i].1 = next - out[i].0;
    }
}

/// Composited prediction for one ray.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RayPrediction {
    pub z_well: [f64; 3],
    pub z_fast: [f64; 3],
    pub accumulated_opacity: f64,
    pub depth: f64,
}

const DEPTH_EPS: f64 = 1e-6;

/// Alpha-composites samples ordered by distance. `ts` holds `(t, delta)`.
pub fn composite(samples: &[FieldSample], ts: &[(f64, f64)]) -> RayPrediction {
    let mut out = RayPrediction::default();
    let mut trans = 1.0;
    let mut depth = 0.0;
    for (s, &(t, delta)) in samples.iter().zip(ts) {
        let keep = (-s.density * delta).exp();
        let w = trans * (1.0 - keep);
        for c in 0..3 {
            out.z_well[c] += w * s.color_well[c];
            out.z_fast[c] += w * s.color_fast[c];
        }
        out.accumulated_opacity += w;
        depth += w * t;
        trans *= keep;
    }
    out.depth = depth / out.accumulated_opacity.max(DEPTH_EPS);
    out
}

/// Gradient of a loss with respect to each sample, given the loss gradient
/// with respect to the composited colors and opacity. Depth is treated as
/// an output only.
pub fn composite_backward(
    samples: &[FieldSample],
    ts: &[(f64, f64)],
    d_well: [f64; 3],
    d_fast: [f64; 3],
    d_acc: f64,
    out: &mut Vec<SampleGrad>,
) {
    let n = samples.len();
    out.clear();
    out.resize(n, SampleGrad::default());
    let g = |s: &FieldSample| {
        (0..3)
            .map(|c| d_well[c] * s.color_well[c] + d_fast[c] * s.color_fast[c])
            .sum::<f64>()
            + d_acc
    };
    // Forward sweep for transmittance after each sample and the weights.
    let mut trans = 1.0;
    let mut after = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for (i, (s, &(_, delta))) in samples.iter().zip(ts).enumerate() {
        let keep = (-s.density * delta).exp();
        weights[i] = trans * (1.0 - keep);
        trans *= keep;
        after[i] = trans;
    }
    let mut suffix = 0.0;
    for i in (0..n).rev() {
        let s = &samples[i];
        let gi = g(s);
        let w = weights[i];
        let grad = &mut out[i];
        grad.density = ts[i].1 * (after[i] * gi - suffix);
        for c in 0..3 {
            grad.color_well[c] = w * d_well[c];
            grad.color_fast[c] = w * d_fast[c];
        }
        suffix += w * gi;
    }
}

/// A batch of rays with optional supervision.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RayBatch {
    pub origins: Vec<Vec3>,
    pub directions: Vec<Vec3>,
    pub t_near: Vec<f64>,
    pub t_far: Vec<f64>,
    pub target_well: Option<Vec<[f64; 3]>>,
    pub target_fast: Option<Vec<[f64; 3]>>,
    pub valid: Vec<bool>,
}

impl RayBatch {
    /// Rays clipped to `bounds`, starting no closer than `near`. Rays that
    /// miss the box are marked invalid.
    pub fn from_rays(rays: &[Ray], bounds: &crate::field::Aabb, near: f64) -> Self {
        let mut b = RayBatch::default();
        for r in rays {
            b.push(r, bounds, near, true);
        }
        b
    }

    pub fn push(&mut self, ray: &Ray, bounds: &crate::field::Aabb, near: f64, valid: bool) {
        let range = bounds
            .intersect(&ray.origin, &ray.direction)
            .map(|(t0, t1)| (t0.max(near), t1))
            .filter(|(t0, t1)| t1 > t0);
        let (t0, t1) = range.unwrap_or((near, near + 1.0));
        self.origins.push(ray.origin);
        self.directions.push(ray.direction);
        self.t_near.push(t0);
        self.t_far.push(t1);
        self.valid.push(valid && range.is_some());
    }

    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let lens = [
            self.directions.len(),
            self.t_near.len(),
            self.t_far.len(),
            self.valid.len(),
        ];
        if lens.iter().any(|&l| l != n)
            || self.target_well.as_ref().is_some_and(|t| t.len() != n)
            || self.target_fast.as_ref().is_some_and(|t| t.len() != n)
        {
            return Err(Error::DimensionMismatch(
                "ray batch fields differ in length".into(),
            ));
        }
        for i in 0..n {
            if self.valid[i] && !(self.t_far[i] > self.t_near[i]) {
                return Err(Error::Invalid(format!("ray {i} has t_near >= t_far")));
            }
        }
        Ok(())
    }
}

/// Per-ray predictions for a batch. Invalid rays hold zeros.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RenderOutput {
    pub z_well: Vec<[f64; 3]>,
    pub z_fast: Option<Vec<[f64; 3]>>,
    pub accumulated_opacity: Vec<f64>,
    pub depth: Vec<f64>,
}

impl RenderOutput {
    fn from_predictions(preds: Vec<RayPrediction>, mode: RenderMode) -> Self {
        Self {
            z_well: preds.iter().map(|p| p.z_well).collect(),
            z_fast: (mode != RenderMode::WellOnly)
                .then(|| preds.iter().map(|p| p.z_fast).collect()),
            accumulated_opacity: preds.iter().map(|p| p.accumulated_opacity).collect(),
            depth: preds.iter().map(|p| p.depth).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.z_well.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_well.is_empty()
    }
}

/// Loss gradient with respect to one ray's composited colors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RayUpstream {
    pub d_well: [f64; 3],
    pub d_fast: [f64; 3],
}

#[derive(Default)]
struct Scratch {
    tape: FieldTape,
    ts: Vec<(f64, f64)>,
    points: Vec<Vec3>,
    grads: Vec<SampleGrad>,
}

fn render_ray(
    params: &RadianceFieldParams,
    batch: &RayBatch,
    i: usize,
    opts: &RenderOptions,
    heads: Heads,
    s: &mut Scratch,
) -> RayPrediction {
    let mut rng = opts.stratified.then(|| {
        let mut r = ChaCha8Rng::seed_from_u64(opts.seed);
        r.set_stream(i as u64);
        r
    });
    sample_into(
        batch.t_near[i],
        batch.t_far[i],
        opts.n_samples,
        rng.as_mut(),
        &mut s.ts,
    );
    let (o, d) = (batch.origins[i], batch.directions[i]);
    s.points.clear();
    s.points.extend(s.ts.iter().map(|&(t, _)| o + d * t));
    let samples = params.record(&mut s.tape, &s.points, &d, heads);
    composite(samples, &s.ts)
}

/// Renders every valid ray of `batch`.
pub fn render_batch(
    params: &RadianceFieldParams,
    batch: &RayBatch,
    opts: &RenderOptions,
    mode: RenderMode,
) -> Result<RenderOutput> {
    batch.validate()?;
    let heads = mode.heads();
    let idx: Vec<usize> = (0..batch.len()).collect();
    let preds: Vec<RayPrediction> = idx
        .par_chunks(CHUNK)
        .flat_map_iter(|chunk| {
            let mut s = Scratch::default();
            chunk
                .iter()
                .map(|&i| {
                    if batch.valid[i] {
                        render_ray(params, batch, i, opts, heads, &mut s)
                    } else {
                        RayPrediction::default()
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(RenderOutput::from_predictions(preds, mode))
}

/// Renders `batch` and backpropagates a per-ray loss gradient.
///
/// `upstream` maps a ray index and its prediction to the loss gradient with
/// respect to that ray's colors; it is only called for valid rays. The
/// returned dense gradient is laid out like the parameters and reduced in a
/// fixed order, so it is bit-identical for any thread count.
pub fn render_batch_with_grad<F>(
    params: &RadianceFieldParams,
    batch: &RayBatch,
    opts: &RenderOptions,
    mode: RenderMode,
    upstream: F,
    dense_grad: &mut [f64],
) -> Result<RenderOutput>
where
    F: Fn(usize, &RayPrediction) -> RayUpstream + Sync,
{
    batch.validate()?;
    if dense_grad.len() != params.len() {
        return Err(Error::DimensionMismatch(format!(
            "gradient buffer of {} for {} parameters",
            dense_grad.len(),
            params.len()
        )));
    }
    let heads = mode.heads();
    let idx: Vec<usize> = (0..batch.len()).collect();
    let parts: Vec<Result<(Vec<RayPrediction>, Gradients)>> = idx
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut s = Scratch::default();
            let mut grads = Gradients::new(params);
            let mut preds = Vec::with_capacity(chunk.len());
            for &i in chunk {
                if !batch.valid[i] {
                    preds.push(RayPrediction::default());
                    continue;
                }
                let pred = render_ray(params, batch, i, opts, heads, &mut s);
                let up = upstream(i, &pred);
                let d_well = if heads.well() { up.d_well } else { [0.0; 3] };
                let d_fast = if heads.fast() { up.d_fast } else { [0.0; 3] };
                composite_backward(s.tape.samples(), &s.ts, d_well, d_fast, 0.0, &mut s.grads);
                params.backward(&s.tape, &s.grads, &mut grads)?;
                preds.push(pred);
            }
            Ok((preds, grads))
        })
        .collect();
    let mut preds = Vec::with_capacity(batch.len());
    for part in parts {
        let (p, g) = part?;
        g.add_to(params, dense_grad);
        preds.extend(p);
    }
    Ok(RenderOutput::from_predictions(preds, mode))
}

/// Renders both heads over every pixel of an equirectangular camera with
/// uniform sampling.
pub fn render_panorama(
    params: &RadianceFieldParams,
    cam: &EquirectCamera,
    n_samples: usize,
) -> Result<(ImageBuffer, ImageBuffer)> {
    let (w, h) = (cam.width(), cam.height());
    let mut batch = RayBatch::default();
    let bounds = params.config().bounds;
    for v in 0..h {
        for u in 0..w {
            batch.push(
                &cam.ray_unchecked(u as f64, v as f64),
                &bounds,
                DEFAULT_NEAR,
                true,
            );
        }
    }
    let out = render_batch(
        params,
        &batch,
        &RenderOptions::uniform(n_samples),
        RenderMode::Both,
    )?;
    let to_image = |z: &[[f64; 3]]| {
        let data = z
            .iter()
            .flat_map(|c| c.map(|v| v.clamp(0.0, 1.0) as f32))
            .collect();
        ImageBuffer::from_data(w, h, ImageKind::Ldr, data)
    };
    let well = to_image(&out.z_well)?;
    let fast = to_image(out.z_fast.as_deref().unwrap_or(&[]))?;
    Ok((well, fast))
}

#[cfg(test)]
mod tests;
