//! Two-stage optimization of the radiance field on a capture dataset.

mod adam;
mod checkpoint;
mod config;
mod dataset;
mod loss;

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::Adam;
pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use config::{AdamConfig, LearningRates, TrainConfig, TrainMode};
#[allow(unused_imports)]
pub(crate) use dataset::{create_dir, read_json, write_json};
pub use dataset::{CameraRole, CaptureDataset, Frame, Meta, PoseFile, PoseRecord};
pub use loss::{photometric_loss, LossSpace, PhotometricLoss};

use crate::error::{Error, Result};
use crate::field::{Aabb, FieldConfig, Heads, RadianceFieldParams};
use crate::geometry::{EquirectCamera, Ray};
use crate::imaging::{linearize, merge_hdr, CrfPair, ExposureFactor, MergeThresholds, MergedHdr};
use crate::render::{
    render_batch, render_batch_with_grad, render_panorama, RayBatch, RayPrediction, RayUpstream,
    RenderMode, RenderOptions, DEFAULT_NEAR,
};
use loss::channel_term;

/// Parameter groups as Adam sees them: grids and the density head make up
/// the shared group but keep separate learning rates.
const GROUP_GRID: usize = 0;
const GROUP_DENSITY: usize = 1;
const GROUP_WELL: usize = 2;
const GROUP_FAST: usize = 3;

/// One row of the training log. Stage 0 marks joint (one-step) training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub iteration: u64,
    pub stage: u8,
    pub loss_well: Option<f64>,
    pub loss_fast: Option<f64>,
    pub wall_ms: u64,
}

pub fn write_log_csv(path: &Path, log: &[LogEntry]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
    for row in log {
        w.serialize(row).map_err(|e| Error::format(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_log_csv(path: &Path) -> Result<Vec<LogEntry>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::format(path, e)))
        .collect()
}

/// Field configuration with the dataset's scene box, when it declares one.
pub fn field_config_for(dataset: &CaptureDataset, field: &FieldConfig) -> FieldConfig {
    FieldConfig {
        bounds: dataset.bounds.unwrap_or(field.bounds),
        ..field.clone()
    }
}

struct Pools {
    /// `(frame, pixel)` of every valid well pixel, then every valid fast pixel.
    well: Vec<(u32, u32)>,
    fast: Vec<(u32, u32)>,
}

fn valid_pixels(frames: &[Frame]) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for (f, frame) in frames.iter().enumerate() {
        for p in 0..frame.image.pixel_count() {
            if frame.image.is_valid_index(p) {
                out.push((f as u32, p as u32));
            }
        }
    }
    out
}

/// Stateful trainer; `run_until` can be called repeatedly and the state
/// saved and restored through [`Checkpoint`] without changing the result.
pub struct Trainer<'a> {
    dataset: &'a CaptureDataset,
    config: TrainConfig,
    params: RadianceFieldParams,
    adam: Adam,
    iteration: u64,
    pools: Pools,
    cams_well: Vec<EquirectCamera>,
    cams_fast: Vec<EquirectCamera>,
    log: Vec<LogEntry>,
    grad: Vec<f64>,
    started: Instant,
}

impl<'a> Trainer<'a> {
    /// Fresh parameters initialized from `config.seed`. The dataset bounds,
    /// when present, replace the field's bounds.
    pub fn new(
        dataset: &'a CaptureDataset,
        field: &FieldConfig,
        config: TrainConfig,
    ) -> Result<Self> {
        let params = RadianceFieldParams::init(field_config_for(dataset, field), config.seed)?;
        Self::with_state(dataset, params, config, 0, None)
    }

    pub fn resume(dataset: &'a CaptureDataset, ckpt: Checkpoint) -> Result<Self> {
        Self::with_state(
            dataset,
            ckpt.params,
            ckpt.train_config,
            ckpt.iteration,
            ckpt.optimizer,
        )
    }

    fn with_state(
        dataset: &'a CaptureDataset,
        params: RadianceFieldParams,
        config: TrainConfig,
        iteration: u64,
        adam: Option<Adam>,
    ) -> Result<Self> {
        config.validate()?;
        dataset.validate()?;
        let adam = adam.unwrap_or_else(|| Adam::new(config.adam, params.len(), 4));
        if adam.m.len() != params.len() || adam.steps.len() != 4 {
            return Err(Error::Invalid(
                "optimizer state does not match the parameters".into(),
            ));
        }
        let pools = Pools {
            well: valid_pixels(&dataset.well_frames),
            fast: valid_pixels(&dataset.fast_frames),
        };
        if pools.well.is_empty() || pools.fast.is_empty() {
            return Err(Error::Invalid("dataset has no valid pixels".into()));
        }
        let (w, h) = dataset.dims();
        let cams = |frames: &[Frame]| {
            frames
                .iter()
                .map(|f| EquirectCamera::new(w, h, f.pose))
                .collect::<Result<Vec<_>>>()
        };
        Ok(Self {
            cams_well: cams(&dataset.well_frames)?,
            cams_fast: cams(&dataset.fast_frames)?,
            grad: vec![0.0; params.len()],
            dataset,
            config,
            params,
            adam,
            iteration,
            pools,
            log: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn params(&self) -> &RadianceFieldParams {
        &self.params
    }

    pub fn into_params(self) -> RadianceFieldParams {
        self.params
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            params: self.params.clone(),
            train_config: self.config.clone(),
            iteration: self.iteration,
            optimizer: Some(self.adam.clone()),
        }
    }

    /// Stage of 0-based iteration `i`.
    pub fn stage_of(&self, i: u64) -> u8 {
        match self.config.mode {
            TrainMode::OneStep => 0,
            _ if i < self.config.iters_stage1 => 1,
            _ => 2,
        }
    }

    /// Learning rates for `[grid, density, well, fast]` at iteration `i`;
    /// zero for groups that are frozen.
    pub fn learning_rates(&self, i: u64) -> [f64; 4] {
        let c = &self.config;
        let lr = &c.learning_rates;
        let base = [lr.grid, lr.density, lr.well, lr.fast];
        let cosine = |k: u64, len: u64| {
            let x = k as f64 / len as f64;
            c.min_lr_fraction
                + (1.0 - c.min_lr_fraction) * 0.5 * (1.0 + (std::f64::consts::PI * x).cos())
        };
        match self.stage_of(i) {
            0 => base.map(|b| b * cosine(i, c.total_iterations())),
            1 => {
                let s = cosine(i, c.iters_stage1);
                [base[0] * s, base[1] * s, base[2] * s, 0.0]
            }
            _ => {
                let s = cosine(i - c.iters_stage1, c.iters_stage2);
                let f = c.finetune_factor;
                [
                    base[0] * s * f,
                    base[1] * s * f,
                    base[2] * s * f,
                    base[3] * s,
                ]
            }
        }
    }

    fn group_ranges(&self) -> [std::ops::Range<usize>; 4] {
        let part = self.params.partition();
        let g = self.params.grid_param_count();
        [0..g, g..part.shared.end, part.well, part.fast]
    }

    fn loss_space(&self) -> LossSpace {
        match self.config.mode {
            TrainMode::LinearizeBefore => LossSpace::Linear(self.dataset.crf),
            _ => LossSpace::Display,
        }
    }

    fn build_batch(&self, picks: &[(u32, u32)], role: CameraRole) -> RayBatch {
        let (frames, cams) = match role {
            CameraRole::Well => (&self.dataset.well_frames, &self.cams_well),
            CameraRole::Fast => (&self.dataset.fast_frames, &self.cams_fast),
        };
        let bounds: Aabb = self.params.config().bounds;
        let w = self.dataset.dims().0;
        let mut batch = RayBatch::default();
        let mut targets = Vec::with_capacity(picks.len());
        for &(f, p) in picks {
            let (u, v) = (p as usize % w, p as usize / w);
            batch.push(
                &cams[f as usize].ray_unchecked(u as f64, v as f64),
                &bounds,
                self.config.near,
                true,
            );
            targets.push(frames[f as usize].image.get(u, v).map(|c| c as f64));
        }
        match role {
            CameraRole::Well => batch.target_well = Some(targets),
            CameraRole::Fast => batch.target_fast = Some(targets),
        }
        batch
    }

    /// One optimization step on iteration `self.iteration`.
    fn step(&mut self) -> Result<()> {
        let i = self.iteration;
        let stage = self.stage_of(i);
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(i);
        let render_seed: u64 = rng.gen();
        let (nw, nf) = (self.pools.well.len(), self.pools.fast.len());
        let use_fast = stage != 1;
        let pool_size = if use_fast { nw + nf } else { nw };
        let mut well_picks = Vec::new();
        let mut fast_picks = Vec::new();
        for _ in 0..self.config.batch_rays {
            let k = rng.gen_range(0..pool_size);
            if k < nw {
                well_picks.push(self.pools.well[k]);
            } else {
                fast_picks.push(self.pools.fast[k - nw]);
            }
        }
        let well_batch = self.build_batch(&well_picks, CameraRole::Well);
        let fast_batch = self.build_batch(&fast_picks, CameraRole::Fast);
        let count = 3 * (well_batch.valid_count() + fast_batch.valid_count());
        if count == 0 {
            return Err(Error::EmptyBatch);
        }
        let count = count as f64;
        let space = self.loss_space();
        self.grad.iter_mut().for_each(|g| *g = 0.0);

        let mut sums = [0.0f64; 2];
        for (k, (batch, mode)) in [
            (&well_batch, RenderMode::WellOnly),
            (&fast_batch, RenderMode::FastOnly),
        ]
        .into_iter()
        .enumerate()
        {
            if batch.valid_count() == 0 {
                continue;
            }
            let heads = if k == 0 { Heads::Well } else { Heads::Fast };
            let crf = space.crf(heads);
            let targets = if k == 0 {
                &batch.target_well
            } else {
                &batch.target_fast
            };
            let targets = targets.as_ref().unwrap();
            let upstream = |r: usize, p: &RayPrediction| {
                let z = if k == 0 { p.z_well } else { p.z_fast };
                let d =
                    [0, 1, 2].map(|c| channel_term(z[c], targets[r][c], crf.as_ref()).1 / count);
                if k == 0 {
                    RayUpstream {
                        d_well: d,
                        d_fast: [0.0; 3],
                    }
                } else {
                    RayUpstream {
                        d_well: [0.0; 3],
                        d_fast: d,
                    }
                }
            };
            let opts = RenderOptions::stratified(
                self.config.n_samples,
                render_seed.wrapping_add(k as u64),
            );
            let out =
                render_batch_with_grad(&self.params, batch, &opts, mode, upstream, &mut self.grad)?;
            let z = if k == 0 {
                &out.z_well
            } else {
                out.z_fast.as_ref().unwrap()
            };
            for r in (0..batch.len()).filter(|&r| batch.valid[r]) {
                for c in 0..3 {
                    sums[k] += channel_term(z[r][c], targets[r][c], crf.as_ref()).0;
                }
            }
        }
        let lrs = self.learning_rates(i);
        let loss = (sums[0] + sums[1]) / count;
        let mean =
            |s: f64, b: &RayBatch| (b.valid_count() > 0).then(|| s / (3 * b.valid_count()) as f64);
        let diverged = || Error::Diverged {
            iteration: i,
            stage,
            lr_shared: lrs[GROUP_GRID],
            lr_well: lrs[GROUP_WELL],
            lr_fast: lrs[GROUP_FAST],
        };
        if !loss.is_finite() {
            return Err(diverged());
        }
        let ranges = self.group_ranges();
        for g in [GROUP_GRID, GROUP_DENSITY, GROUP_WELL, GROUP_FAST] {
            if lrs[g] > 0.0 {
                self.adam.step_group(
                    g,
                    ranges[g].clone(),
                    lrs[g],
                    self.params.values_mut(),
                    &self.grad,
                );
            }
        }
        if !self.params.is_finite() {
            return Err(diverged());
        }
        self.log.push(LogEntry {
            iteration: i,
            stage,
            loss_well: mean(sums[0], &well_batch),
            loss_fast: mean(sums[1], &fast_batch),
            wall_ms: self.started.elapsed().as_millis() as u64,
        });
        self.iteration += 1;
        Ok(())
    }

    /// Trains until `until` iterations (capped at the configured total)
    /// have completed.
    pub fn run_until(&mut self, until: u64) -> Result<()> {
        let until = until.min(self.config.total_iterations());
        while self.iteration < until {
            self.step()?;
            if log::log_enabled!(log::Level::Debug) || self.iteration % 500 == 0 {
                let e = self.log.last().unwrap();
                log::info!(
                    "iter {} stage {} loss_well {:?} loss_fast {:?}",
                    e.iteration,
                    e.stage,
                    e.loss_well,
                    e.loss_fast
                );
            }
        }
        Ok(())
    }

    pub fn run(&mut self) -> Result<()> {
        self.run_until(self.config.total_iterations())
    }
}

/// Trained parameters and the per-iteration log.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: RadianceFieldParams,
    pub log: Vec<LogEntry>,
}

pub fn train(
    dataset: &CaptureDataset,
    field: &FieldConfig,
    config: &TrainConfig,
) -> Result<TrainOutput> {
    let mut t = Trainer::new(dataset, field, config.clone())?;
    t.run()?;
    let log = t.log.clone();
    Ok(TrainOutput {
        params: t.into_params(),
        log,
    })
}

/// Renders both heads at `cam`, linearizes them and fuses them into HDR.
pub fn recover_hdr_panorama(
    params: &RadianceFieldParams,
    cam: &EquirectCamera,
    crf: &CrfPair,
    factor: ExposureFactor,
    n_samples: usize,
) -> Result<MergedHdr> {
    let (well, fast) = render_panorama(params, cam, n_samples)?;
    merge_hdr(
        &linearize(&well, &crf.well)?,
        &linearize(&fast, &crf.fast)?,
        factor,
        &MergeThresholds::default(),
    )
}

/// Fused HDR radiance along individual rays, with a hole flag per ray.
pub fn recover_hdr_rays(
    params: &RadianceFieldParams,
    rays: &[Ray],
    crf: &CrfPair,
    factor: ExposureFactor,
    n_samples: usize,
) -> Result<Vec<([f64; 3], bool)>> {
    let bounds = params.config().bounds;
    let mut batch = RayBatch::default();
    for r in rays {
        batch.push(r, &bounds, DEFAULT_NEAR, true);
    }
    let out = render_batch(
        params,
        &batch,
        &RenderOptions::uniform(n_samples),
        RenderMode::Both,
    )?;
    let fast = out.z_fast.unwrap_or_default();
    let th = MergeThresholds::default();
    Ok(out
        .z_well
        .iter()
        .zip(&fast)
        .map(|(zw, zf)| {
            let mut hole = false;
            let rgb = [0, 1, 2].map(|c| {
                let pw = crf.well.inverse(zw[c].clamp(0.0, 1.0));
                let pf = crf.fast.inverse(zf[c].clamp(0.0, 1.0));
                let (r, h) = th.merge_value(pw, pf, factor.value());
                hole |= h;
                r
            });
            (rgb, hole)
        })
        .collect())
}

#[cfg(test)]
mod tests;
