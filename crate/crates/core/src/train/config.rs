use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    /// Stage 1 fits density and the well head; stage 2 adds the fast head.
    TwoStage,
    /// Every group on both targets from the first iteration.
    OneStep,
    /// Two stages with the loss taken on linearized values.
    LinearizeBefore,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningRates {
    /// Feature grids (shared group).
    pub grid: f64,
    /// Density and embedding head (shared group).
    pub density: f64,
    pub well: f64,
    pub fast: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            grid: 1e-2,
            density: 1e-3,
            well: 1e-3,
            fast: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub iters_stage1: u64,
    pub iters_stage2: u64,
    pub batch_rays: usize,
    /// Samples per ray while training (stratified).
    pub n_samples: usize,
    pub learning_rates: LearningRates,
    /// Multiplier on the shared and well rates during stage 2.
    pub finetune_factor: f64,
    /// Cosine decay floor as a fraction of the base rate.
    pub min_lr_fraction: f64,
    pub adam: AdamConfig,
    pub mode: TrainMode,
    pub seed: u64,
    /// Closest sample distance from the camera.
    pub near: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iters_stage1: 30_000,
            iters_stage2: 30_000,
            batch_rays: 4096,
            n_samples: 96,
            learning_rates: LearningRates::default(),
            finetune_factor: 0.1,
            min_lr_fraction: 0.1,
            adam: AdamConfig::default(),
            mode: TrainMode::TwoStage,
            seed: 0,
            near: crate::render::DEFAULT_NEAR,
        }
    }
}

impl TrainConfig {
    pub fn total_iterations(&self) -> u64 {
        self.iters_stage1 + self.iters_stage2
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.iters_stage1 == 0 || self.iters_stage2 == 0 {
            return bad("iteration counts must be positive");
        }
        if self.batch_rays == 0 || self.n_samples == 0 {
            return bad("batch_rays and n_samples must be positive");
        }
        let lr = &self.learning_rates;
        for v in [lr.grid, lr.density, lr.well, lr.fast, self.finetune_factor] {
            if !(v > 0.0 && v.is_finite()) {
                return bad("learning rates and finetune_factor must be positive");
            }
        }
        if !(0.0..=1.0).contains(&self.min_lr_fraction) {
            return bad("min_lr_fraction must lie in [0, 1]");
        }
        let a = &self.adam;
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.eps > 0.0) {
            return bad("adam betas must lie in [0, 1) and eps must be positive");
        }
        if !(self.near >= 0.0 && self.near.is_finite()) {
            return bad("near must be nonnegative");
        }
        Ok(())
    }
}
