//! The `hdrfield` command-line tool.
//!
//! Every stage reads and writes plain files, so stages can be scripted and
//! tested on their own:
//!
//! ```text
//! hdrfield synth-scene --scene room.toml --frames 60 --factor 250 --out data
//! hdrfield train --config data/run.toml --out run
//! hdrfield render-hdr --checkpoint run/checkpoint.bin --pose 1,0,0,0,2,1.5,1.2 --out pano.pfm
//! hdrfield evaluate --pred run/probes/probe00.pfm --gt data/probes/probe00.pfm --out report.json
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldConfig;
use crate::geometry::{
    apply_relative_pose, estimate_relative_pose, rig_residuals, EquirectCamera, Pose, Quaternion,
    Vec3,
};
use crate::imaging::{fit_gamma, read_mask, read_pfm, write_mask, write_pfm, Crf, ExposureFactor};
use crate::metrics::{evaluate, EvalOptions, MetricGroup};
use crate::synth::{hold_out_probes, make_dataset, make_rig_trajectory, DatasetSpec, SynthScene};
use crate::train::{
    create_dir, read_log_csv, recover_hdr_panorama, write_json, write_log_csv, CameraRole,
    CaptureDataset, Checkpoint, LearningRates, Meta, PoseFile, PoseRecord, TrainConfig, TrainMode,
    Trainer,
};

#[derive(Debug, Parser)]
#[command(
    name = "hdrfield",
    version,
    about = "Dual-exposure radiance fields with HDR recovery"
)]
pub struct Cli {
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// More log output; repeat for debug level.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic dual-exposure dataset and ground-truth probes.
    SynthScene(SynthArgs),
    /// Estimate the rig offset between the two cameras from a pose file.
    EstimateRig(RigArgs),
    /// Fit the camera response gamma from (linear, pixel) pairs.
    CalibrateCrf(CrfArgs),
    /// Train a radiance field on a dataset.
    Train(TrainArgs),
    /// Render a fused HDR panorama and its hole mask at a pose.
    RenderHdr(RenderArgs),
    /// Compare a predicted HDR panorama with ground truth.
    Evaluate(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Training frame pairs.
    #[arg(long)]
    pub frames: usize,
    #[arg(long)]
    pub factor: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Panorama height; width is twice this.
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 2.2)]
    pub gamma: f64,
    /// Held-out probe positions taken from the walk.
    #[arg(long, default_value_t = 6)]
    pub probes: usize,
    /// Closest the walk gets to a wall.
    #[arg(long, default_value_t = 0.5)]
    pub margin: f64,
    #[arg(long, default_value_t = 15.0)]
    pub fps: f64,
}

#[derive(Debug, Args)]
pub struct RigArgs {
    #[arg(long)]
    pub poses: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a pose file whose fast poses are predicted from the well
    /// poses and the estimated offset.
    #[arg(long)]
    pub apply: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CrfArgs {
    /// CSV with a `linear,pixel` header.
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; defaults to `output` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<TrainMode>,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Stop after this many total iterations (the checkpoint can be resumed).
    #[arg(long)]
    pub until: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// `w,x,y,z,tx,ty,tz`: camera-to-world rotation and position.
    #[arg(long, allow_hyphen_values = true)]
    pub pose: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Dataset metadata with the response curves and exposure factor;
    /// defaults to `meta.json` beside the checkpoint.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Panorama height; defaults to the dataset's.
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long, default_value_t = 128)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Comma-separated: ldr, hdr, render, or full group names.
    #[arg(long, default_value = "ldr,hdr")]
    pub groups: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Response curve for the LDR groups comes from here when given.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    #[arg(long, default_value_t = 2.2)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub exposure: f64,
    /// Only pixels set in this mask are compared.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Pixels set in this mask (e.g. from render-hdr) are excluded.
    #[arg(long)]
    pub holes: Option<PathBuf>,
    /// Fixed cd/m² per unit radiance for the PU metrics.
    #[arg(long)]
    pub pu_scale: Option<f64>,
}

fn parse_mode(s: &str) -> std::result::Result<TrainMode, String> {
    match s {
        "two_stage" => Ok(TrainMode::TwoStage),
        "one_step" => Ok(TrainMode::OneStep),
        "linearize_before" => Ok(TrainMode::LinearizeBefore),
        _ => Err(format!(
            "unknown mode '{s}' (two_stage, one_step, linearize_before)"
        )),
    }
}

/// A pose at which the trained field is rendered after training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbePose {
    pub id: String,
    pub q: [f64; 4],
    pub t: [f64; 3],
}

impl ProbePose {
    pub fn new(id: impl Into<String>, pose: &Pose) -> Self {
        let t = pose.translation;
        Self {
            id: id.into(),
            q: pose.rotation.to_array(),
            t: [t.x, t.y, t.z],
        }
    }

    pub fn pose(&self) -> Result<Pose> {
        let [w, x, y, z] = self.q;
        Ok(Pose::new(
            Quaternion::from_wxyz(w, x, y, z)?,
            Vec3::from(self.t),
        ))
    }
}

fn default_groups() -> Vec<MetricGroup> {
    vec![MetricGroup::LdrPano, MetricGroup::HdrPano]
}

/// Everything `train` needs. Relative paths are resolved against the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default = "default_groups")]
    pub metrics: Vec<MetricGroup>,
    #[serde(default)]
    pub probes: Vec<ProbePose>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub field: FieldConfig,
}

impl RunConfig {
    pub fn new(dataset: impl Into<PathBuf>) -> Self {
        Self {
            dataset: dataset.into(),
            output: None,
            metrics: default_groups(),
            probes: Vec::new(),
            train: TrainConfig::default(),
            field: FieldConfig::default(),
        }
    }

    /// Settings that reconstruct the synthetic room in minutes on one core:
    /// a three-level grid up to 64 cells, small heads and 4000 iterations
    /// per stage.
    pub fn desk_scale(dataset: impl Into<PathBuf>) -> Self {
        let mut cfg = Self::new(dataset);
        cfg.field = FieldConfig {
            grid_resolutions: vec![16, 32, 64],
            features_per_level: 2,
            embedding_dim: 8,
            density_hidden: vec![16],
            color_head_hidden: vec![16],
            direction_encoding_bands: 1,
            initial_density: 1.0,
            ..FieldConfig::default()
        };
        cfg.train = TrainConfig {
            iters_stage1: 4000,
            iters_stage2: 4000,
            batch_rays: 1024,
            n_samples: 40,
            learning_rates: LearningRates {
                grid: 3e-2,
                density: 1e-2,
                well: 3e-2,
                fast: 1e-2,
            },
            ..TrainConfig::default()
        };
        cfg
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| Error::format(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.dataset = base.join(&cfg.dataset);
        cfg.output = cfg.output.map(|o| base.join(o));
        cfg.train.validate()?;
        cfg.field.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::format(path, e))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Parses `w,x,y,z,tx,ty,tz`.
pub fn parse_pose(s: &str) -> Result<Pose> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Invalid(format!("pose '{s}': {e}")))?;
    if v.len() != 7 || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Invalid(format!(
            "pose '{s}' needs 7 finite numbers w,x,y,z,tx,ty,tz"
        )));
    }
    Ok(Pose::new(
        Quaternion::from_wxyz(v[0], v[1], v[2], v[3])?,
        Vec3::new(v[4], v[5], v[6]),
    ))
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::SynthScene(a) => synth_scene(a, cli.seed.unwrap_or(0)),
        Command::EstimateRig(a) => estimate_rig(a),
        Command::CalibrateCrf(a) => calibrate_crf(a),
        Command::Train(a) => train(a, cli.seed),
        Command::RenderHdr(a) => render_hdr(a),
        Command::Evaluate(a) => evaluate_cmd(a),
    }
}

/// Entry point of the binary: parses arguments, sets up logging and the
/// thread pool, and reports errors as `error: <kind>: <message>`.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let detail: Vec<&str> = text
                .lines()
                .map(str::trim)
                .take_while(|l| !l.starts_with("Usage:") && !l.starts_with("For more"))
                .filter(|l| !l.is_empty())
                .collect();
            eprintln!(
                "error: usage: {}",
                detail.join(" ").trim_start_matches("error: ")
            );
            return ExitCode::from(2);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .try_init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            log::warn!("thread pool already configured: {e}");
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}

fn synth_scene(a: &SynthArgs, seed: u64) -> Result<()> {
    let scene = SynthScene::load(&a.scene)?;
    if a.frames == 0 {
        return Err(Error::Invalid("--frames must be positive".into()));
    }
    let full = make_rig_trajectory(a.frames + a.probes, &scene.room, a.margin, seed)?;
    let (trajectory, probe_poses) = if a.probes > 0 {
        hold_out_probes(&full, a.probes)?
    } else {
        (full, Vec::new())
    };
    let spec = DatasetSpec {
        height: a.height,
        exposure_factor: ExposureFactor::new(a.factor)?,
        crf: crate::imaging::CrfPair::shared(Crf::new(a.gamma)?),
        fps: a.fps,
        bounds_padding: 0.1,
        probe_poses,
    };
    let out = make_dataset(&scene, &trajectory, &spec)?;
    out.save(&a.out)?;
    scene.save(&a.out.join("scene.toml"))?;
    let mut run = RunConfig::desk_scale(".");
    run.probes = out
        .probes
        .iter()
        .map(|p| ProbePose::new(&p.id, &p.pose))
        .collect();
    run.train.seed = seed;
    run.save(&a.out.join("run.toml"))?;
    log::info!(
        "wrote {} frame pairs and {} probes to {}",
        out.dataset.len(),
        out.probes.len(),
        a.out.display()
    );
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RigReport {
    /// `(w, x, y, z)`, applied as `R_fast = dR * R_well`.
    pub delta_rotation: [f64; 4],
    pub delta_translation: [f64; 3],
    pub pairs: usize,
    pub rotation_residual_mean_rad: f64,
    pub rotation_residual_max_rad: f64,
    pub translation_residual_mean: f64,
    pub translation_residual_max: f64,
}

fn estimate_rig(a: &RigArgs) -> Result<()> {
    let poses = PoseFile::load(&a.poses)?;
    let pairs: Vec<(Pose, Pose)> = poses
        .pairs()?
        .into_iter()
        .map(|(_, well, fast)| (fast, well))
        .collect();
    let rel = estimate_relative_pose(&pairs)?;
    let res = rig_residuals(&pairs, &rel);
    let n = res.len() as f64;
    let t = rel.delta_translation;
    let report = RigReport {
        delta_rotation: rel.delta_rotation.to_array(),
        delta_translation: [t.x, t.y, t.z],
        pairs: pairs.len(),
        rotation_residual_mean_rad: res.iter().map(|r| r.0).sum::<f64>() / n,
        rotation_residual_max_rad: res.iter().map(|r| r.0).fold(0.0, f64::max),
        translation_residual_mean: res.iter().map(|r| r.1).sum::<f64>() / n,
        translation_residual_max: res.iter().map(|r| r.1).fold(0.0, f64::max),
    };
    write_json(&a.out, &report)?;
    if let Some(path) = &a.apply {
        let mut frames = Vec::new();
        for (id, well, _) in poses.pairs()? {
            frames.push(PoseRecord::new(&id, CameraRole::Well, &well));
            frames.push(PoseRecord::new(
                &id,
                CameraRole::Fast,
                &apply_relative_pose(&well, &rel),
            ));
        }
        PoseFile { frames }.save(path)?;
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct CrfPairRow {
    linear: f64,
    pixel: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CrfReport {
    pub gamma: f64,
    pub pairs: usize,
    pub rmse: f64,
}

fn calibrate_crf(a: &CrfArgs) -> Result<()> {
    let mut reader = csv::Reader::from_path(&a.pairs).map_err(|e| Error::format(&a.pairs, e))?;
    let pairs: Vec<(f64, f64)> = reader
        .deserialize()
        .map(|r| r.map(|row: CrfPairRow| (row.linear, row.pixel)))
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::format(&a.pairs, e))?;
    let crf = fit_gamma(&pairs)?;
    let mse = pairs
        .iter()
        .map(|(p, z)| (crf.forward(*p) - z).powi(2))
        .sum::<f64>()
        / pairs.len() as f64;
    write_json(
        &a.out,
        &CrfReport {
            gamma: crf.gamma(),
            pairs: pairs.len(),
            rmse: mse.sqrt(),
        },
    )
}

fn train(a: &TrainArgs, seed: Option<u64>) -> Result<()> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(m) = a.mode {
        cfg.train.mode = m;
    }
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    let out = a
        .out
        .clone()
        .or(cfg.output.clone())
        .ok_or_else(|| Error::Config("no output directory (--out or `output`)".into()))?;
    let dataset = CaptureDataset::load(&cfg.dataset)?;
    create_dir(&out)?;
    write_json(&out.join("meta.json"), &dataset.meta())?;

    let log_path = out.join("log.csv");
    let (mut trainer, mut log) = match &a.resume {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            if a.mode.is_some_and(|m| m != ckpt.train_config.mode) {
                return Err(Error::Config(
                    "--mode differs from the checkpoint's mode".into(),
                ));
            }
            let start = ckpt.iteration;
            let mut log = if log_path.exists() {
                read_log_csv(&log_path)?
            } else {
                Vec::new()
            };
            log.retain(|e| e.iteration < start);
            (Trainer::resume(&dataset, ckpt)?, log)
        }
        None => (
            Trainer::new(&dataset, &cfg.field, cfg.train.clone())?,
            Vec::new(),
        ),
    };
    let effective = RunConfig {
        train: trainer.config().clone(),
        field: trainer.params().config().clone(),
        ..cfg.clone()
    };
    effective.save(&out.join("run.toml"))?;

    let total = trainer.config().total_iterations();
    let until = a.until.unwrap_or(total).min(total);
    let boundary = trainer.config().iters_stage1;
    if trainer.config().mode != TrainMode::OneStep
        && trainer.iteration() < boundary
        && boundary < until
    {
        trainer.run_until(boundary)?;
        trainer.checkpoint().save(&out.join("stage1.bin"))?;
    }
    trainer.run_until(until)?;
    trainer.checkpoint().save(&out.join("checkpoint.bin"))?;
    log.extend_from_slice(trainer.log());
    write_log_csv(&log_path, &log)?;

    if trainer.iteration() == total && !cfg.probes.is_empty() {
        let (w, h) = dataset.dims();
        let dir = out.join("probes");
        create_dir(&dir)?;
        for p in &cfg.probes {
            let cam = EquirectCamera::new(w, h, p.pose()?)?;
            let hdr = recover_hdr_panorama(
                trainer.params(),
                &cam,
                &dataset.crf,
                dataset.exposure_factor,
                trainer.config().n_samples.max(128),
            )?;
            write_pfm(&dir.join(format!("{}.pfm", p.id)), &hdr.radiance)?;
            write_mask(&dir.join(format!("{}_holes.png", p.id)), w, h, &hdr.holes)?;
        }
    }
    Ok(())
}

/// Path of the hole mask written next to a rendered panorama.
pub fn holes_path(pfm: &Path) -> PathBuf {
    let stem = pfm
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    pfm.with_file_name(format!("{stem}_holes.png"))
}

fn render_hdr(a: &RenderArgs) -> Result<()> {
    let pose = parse_pose(&a.pose)?;
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let meta_path = a.meta.clone().unwrap_or_else(|| {
        a.checkpoint
            .parent()
            .unwrap_or(Path::new("."))
            .join("meta.json")
    });
    let meta = Meta::load(&meta_path)?;
    let h = a.height.unwrap_or(meta.height);
    let cam = EquirectCamera::new(2 * h, h, pose)?;
    let hdr = recover_hdr_panorama(&ckpt.params, &cam, &meta.crf()?, meta.factor()?, a.samples)?;
    write_pfm(&a.out, &hdr.radiance)?;
    write_mask(&holes_path(&a.out), 2 * h, h, &hdr.holes)
}

fn evaluate_cmd(a: &EvalArgs) -> Result<()> {
    let pred = read_pfm(&a.pred)?;
    let gt = read_pfm(&a.gt)?;
    pred.check_same_dims(&gt)?;
    let crf = match &a.meta {
        Some(p) => Meta::load(p)?.crf()?.well,
        None => Crf::new(a.gamma)?,
    };
    let mut valid = vec![true; gt.pixel_count()];
    let mut apply = |path: &Path, keep_set: bool| -> Result<()> {
        let (w, h, m) = read_mask(path)?;
        if (w, h) != (gt.width(), gt.height()) {
            return Err(Error::DimensionMismatch(format!(
                "mask {} is {w}x{h}",
                path.display()
            )));
        }
        for (v, bit) in valid.iter_mut().zip(m) {
            *v &= bit == keep_set;
        }
        Ok(())
    };
    if let Some(p) = &a.mask {
        apply(p, true)?;
    }
    if let Some(p) = &a.holes {
        apply(p, false)?;
    }
    let opts = EvalOptions {
        groups: MetricGroup::parse_list(&a.groups)?,
        crf,
        ldr_exposure: a.exposure,
        valid: (a.mask.is_some() || a.holes.is_some()).then_some(valid),
        pu_scale: a.pu_scale,
    };
    let report = evaluate(&pred, &gt, &opts, None)?;
    report.save_json(&a.out)?;
    print!("{}", report.to_text());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poses_parse_strictly() {
        let p = parse_pose("1,0,0,0,2,1.5,-1.2").unwrap();
        assert_eq!(p.translation, Vec3::new(2.0, 1.5, -1.2));
        assert!(parse_pose("1,0,0,0,2,1.5").is_err());
        assert!(parse_pose("1,0,0,0,2,1.5,x").is_err());
        assert!(parse_pose("0,0,0,0,1,1,1").is_err());
        assert!(parse_pose("1,0,0,0,nan,1,1").is_err());
    }

    #[test]
    fn run_config_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::new(dir.path().join("data"));
        cfg.output = Some(dir.path().join("out"));
        cfg.train.iters_stage1 = 7;
        cfg.field.grid_resolutions = vec![4, 8];
        cfg.metrics = vec![MetricGroup::HdrPano];
        cfg.probes = vec![ProbePose::new(
            "p0",
            &Pose::from_translation(Vec3::new(1.0, 2.0, 0.5)),
        )];
        let path = dir.path().join("run.toml");
        cfg.save(&path).unwrap();
        assert_eq!(RunConfig::load(&path).unwrap(), cfg);
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "dataset = \"data\"\n[train]\niters_stage1 = 3\n").unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.dataset, dir.path().join("data"));
        assert_eq!(cfg.train.iters_stage1, 3);
        assert_eq!(cfg.metrics, default_groups());
        fs::write(&path, "dataset = \"data\"\nbogus = 1\n").unwrap();
        assert!(RunConfig::load(&path).is_err());
    }

    #[test]
    fn mode_names_match_config_names() {
        for (name, mode) in [
            ("two_stage", TrainMode::TwoStage),
            ("one_step", TrainMode::OneStep),
            ("linearize_before", TrainMode::LinearizeBefore),
        ] {
            assert_eq!(parse_mode(name).unwrap(), mode);
            assert_eq!(serde_json::to_string(&mode).unwrap(), format!("\"{name}\""));
        }
        assert!(parse_mode("fast").is_err());
    }

    #[test]
    fn holes_sit_beside_the_panorama() {
        assert_eq!(
            holes_path(Path::new("a/b/pano.pfm")),
            Path::new("a/b/pano_holes.png")
        );
    }
}
