//! End-to-end reconstruction of the demo room: synthesize a dual-exposure
//! walk, train a field at desk scale, then recover HDR panoramas at held-out
//! probe positions and score them against the oracle.
//!
//!     cargo run --release --example train_room -- [iterations_per_stage]
//!
//! The default of 4000 iterations per stage takes about a quarter of an hour on one core.

use hdrfield::cli::RunConfig;
use hdrfield::geometry::{EquirectCamera, Ray};
use hdrfield::imaging::{Crf, CrfPair, ExposureFactor};
use hdrfield::metrics::{evaluate, EvalOptions, MetricGroup};
use hdrfield::synth::{demo_room, hold_out_probes, make_dataset, make_rig_trajectory, DatasetSpec};
use hdrfield::train::{recover_hdr_panorama, recover_hdr_rays, Trainer};

fn main() -> hdrfield::Result<()> {
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Info)
        .init();
    let iters: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(4000);

    let scene = demo_room(50.0)?;
    let walk = make_rig_trajectory(66, &scene.room, 0.5, 11)?;
    let (frames, probe_poses) = hold_out_probes(&walk, 6)?;
    let spec = DatasetSpec {
        height: 64,
        exposure_factor: ExposureFactor::new(250.0)?,
        crf: CrfPair::shared(Crf::default()),
        fps: 15.0,
        bounds_padding: 0.1,
        probe_poses,
    };
    let data = make_dataset(&scene, &frames, &spec)?;

    let mut run = RunConfig::desk_scale("unused");
    run.train.iters_stage1 = iters;
    run.train.iters_stage2 = iters;
    run.train.seed = 3;
    let mut trainer = Trainer::new(&data.dataset, &run.field, run.train.clone())?;
    trainer.run()?;
    let params = trainer.params();

    let opts = EvalOptions {
        groups: vec![MetricGroup::LdrPano, MetricGroup::HdrPano],
        ..EvalOptions::default()
    };
    let emitter = scene.emitters[0].center(&scene.room);
    println!(
        "{:8} {:>9} {:>9} {:>12}",
        "probe", "psnr", "pu_psnr", "emitter_err"
    );
    for p in &data.probes {
        let cam = EquirectCamera::new(128, 64, p.pose)?;
        let hdr = recover_hdr_panorama(params, &cam, &spec.crf, spec.exposure_factor, 128)?;
        let report = evaluate(&hdr.radiance, &p.hdr, &opts, None)?;

        let ray = Ray {
            origin: p.pose.translation,
            direction: (emitter - p.pose.translation).normalize(),
        };
        let truth = scene.radiance(&ray);
        let (rgb, _) = recover_hdr_rays(params, &[ray], &spec.crf, spec.exposure_factor, 128)?[0];
        let err = (0..3)
            .map(|c| ((rgb[c] - truth[c]) / truth[c]).abs())
            .fold(0.0, f64::max);
        println!(
            "{:8} {:9.2} {:9.2} {:11.1}%",
            p.id,
            report.get(MetricGroup::LdrPano, "psnr").unwrap_or(f64::NAN),
            report
                .get(MetricGroup::HdrPano, "pu_psnr")
                .unwrap_or(f64::NAN),
            100.0 * err
        );
    }
    Ok(())
}
