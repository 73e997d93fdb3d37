use super::*;
use crate::field::{Activation, FieldConfig};
use crate::geometry::{Pose, Vec3};
use crate::imaging::{Crf, ImageBuffer, ImageKind};

fn small_field() -> FieldConfig {
    FieldConfig {
        grid_resolutions: vec![4, 8],
        features_per_level: 2,
        embedding_dim: 4,
        density_hidden: vec![8],
        color_head_hidden: vec![8],
        direction_encoding_bands: 1,
        hidden_activation: Activation::Softplus,
        // Opaque from the start, so a constant target needs no per-direction
        // compensation in the color heads.
        initial_density: 5.0,
        bounds: Aabb::new([-1.0; 3], [1.0; 3]).unwrap(),
    }
}

fn constant_dataset(well: [f32; 3], fast: [f32; 3]) -> CaptureDataset {
    let frame = |rgb| Frame {
        id: "0".into(),
        image: ImageBuffer::filled(16, 8, ImageKind::Ldr, rgb),
        pose: Pose::from_translation(Vec3::new(0.1, 0.0, 0.0)),
    };
    CaptureDataset {
        well_frames: vec![frame(well)],
        fast_frames: vec![frame(fast)],
        exposure_factor: ExposureFactor::new(4.0).unwrap(),
        crf: CrfPair::shared(Crf::default()),
        bounds: None,
        fps: 15.0,
    }
}

fn quick_config(iters: u64) -> TrainConfig {
    TrainConfig {
        iters_stage1: iters,
        iters_stage2: iters,
        batch_rays: 128,
        n_samples: 16,
        learning_rates: LearningRates {
            grid: 1e-2,
            density: 1e-2,
            well: 2e-2,
            fast: 5e-2,
        },
        seed: 7,
        ..TrainConfig::default()
    }
}

#[test]
fn constant_scene_is_fit() {
    let ds = constant_dataset([0.3, 0.6, 0.8], [0.1, 0.2, 0.3]);
    let out = train(&ds, &small_field(), &quick_config(100)).unwrap();
    assert_eq!(out.log.len(), 200);
    let cam = EquirectCamera::new(16, 8, ds.well_frames[0].pose).unwrap();
    let (well, fast) = render_panorama(&out.params, &cam, 64).unwrap();
    for (img, rgb) in [(&well, [0.3, 0.6, 0.8]), (&fast, [0.1, 0.2, 0.3])] {
        for px in img.pixels() {
            for c in 0..3 {
                assert!((px[c] - rgb[c]).abs() <= 0.02, "{px:?} vs {rgb:?}");
            }
        }
    }
}

#[test]
fn same_seed_gives_identical_params() {
    let ds = constant_dataset([0.5; 3], [0.2; 3]);
    let a = train(&ds, &small_field(), &quick_config(5)).unwrap();
    let b = train(&ds, &small_field(), &quick_config(5)).unwrap();
    assert_eq!(a.params.values(), b.params.values());
    let mut other = quick_config(5);
    other.seed = 8;
    let c = train(&ds, &small_field(), &other).unwrap();
    assert_ne!(a.params.values(), c.params.values());
}

#[test]
fn stage_one_leaves_fast_head_at_init() {
    let ds = constant_dataset([0.5; 3], [0.2; 3]);
    let cfg = quick_config(6);
    let mut t = Trainer::new(&ds, &small_field(), cfg.clone()).unwrap();
    let init = t.params().clone();
    t.run_until(6).unwrap();
    let part = init.partition();
    assert_eq!(
        &t.params().values()[part.fast.clone()],
        &init.values()[part.fast.clone()]
    );
    assert_ne!(
        &t.params().values()[part.well.clone()],
        &init.values()[part.well.clone()]
    );
    assert!(t
        .log()
        .iter()
        .all(|e| e.stage == 1 && e.loss_fast.is_none()));
    t.run().unwrap();
    assert_ne!(
        &t.params().values()[part.fast.clone()],
        &init.values()[part.fast]
    );
    assert!(t.log()[6..].iter().all(|e| e.stage == 2));
}

#[test]
fn resume_continues_bit_exactly() {
    let ds = constant_dataset([0.4, 0.5, 0.6], [0.1; 3]);
    let cfg = quick_config(4);
    let full = train(&ds, &small_field(), &cfg).unwrap();
    for split in [3, 4, 6] {
        let mut t = Trainer::new(&ds, &small_field(), cfg.clone()).unwrap();
        t.run_until(split).unwrap();
        let bytes = t.checkpoint().to_bytes();
        let ckpt = Checkpoint::from_bytes(&bytes, Path::new("mem")).unwrap();
        let mut r = Trainer::resume(&ds, ckpt).unwrap();
        r.run().unwrap();
        assert_eq!(r.iteration(), 8);
        assert_eq!(
            r.params().values(),
            full.params.values(),
            "split at {split}"
        );
    }
}

#[test]
fn modes_consume_equal_ray_budgets() {
    let ds = constant_dataset([0.5; 3], [0.2; 3]);
    let mut cfg = quick_config(3);
    let two = train(&ds, &small_field(), &cfg).unwrap();
    cfg.mode = TrainMode::OneStep;
    let one = train(&ds, &small_field(), &cfg).unwrap();
    assert_eq!(two.log.len(), one.log.len());
    assert!(one.log.iter().all(|e| e.stage == 0));
    cfg.mode = TrainMode::LinearizeBefore;
    let lin = train(&ds, &small_field(), &cfg).unwrap();
    assert_eq!(lin.log.len(), two.log.len());
    assert_ne!(lin.params.values(), two.params.values());
}

#[test]
fn linearize_before_with_unit_gamma_matches_default() {
    let mut ds = constant_dataset([0.5, 0.3, 0.2], [0.2; 3]);
    ds.crf = CrfPair::shared(Crf::linear());
    let mut cfg = quick_config(3);
    let a = train(&ds, &small_field(), &cfg).unwrap();
    cfg.mode = TrainMode::LinearizeBefore;
    let b = train(&ds, &small_field(), &cfg).unwrap();
    assert_eq!(a.params.values(), b.params.values());
}

#[test]
fn divergence_aborts_with_diagnostics() {
    let ds = constant_dataset([0.5; 3], [0.2; 3]);
    let cfg = quick_config(3);
    let mut t = Trainer::new(&ds, &small_field(), cfg).unwrap();
    t.run_until(1).unwrap();
    let mut ckpt = t.checkpoint();
    ckpt.params
        .values_mut()
        .iter_mut()
        .for_each(|v| *v = f64::NAN);
    let mut r = Trainer::resume(&ds, ckpt).unwrap();
    match r.run() {
        Err(Error::Diverged {
            iteration: 1,
            stage: 1,
            lr_fast,
            ..
        }) => assert_eq!(lr_fast, 0.0),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn schedule_decays_and_finetunes() {
    let ds = constant_dataset([0.5; 3], [0.2; 3]);
    let cfg = quick_config(100);
    let t = Trainer::new(&ds, &small_field(), cfg.clone()).unwrap();
    let lr = cfg.learning_rates;
    assert_eq!(t.learning_rates(0), [lr.grid, lr.density, lr.well, 0.0]);
    let end = t.learning_rates(99);
    assert!(end[0] < 0.11 * lr.grid && end[0] > 0.1 * lr.grid);
    let s2 = t.learning_rates(100);
    assert!((s2[0] - 0.1 * lr.grid).abs() < 1e-15);
    assert!((s2[2] - 0.1 * lr.well).abs() < 1e-15);
    assert_eq!(s2[3], lr.fast);
}

#[test]
fn log_round_trips_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("log.csv");
    let log = vec![
        LogEntry {
            iteration: 0,
            stage: 1,
            loss_well: Some(0.25),
            loss_fast: None,
            wall_ms: 3,
        },
        LogEntry {
            iteration: 1,
            stage: 2,
            loss_well: Some(0.125),
            loss_fast: Some(1e-3),
            wall_ms: 9,
        },
    ];
    write_log_csv(&p, &log).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert!(text.starts_with("iteration,stage,loss_well,loss_fast,wall_ms\n0,1,0.25,,3\n"));
    assert_eq!(read_log_csv(&p).unwrap(), log);
}

#[test]
fn consistent_heads_recover_radiance() {
    let crf = CrfPair::shared(Crf::default());
    let factor = ExposureFactor::new(8.0).unwrap();
    let radiance = [0.5, 0.7, 0.95];
    let well = radiance.map(|r| crf.well.forward(r));
    let fast = radiance.map(|r| crf.fast.forward(r / factor.value()));
    let f = RadianceFieldParams::constant(small_field(), 60.0, well, fast).unwrap();
    let cam = EquirectCamera::new(16, 8, Pose::identity()).unwrap();
    let hdr = recover_hdr_panorama(&f, &cam, &crf, factor, 64).unwrap();
    assert_eq!(hdr.radiance.kind(), ImageKind::Hdr);
    assert_eq!(hdr.hole_count(), 0);
    for px in hdr.radiance.pixels() {
        for c in 0..3 {
            assert!(px[c] >= 0.0);
            assert!(
                (px[c] as f64 - radiance[c]).abs() / radiance[c] < 1e-3,
                "{px:?}"
            );
        }
    }
}
