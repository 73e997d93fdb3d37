use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hdrfield::cli::RunConfig;
use hdrfield::geometry::Quaternion;
use hdrfield::imaging::read_pfm;
use hdrfield::synth::{default_rig, demo_room, load_probes};
use hdrfield::train::{CaptureDataset, Meta};
use serde_json::Value;

fn hdrfield(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdrfield"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = hdrfield(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn failure_line(args: &[&str]) -> String {
    let out = hdrfield(args);
    assert!(!out.status.success(), "{args:?} should fail");
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert_eq!(err.trim_end().lines().count(), 1, "one-line reason: {err}");
    assert!(err.starts_with("error: "), "{err}");
    err
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A tiny dataset plus a run config shrunk to a few iterations.
fn tiny_dataset(dir: &Path) -> std::path::PathBuf {
    let scene = dir.join("room.toml");
    demo_room(50.0).unwrap().save(&scene).unwrap();
    let data = dir.join("data");
    ok(&[
        "synth-scene",
        "--scene",
        s(&scene),
        "--frames",
        "4",
        "--factor",
        "250",
        "--out",
        s(&data),
        "--height",
        "12",
        "--probes",
        "1",
        "--seed",
        "5",
    ]);
    let mut run = RunConfig::load(&data.join("run.toml")).unwrap();
    run.dataset = ".".into();
    run.field.grid_resolutions = vec![4, 8];
    run.train.iters_stage1 = 3;
    run.train.iters_stage2 = 3;
    run.train.batch_rays = 16;
    run.train.n_samples = 8;
    run.save(&data.join("run.toml")).unwrap();
    data
}

#[test]
fn synth_scene_writes_a_valid_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_dataset(dir.path());
    let ds = CaptureDataset::load(&data).unwrap();
    ds.validate().unwrap();
    assert_eq!(ds.len(), 4);
    assert_eq!(ds.dims(), (24, 12));
    let meta = Meta::load(&data.join("meta.json")).unwrap();
    assert_eq!(meta.exposure_factor, 250.0);
    assert_eq!(load_probes(&data).unwrap().len(), 1);
    assert!(data.join("scene.toml").exists());
}

#[test]
fn missing_scene_fails_with_a_reason() {
    let dir = tempfile::tempdir().unwrap();
    let err = failure_line(&[
        "synth-scene",
        "--scene",
        "/nonexistent/room.toml",
        "--frames",
        "4",
        "--factor",
        "250",
        "--out",
        s(dir.path()),
    ]);
    assert!(err.starts_with("error: io: "), "{err}");
}

#[test]
fn estimate_rig_recovers_the_synthetic_offset() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_dataset(dir.path());
    let rig = dir.path().join("rig.json");
    let applied = dir.path().join("applied.json");
    ok(&[
        "estimate-rig",
        "--poses",
        s(&data.join("poses.json")),
        "--out",
        s(&rig),
        "--apply",
        s(&applied),
    ]);
    let v: Value = serde_json::from_str(&fs::read_to_string(&rig).unwrap()).unwrap();
    let q: Vec<f64> = v["delta_rotation"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    let q = Quaternion::from_wxyz(q[0], q[1], q[2], q[3]).unwrap();
    let truth = default_rig();
    assert!(q.angle_to(&truth.delta_rotation) <= 1e-9);
    let t = v["delta_translation"].as_array().unwrap();
    for k in 0..3 {
        assert!((t[k].as_f64().unwrap() - truth.delta_translation[k]).abs() <= 1e-9);
    }
    assert_eq!(v["pairs"], 4);
    assert!(v["rotation_residual_max_rad"].as_f64().unwrap() <= 1e-9);
    assert!(applied.exists());
}

#[test]
fn calibrate_crf_fits_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("pairs.csv");
    let mut text = String::from("linear,pixel\n");
    for i in 1..20 {
        let p = i as f64 / 20.0;
        text += &format!("{p},{}\n", p.powf(1.0 / 2.4));
    }
    fs::write(&csv, text).unwrap();
    let out = dir.path().join("crf.json");
    ok(&["calibrate-crf", "--pairs", s(&csv), "--out", s(&out)]);
    let v: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!((v["gamma"].as_f64().unwrap() - 2.4).abs() < 1e-6);

    fs::write(&csv, "linear,pixel\n0.5,abc\n").unwrap();
    failure_line(&["calibrate-crf", "--pairs", s(&csv), "--out", s(&out)]);
}

#[test]
fn train_render_evaluate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_dataset(dir.path());
    let run = dir.path().join("run");
    ok(&[
        "train",
        "--config",
        s(&data.join("run.toml")),
        "--out",
        s(&run),
    ]);
    for f in [
        "checkpoint.bin",
        "stage1.bin",
        "log.csv",
        "meta.json",
        "run.toml",
    ] {
        assert!(run.join(f).exists(), "{f}");
    }
    let log = fs::read_to_string(run.join("log.csv")).unwrap();
    assert_eq!(log.lines().count(), 7);
    let pred = run.join("probes/probe00.pfm");
    assert!(pred.exists() && run.join("probes/probe00_holes.png").exists());

    let probe = &load_probes(&data).unwrap()[0];
    let [w, x, y, z] = probe.pose.rotation.to_array();
    let t = probe.pose.translation;
    let pose = format!("{w},{x},{y},{z},{},{},{}", t.x, t.y, t.z);
    let pano = dir.path().join("pano.pfm");
    ok(&[
        "render-hdr",
        "--checkpoint",
        s(&run.join("checkpoint.bin")),
        "--pose",
        &pose,
        "--out",
        s(&pano),
        "--samples",
        "16",
    ]);
    let img = read_pfm(&pano).unwrap();
    assert_eq!((img.width(), img.height()), (24, 12));
    assert!(dir.path().join("pano_holes.png").exists());
    let err = failure_line(&[
        "render-hdr",
        "--checkpoint",
        s(&run.join("checkpoint.bin")),
        "--pose",
        "1,0,0",
        "--out",
        s(&pano),
    ]);
    assert!(err.contains("pose"), "{err}");

    let gt = data.join("probes/probe00.pfm");
    let report = dir.path().join("report.json");
    let out = ok(&[
        "evaluate",
        "--pred",
        s(&pred),
        "--gt",
        s(&gt),
        "--out",
        s(&report),
        "--holes",
        s(&run.join("probes/probe00_holes.png")),
    ]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("pu_psnr") && text.contains("ssim"));
    let v: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!(v["groups"]["ldr_pano"]["psnr"].as_f64().is_some());
    assert!(v["groups"].get("hdr_render").is_none());
}

#[test]
fn evaluate_identical_images_and_group_selection() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_dataset(dir.path());
    let gt = data.join("probes/probe00.pfm");
    let report = dir.path().join("r.json");
    ok(&[
        "evaluate",
        "--pred",
        s(&gt),
        "--gt",
        s(&gt),
        "--groups",
        "hdr_render",
        "--out",
        s(&report),
    ]);
    let v: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let groups = v["groups"].as_object().unwrap();
    assert_eq!(groups.keys().collect::<Vec<_>>(), ["hdr_render"]);
    for m in ["rmse", "si_rmse", "rgb_angular"] {
        assert_eq!(groups["hdr_render"][m].as_f64().unwrap(), 0.0, "{m}");
    }

    let small = dir.path().join("small.pfm");
    let big = read_pfm(&gt).unwrap();
    let crop = hdrfield::imaging::ImageBuffer::new(
        big.width() / 2,
        big.height(),
        hdrfield::imaging::ImageKind::Hdr,
    );
    hdrfield::imaging::write_pfm(&small, &crop).unwrap();
    let err = failure_line(&[
        "evaluate",
        "--pred",
        s(&small),
        "--gt",
        s(&gt),
        "--out",
        s(&report),
    ]);
    assert!(err.starts_with("error: dimension: "), "{err}");
}

#[test]
fn one_step_mode_and_bit_exact_resume() {
    let dir = tempfile::tempdir().unwrap();
    let data = tiny_dataset(dir.path());
    let cfg = data.join("run.toml");
    let (full, part) = (dir.path().join("full"), dir.path().join("part"));
    ok(&["train", "--config", s(&cfg), "--out", s(&full)]);
    ok(&[
        "train",
        "--config",
        s(&cfg),
        "--out",
        s(&part),
        "--until",
        "4",
    ]);
    ok(&[
        "train",
        "--config",
        s(&cfg),
        "--out",
        s(&part),
        "--resume",
        s(&part.join("checkpoint.bin")),
    ]);
    assert_eq!(
        fs::read(full.join("checkpoint.bin")).unwrap(),
        fs::read(part.join("checkpoint.bin")).unwrap()
    );
    assert_eq!(
        fs::read_to_string(part.join("log.csv"))
            .unwrap()
            .lines()
            .count(),
        7
    );

    let one = dir.path().join("one");
    ok(&[
        "train",
        "--config",
        s(&cfg),
        "--out",
        s(&one),
        "--mode",
        "one_step",
    ]);
    let saved = RunConfig::load(&one.join("run.toml")).unwrap();
    assert_eq!(saved.train.mode, hdrfield::train::TrainMode::OneStep);
    assert!(!one.join("stage1.bin").exists());
    assert_ne!(
        fs::read(full.join("checkpoint.bin")).unwrap(),
        fs::read(one.join("checkpoint.bin")).unwrap()
    );
    let err = failure_line(&[
        "train",
        "--config",
        s(&cfg),
        "--out",
        s(&one),
        "--mode",
        "fast",
    ]);
    assert!(err.contains("mode"), "{err}");
}
