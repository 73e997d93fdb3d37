use super::*;
use crate::field::tests::tiny_config;
use crate::field::{Aabb, FieldConfig};
use crate::geometry::Pose;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample(density: f64, well: [f64; 3]) -> FieldSample {
    FieldSample {
        density,
        color_well: well,
        color_fast: [0.0; 3],
    }
}

#[test]
fn uniform_samples_sit_at_bin_midpoints() {
    let s = sample_points(1.0, 3.0, 4, false, 0);
    let t: Vec<f64> = s.iter().map(|p| p.0).collect();
    assert_eq!(t, vec![1.25, 1.75, 2.25, 2.75]);
    // Gaps to the next sample, the last closing at t_far.
    let total: f64 = s.iter().map(|p| p.1).sum();
    assert!((total - (3.0 - 1.25)).abs() < 1e-15);
    assert_eq!(s[3].1, 0.25);
}

#[test]
fn single_sample_closes_at_far() {
    let s = sample_points(2.0, 4.0, 1, false, 0);
    assert_eq!(s, vec![(3.0, 1.0)]);
}

#[test]
fn stratified_samples_are_seeded_and_binned() {
    let a = sample_points(0.0, 1.0, 16, true, 9);
    assert_eq!(a, sample_points(0.0, 1.0, 16, true, 9));
    assert_ne!(a, sample_points(0.0, 1.0, 16, true, 10));
    for (i, &(t, d)) in a.iter().enumerate() {
        assert!(t >= i as f64 / 16.0 && t < (i + 1) as f64 / 16.0);
        assert!(d >= 0.0);
    }
}

#[test]
fn empty_space_composites_to_black() {
    let samples = vec![sample(0.0, [1.0; 3]); 5];
    let out = composite(&samples, &sample_points(0.0, 1.0, 5, false, 0));
    assert_eq!(out.z_well, [0.0; 3]);
    assert_eq!(out.accumulated_opacity, 0.0);
    assert_eq!(out.depth, 0.0);
}

#[test]
fn opaque_first_sample_wins() {
    let samples = vec![
        sample(f64::INFINITY, [0.2, 0.4, 0.6]),
        sample(1.0, [1.0; 3]),
    ];
    let ts = [(0.5, 1.0), (1.5, 1.0)];
    let out = composite(&samples, &ts);
    assert_eq!(out.z_well, [0.2, 0.4, 0.6]);
    assert_eq!(out.accumulated_opacity, 1.0);
    assert_eq!(out.depth, 0.5);
}

#[test]
fn two_sample_closed_form() {
    let samples = [sample(1.0, [1.0, 0.0, 0.0]), sample(1.0, [0.0, 1.0, 0.0])];
    let out = composite(&samples, &[(0.0, 1.0), (1.0, 1.0)]);
    let a = 1.0 - (-1.0f64).exp();
    let b = (-1.0f64).exp() * a;
    assert!((out.z_well[0] - a).abs() < 1e-15);
    assert!((out.z_well[1] - b).abs() < 1e-15);
    assert_eq!(out.z_well[2], 0.0);
    assert!((a - 0.63212).abs() < 1e-5 && (b - 0.23254).abs() < 1e-5);
}

fn homogeneous_error(n: usize) -> f64 {
    let (sigma, c, l) = (1.3, 0.7, 2.0);
    let ts = sample_points(0.0, l, n, false, 0);
    let samples = vec![sample(sigma, [c; 3]); n];
    let z = composite(&samples, &ts).z_well[0];
    (z - c * (1.0 - (-sigma * l).exp())).abs()
}

#[test]
fn homogeneous_quadrature_converges() {
    let errs: Vec<f64> = [16, 32, 64, 128, 256]
        .iter()
        .map(|&n| homogeneous_error(n))
        .collect();
    assert!(errs[4] <= 1e-3, "{errs:?}");
    for w in errs.windows(2) {
        assert!(w[1] < w[0], "{errs:?}");
    }
}

proptest! {
    #[test]
    fn weights_are_a_sub_partition_of_unity(
        dens in prop::collection::vec(0.0f64..50.0, 1..40),
        near in 0.0f64..1.0,
        len in 0.01f64..5.0,
    ) {
        let n = dens.len();
        let ts = sample_points(near, near + len, n, false, 0);
        let samples: Vec<_> = dens.iter().map(|&d| sample(d, [1.0; 3])).collect();
        let out = composite(&samples, &ts);
        prop_assert!(out.accumulated_opacity >= 0.0);
        prop_assert!(out.accumulated_opacity <= 1.0 + 1e-9);
        prop_assert!((out.z_well[0] - out.accumulated_opacity).abs() < 1e-12);
    }

    #[test]
    fn compositing_is_linear_in_color(
        dens in prop::collection::vec(0.0f64..10.0, 1..20),
        lambda in 0.0f64..1.0,
        seed in 0u64..1000,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ts = sample_points(0.0, 1.0, dens.len(), false, 0);
        let samples: Vec<_> = dens
            .iter()
            .map(|&d| sample(d, [rng.gen(), rng.gen(), rng.gen()]))
            .collect();
        let scaled: Vec<_> = samples
            .iter()
            .map(|s| sample(s.density, s.color_well.map(|c| c * lambda)))
            .collect();
        let a = composite(&samples, &ts);
        let b = composite(&scaled, &ts);
        for c in 0..3 {
            prop_assert!((b.z_well[c] - lambda * a.z_well[c]).abs() <= 1e-12);
        }
    }
}

#[test]
fn composite_backward_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 7;
    let ts = sample_points(0.2, 1.7, n, true, 5);
    let mut samples: Vec<FieldSample> = (0..n)
        .map(|_| FieldSample {
            density: rng.gen_range(0.0..3.0),
            color_well: [rng.gen(), rng.gen(), rng.gen()],
            color_fast: [rng.gen(), rng.gen(), rng.gen()],
        })
        .collect();
    let tw = [0.3, 0.9, 0.1];
    let tf = [0.05, 0.2, 0.6];
    let loss = |s: &[FieldSample]| {
        let o = composite(s, &ts);
        (0..3)
            .map(|c| (o.z_well[c] - tw[c]).powi(2) + (o.z_fast[c] - tf[c]).powi(2))
            .sum::<f64>()
            + 0.5 * o.accumulated_opacity
    };
    let o = composite(&samples, &ts);
    let dw = [0, 1, 2].map(|c| 2.0 * (o.z_well[c] - tw[c]));
    let df = [0, 1, 2].map(|c| 2.0 * (o.z_fast[c] - tf[c]));
    let mut grads = Vec::new();
    composite_backward(&samples, &ts, dw, df, 0.5, &mut grads);
    let h = 1e-6;
    for i in 0..n {
        let orig = samples[i].density;
        samples[i].density = orig + h;
        let lp = loss(&samples);
        samples[i].density = orig - h;
        let lm = loss(&samples);
        samples[i].density = orig;
        let fd = (lp - lm) / (2.0 * h);
        assert!(
            (fd - grads[i].density).abs() < 1e-8,
            "sample {i}: {fd} vs {}",
            grads[i].density
        );
        for c in 0..3 {
            let orig = samples[i].color_fast[c];
            samples[i].color_fast[c] = orig + h;
            let lp = loss(&samples);
            samples[i].color_fast[c] = orig - h;
            let lm = loss(&samples);
            samples[i].color_fast[c] = orig;
            assert!(((lp - lm) / (2.0 * h) - grads[i].color_fast[c]).abs() < 1e-8);
        }
    }
}

fn centre_rays(n: usize, seed: u64) -> Vec<Ray> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let d = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
            .normalize();
            Ray {
                origin: Vec3::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), 0.0),
                direction: d,
            }
        })
        .collect()
}

#[test]
fn homogeneous_field_matches_analytic_render() {
    let (sigma, c) = (0.8, [0.25, 0.5, 0.75]);
    let f = RadianceFieldParams::constant(tiny_config(), sigma, c, [0.5; 3]).unwrap();
    let batch = RayBatch::from_rays(&centre_rays(20, 1), &f.config().bounds, 0.0);
    let out = render_batch(
        &f,
        &batch,
        &RenderOptions::uniform(256),
        RenderMode::WellOnly,
    )
    .unwrap();
    assert!(out.z_fast.is_none());
    for i in 0..batch.len() {
        let l = batch.t_far[i] - batch.t_near[i];
        for k in 0..3 {
            let exact = c[k] * (1.0 - (-sigma * l).exp());
            assert!((out.z_well[i][k] - exact).abs() <= 1e-3);
        }
    }
}

fn random_field(seed: u64) -> RadianceFieldParams {
    let mut f = RadianceFieldParams::init(tiny_config(), seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in f.values_mut() {
        *v = rng.gen_range(-0.8..0.8);
    }
    f
}

fn supervised_batch(f: &RadianceFieldParams, n: usize, seed: u64) -> RayBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = RayBatch::from_rays(&centre_rays(n, seed), &f.config().bounds, 0.05);
    b.target_well = Some((0..n).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect());
    b.target_fast = Some((0..n).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect());
    b.valid[1] = false;
    b
}

fn mse_upstream(
    b: &RayBatch,
    count: f64,
) -> impl Fn(usize, &RayPrediction) -> RayUpstream + Sync + '_ {
    move |i, p| {
        let tw = b.target_well.as_ref().unwrap()[i];
        let tf = b.target_fast.as_ref().unwrap()[i];
        RayUpstream {
            d_well: [0, 1, 2].map(|c| 2.0 * (p.z_well[c] - tw[c]) / count),
            d_fast: [0, 1, 2].map(|c| 2.0 * (p.z_fast[c] - tf[c]) / count),
        }
    }
}

fn mse(out: &RenderOutput, b: &RayBatch, count: f64) -> f64 {
    let mut s = 0.0;
    for i in (0..b.len()).filter(|&i| b.valid[i]) {
        for c in 0..3 {
            s += (out.z_well[i][c] - b.target_well.as_ref().unwrap()[i][c]).powi(2);
            if let Some(zf) = &out.z_fast {
                s += (zf[i][c] - b.target_fast.as_ref().unwrap()[i][c]).powi(2);
            }
        }
    }
    s / count
}

fn check_batch_gradient(mode: RenderMode, seed: u64) {
    let mut f = random_field(seed);
    let b = supervised_batch(&f, 6, 4);
    let opts = RenderOptions::stratified(12, 8);
    let heads = if mode == RenderMode::Both { 2 } else { 1 };
    let count = (b.valid_count() * 3 * heads) as f64;
    let mut grad = vec![0.0; f.len()];
    render_batch_with_grad(&f, &b, &opts, mode, mse_upstream(&b, count), &mut grad).unwrap();
    let loss = |f: &RadianceFieldParams| {
        let mut out = render_batch(f, &b, &opts, mode).unwrap();
        if mode == RenderMode::FastOnly {
            out.z_well = b.target_well.clone().unwrap();
        }
        mse(&out, &b, count)
    };
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..f.len() {
        let orig = f.values()[i];
        f.values_mut()[i] = orig + h;
        let lp = loss(&f);
        f.values_mut()[i] = orig - h;
        let lm = loss(&f);
        f.values_mut()[i] = orig;
        let fd = (lp - lm) / (2.0 * h);
        let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-6);
        worst = worst.max(rel);
    }
    assert!(worst <= 1e-3, "{mode:?}: max relative error {worst}");
}

#[test]
fn batch_gradient_matches_finite_differences() {
    check_batch_gradient(RenderMode::Both, 11);
    check_batch_gradient(RenderMode::WellOnly, 12);
    check_batch_gradient(RenderMode::FastOnly, 13);
}

#[test]
fn well_only_leaves_fast_head_untouched() {
    let f = random_field(12);
    let b = supervised_batch(&f, 8, 5);
    let mut grad = vec![0.0; f.len()];
    let out = render_batch_with_grad(
        &f,
        &b,
        &RenderOptions::uniform(8),
        RenderMode::WellOnly,
        mse_upstream(&b, 24.0),
        &mut grad,
    )
    .unwrap();
    assert!(out.z_fast.is_none());
    let part = f.partition();
    assert!(grad[part.fast].iter().all(|g| *g == 0.0));
    assert!(grad[part.well].iter().any(|g| *g != 0.0));
    assert_eq!(out.z_well[1], [0.0; 3]);
}

#[test]
fn gradients_do_not_depend_on_thread_count() {
    let f = random_field(13);
    let b = supervised_batch(&f, 300, 6);
    let opts = RenderOptions::stratified(16, 2);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let mut grad = vec![0.0; f.len()];
            let out = render_batch_with_grad(
                &f,
                &b,
                &opts,
                RenderMode::Both,
                mse_upstream(&b, 1.0),
                &mut grad,
            )
            .unwrap();
            (out, grad)
        })
    };
    let (o1, g1) = run(1);
    let (o3, g3) = run(3);
    assert_eq!(o1, o3);
    assert_eq!(g1, g3);
    assert_eq!(o1, render_batch(&f, &b, &opts, RenderMode::Both).unwrap());
}

#[test]
fn empty_field_renders_black_panoramas() {
    let cfg = FieldConfig {
        bounds: Aabb::new([-2.0; 3], [2.0; 3]).unwrap(),
        ..tiny_config()
    };
    let mut f = RadianceFieldParams::init(cfg, 0).unwrap();
    let b = f.density_bias_index();
    f.values_mut()[b] = -1e4;
    let cam = EquirectCamera::new(16, 8, Pose::identity()).unwrap();
    let (well, fast) = render_panorama(&f, &cam, 16).unwrap();
    assert_eq!((well.width(), well.height()), (16, 8));
    assert_eq!((fast.width(), fast.height()), (16, 8));
    assert!(well.data().iter().chain(fast.data()).all(|v| *v == 0.0));
}

#[test]
fn invalid_batches_are_rejected() {
    let mut b = RayBatch::from_rays(
        &centre_rays(2, 0),
        &Aabb::new([-1.0; 3], [1.0; 3]).unwrap(),
        0.0,
    );
    b.t_far[0] = b.t_near[0];
    assert!(b.validate().is_err());
    b.t_far.pop();
    assert!(b.validate().is_err());
}
