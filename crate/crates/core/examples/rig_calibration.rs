//! Recovers the offset between the two cameras of a rig from noisy pose
//! pairs and shows the error shrinking with the number of pairs.
//!
//!     cargo run --release --example rig_calibration

use hdrfield::geometry::{estimate_relative_pose, rig_residuals, Pose, Quaternion, Vec3};
use hdrfield::synth::{default_rig, demo_room, make_rig_trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Box-Muller normal sample.
fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn jitter(p: &Pose, rot_sigma: f64, t_sigma: f64, rng: &mut ChaCha8Rng) -> Pose {
    let w = Vec3::new(gaussian(rng), gaussian(rng), gaussian(rng)) * rot_sigma;
    let t = Vec3::new(gaussian(rng), gaussian(rng), gaussian(rng)) * t_sigma;
    Pose::new(
        Quaternion::from_rotation_vector(&w) * p.rotation,
        p.translation + t,
    )
}

fn main() -> hdrfield::Result<()> {
    let room = demo_room(50.0)?.room;
    let truth = default_rig();
    println!(
        "true rotation {:?} translation {:?}",
        truth.delta_rotation.to_array(),
        truth.delta_translation.as_slice()
    );
    for n in [10, 50, 200] {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let pairs: Vec<(Pose, Pose)> = make_rig_trajectory(n, &room, 0.5, 7)?
            .into_iter()
            .map(|(well, fast)| (jitter(&fast, 1f64.to_radians(), 0.005, &mut rng), well))
            .collect();
        let est = estimate_relative_pose(&pairs)?;
        let res = rig_residuals(&pairs, &est);
        let mean_res = res.iter().map(|r| r.0).sum::<f64>() / n as f64;
        println!(
            "N={n:4}  rotation error {:.5} rad  translation error {:.5}  mean residual {:.4} rad",
            est.delta_rotation.angle_to(&truth.delta_rotation),
            (est.delta_translation - truth.delta_translation).norm(),
            mean_res
        );
    }
    Ok(())
}
