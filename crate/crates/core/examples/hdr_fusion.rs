//! Simulates a dual-exposure capture of the demo room and fuses it back
//! into HDR, reporting the recovery error and the hole count.
//!
//!     cargo run --release --example hdr_fusion -- [factor]

use hdrfield::geometry::{EquirectCamera, Pose, Vec3};
use hdrfield::imaging::{expose, linearize, merge_hdr, Crf, ExposureFactor, MergeThresholds};
use hdrfield::synth::{demo_room, oracle_render};

fn main() -> hdrfield::Result<()> {
    let factor: f64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(250.0);
    let scene = demo_room(50.0)?;
    let cam = EquirectCamera::new(256, 128, Pose::from_translation(Vec3::new(1.2, 2.0, 1.0)))?;
    let hdr = oracle_render(&scene, cam)?;

    let crf = Crf::default();
    let factor = ExposureFactor::new(factor)?;
    let well = linearize(&expose(&hdr, 1.0, &crf)?, &crf)?;
    let fast = linearize(&expose(&hdr, 1.0 / factor.value(), &crf)?, &crf)?;
    let merged = merge_hdr(&well, &fast, factor, &MergeThresholds::default())?;

    let mut worst = 0f64;
    let mut sum = 0f64;
    let mut n = 0usize;
    let mut hole_worst = 0f64;
    for (i, (r, t)) in merged.radiance.pixels().zip(hdr.pixels()).enumerate() {
        if merged.holes[i] {
            // Both exposures unusable: the fast value is still a usable estimate
            // as long as the fast frame did not clip to zero.
            for c in 0..3 {
                hole_worst = hole_worst.max(((r[c] - t[c]) / t[c]).abs() as f64);
            }
            continue;
        }
        for c in 0..3 {
            let rel = ((r[c] - t[c]) / t[c]).abs() as f64;
            worst = worst.max(rel);
            sum += rel;
            n += 1;
        }
    }
    println!("exposure factor {}", factor.value());
    println!(
        "holes           {} of {} pixels",
        merged.hole_count(),
        hdr.pixel_count()
    );
    println!(
        "relative error  mean {:.4}%  max {:.4}%",
        100.0 * sum / n as f64,
        100.0 * worst
    );
    println!("hole fallback   max {:.4}%", 100.0 * hole_worst);
    Ok(())
}
