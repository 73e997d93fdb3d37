//! Scores a degraded HDR panorama against the oracle with every metric
//! group, including relighting a diffuse object with both maps.
//!
//!     cargo run --release --example evaluate_metrics

use hdrfield::geometry::{EquirectCamera, Pose, Vec3};
use hdrfield::imaging::ImageKind;
use hdrfield::metrics::{evaluate, EvalOptions};
use hdrfield::synth::{demo_room, oracle_render};

fn main() -> hdrfield::Result<()> {
    let scene = demo_room(50.0)?;
    let cam = EquirectCamera::new(128, 64, Pose::from_translation(Vec3::new(2.0, 1.5, 1.2)))?;
    let gt = oracle_render(&scene, cam)?;

    // A plausible failure: highlights clipped at 4 and a slight warm cast.
    let mut pred = gt.map(ImageKind::Hdr, |v| v.min(4.0));
    for y in 0..pred.height() {
        for x in 0..pred.width() {
            let [r, g, b] = pred.get(x, y);
            pred.set(x, y, [r * 1.05, g, b * 0.95]);
        }
    }

    let report = evaluate(&pred, &gt, &EvalOptions::default(), None)?;
    print!("{}", report.to_text());
    Ok(())
}
