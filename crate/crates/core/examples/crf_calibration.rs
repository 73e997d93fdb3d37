//! Fits a gamma response curve to noisy color-checker style measurements.
//!
//!     cargo run --release --example crf_calibration -- [true_gamma]

use hdrfield::imaging::{fit_gamma, Crf};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> hdrfield::Result<()> {
    let gamma: f64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(2.2);
    let truth = Crf::new(gamma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // 24 patches, three channels each, with 8-bit quantization and read noise.
    let pairs: Vec<(f64, f64)> = (0..72)
        .map(|i| {
            let p = 0.02 + 0.95 * (i as f64 / 71.0);
            let z = truth.forward(p) + rng.gen_range(-0.004..0.004);
            (p, (z.clamp(0.0, 1.0) * 255.0).round() / 255.0)
        })
        .collect();
    let fit = fit_gamma(&pairs)?;
    println!(
        "true gamma {gamma:.4}  fitted {:.4}  from {} pairs",
        fit.gamma(),
        pairs.len()
    );
    Ok(())
}
