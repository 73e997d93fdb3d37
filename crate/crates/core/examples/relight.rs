//! Lights a diffuse sphere with an HDR panorama of the demo room and with
//! the same panorama clipped to LDR, showing the lost light.
//!
//!     cargo run --release --example relight -- [out_dir]

use std::path::PathBuf;

use hdrfield::geometry::{EquirectCamera, Pose, Vec3};
use hdrfield::imaging::{expose, write_pfm, write_png, Crf, ImageKind};
use hdrfield::metrics::{render_ibl, IblScene};
use hdrfield::synth::{demo_room, oracle_render};

fn mean(img: &hdrfield::imaging::ImageBuffer) -> f64 {
    img.data().iter().map(|v| *v as f64).sum::<f64>() / img.data().len() as f64
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "relight_out".into()),
    );
    std::fs::create_dir_all(&out)?;
    let scene = demo_room(50.0)?;
    let env = oracle_render(
        &scene,
        EquirectCamera::new(128, 64, Pose::from_translation(Vec3::new(2.0, 1.5, 1.0)))?,
    )?;
    let clipped = env.map(ImageKind::Hdr, |v| v.min(1.0));

    let ibl = IblScene::default();
    let hdr_render = render_ibl(&ibl, &env)?;
    let ldr_render = render_ibl(&ibl, &clipped)?;
    write_pfm(&out.join("sphere_hdr.pfm"), &hdr_render)?;
    write_png(
        &out.join("sphere_hdr.png"),
        &expose(&hdr_render, 1.0, &Crf::default())?,
    )?;
    write_png(
        &out.join("sphere_ldr.png"),
        &expose(&ldr_render, 1.0, &Crf::default())?,
    )?;
    println!(
        "mean radiance  HDR-lit {:.4}  LDR-lit {:.4}",
        mean(&hdr_render),
        mean(&ldr_render)
    );
    println!("wrote {}", out.display());
    Ok(())
}
