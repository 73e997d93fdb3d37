//! Cuts perspective crops out of an oracle panorama and checks them against
//! the oracle rendered directly through the same pinhole cameras.
//!
//!     cargo run --release --example panorama_views -- [out_dir]

use std::path::PathBuf;

use hdrfield::geometry::{
    default_view_layout, extract_perspective_views, EquirectCamera, Pose, Vec3,
};
use hdrfield::imaging::{expose, write_png, Crf};
use hdrfield::metrics::psnr;
use hdrfield::synth::{demo_room, oracle_render};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "views_out".into()),
    );
    std::fs::create_dir_all(&out)?;
    let scene = demo_room(50.0)?;
    let cam = EquirectCamera::new(1024, 512, Pose::from_translation(Vec3::new(2.0, 1.5, 1.2)))?;
    let crf = Crf::default();
    let pano = expose(&oracle_render(&scene, cam)?, 1.0, &crf)?;

    for (i, (view, pcam)) in
        extract_perspective_views(&pano, &cam, 90.0, 128, &default_view_layout())?
            .into_iter()
            .enumerate()
    {
        let direct = expose(&oracle_render(&scene, pcam)?, 1.0, &crf)?;
        write_png(&out.join(format!("view{i}.png")), &view)?;
        println!(
            "view {i}: psnr vs direct render {:.2} dB",
            psnr(&view, &direct, 1.0)?
        );
    }
    Ok(())
}
