//! Builds the demo room, saves its scene file and renders a reference
//! panorama from the middle of the room.
//!
//!     cargo run --release --example synth_room -- [out_dir]

use std::path::PathBuf;

use hdrfield::geometry::{EquirectCamera, Pose, Vec3};
use hdrfield::imaging::{expose, write_pfm, write_png, Crf};
use hdrfield::synth::{demo_room, oracle_render};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "synth_room_out".into()),
    );
    std::fs::create_dir_all(&out)?;

    // Emitter at 50x the mean wall radiance.
    let scene = demo_room(50.0)?;
    scene.save(&out.join("room.toml"))?;

    let cam = EquirectCamera::new(256, 128, Pose::from_translation(Vec3::new(2.0, 1.5, 1.2)))?;
    let hdr = oracle_render(&scene, cam)?;
    write_pfm(&out.join("center.pfm"), &hdr)?;
    write_png(
        &out.join("center_well.png"),
        &expose(&hdr, 1.0, &Crf::default())?,
    )?;
    write_png(
        &out.join("center_fast.png"),
        &expose(&hdr, 1.0 / 250.0, &Crf::default())?,
    )?;

    let walls = scene.mean_wall_radiance(64)?;
    let peak = hdr.data().iter().fold(0f32, |a, b| a.max(*b));
    println!("mean wall radiance {walls:.4}");
    println!("emitter radiance   {:?}", scene.emitters[0].radiance);
    println!(
        "panorama peak      {peak:.3}  (dynamic range {:.0}x)",
        peak as f64 / walls
    );
    println!("wrote {}", out.display());
    Ok(())
}
