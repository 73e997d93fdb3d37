//! Renders a homogeneous medium and compares the composited color with the
//! closed form c(1 - exp(-sigma L)) as the sample count grows.
//!
//!     cargo run --release --example volume_quadrature

use hdrfield::field::{Aabb, FieldConfig, RadianceFieldParams};
use hdrfield::geometry::{Ray, Vec3};
use hdrfield::render::{render_batch, RayBatch, RenderMode, RenderOptions};

fn main() -> hdrfield::Result<()> {
    let (sigma, color) = (0.7, [0.6, 0.3, 0.9]);
    let config = FieldConfig {
        grid_resolutions: vec![2],
        bounds: Aabb::new([-1.0; 3], [1.0; 3])?,
        ..FieldConfig::default()
    };
    let field = RadianceFieldParams::constant(config, sigma, color, [0.5; 3])?;
    let ray = Ray {
        origin: Vec3::new(-3.0, 0.0, 0.0),
        direction: Vec3::x(),
    };
    let batch = RayBatch::from_rays(&[ray], &field.config().bounds, 0.0);
    let length = batch.t_far[0] - batch.t_near[0];
    let exact = color.map(|c| c * (1.0 - (-sigma * length).exp()));
    println!("path length {length:.3}, exact {exact:.6?}");
    for n in [4, 16, 64, 256, 1024] {
        let out = render_batch(
            &field,
            &batch,
            &RenderOptions::uniform(n),
            RenderMode::WellOnly,
        )?;
        let err = (0..3)
            .map(|c| (out.z_well[0][c] - exact[c]).abs())
            .fold(0.0, f64::max);
        println!("samples {n:5}  max error {err:.2e}");
    }
    Ok(())
}
