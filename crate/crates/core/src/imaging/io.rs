//! Image files: 8-bit PNG for LDR images and masks, little-endian PFM for HDR.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::buffer::{ImageBuffer, ImageKind};
use crate::error::{Error, Result};

/// Reads a PNG as LDR or a PFM as HDR, chosen by extension.
pub fn read_image(path: &Path) -> Result<ImageBuffer> {
    match extension(path).as_deref() {
        Some("png") => read_png(path),
        Some("pfm") => read_pfm(path),
        _ => Err(Error::format(
            path,
            "unsupported extension (expected .png or .pfm)",
        )),
    }
}

/// Writes LDR images as PNG and HDR images as PFM. The extension must agree.
pub fn write_image(path: &Path, img: &ImageBuffer) -> Result<()> {
    match (extension(path).as_deref(), img.kind()) {
        (Some("png"), ImageKind::Ldr) => write_png(path, img),
        (Some("pfm"), ImageKind::Hdr) => write_pfm(path, img),
        (ext, kind) => Err(Error::format(
            path,
            format!("cannot write {kind:?} image with extension {ext:?}"),
        )),
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}

pub fn write_png(path: &Path, img: &ImageBuffer) -> Result<()> {
    let bytes: Vec<u8> = img
        .data()
        .iter()
        .map(|&z| (z.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    image::save_buffer(
        path,
        &bytes,
        img.width() as u32,
        img.height() as u32,
        image::ExtendedColorType::Rgb8,
    )
    .map_err(|e| Error::format(path, e))
}

pub fn read_png(path: &Path) -> Result<ImageBuffer> {
    let rgb = image::open(path)
        .map_err(|e| Error::format(path, e))?
        .to_rgb8();
    let (w, h) = rgb.dimensions();
    let data = rgb
        .into_raw()
        .into_iter()
        .map(|b| b as f32 / 255.0)
        .collect();
    ImageBuffer::from_data(w as usize, h as usize, ImageKind::Ldr, data)
}

/// Mask as single-channel PNG, 255 = valid.
pub fn write_mask(path: &Path, width: usize, height: usize, mask: &[bool]) -> Result<()> {
    if mask.len() != width * height {
        return Err(Error::DimensionMismatch(format!(
            "mask of {} pixels for {width}x{height}",
            mask.len()
        )));
    }
    let bytes: Vec<u8> = mask.iter().map(|&m| if m { 255 } else { 0 }).collect();
    image::save_buffer(
        path,
        &bytes,
        width as u32,
        height as u32,
        image::ExtendedColorType::L8,
    )
    .map_err(|e| Error::format(path, e))
}

/// Reads a mask PNG; any nonzero value counts as valid.
pub fn read_mask(path: &Path) -> Result<(usize, usize, Vec<bool>)> {
    let gray = image::open(path)
        .map_err(|e| Error::format(path, e))?
        .to_luma8();
    let (w, h) = gray.dimensions();
    let mask = gray.into_raw().into_iter().map(|b| b >= 128).collect();
    Ok((w as usize, h as usize, mask))
}

pub fn write_pfm(path: &Path, img: &ImageBuffer) -> Result<()> {
    let mut out = Vec::with_capacity(32 + img.data().len() * 4);
    write!(out, "PF\n{} {}\n-1.0\n", img.width(), img.height()).expect("write to Vec");
    let row = img.width() * 3;
    for y in (0..img.height()).rev() {
        for v in &img.data()[y * row..(y + 1) * row] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_pfm(path: &Path) -> Result<ImageBuffer> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut line = String::new();

    let mut next_line = |reader: &mut BufReader<fs::File>, what: &str| -> Result<String> {
        line.clear();
        let n = reader
            .read_line(&mut line)
            .map_err(|e| Error::format(path, format!("reading {what}: {e}")))?;
        if n == 0 {
            return Err(Error::format(path, format!("missing {what}")));
        }
        Ok(line.trim().to_string())
    };

    let channels = match next_line(&mut reader, "header")?.as_str() {
        "PF" => 3,
        "Pf" => 1,
        other => return Err(Error::format(path, format!("bad PFM magic {other:?}"))),
    };
    let dims = next_line(&mut reader, "dimensions")?;
    let parsed: Vec<usize> = dims
        .split_whitespace()
        .map(|s| s.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::format(path, format!("bad dimensions {dims:?}")))?;
    let [w, h] = parsed[..] else {
        return Err(Error::format(path, format!("bad dimensions {dims:?}")));
    };
    let scale_line = next_line(&mut reader, "scale")?;
    let scale: f32 = scale_line
        .parse()
        .map_err(|_| Error::format(path, format!("bad scale {scale_line:?}")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::format(path, format!("bad scale {scale_line:?}")));
    }
    let little = scale < 0.0;

    let mut raw = vec![0u8; w * h * channels * 4];
    reader
        .read_exact(&mut raw)
        .map_err(|_| Error::format(path, "truncated pixel data"))?;
    let values: Vec<f32> = raw
        .chunks_exact(4)
        .map(|b| {
            let b = [b[0], b[1], b[2], b[3]];
            if little {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            }
        })
        .collect();

    let mut data = vec![0f32; w * h * 3];
    for y in 0..h {
        let src_row = h - 1 - y;
        for x in 0..w {
            for c in 0..3 {
                let src = (src_row * w + x) * channels + if channels == 3 { c } else { 0 };
                data[(y * w + x) * 3 + c] = values[src];
            }
        }
    }
    ImageBuffer::from_data(w, h, ImageKind::Hdr, data).map_err(|e| Error::format(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pfm_header_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pfm");
        write_pfm(&path, &ImageBuffer::new(4, 2, ImageKind::Hdr)).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"PF\n4 2\n-1.0\n"));
        assert_eq!(bytes.len(), 12 + 4 * 2 * 3 * 4);
    }

    #[test]
    fn pfm_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let data: Vec<f32> = (0..5 * 3 * 3).map(|_| rng.gen_range(0.0..1000.0)).collect();
        let img = ImageBuffer::from_data(5, 3, ImageKind::Hdr, data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.pfm");
        write_image(&path, &img).unwrap();
        let back = read_image(&path).unwrap();
        assert_eq!(back.width(), 5);
        let same = img
            .data()
            .iter()
            .zip(back.data())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same);
    }

    #[test]
    fn pfm_rows_are_bottom_to_top() {
        let mut img = ImageBuffer::new(1, 2, ImageKind::Hdr);
        img.set(0, 0, [1.0, 2.0, 3.0]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.pfm");
        write_pfm(&path, &img).unwrap();
        let bytes = fs::read(&path).unwrap();
        let body = &bytes[12..];
        // First stored row is the bottom (zero) row.
        assert_eq!(&body[..12], &[0u8; 12]);
        assert_eq!(f32::from_le_bytes(body[12..16].try_into().unwrap()), 1.0);
    }

    #[test]
    fn png_round_trip_within_quantization() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data: Vec<f32> = (0..7 * 4 * 3).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let img = ImageBuffer::from_data(7, 4, ImageKind::Ldr, data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        write_image(&path, &img).unwrap();
        let back = read_image(&path).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 1.0 / 510.0 + 1e-7);
        }
    }

    #[test]
    fn mask_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let mask = vec![true, false, false, true, true, false];
        write_mask(&path, 3, 2, &mask).unwrap();
        assert_eq!(read_mask(&path).unwrap(), (3, 2, mask));
    }

    #[test]
    fn malformed_files_report_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pfm");
        fs::write(&path, b"PX\n1 1\n-1.0\n").unwrap();
        let e = read_image(&path).unwrap_err().to_string();
        assert!(e.contains("bad.pfm") && e.contains("magic"), "{e}");
        fs::write(&path, b"PF\n2 2\n-1.0\n\0\0").unwrap();
        assert!(read_image(&path)
            .unwrap_err()
            .to_string()
            .contains("truncated"));
        let missing = dir.path().join("none.png");
        assert!(read_image(&missing)
            .unwrap_err()
            .to_string()
            .contains("none.png"));
    }

    #[test]
    fn kind_extension_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageBuffer::new(1, 1, ImageKind::Hdr);
        assert!(write_image(&dir.path().join("a.png"), &img).is_err());
    }
}
