use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageFormat, ImageReader};

use super::GrayImage;
use crate::{Error, Result};

/// Reads a PGM or PNG file as 8-bit grayscale.
pub fn load_image(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::Format {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    decode_image(&bytes, path)
}

/// Decodes PGM/PNG bytes. Colour images are converted by averaging their
/// R, G and B channels; 16-bit samples keep their high byte.
pub fn decode_image(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let format_err = |message: String| Error::Format {
        path: path.to_owned(),
        message,
    };
    let reader = ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| format_err(e.to_string()))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => {}
        Some(other) => return Err(format_err(format!("unsupported image format {other:?}"))),
        None => return Err(format_err("unrecognised image format".into())),
    }
    let decoded = reader.decode().map_err(|e| format_err(e.to_string()))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let pixels = match decoded {
        DynamicImage::ImageLuma8(img) => img.into_raw(),
        DynamicImage::ImageLumaA8(img) => img.pixels().map(|p| p.0[0]).collect(),
        DynamicImage::ImageLuma16(img) => img.pixels().map(|p| (p.0[0] >> 8) as u8).collect(),
        DynamicImage::ImageLumaA16(img) => img.pixels().map(|p| (p.0[0] >> 8) as u8).collect(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| {
                let sum = p.0[0] as u32 + p.0[1] as u32 + p.0[2] as u32;
                ((sum + 1) / 3) as u8
            })
            .collect(),
    };
    GrayImage::new(w, h, pixels).map_err(|e| format_err(e.to_string()))
}

/// Writes `img` as binary PGM (`.pgm`) or 8-bit grayscale PNG (`.png`),
/// chosen by extension.
pub fn save_image(path: &Path, img: &GrayImage) -> Result<()> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("pgm") => {
            let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
            out.extend_from_slice(img.pixels());
            fs::write(path, out)?;
            Ok(())
        }
        Some("png") => {
            let buf = image::GrayImage::from_raw(
                img.width() as u32,
                img.height() as u32,
                img.pixels().to_vec(),
            )
            .expect("pixel count checked by GrayImage");
            buf.save_with_format(path, ImageFormat::Png)
                .map_err(|e| Error::Format {
                    path: path.to_owned(),
                    message: e.to_string(),
                })
        }
        _ => Err(Error::Format {
            path: path.to_owned(),
            message: "output extension must be .pgm or .png".into(),
        }),
    }
}

/// Bilinear resize to `target` x `target` using pixel-centre alignment
/// (`src = (dst + 0.5) * in / out - 0.5`, clamped to the image). Results are
/// rounded and clamped to `[0, 255]`.
pub fn resize(img: &GrayImage, target: usize) -> GrayImage {
    let target = target.max(1);
    if img.width() == target && img.height() == target {
        return img.clone();
    }
    let xs = axis_taps(img.width(), target);
    let ys = axis_taps(img.height(), target);
    let w = img.width();
    let p = img.pixels();
    GrayImage::from_fn(target, target, |r, c| {
        let (y0, y1, fy) = ys[r];
        let (x0, x1, fx) = xs[c];
        let at = |y: usize, x: usize| p[y * w + x] as f64;
        let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
        let bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
        let v = top * (1.0 - fy) + bottom * fy;
        v.round().clamp(0.0, 255.0) as u8
    })
    .expect("target is positive")
}

fn axis_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}
