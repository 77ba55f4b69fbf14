//! Decoding image files into unit-interval tensors and writing tensors back
//! out as 8-bit PNGs.

use std::path::Path;

use image::imageops::FilterType;
use image::{ImageBuffer, Rgb};
use ndarray::Array3;

use crate::error::{Error, Result};
use crate::nn::Image;

/// Decodes an image, resizes the shorter side to the target and center-crops,
/// returning a (C,H,W) tensor with intensities in [0,1]. Deterministic for a
/// given input file.
pub fn load_image_tensor(path: &Path, shape: (usize, usize, usize)) -> Result<Image> {
    let (c, th, tw) = shape;
    if c != 3 {
        return Err(Error::Input(format!("expected 3 channels, got {c}")));
    }
    let img = image::open(path)
        .map_err(|e| Error::ImageDecode {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let rgb = if (w, h) == (tw, th) {
        img
    } else {
        // scale so the shorter side matches, then crop the center
        let scale = (tw as f64 / w as f64).max(th as f64 / h as f64);
        let rw = (w as f64 * scale).round().max(tw as f64) as u32;
        let rh = (h as f64 * scale).round().max(th as f64) as u32;
        let resized = image::imageops::resize(&img, rw, rh, FilterType::Triangle);
        let x0 = (rw - tw as u32) / 2;
        let y0 = (rh - th as u32) / 2;
        image::imageops::crop_imm(&resized, x0, y0, tw as u32, th as u32).to_image()
    };
    let mut out = Array3::<f32>::zeros((3, th, tw));
    for (x, y, px) in rgb.enumerate_pixels() {
        for ch in 0..3 {
            out[(ch, y as usize, x as usize)] = px.0[ch] as f32 / 255.0;
        }
    }
    Ok(out)
}

/// Writes a tensor as an 8-bit PNG, clamping to [0,1] first.
pub fn save_image_tensor(path: &Path, tensor: &Image) -> Result<()> {
    let (c, h, w) = tensor.dim();
    if c != 3 {
        return Err(Error::Input(format!("expected 3 channels, got {c}")));
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut img = ImageBuffer::<Rgb<u8>, Vec<u8>>::new(w as u32, h as u32);
    for (x, y, px) in img.enumerate_pixels_mut() {
        for ch in 0..3 {
            let v = tensor[(ch, y as usize, x as usize)].clamp(0.0, 1.0);
            px.0[ch] = (v * 255.0).round() as u8;
        }
    }
    img.save(path).map_err(|e| Error::ImageDecode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}
