//! 8-bit RGB images to and from `(1, 3, H, W)` tensors in `[0, 1]`.

use std::path::Path;

use anyhow::{Context, Result};
use image::{ImageEncoder, RgbImage};
use tfp_core::{Shape, Tensor};

use crate::format::write_atomic;

pub fn rgb_to_tensor(img: &RgbImage) -> Tensor {
    let (w, h) = img.dimensions();
    Tensor::from_fn(Shape::new(1, 3, h as usize, w as usize), |_, c, y, x| {
        f32::from(img.get_pixel(x as u32, y as u32)[c]) / 255.0
    })
}

/// Clamp to `[0, 1]` and quantize with round-to-nearest.
pub fn tensor_to_rgb(t: &Tensor) -> RgbImage {
    let s = t.shape();
    assert_eq!((s.n, s.c), (1, 3), "expected a single RGB image");
    RgbImage::from_fn(s.w as u32, s.h as u32, |x, y| {
        let px = |c| (t.get(0, c, y as usize, x as usize).clamp(0.0, 1.0) * 255.0).round() as u8;
        image::Rgb([px(0), px(1), px(2)])
    })
}

/// Read a PNG or JPEG as an RGB tensor.
pub fn load_image(path: &Path) -> Result<Tensor> {
    let img = image::open(path).with_context(|| format!("reading image {}", path.display()))?;
    Ok(rgb_to_tensor(&img.to_rgb8()))
}

pub fn encode_png(t: &Tensor) -> Result<Vec<u8>> {
    let img = tensor_to_rgb(t);
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out).write_image(
        img.as_raw(),
        img.width(),
        img.height(),
        image::ExtendedColorType::Rgb8,
    )?;
    Ok(out)
}

/// Write an 8-bit RGB PNG; nothing is left at `path` on failure.
pub fn save_png(t: &Tensor, path: &Path) -> Result<()> {
    let bytes = encode_png(t)?;
    write_atomic(path, &bytes).with_context(|| format!("writing {}", path.display()))
}

/// Mirror index into `0..n` without repeating the edge sample.
fn reflect(i: usize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i % period;
    if m < n {
        m
    } else {
        period - m
    }
}

/// Reflect-pad bottom and right edges up to the next multiple of `multiple`.
pub fn reflect_pad(t: &Tensor, multiple: usize) -> Tensor {
    let s = t.shape();
    let h = s.h.div_ceil(multiple) * multiple;
    let w = s.w.div_ceil(multiple) * multiple;
    if (h, w) == (s.h, s.w) {
        return t.clone();
    }
    Tensor::from_fn(Shape::new(s.n, s.c, h, w), |n, c, y, x| {
        t.get(n, c, reflect(y, s.h), reflect(x, s.w))
    })
}

/// Keep the top-left `height x width` region.
pub fn crop(t: &Tensor, height: usize, width: usize) -> Tensor {
    let s = t.shape();
    if (s.h, s.w) == (height, width) {
        return t.clone();
    }
    Tensor::from_fn(Shape::new(s.n, s.c, height, width), |n, c, y, x| {
        t.get(n, c, y, x)
    })
}
