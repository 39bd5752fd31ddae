//! Side-by-side PNG of input composite, label and per-method predictions.

use std::path::Path;

use image::{Rgb, RgbImage};

use sarcrop::data::PatchDataset;
use sarcrop::model::BinaryMask;
use sarcrop::{Error, Result};

const GAP: u32 = 2;
const GAP_COLOR: Rgb<u8> = Rgb([40, 40, 40]);

fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// RGB from the first feature at steps 0, 1, 2 (the last available step repeats when T < 3).
pub fn composite_pixel(x: &[f32], dims: sarcrop::data::Dims, px: usize) -> Rgb<u8> {
    let hw = dims.hw();
    let ch = |t: usize| to_u8(x[(t.min(dims.t - 1) * dims.c) * hw + px]);
    Rgb([ch(0), ch(1), ch(2)])
}

/// One row per patch (first `max_patches`): image, label, then each prediction.
pub fn render(dataset: &PatchDataset, predictions: &[(&str, &BinaryMask)], max_patches: usize) -> Result<RgbImage> {
    let d = dataset.dims;
    let n = dataset.len().min(max_patches.max(1));
    if n == 0 {
        return Err(Error::Argument("mosaic needs at least one patch".into()));
    }
    for (name, m) in predictions {
        if m.values.len() != dataset.len() * d.hw() {
            return Err(Error::Dimension(format!("prediction `{name}` does not cover the dataset")));
        }
    }
    let cols = 2 + predictions.len() as u32;
    let (w, h) = (d.w as u32, d.h as u32);
    let mut img = RgbImage::from_pixel(cols * w + (cols + 1) * GAP, n as u32 * h + (n as u32 + 1) * GAP, GAP_COLOR);
    let mask_color = |v: u8| if v != 0 { Rgb([255, 255, 255]) } else { Rgb([0, 0, 0]) };
    for (row, s) in dataset.samples.iter().take(n).enumerate() {
        let y0 = GAP + row as u32 * (h + GAP);
        for px in 0..d.hw() {
            let (x, y) = ((px % d.w) as u32, (px / d.w) as u32);
            let mut col = 0u32;
            let mut put = |c: Rgb<u8>| {
                img.put_pixel(GAP + col * (w + GAP) + x, y0 + y, c);
                col += 1;
            };
            put(composite_pixel(&s.x, d, px));
            put(mask_color(s.y[px]));
            for (_, m) in predictions {
                put(mask_color(m.values[row * d.hw() + px]));
            }
        }
    }
    Ok(img)
}

pub fn save(img: &RgbImage, path: &Path) -> Result<()> {
    img.save(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Data(format!("{}: {other}", path.display())),
    })
}
