//! Image chips: cropping from annotated imagery, bilinear resampling with
//! half-pixel centers, the 50x50 -> 10x10 -> final degradation pipeline,
//! grayscale conversion, and flattening into feature vectors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side length of the common starting size in [`degrade`].
pub const DEGRADE_START: usize = 50;
/// Side length of the resolution bottleneck in [`degrade`].
pub const DEGRADE_BOTTLENECK: usize = 10;

/// Row-major, channel-interleaved image with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageChip {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<f64>,
}

impl ImageChip {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("image dimensions must be positive".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if pixels.len() != width * height * channels {
            return Err(Error::DimensionMismatch {
                expected: width * height * channels,
                found: pixels.len(),
            });
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("pixel value {v} outside [0,1]")));
        }
        Ok(ImageChip {
            width,
            height,
            channels,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        ImageChip::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }
}

/// Pixel-coordinate box; `xmax`/`ymax` are exclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub xmin: u32,
    pub ymin: u32,
    pub xmax: u32,
    pub ymax: u32,
}

impl BoundingBox {
    pub fn new(xmin: u32, ymin: u32, xmax: u32, ymax: u32) -> Result<Self> {
        if xmax <= xmin || ymax <= ymin {
            return Err(Error::DegenerateBox {
                xmin,
                ymin,
                xmax,
                ymax,
            });
        }
        Ok(BoundingBox {
            xmin,
            ymin,
            xmax,
            ymax,
        })
    }

    pub fn width(&self) -> usize {
        (self.xmax - self.xmin) as usize
    }

    pub fn height(&self) -> usize {
        (self.ymax - self.ymin) as usize
    }
}

/// Copies the pixels under `bbox` into a new chip.
pub fn crop_chip(image: &ImageChip, bbox: &BoundingBox) -> Result<ImageChip> {
    let b = BoundingBox::new(bbox.xmin, bbox.ymin, bbox.xmax, bbox.ymax)?;
    if b.xmax as usize > image.width || b.ymax as usize > image.height {
        return Err(Error::BoxOutOfBounds {
            xmin: b.xmin,
            ymin: b.ymin,
            xmax: b.xmax,
            ymax: b.ymax,
            width: image.width as u32,
            height: image.height as u32,
        });
    }
    let (w, h, c) = (b.width(), b.height(), image.channels);
    let mut pixels = Vec::with_capacity(w * h * c);
    for y in b.ymin as usize..b.ymax as usize {
        let start = (y * image.width + b.xmin as usize) * c;
        pixels.extend_from_slice(&image.pixels[start..start + w * c]);
    }
    Ok(ImageChip {
        width: w,
        height: h,
        channels: c,
        pixels,
    })
}

/// Source sample positions for one axis: lower index, upper index and
/// interpolation weight of the upper index.
fn axis_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    let last = (src - 1) as f64;
    (0..dst)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
            let lo = s.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, s - lo as f64)
        })
        .collect()
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    (a + (b - a) * t).clamp(a.min(b), a.max(b))
}

/// Bilinear resampling with the half-pixel-center mapping
/// `src = (dst + 0.5) * (in / out) - 0.5`, clamped to the image.
pub fn resize_bilinear(chip: &ImageChip, out_w: usize, out_h: usize) -> Result<ImageChip> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::InvalidArgument("output dimensions must be positive".into()));
    }
    let xs = axis_taps(chip.width, out_w);
    let ys = axis_taps(chip.height, out_h);
    let c = chip.channels;
    let mut pixels = Vec::with_capacity(out_w * out_h * c);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for ch in 0..c {
                let top = lerp(chip.get(x0, y0, ch), chip.get(x1, y0, ch), fx);
                let bottom = lerp(chip.get(x0, y1, ch), chip.get(x1, y1, ch), fx);
                pixels.push(lerp(top, bottom, fy));
            }
        }
    }
    Ok(ImageChip {
        width: out_w,
        height: out_h,
        channels: c,
        pixels,
    })
}

/// Every stage of [`degrade`]: the 50x50 start, the 10x10 bottleneck and
/// the final chip.
pub fn degrade_stages(chip: &ImageChip, final_w: usize, final_h: usize) -> Result<[ImageChip; 3]> {
    if final_w == 0 || final_h == 0 {
        return Err(Error::InvalidArgument("output dimensions must be positive".into()));
    }
    let start = resize_bilinear(chip, DEGRADE_START, DEGRADE_START)?;
    let bottleneck = resize_bilinear(&start, DEGRADE_BOTTLENECK, DEGRADE_BOTTLENECK)?;
    let out = resize_bilinear(&bottleneck, final_w, final_h)?;
    Ok([start, bottleneck, out])
}

/// Synthetic low-resolution version of a chip.
pub fn degrade(chip: &ImageChip, final_w: usize, final_h: usize) -> Result<ImageChip> {
    let [_, _, out] = degrade_stages(chip, final_w, final_h)?;
    Ok(out)
}

/// BT.601 luma.
pub fn to_grayscale(chip: &ImageChip) -> Result<ImageChip> {
    if chip.channels != 3 {
        return Err(Error::InvalidArgument("image is already single-channel".into()));
    }
    let pixels = chip
        .pixels
        .chunks_exact(3)
        .map(|p| (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).clamp(0.0, 1.0))
        .collect();
    Ok(ImageChip {
        width: chip.width,
        height: chip.height,
        channels: 1,
        pixels,
    })
}

pub fn flatten(chip: &ImageChip) -> Vec<f64> {
    chip.pixels.clone()
}

/// Square rescale used for chip features (aspect ratio is not preserved).
pub fn to_square(chip: &ImageChip, side: usize) -> Result<ImageChip> {
    resize_bilinear(chip, side, side)
}

/// Resize to 226x226 then center-crop to 224x224, the classic
/// pretrained-CNN input recipe. Not used by the default pipelines.
pub fn cnn_input_recipe(chip: &ImageChip) -> Result<ImageChip> {
    let big = resize_bilinear(chip, 226, 226)?;
    crop_chip(&big, &BoundingBox::new(1, 1, 225, 225)?)
}

/// Loads an 8-bit PNG or PGM (any format the decoder recognizes), mapping
/// values to `[0, 1]` by dividing by 255. Gray images keep one channel.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageChip> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let gray = matches!(
        img.color(),
        image::ColorType::L8 | image::ColorType::L16 | image::ColorType::La8 | image::ColorType::La16
    );
    let (w, h) = (img.width() as usize, img.height() as usize);
    if gray {
        let buf = img.to_luma8();
        ImageChip::new(w, h, 1, buf.into_raw().into_iter().map(|v| f64::from(v) / 255.0).collect())
    } else {
        let buf = img.to_rgb8();
        ImageChip::new(w, h, 3, buf.into_raw().into_iter().map(|v| f64::from(v) / 255.0).collect())
    }
}

/// Writes the chip as 8-bit, format chosen by the file extension.
pub fn save_image(chip: &ImageChip, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = chip
        .pixels
        .iter()
        .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    let (w, h) = (chip.width as u32, chip.height as u32);
    let res = if chip.channels == 1 {
        image::GrayImage::from_raw(w, h, bytes).map(|b| b.save(path))
    } else {
        image::RgbImage::from_raw(w, h, bytes).map(|b| b.save(path))
    };
    match res {
        Some(Ok(())) => Ok(()),
        Some(Err(e)) => Err(Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        }),
        None => Err(Error::Image {
            path: path.to_path_buf(),
            message: "buffer size mismatch".into(),
        }),
    }
}
