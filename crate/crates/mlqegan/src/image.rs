//! Unit-range image container and integer-image conversions.
//!
//! Every pixel container in the crate is an [`ImageTensor`]: a
//! `channels x height x width` tensor of `f32` values in `[0, 1]`. Integer
//! images (PNG files, raw sensor data) are mapped linearly into the unit
//! range on load and back on save.

use std::path::Path;

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};

/// Rec. 601 luminance weights used when a single-channel view of an RGB
/// image is needed.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// A `channels x height x width` image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    data: Array3<f32>,
}

impl ImageTensor {
    /// Wraps pixel data, requiring every element to already be finite and in
    /// `[0, 1]` and the spatial dims to be at least 1x1.
    pub fn new(data: Array3<f32>) -> Result<Self> {
        let (c, h, w) = data.dim();
        if c < 1 || h < 1 || w < 1 {
            return Err(Error::Image(format!(
                "dimensions must be positive, got {c}x{h}x{w}"
            )));
        }
        for &v in &data {
            if !v.is_finite() {
                return Err(Error::Image("non-finite pixel value".into()));
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Image(format!("pixel value {v} outside [0, 1]")));
            }
        }
        Ok(Self { data })
    }

    /// Wraps pixel data that may have drifted slightly out of range
    /// (e.g. after filtering), clamping into `[0, 1]`. Non-finite values are
    /// still rejected.
    pub fn from_unclamped(mut data: Array3<f32>) -> Result<Self> {
        let (c, h, w) = data.dim();
        if c < 1 || h < 1 || w < 1 {
            return Err(Error::Image(format!(
                "dimensions must be positive, got {c}x{h}x{w}"
            )));
        }
        for v in data.iter_mut() {
            if !v.is_finite() {
                return Err(Error::Image("non-finite pixel value".into()));
            }
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self { data })
    }

    /// Constant-valued image; handy in tests.
    pub fn constant(channels: usize, height: usize, width: usize, value: f32) -> Result<Self> {
        Self::new(Array3::from_elem((channels, height, width), value))
    }

    pub fn channels(&self) -> usize {
        self.data.dim().0
    }

    pub fn height(&self) -> usize {
        self.data.dim().1
    }

    pub fn width(&self) -> usize {
        self.data.dim().2
    }

    pub fn data(&self) -> &Array3<f32> {
        &self.data
    }

    pub fn into_data(self) -> Array3<f32> {
        self.data
    }

    /// Single-channel `f64` view: the channel itself for grayscale images,
    /// Rec. 601 luminance for 3-channel images. Other channel counts average.
    pub fn luminance(&self) -> Array2<f64> {
        let (c, h, w) = self.data.dim();
        let mut out = Array2::<f64>::zeros((h, w));
        match c {
            1 => {
                for y in 0..h {
                    for x in 0..w {
                        out[[y, x]] = self.data[[0, y, x]] as f64;
                    }
                }
            }
            3 => {
                for y in 0..h {
                    for x in 0..w {
                        out[[y, x]] = LUMA_WEIGHTS[0] * self.data[[0, y, x]] as f64
                            + LUMA_WEIGHTS[1] * self.data[[1, y, x]] as f64
                            + LUMA_WEIGHTS[2] * self.data[[2, y, x]] as f64;
                    }
                }
            }
            _ => {
                for y in 0..h {
                    for x in 0..w {
                        let mut s = 0.0;
                        for ch in 0..c {
                            s += self.data[[ch, y, x]] as f64;
                        }
                        out[[y, x]] = s / c as f64;
                    }
                }
            }
        }
        out
    }

    /// Loads a PNG as an RGB unit-range image (grayscale files expand to one
    /// channel).
    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path)?;
        match img {
            image::DynamicImage::ImageLuma8(g) => {
                let (w, h) = g.dimensions();
                let mut data = Array3::<f32>::zeros((1, h as usize, w as usize));
                for (x, y, p) in g.enumerate_pixels() {
                    data[[0, y as usize, x as usize]] = p.0[0] as f32 / 255.0;
                }
                Self::new(data)
            }
            other => {
                let rgb = other.to_rgb8();
                let (w, h) = rgb.dimensions();
                let mut data = Array3::<f32>::zeros((3, h as usize, w as usize));
                for (x, y, p) in rgb.enumerate_pixels() {
                    for c in 0..3 {
                        data[[c, y as usize, x as usize]] = p.0[c] as f32 / 255.0;
                    }
                }
                Self::new(data)
            }
        }
    }

    /// Saves as an 8-bit PNG (1 channel as grayscale, 3 as RGB).
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let (c, h, w) = self.data.dim();
        let quant = self.from_unit_range(8)?;
        match c {
            1 => {
                let mut buf = image::GrayImage::new(w as u32, h as u32);
                for (x, y, p) in buf.enumerate_pixels_mut() {
                    p.0[0] = quant[[0, y as usize, x as usize]] as u8;
                }
                buf.save(path)?;
            }
            3 => {
                let mut buf = image::RgbImage::new(w as u32, h as u32);
                for (x, y, p) in buf.enumerate_pixels_mut() {
                    for ch in 0..3 {
                        p.0[ch] = quant[[ch, y as usize, x as usize]] as u8;
                    }
                }
                buf.save(path)?;
            }
            _ => {
                return Err(Error::Image(format!(
                    "PNG export supports 1 or 3 channels, got {c}"
                )))
            }
        }
        Ok(())
    }

    /// Linear map of integer pixel values in `[0, 2^b - 1]` to `[0, 1]`.
    pub fn to_unit_range(raw: &Array3<u16>, bit_depth: u32) -> Result<Self> {
        if !(1..=16).contains(&bit_depth) {
            return Err(Error::Image(format!("unsupported bit depth {bit_depth}")));
        }
        let max = ((1u32 << bit_depth) - 1) as f32;
        let mut data = Array3::<f32>::zeros(raw.dim());
        for (o, &r) in data.iter_mut().zip(raw.iter()) {
            if r as u32 > max as u32 {
                return Err(Error::Image(format!(
                    "pixel {r} exceeds {bit_depth}-bit range"
                )));
            }
            *o = r as f32 / max;
        }
        Self::new(data)
    }

    /// Inverse of [`ImageTensor::to_unit_range`]: rounds back to the integer
    /// grid. Round-trips within `1 / 2^b`.
    pub fn from_unit_range(&self, bit_depth: u32) -> Result<Array3<u16>> {
        if !(1..=16).contains(&bit_depth) {
            return Err(Error::Image(format!("unsupported bit depth {bit_depth}")));
        }
        let max = ((1u32 << bit_depth) - 1) as f32;
        Ok(self.data.mapv(|v| (v * max).round() as u16))
    }
}
