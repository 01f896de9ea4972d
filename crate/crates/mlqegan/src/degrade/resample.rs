//! Gaussian anti-aliasing, downsampling and upsampling.

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};
use crate::image::ImageTensor;

/// Normalized 1-D Gaussian kernel with radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    assert!(sigma > 0.0, "sigma must be positive");
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Symmetric boundary reflection (edge pixel repeated).
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

fn blur_plane(plane: &Array2<f64>, kernel: &[f64]) -> Array2<f64> {
    let (h, w) = plane.dim();
    let radius = (kernel.len() / 2) as isize;
    let mut tmp = Array2::<f64>::zeros((h, w));
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (j, &k) in kernel.iter().enumerate() {
                let xx = reflect(x as isize + j as isize - radius, w);
                acc += k * plane[[y, xx]];
            }
            tmp[[y, x]] = acc;
        }
    }
    let mut out = Array2::<f64>::zeros((h, w));
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (j, &k) in kernel.iter().enumerate() {
                let yy = reflect(y as isize + j as isize - radius, h);
                acc += k * tmp[[yy, x]];
            }
            out[[y, x]] = acc;
        }
    }
    out
}

/// Separable Gaussian blur in `f64`, without clamping. Constants are
/// preserved exactly up to rounding; total brightness is conserved under the
/// reflective boundary.
pub fn gaussian_blur_field(data: &Array3<f32>, sigma: f64) -> Array3<f64> {
    let (c, h, w) = data.dim();
    let kernel = gaussian_kernel(sigma);
    let mut out = Array3::<f64>::zeros((c, h, w));
    for ch in 0..c {
        let plane = Array2::from_shape_fn((h, w), |(y, x)| data[[ch, y, x]] as f64);
        let blurred = blur_plane(&plane, &kernel);
        for y in 0..h {
            for x in 0..w {
                out[[ch, y, x]] = blurred[[y, x]];
            }
        }
    }
    out
}

/// Gaussian blur of a unit-range image, clamped back into range.
pub fn gaussian_blur(img: &ImageTensor, sigma: f64) -> Result<ImageTensor> {
    let field = gaussian_blur_field(img.data(), sigma);
    ImageTensor::from_unclamped(field.mapv(|v| v as f32))
}

/// Anti-aliased downsampling: Gaussian blur with `sigma = 0.5 * factor`,
/// then every `factor`-th pixel starting at the top-left.
pub fn antialias_downsample(img: &ImageTensor, factor: usize) -> Result<ImageTensor> {
    if factor < 2 {
        return Err(Error::Shape(format!(
            "downsampling factor must be >= 2, got {factor}"
        )));
    }
    let (c, h, w) = img.data().dim();
    if h % factor != 0 || w % factor != 0 {
        return Err(Error::Shape(format!(
            "image {h}x{w} not divisible by downsampling factor {factor}"
        )));
    }
    let blurred = gaussian_blur_field(img.data(), 0.5 * factor as f64);
    let (oh, ow) = (h / factor, w / factor);
    let mut out = Array3::<f32>::zeros((c, oh, ow));
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                out[[ch, y, x]] = blurred[[ch, y * factor, x * factor]] as f32;
            }
        }
    }
    ImageTensor::from_unclamped(out)
}

/// Bilinear upsampling by an integer factor (pixel centers aligned).
/// Used for visual inspection and for measuring how much fine detail the
/// downsampler removes.
pub fn upsample_bilinear(img: &ImageTensor, factor: usize) -> Result<ImageTensor> {
    if factor < 1 {
        return Err(Error::Shape("upsampling factor must be >= 1".into()));
    }
    let (c, h, w) = img.data().dim();
    let (oh, ow) = (h * factor, w * factor);
    let mut out = Array3::<f32>::zeros((c, oh, ow));
    for ch in 0..c {
        for y in 0..oh {
            let sy = ((y as f64 + 0.5) / factor as f64 - 0.5).clamp(0.0, (h - 1) as f64);
            let y0 = sy.floor() as usize;
            let y1 = (y0 + 1).min(h - 1);
            let ty = sy - y0 as f64;
            for x in 0..ow {
                let sx = ((x as f64 + 0.5) / factor as f64 - 0.5).clamp(0.0, (w - 1) as f64);
                let x0 = sx.floor() as usize;
                let x1 = (x0 + 1).min(w - 1);
                let tx = sx - x0 as f64;
                let v00 = img.data()[[ch, y0, x0]] as f64;
                let v01 = img.data()[[ch, y0, x1]] as f64;
                let v10 = img.data()[[ch, y1, x0]] as f64;
                let v11 = img.data()[[ch, y1, x1]] as f64;
                let top = v00 + (v01 - v00) * tx;
                let bot = v10 + (v11 - v10) * tx;
                out[[ch, y, x]] = (top + (bot - top) * ty) as f32;
            }
        }
    }
    ImageTensor::from_unclamped(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    /// Direct (non-separable) convolution oracle with the same kernel and
    /// boundary handling, written as plain scalar loops.
    fn blur_oracle(data: &Array3<f32>, sigma: f64) -> Array3<f64> {
        let (c, h, w) = data.dim();
        let k1 = gaussian_kernel(sigma);
        let r = (k1.len() / 2) as isize;
        let mut out = Array3::<f64>::zeros((c, h, w));
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    let mut acc = 0.0;
                    for (jy, &ky) in k1.iter().enumerate() {
                        for (jx, &kx) in k1.iter().enumerate() {
                            let yy = reflect(y as isize + jy as isize - r, h);
                            let xx = reflect(x as isize + jx as isize - r, w);
                            acc += ky * kx * data[[ch, yy, xx]] as f64;
                        }
                    }
                    out[[ch, y, x]] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn constant_image_is_preserved() {
        let img = ImageTensor::constant(3, 12, 20, 0.7).unwrap();
        let down = antialias_downsample(&img, 2).unwrap();
        assert_eq!(down.height(), 6);
        assert_eq!(down.width(), 10);
        for &v in down.data() {
            assert!((v - 0.7).abs() < 1e-6);
        }
    }

    #[test]
    fn four_x_downsample_dims() {
        let img = ImageTensor::constant(1, 256, 256, 0.2).unwrap();
        let down = antialias_downsample(&img, 4).unwrap();
        assert_eq!((down.height(), down.width()), (64, 64));
    }

    #[test]
    fn impulse_brightness_conserved_before_clamping() {
        let mut data = Array3::<f32>::zeros((1, 16, 16));
        data[[0, 7, 9]] = 1.0;
        let blurred = gaussian_blur_field(&data, 1.0);
        let total: f64 = blurred.iter().sum();
        assert!((total - 1.0).abs() < 1e-6, "total {total}");
    }

    #[test]
    fn separable_blur_matches_direct_convolution_oracle() {
        let tex = crate::degrade::synth_texture_image(5, 64, 64).unwrap();
        let fast = gaussian_blur_field(tex.data(), 1.0);
        let slow = blur_oracle(tex.data(), 1.0);
        for (a, b) in fast.iter().zip(slow.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn non_divisible_dims_error() {
        let img = ImageTensor::constant(1, 15, 16, 0.5).unwrap();
        assert!(antialias_downsample(&img, 2).is_err());
    }

    #[test]
    fn pyramid_consistency_on_smooth_images() {
        // blur first so the image is smooth, then compare 4x to 2x twice
        let tex = crate::degrade::synth_texture_image(9, 128, 128).unwrap();
        let smooth = gaussian_blur(&tex, 2.0).unwrap();
        let once = antialias_downsample(&smooth, 4).unwrap();
        let twice =
            antialias_downsample(&antialias_downsample(&smooth, 2).unwrap(), 2).unwrap();
        let rrmse = crate::metrics::rrmse(&once, &twice).unwrap();
        assert!(rrmse < 0.02, "pyramid rrmse {rrmse}");
    }
}
