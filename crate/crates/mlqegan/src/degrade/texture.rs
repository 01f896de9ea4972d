//! Procedural toy textures standing in for clinical source images.
//!
//! Each image mixes a low-frequency color wash, soft colored blobs, thin
//! dark curvilinear structures and fine grain, so there is learnable
//! structure at every scale of the resolution chain.

use ndarray::Array3;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::noise::value_noise_field;
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::rng::{mix, stream_rng, tag};

/// Deterministic procedural texture; `h` and `w` must be at least 64.
pub fn synth_texture_image(seed: u64, h: usize, w: usize) -> Result<ImageTensor> {
    if h < 64 || w < 64 {
        return Err(Error::Infeasible(format!(
            "texture dims must be >= 64, got {h}x{w}"
        )));
    }
    let mut rng = stream_rng(seed, &[tag::TEXTURE]);
    let mut img = Array3::<f64>::zeros((3, h, w));

    // Low-frequency color wash, one independent field per channel.
    for c in 0..3usize {
        let field = value_noise_field(mix(&[seed, tag::TEXTURE, c as u64 + 1]), h, w, 4, 64);
        for y in 0..h {
            for x in 0..w {
                img[[c, y, x]] = 0.30 + 0.45 * field[[y, x]];
            }
        }
    }

    // Soft colored blobs (cell-like structures).
    let n_blobs = ((h * w) / 600).clamp(12, 400);
    for _ in 0..n_blobs {
        let cy = rng.gen_range(0.0..h as f64);
        let cx = rng.gen_range(0.0..w as f64);
        let r = rng.gen_range(2.5..(h.min(w) as f64 / 10.0));
        let sigma = r / 2.0;
        let color = [
            rng.gen_range(0.05..0.95),
            rng.gen_range(0.05..0.95),
            rng.gen_range(0.05..0.95),
        ];
        let strength = rng.gen_range(0.5..0.95);
        let reach = (3.0 * sigma).ceil() as isize;
        let y0 = ((cy as isize) - reach).max(0) as usize;
        let y1 = (((cy as isize) + reach) as usize).min(h - 1);
        let x0 = ((cx as isize) - reach).max(0) as usize;
        let x1 = (((cx as isize) + reach) as usize).min(w - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                let a = strength * (-d2 / (2.0 * sigma * sigma)).exp();
                for c in 0..3 {
                    img[[c, y, x]] = img[[c, y, x]] * (1.0 - a) + color[c] * a;
                }
            }
        }
    }

    // Thin dark curvilinear structures: random walks with heading momentum,
    // stamped into a shade buffer with a narrow Gaussian profile.
    let mut shade = vec![0.0f64; h * w];
    let n_curves = ((h + w) / 24).max(6);
    let turn = Normal::<f64>::new(0.0, 0.18).expect("valid normal");
    for _ in 0..n_curves {
        let mut py = rng.gen_range(0.0..h as f64);
        let mut px = rng.gen_range(0.0..w as f64);
        let mut angle = rng.gen_range(0.0..std::f64::consts::TAU);
        let darkness = rng.gen_range(0.35..0.8);
        let sigma = rng.gen_range(0.5..0.9);
        let steps = ((h + w) as f64 / 1.4) as usize;
        for _ in 0..steps {
            angle += turn.sample(&mut rng);
            py += 0.7 * angle.sin();
            px += 0.7 * angle.cos();
            if py < 1.0 || px < 1.0 || py >= (h - 2) as f64 || px >= (w - 2) as f64 {
                break;
            }
            let iy = py as usize;
            let ix = px as usize;
            for dy in -2isize..=2 {
                for dx in -2isize..=2 {
                    let y = (iy as isize + dy) as usize;
                    let x = (ix as isize + dx) as usize;
                    let d2 = (y as f64 - py).powi(2) + (x as f64 - px).powi(2);
                    let v = darkness * (-d2 / (2.0 * sigma * sigma)).exp();
                    let cell = &mut shade[y * w + x];
                    if v > *cell {
                        *cell = v;
                    }
                }
            }
        }
    }
    for y in 0..h {
        for x in 0..w {
            let s = 1.0 - 0.85 * shade[y * w + x];
            for c in 0..3 {
                img[[c, y, x]] *= s;
            }
        }
    }

    // Fine luminance grain so the finest level carries real detail.
    let grain = value_noise_field(mix(&[seed, tag::TEXTURE, 9]), h, w, 2, 4);
    for y in 0..h {
        for x in 0..w {
            let g = 0.10 * (grain[[y, x]] - 0.5);
            for c in 0..3 {
                img[[c, y, x]] += g;
            }
        }
    }

    ImageTensor::from_unclamped(img.mapv(|v| v as f32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degrade::{antialias_downsample, upsample_bilinear};
    use crate::metrics::rrmse;

    #[test]
    fn deterministic_given_seed() {
        let a = synth_texture_image(1, 64, 80).unwrap();
        let b = synth_texture_image(1, 64, 80).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ_substantially() {
        let a = synth_texture_image(1, 128, 128).unwrap();
        let b = synth_texture_image(2, 128, 128).unwrap();
        let d = rrmse(&a, &b).unwrap();
        assert!(d > 0.05, "rrmse between seeds = {d}");
    }

    #[test]
    fn carries_high_frequency_energy() {
        let img = synth_texture_image(3, 256, 256).unwrap();
        let down = antialias_downsample(&img, 4).unwrap();
        let up = upsample_bilinear(&down, 4).unwrap();
        let d = rrmse(&up, &img).unwrap();
        assert!(d > 0.02, "downsample round trip rrmse = {d}");
    }

    #[test]
    fn rejects_tiny_dims() {
        assert!(synth_texture_image(1, 32, 128).is_err());
    }
}
