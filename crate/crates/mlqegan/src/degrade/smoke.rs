//! Surgical-smoke simulation with the atmospheric scattering model.
//!
//! `I' = t * I + (1 - t) * A` where the transmission field
//! `t = exp(-k * d)` comes from a multi-octave value-noise density `d` in
//! `[0, 1]`. With the default white airlight this only ever brightens
//! pixels, like real smoke over tissue.

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use super::noise::value_noise_field;
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::rng::{mix, tag};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmokeParams {
    /// Airlight color (uniform across channels), in `[0, 1]`.
    pub airlight: f64,
    /// Optical density multiplier; larger means thicker smoke.
    pub density_k: f64,
    pub noise_octaves: usize,
    /// Lattice period of the coarsest noise octave, in pixels.
    pub noise_base_period: usize,
    pub seed: u64,
}

impl Default for SmokeParams {
    fn default() -> Self {
        Self {
            airlight: 1.0,
            density_k: 1.2,
            noise_octaves: 4,
            noise_base_period: 32,
            seed: 0,
        }
    }
}

impl SmokeParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.airlight) {
            return Err(Error::Config(format!(
                "airlight: must lie in [0, 1], got {}",
                self.airlight
            )));
        }
        if !self.density_k.is_finite() || self.density_k <= 0.0 {
            return Err(Error::Config(format!(
                "density_k: must be positive, got {}",
                self.density_k
            )));
        }
        if self.noise_octaves < 1 {
            return Err(Error::Config("noise_octaves: must be >= 1".into()));
        }
        if self.noise_base_period < 1 {
            return Err(Error::Config("noise_base_period: must be >= 1".into()));
        }
        Ok(())
    }

    /// Same parameters with a seed derived for one dataset item, so that
    /// parallel and serial generation agree.
    pub fn for_item(&self, item_index: u64) -> Self {
        Self {
            seed: mix(&[self.seed, tag::SMOKE, item_index]),
            ..*self
        }
    }
}

/// Transmission field `t = exp(-k * d)` in `(0, 1]`.
pub fn transmission_field(h: usize, w: usize, p: &SmokeParams) -> Array2<f64> {
    let d = value_noise_field(
        mix(&[p.seed, tag::NOISE]),
        h,
        w,
        p.noise_octaves,
        p.noise_base_period,
    );
    d.mapv(|density| (-p.density_k * density).exp())
}

/// Blends the image toward the airlight by the transmission field.
/// Deterministic given `(img, p)`.
pub fn simulate_smoke(img: &ImageTensor, p: &SmokeParams) -> Result<ImageTensor> {
    p.validate()?;
    let (c, h, w) = img.data().dim();
    let t = transmission_field(h, w, p);
    let mut out = Array3::<f32>::zeros((c, h, w));
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                let ti = t[[y, x]];
                let v = ti * img.data()[[ch, y, x]] as f64 + (1.0 - ti) * p.airlight;
                out[[ch, y, x]] = v as f32;
            }
        }
    }
    ImageTensor::from_unclamped(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(h: usize, w: usize, v: f32) -> ImageTensor {
        ImageTensor::constant(1, h, w, v).unwrap()
    }

    #[test]
    fn vanishing_density_returns_input() {
        let img = gray(16, 16, 0.3);
        let p = SmokeParams {
            density_k: 1e-9,
            ..SmokeParams::default()
        };
        let out = simulate_smoke(&img, &p).unwrap();
        for (a, b) in out.data().iter().zip(img.data().iter()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn extreme_density_approaches_airlight() {
        let img = gray(16, 16, 0.3);
        let p = SmokeParams {
            density_k: 1e6,
            ..SmokeParams::default()
        };
        let out = simulate_smoke(&img, &p).unwrap();
        // The noise field can be zero at lattice points, so allow a tiny
        // fraction of pixels to keep their value.
        let brightened = out.data().iter().filter(|&&v| v > 0.99).count();
        assert!(brightened as f64 > 0.9 * (16.0 * 16.0));
    }

    #[test]
    fn convex_blend_toward_white_airlight() {
        let img = gray(32, 32, 0.5);
        let p = SmokeParams {
            seed: 7,
            density_k: 1.0,
            airlight: 1.0,
            ..SmokeParams::default()
        };
        let out = simulate_smoke(&img, &p).unwrap();
        // Closed form per pixel: 0.5 t + (1 - t) in [0.5, 1].
        let t = transmission_field(32, 32, &p);
        let mut mean = 0.0;
        for y in 0..32 {
            for x in 0..32 {
                let got = out.data()[[0, y, x]] as f64;
                let want = 0.5 * t[[y, x]] + (1.0 - t[[y, x]]);
                assert!((got - want).abs() < 1e-6);
                assert!((0.5..=1.0).contains(&got));
                mean += got;
            }
        }
        mean /= 32.0 * 32.0;
        assert!(mean > 0.5, "mean {mean}");
    }

    #[test]
    fn never_darkens_under_white_airlight() {
        let tex = crate::degrade::synth_texture_image(11, 64, 64).unwrap();
        let p = SmokeParams::default();
        let out = simulate_smoke(&tex, &p).unwrap();
        for (o, i) in out.data().iter().zip(tex.data().iter()) {
            assert!(o >= i, "smoke darkened a pixel: {o} < {i}");
        }
    }

    #[test]
    fn rejects_non_positive_density() {
        let img = gray(8, 8, 0.5);
        let p = SmokeParams {
            density_k: 0.0,
            ..SmokeParams::default()
        };
        assert!(simulate_smoke(&img, &p).is_err());
    }

    #[test]
    fn deterministic_given_params() {
        let tex = crate::degrade::synth_texture_image(2, 64, 64).unwrap();
        let p = SmokeParams {
            seed: 42,
            ..SmokeParams::default()
        };
        let a = simulate_smoke(&tex, &p).unwrap();
        let b = simulate_smoke(&tex, &p).unwrap();
        assert_eq!(a, b);
    }
}
