//! Deterministic He-style parameter initialization.

use ndarray::{Array1, Array2, Array4};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::nn::{Conv2d, Dense, Real};

fn normal_draws<F: Real>(rng: &mut ChaCha8Rng, n: usize, std: f64) -> Vec<F> {
    let dist = Normal::new(0.0, std).expect("valid normal");
    (0..n).map(|_| F::fr(dist.sample(rng))).collect()
}

/// Convolution with He-normal weights (`std = sqrt(2 / fan_in)`) and zero
/// biases.
pub fn he_conv<F: Real>(
    rng: &mut ChaCha8Rng,
    c_out: usize,
    c_in: usize,
    k: usize,
    stride: usize,
    pad: usize,
) -> Conv2d<F> {
    let fan_in = c_in * k * k;
    let std = (2.0 / fan_in as f64).sqrt();
    let w = Array4::from_shape_vec(
        (c_out, c_in, k, k),
        normal_draws(rng, c_out * c_in * k * k, std),
    )
    .expect("shape matches draw count");
    Conv2d {
        w,
        b: Array1::zeros(c_out),
        stride,
        pad,
    }
}

/// Dense layer with He-normal weights and zero biases.
pub fn he_dense<F: Real>(rng: &mut ChaCha8Rng, n_out: usize, n_in: usize) -> Dense<F> {
    let std = (2.0 / n_in as f64).sqrt();
    let w = Array2::from_shape_vec((n_out, n_in), normal_draws(rng, n_out * n_in, std))
        .expect("shape matches draw count");
    Dense {
        w,
        b: Array1::zeros(n_out),
    }
}
