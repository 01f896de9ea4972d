//! Multi-octave value noise on an integer lattice.
//!
//! Deterministic given `(seed, octave, lattice coords)`: lattice values come
//! from a hash rather than a stateful RNG, so any sub-region can be generated
//! independently and in parallel with identical results.

use ndarray::Array2;

use crate::rng::lattice_unit;

fn fade(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// One octave of value noise with the given lattice period (pixels).
fn octave_field(seed: u64, octave: u64, h: usize, w: usize, period: usize) -> Array2<f64> {
    let p = period.max(1);
    let gh = h / p + 2;
    let gw = w / p + 2;
    let mut lattice = Array2::<f64>::zeros((gh, gw));
    for gy in 0..gh {
        for gx in 0..gw {
            lattice[[gy, gx]] = lattice_unit(seed, &[octave as i64, gy as i64, gx as i64]);
        }
    }
    let mut out = Array2::<f64>::zeros((h, w));
    for y in 0..h {
        let gy = y / p;
        let ty = fade((y % p) as f64 / p as f64);
        for x in 0..w {
            let gx = x / p;
            let tx = fade((x % p) as f64 / p as f64);
            let v00 = lattice[[gy, gx]];
            let v01 = lattice[[gy, gx + 1]];
            let v10 = lattice[[gy + 1, gx]];
            let v11 = lattice[[gy + 1, gx + 1]];
            let top = v00 + (v01 - v00) * tx;
            let bot = v10 + (v11 - v10) * tx;
            out[[y, x]] = top + (bot - top) * ty;
        }
    }
    out
}

/// Multi-octave value-noise field in `[0, 1]`. Octave `o` uses period
/// `base_period / 2^o` and amplitude `2^-o`; the sum is renormalized.
pub fn value_noise_field(
    seed: u64,
    h: usize,
    w: usize,
    octaves: usize,
    base_period: usize,
) -> Array2<f64> {
    assert!(octaves >= 1, "octaves must be >= 1");
    assert!(base_period >= 1, "base period must be >= 1");
    let mut sum = Array2::<f64>::zeros((h, w));
    let mut amp_total = 0.0;
    for o in 0..octaves {
        let amp = 0.5f64.powi(o as i32);
        let period = (base_period >> o).max(1);
        let field = octave_field(seed, o as u64, h, w, period);
        sum.zip_mut_with(&field, |s, &f| *s += amp * f);
        amp_total += amp;
    }
    sum.mapv_into(|v| v / amp_total)
}
