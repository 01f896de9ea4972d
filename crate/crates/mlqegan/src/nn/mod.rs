//! Minimal CPU tensor backend with hand-written backprop.
//!
//! Everything is generic over [`Real`] so training runs in `f32` while
//! gradient-check oracles run the identical code in `f64`. Batch-level
//! parallelism is deterministic: per-image results are computed
//! independently and reduced in index order, so thread scheduling can never
//! change a single bit of the output.

mod conv;
pub mod layers;

pub use conv::Conv2d;
pub use layers::{
    sigmoid_scalar, Dense, GlobalAvgPool, InstanceNorm, InstanceNormCache, LeakyRelu, PRelu,
    PixelShuffle, Sigmoid,
};

use ndarray::{Array4, ArrayView3};

use crate::error::{Error, Result};

/// Scalar type for network parameters and activations.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::NumAssignOps
    + ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    const DTYPE: &'static str;

    fn fr(v: f64) -> Self {
        Self::from_f64(v).expect("f64 conversion")
    }

    fn f64(self) -> f64;

    fn append_le_bytes(vals: &[Self], out: &mut Vec<u8>);

    fn read_le_bytes(bytes: &[u8], count: usize) -> Result<Vec<Self>>;
}

impl Real for f32 {
    const DTYPE: &'static str = "f32";

    fn f64(self) -> f64 {
        self as f64
    }

    fn append_le_bytes(vals: &[Self], out: &mut Vec<u8>) {
        for v in vals {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn read_le_bytes(bytes: &[u8], count: usize) -> Result<Vec<Self>> {
        if bytes.len() < count * 4 {
            return Err(Error::Checkpoint("truncated f32 tensor data".into()));
        }
        Ok(bytes[..count * 4]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }
}

impl Real for f64 {
    const DTYPE: &'static str = "f64";

    fn f64(self) -> f64 {
        self
    }

    fn append_le_bytes(vals: &[Self], out: &mut Vec<u8>) {
        for v in vals {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn read_le_bytes(bytes: &[u8], count: usize) -> Result<Vec<Self>> {
        if bytes.len() < count * 8 {
            return Err(Error::Checkpoint("truncated f64 tensor data".into()));
        }
        Ok(bytes[..count * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
            .collect())
    }
}

/// Batched activations: `(batch, channels, height, width)`.
pub type Batch<F> = Array4<F>;

/// Runs `f` over the images of a batch in parallel and reassembles the
/// results in index order.
pub fn par_map_images<F: Real, T: Send>(
    batch: &Batch<F>,
    f: impl Fn(usize, ArrayView3<F>) -> T + Sync,
) -> Vec<T> {
    use rayon::prelude::*;
    let n = batch.dim().0;
    (0..n)
        .into_par_iter()
        .map(|i| f(i, batch.index_axis(ndarray::Axis(0), i)))
        .collect()
}

/// Assembles per-image planes back into a batch.
pub fn stack_images<F: Real>(images: Vec<ndarray::Array3<F>>) -> Batch<F> {
    assert!(!images.is_empty());
    let (c, h, w) = images[0].dim();
    let mut out = Array4::<F>::zeros((images.len(), c, h, w));
    for (i, img) in images.into_iter().enumerate() {
        out.index_axis_mut(ndarray::Axis(0), i).assign(&img);
    }
    out
}
