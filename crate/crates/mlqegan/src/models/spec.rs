//! Capacity specifications and analytic parameter counts.
//!
//! The per-level generator chain must have progressively fewer parameters at
//! higher levels; the counts here are closed-form so the invariant can be
//! checked at configuration time without building any network.

use serde::{Deserialize, Serialize};

/// Capacity of one generator level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    /// 1-based level index within the chain.
    pub level: usize,
    /// Per-level upscaling factor (>= 2).
    pub scale: usize,
    pub n_res_blocks: usize,
    pub n_channels: usize,
}

/// Capacity of one discriminator level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscriminatorSpec {
    pub level: usize,
    /// Number of stride-2 conv blocks after the stride-1 head.
    pub n_conv_blocks: usize,
    pub base_channels: usize,
}

/// Kernel sizes fixed by the architecture.
pub const HEAD_KERNEL: usize = 9;
pub const BLOCK_KERNEL: usize = 3;
/// Negative slope of the discriminator LeakyReLU activations.
pub const LEAKY_SLOPE: f64 = 0.2;
/// Discriminator probabilities are clamped to `[EPS_PROB, 1 - EPS_PROB]`.
pub const EPS_PROB: f64 = 1e-6;

fn conv_params(c_in: usize, c_out: usize, k: usize) -> usize {
    c_out * (c_in * k * k + 1)
}

/// Splits an integer scale into the per-stage shuffle factors: one 2x
/// sub-pixel stage per factor of 2, then one stage per remaining odd prime.
pub fn upsample_stages(scale: usize) -> Vec<usize> {
    assert!(scale >= 2, "scale must be >= 2");
    let mut s = scale;
    let mut stages = Vec::new();
    while s % 2 == 0 {
        stages.push(2);
        s /= 2;
    }
    let mut p = 3;
    while s > 1 {
        while s % p == 0 {
            stages.push(p);
            s /= p;
        }
        p += 2;
    }
    stages
}

/// Exact number of trainable scalars in a generator with this capacity,
/// for `img_channels`-channel images.
///
/// head conv (9x9) + PReLU, `n_res_blocks` x (two 3x3 convs, two instance
/// norms, one PReLU), one sub-pixel stage per scale factor (3x3 conv +
/// shuffle + PReLU), tail conv (9x9).
pub fn generator_param_count(spec: &GeneratorSpec, img_channels: usize) -> usize {
    let n = spec.n_channels;
    let mut total = conv_params(img_channels, n, HEAD_KERNEL) + n; // head conv + PReLU
    let block = 2 * conv_params(n, n, BLOCK_KERNEL) // two convs
        + 2 * 2 * n // two instance norms (gamma, beta)
        + n; // PReLU
    total += spec.n_res_blocks * block;
    for r in upsample_stages(spec.scale) {
        total += conv_params(n, n * r * r, BLOCK_KERNEL) + n; // conv + post-shuffle PReLU
    }
    total += conv_params(n, img_channels, HEAD_KERNEL); // tail
    total
}

/// Exact number of trainable scalars in a discriminator with this capacity.
///
/// stride-1 head conv, `n_conv_blocks` stride-2 convs doubling channels,
/// global average pooling, two dense layers.
pub fn discriminator_param_count(spec: &DiscriminatorSpec, img_channels: usize) -> usize {
    let b = spec.base_channels;
    let mut total = conv_params(img_channels, b, BLOCK_KERNEL);
    let mut c = b;
    for _ in 0..spec.n_conv_blocks {
        total += conv_params(c, c * 2, BLOCK_KERNEL);
        c *= 2;
    }
    total += c * (c + 1); // dense c -> c
    total += c + 1; // dense c -> 1
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(blocks: usize, channels: usize, scale: usize) -> GeneratorSpec {
        GeneratorSpec {
            level: 1,
            scale,
            n_res_blocks: blocks,
            n_channels: channels,
        }
    }

    #[test]
    fn upsample_stage_factorization() {
        assert_eq!(upsample_stages(2), vec![2]);
        assert_eq!(upsample_stages(4), vec![2, 2]);
        assert_eq!(upsample_stages(8), vec![2, 2, 2]);
        assert_eq!(upsample_stages(3), vec![3]);
        assert_eq!(upsample_stages(6), vec![2, 3]);
    }

    #[test]
    fn count_monotone_in_res_blocks() {
        assert!(generator_param_count(&spec(4, 64, 2), 3) < generator_param_count(&spec(8, 64, 2), 3));
    }

    #[test]
    fn zero_block_count_is_head_upsample_tail() {
        // Independent closed form for the blockless generator.
        let n = 24;
        let expect = n * (3 * 81 + 1) + n // head conv + PReLU
            + n * 4 * (n * 9 + 1) + n // single 2x sub-pixel stage + PReLU
            + 3 * (n * 81 + 1); // tail
        assert_eq!(generator_param_count(&spec(0, n, 2), 3), expect);
    }

    #[test]
    fn default_schedule_counts_decrease() {
        let counts: Vec<usize> = [(8, 64), (4, 48), (2, 32)]
            .iter()
            .map(|&(b, c)| generator_param_count(&spec(b, c, 2), 3))
            .collect();
        assert!(counts[0] > counts[1] && counts[1] > counts[2], "{counts:?}");
    }

    #[test]
    fn discriminator_count_positive_and_monotone() {
        let d1 = DiscriminatorSpec {
            level: 1,
            n_conv_blocks: 4,
            base_channels: 32,
        };
        let d2 = DiscriminatorSpec {
            level: 2,
            n_conv_blocks: 3,
            base_channels: 32,
        };
        assert!(discriminator_param_count(&d1, 3) > discriminator_param_count(&d2, 3));
    }
}
