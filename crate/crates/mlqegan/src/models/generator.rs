//! Per-level super-resolution generator.
//!
//! conv9x9 head -> residual blocks (conv3x3 / instance norm / PReLU /
//! conv3x3 / instance norm, identity skip) -> one sub-pixel stage per scale
//! factor -> conv9x9 tail -> sigmoid, keeping outputs in [0, 1].

use ndarray::{Array1, Array4};
use rand_chacha::ChaCha8Rng;

use super::init::he_conv;
use super::spec::{GeneratorSpec, upsample_stages, BLOCK_KERNEL, HEAD_KERNEL};
use crate::error::{Error, Result};
use crate::nn::{Batch, Conv2d, InstanceNorm, PRelu, PixelShuffle, Real, Sigmoid};

#[derive(Debug, Clone)]
struct ResBlock<F> {
    conv1: Conv2d<F>,
    norm1: InstanceNorm<F>,
    act: PRelu<F>,
    conv2: Conv2d<F>,
    norm2: InstanceNorm<F>,
}

#[derive(Debug, Clone)]
struct UpsampleStage<F> {
    conv: Conv2d<F>,
    shuffle: PixelShuffle,
    act: PRelu<F>,
}

#[derive(Debug, Clone)]
pub struct Generator<F> {
    pub spec: GeneratorSpec,
    img_channels: usize,
    head: Conv2d<F>,
    head_act: PRelu<F>,
    blocks: Vec<ResBlock<F>>,
    ups: Vec<UpsampleStage<F>>,
    tail: Conv2d<F>,
}

pub struct ResBlockCache<F> {
    conv1_in: Batch<F>,
    norm1: crate::nn::layers::InstanceNormCache<F>,
    act_in: Batch<F>,
    conv2_in: Batch<F>,
    norm2: crate::nn::layers::InstanceNormCache<F>,
}

pub struct UpsampleCache<F> {
    conv_in: Batch<F>,
    act_in: Batch<F>,
}

/// Forward activations retained for one generator invocation.
pub struct GeneratorCache<F> {
    head_in: Batch<F>,
    head_act_in: Batch<F>,
    blocks: Vec<ResBlockCache<F>>,
    ups: Vec<UpsampleCache<F>>,
    tail_in: Batch<F>,
    out: Batch<F>,
}

impl<F> GeneratorCache<F> {
    pub fn output(&self) -> &Batch<F> {
        &self.out
    }
}

/// Parameter gradients mirroring [`Generator`]'s parameter tree.
pub struct GeneratorGrads<F> {
    head_w: Array4<F>,
    head_b: Array1<F>,
    head_a: Array1<F>,
    blocks: Vec<ResBlockGrads<F>>,
    ups: Vec<UpsampleGrads<F>>,
    tail_w: Array4<F>,
    tail_b: Array1<F>,
}

pub struct ResBlockGrads<F> {
    conv1_w: Array4<F>,
    conv1_b: Array1<F>,
    norm1_gamma: Array1<F>,
    norm1_beta: Array1<F>,
    act_a: Array1<F>,
    conv2_w: Array4<F>,
    conv2_b: Array1<F>,
    norm2_gamma: Array1<F>,
    norm2_beta: Array1<F>,
}

pub struct UpsampleGrads<F> {
    conv_w: Array4<F>,
    conv_b: Array1<F>,
    act_a: Array1<F>,
}

impl<F: Real> Generator<F> {
    pub fn new(spec: GeneratorSpec, img_channels: usize, rng: &mut ChaCha8Rng) -> Self {
        let n = spec.n_channels;
        let head = he_conv(rng, n, img_channels, HEAD_KERNEL, 1, HEAD_KERNEL / 2);
        let head_act = PRelu::new(n);
        let blocks = (0..spec.n_res_blocks)
            .map(|_| ResBlock {
                conv1: he_conv(rng, n, n, BLOCK_KERNEL, 1, BLOCK_KERNEL / 2),
                norm1: InstanceNorm::new(n),
                act: PRelu::new(n),
                conv2: he_conv(rng, n, n, BLOCK_KERNEL, 1, BLOCK_KERNEL / 2),
                norm2: InstanceNorm::new(n),
            })
            .collect();
        let ups = upsample_stages(spec.scale)
            .into_iter()
            .map(|r| UpsampleStage {
                conv: he_conv(rng, n * r * r, n, BLOCK_KERNEL, 1, BLOCK_KERNEL / 2),
                shuffle: PixelShuffle { r },
                act: PRelu::new(n),
            })
            .collect();
        let tail = he_conv(rng, img_channels, n, HEAD_KERNEL, 1, HEAD_KERNEL / 2);
        Self {
            spec,
            img_channels,
            head,
            head_act,
            blocks,
            ups,
            tail,
        }
    }

    pub fn img_channels(&self) -> usize {
        self.img_channels
    }

    fn check_input(&self, x: &Batch<F>) -> Result<()> {
        let (_, c, h, w) = x.dim();
        if c != self.img_channels {
            return Err(Error::Shape(format!(
                "generator level {} expects {} channels, got {c}",
                self.spec.level, self.img_channels
            )));
        }
        if h < 8 || w < 8 {
            return Err(Error::Shape(format!(
                "generator input must be at least 8x8, got {h}x{w}"
            )));
        }
        Ok(())
    }

    /// Inference-mode forward pass: `(n, c, h, w) -> (n, c, h*s, w*s)`,
    /// outputs in `[0, 1]`.
    pub fn forward(&self, x: &Batch<F>) -> Result<Batch<F>> {
        self.check_input(x)?;
        let mut a = self.head_act.forward(&self.head.forward(x));
        for blk in &self.blocks {
            let skip = a.clone();
            let mut t = blk.conv1.forward(&a);
            t = blk.norm1.forward(&t);
            t = blk.act.forward(&t);
            t = blk.conv2.forward(&t);
            t = blk.norm2.forward(&t);
            a = t + skip;
        }
        for up in &self.ups {
            a = up.act.forward(&up.shuffle.forward(&up.conv.forward(&a)));
        }
        Ok(Sigmoid.forward(&self.tail.forward(&a)))
    }

    /// Training-mode forward pass retaining the activations needed by
    /// [`Generator::backward`].
    pub fn forward_cached(&self, x: &Batch<F>) -> Result<(Batch<F>, GeneratorCache<F>)> {
        self.check_input(x)?;
        let head_in = x.clone();
        let head_act_in = self.head.forward(x);
        let mut a = self.head_act.forward(&head_act_in);
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for blk in &self.blocks {
            let conv1_in = a.clone();
            let c1 = blk.conv1.forward(&a);
            let (n1, norm1) = blk.norm1.forward_cached(&c1);
            let act_in = n1;
            let act_out = blk.act.forward(&act_in);
            let conv2_in = act_out;
            let c2 = blk.conv2.forward(&conv2_in);
            let (n2, norm2) = blk.norm2.forward_cached(&c2);
            a = n2 + &conv1_in;
            blocks.push(ResBlockCache {
                conv1_in,
                norm1,
                act_in,
                conv2_in,
                norm2,
            });
        }
        let mut ups = Vec::with_capacity(self.ups.len());
        for up in &self.ups {
            let conv_in = a.clone();
            let shuffled = up.shuffle.forward(&up.conv.forward(&a));
            let act_in = shuffled;
            a = up.act.forward(&act_in);
            ups.push(UpsampleCache { conv_in, act_in });
        }
        let tail_in = a;
        let out = Sigmoid.forward(&self.tail.forward(&tail_in));
        let cache = GeneratorCache {
            head_in,
            head_act_in,
            blocks,
            ups,
            tail_in,
            out: out.clone(),
        };
        Ok((out, cache))
    }

    /// Accumulates parameter gradients into `grads` and returns the gradient
    /// with respect to the input batch.
    pub fn backward(
        &self,
        cache: &GeneratorCache<F>,
        dy: &Batch<F>,
        grads: &mut GeneratorGrads<F>,
    ) -> Batch<F> {
        let d_tail_out = Sigmoid.backward(&cache.out, dy);
        let mut d = self
            .tail
            .backward(&cache.tail_in, &d_tail_out, &mut grads.tail_w, &mut grads.tail_b);
        for (up, (ucache, ugrads)) in self
            .ups
            .iter()
            .zip(cache.ups.iter().zip(grads.ups.iter_mut()))
            .rev()
        {
            let d_act_in = up.act.backward(&ucache.act_in, &d, &mut ugrads.act_a);
            let d_conv_out = up.shuffle.backward(&d_act_in);
            d = up
                .conv
                .backward(&ucache.conv_in, &d_conv_out, &mut ugrads.conv_w, &mut ugrads.conv_b);
        }
        for (blk, (bcache, bgrads)) in self
            .blocks
            .iter()
            .zip(cache.blocks.iter().zip(grads.blocks.iter_mut()))
            .rev()
        {
            let d_norm2_in = blk.norm2.backward(
                &bcache.norm2,
                &d,
                &mut bgrads.norm2_gamma,
                &mut bgrads.norm2_beta,
            );
            let d_conv2_in = blk.conv2.backward(
                &bcache.conv2_in,
                &d_norm2_in,
                &mut bgrads.conv2_w,
                &mut bgrads.conv2_b,
            );
            let d_act_in = blk.act.backward(&bcache.act_in, &d_conv2_in, &mut bgrads.act_a);
            let d_norm1_in = blk.norm1.backward(
                &bcache.norm1,
                &d_act_in,
                &mut bgrads.norm1_gamma,
                &mut bgrads.norm1_beta,
            );
            let d_path = blk.conv1.backward(
                &bcache.conv1_in,
                &d_norm1_in,
                &mut bgrads.conv1_w,
                &mut bgrads.conv1_b,
            );
            // identity skip
            d = d_path + &d;
        }
        let d_head_out = self
            .head_act
            .backward(&cache.head_act_in, &d, &mut grads.head_a);
        self.head
            .backward(&cache.head_in, &d_head_out, &mut grads.head_w, &mut grads.head_b)
    }

    pub fn zero_grads(&self) -> GeneratorGrads<F> {
        GeneratorGrads {
            head_w: Array4::zeros(self.head.w.dim()),
            head_b: Array1::zeros(self.head.b.dim()),
            head_a: Array1::zeros(self.head_act.a.dim()),
            blocks: self
                .blocks
                .iter()
                .map(|b| ResBlockGrads {
                    conv1_w: Array4::zeros(b.conv1.w.dim()),
                    conv1_b: Array1::zeros(b.conv1.b.dim()),
                    norm1_gamma: Array1::zeros(b.norm1.gamma.dim()),
                    norm1_beta: Array1::zeros(b.norm1.beta.dim()),
                    act_a: Array1::zeros(b.act.a.dim()),
                    conv2_w: Array4::zeros(b.conv2.w.dim()),
                    conv2_b: Array1::zeros(b.conv2.b.dim()),
                    norm2_gamma: Array1::zeros(b.norm2.gamma.dim()),
                    norm2_beta: Array1::zeros(b.norm2.beta.dim()),
                })
                .collect(),
            ups: self
                .ups
                .iter()
                .map(|u| UpsampleGrads {
                    conv_w: Array4::zeros(u.conv.w.dim()),
                    conv_b: Array1::zeros(u.conv.b.dim()),
                    act_a: Array1::zeros(u.act.a.dim()),
                })
                .collect(),
            tail_w: Array4::zeros(self.tail.w.dim()),
            tail_b: Array1::zeros(self.tail.b.dim()),
        }
    }

    /// `(name, values)` for every parameter tensor, in a stable order.
    pub fn param_entries(&self) -> Vec<(String, &[F])> {
        let mut out: Vec<(String, &[F])> = Vec::new();
        out.push(("head/w".into(), self.head.w.as_slice().unwrap()));
        out.push(("head/b".into(), self.head.b.as_slice().unwrap()));
        out.push(("head_act/a".into(), self.head_act.a.as_slice().unwrap()));
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("block{i}/conv1/w"), b.conv1.w.as_slice().unwrap()));
            out.push((format!("block{i}/conv1/b"), b.conv1.b.as_slice().unwrap()));
            out.push((format!("block{i}/norm1/gamma"), b.norm1.gamma.as_slice().unwrap()));
            out.push((format!("block{i}/norm1/beta"), b.norm1.beta.as_slice().unwrap()));
            out.push((format!("block{i}/act/a"), b.act.a.as_slice().unwrap()));
            out.push((format!("block{i}/conv2/w"), b.conv2.w.as_slice().unwrap()));
            out.push((format!("block{i}/conv2/b"), b.conv2.b.as_slice().unwrap()));
            out.push((format!("block{i}/norm2/gamma"), b.norm2.gamma.as_slice().unwrap()));
            out.push((format!("block{i}/norm2/beta"), b.norm2.beta.as_slice().unwrap()));
        }
        for (i, u) in self.ups.iter().enumerate() {
            out.push((format!("up{i}/conv/w"), u.conv.w.as_slice().unwrap()));
            out.push((format!("up{i}/conv/b"), u.conv.b.as_slice().unwrap()));
            out.push((format!("up{i}/act/a"), u.act.a.as_slice().unwrap()));
        }
        out.push(("tail/w".into(), self.tail.w.as_slice().unwrap()));
        out.push(("tail/b".into(), self.tail.b.as_slice().unwrap()));
        out
    }

    /// Mutable variant of [`Generator::param_entries`], same order.
    pub fn param_entries_mut(&mut self) -> Vec<(String, &mut [F])> {
        let mut out: Vec<(String, &mut [F])> = Vec::new();
        out.push(("head/w".into(), self.head.w.as_slice_mut().unwrap()));
        out.push(("head/b".into(), self.head.b.as_slice_mut().unwrap()));
        out.push(("head_act/a".into(), self.head_act.a.as_slice_mut().unwrap()));
        for (i, b) in self.blocks.iter_mut().enumerate() {
            out.push((format!("block{i}/conv1/w"), b.conv1.w.as_slice_mut().unwrap()));
            out.push((format!("block{i}/conv1/b"), b.conv1.b.as_slice_mut().unwrap()));
            out.push((format!("block{i}/norm1/gamma"), b.norm1.gamma.as_slice_mut().unwrap()));
            out.push((format!("block{i}/norm1/beta"), b.norm1.beta.as_slice_mut().unwrap()));
            out.push((format!("block{i}/act/a"), b.act.a.as_slice_mut().unwrap()));
            out.push((format!("block{i}/conv2/w"), b.conv2.w.as_slice_mut().unwrap()));
            out.push((format!("block{i}/conv2/b"), b.conv2.b.as_slice_mut().unwrap()));
            out.push((format!("block{i}/norm2/gamma"), b.norm2.gamma.as_slice_mut().unwrap()));
            out.push((format!("block{i}/norm2/beta"), b.norm2.beta.as_slice_mut().unwrap()));
        }
        for (i, u) in self.ups.iter_mut().enumerate() {
            out.push((format!("up{i}/conv/w"), u.conv.w.as_slice_mut().unwrap()));
            out.push((format!("up{i}/conv/b"), u.conv.b.as_slice_mut().unwrap()));
            out.push((format!("up{i}/act/a"), u.act.a.as_slice_mut().unwrap()));
        }
        out.push(("tail/w".into(), self.tail.w.as_slice_mut().unwrap()));
        out.push(("tail/b".into(), self.tail.b.as_slice_mut().unwrap()));
        out
    }

    pub fn num_params(&self) -> usize {
        self.param_entries().iter().map(|(_, v)| v.len()).sum()
    }
}

impl<F: Real> GeneratorGrads<F> {
    /// Gradient tensors in the same order as
    /// [`Generator::param_entries`].
    pub fn entries(&self) -> Vec<&[F]> {
        let mut out: Vec<&[F]> = Vec::new();
        out.push(self.head_w.as_slice().unwrap());
        out.push(self.head_b.as_slice().unwrap());
        out.push(self.head_a.as_slice().unwrap());
        for b in &self.blocks {
            out.push(b.conv1_w.as_slice().unwrap());
            out.push(b.conv1_b.as_slice().unwrap());
            out.push(b.norm1_gamma.as_slice().unwrap());
            out.push(b.norm1_beta.as_slice().unwrap());
            out.push(b.act_a.as_slice().unwrap());
            out.push(b.conv2_w.as_slice().unwrap());
            out.push(b.conv2_b.as_slice().unwrap());
            out.push(b.norm2_gamma.as_slice().unwrap());
            out.push(b.norm2_beta.as_slice().unwrap());
        }
        for u in &self.ups {
            out.push(u.conv_w.as_slice().unwrap());
            out.push(u.conv_b.as_slice().unwrap());
            out.push(u.act_a.as_slice().unwrap());
        }
        out.push(self.tail_w.as_slice().unwrap());
        out.push(self.tail_b.as_slice().unwrap());
        out
    }
}
