//! Per-level discriminator: strided conv stack, global average pooling,
//! two-layer dense head, sigmoid output clamped away from {0, 1}.

use ndarray::{Array1, Array2, Array4};
use rand_chacha::ChaCha8Rng;

use super::init::{he_conv, he_dense};
use super::spec::{DiscriminatorSpec, BLOCK_KERNEL, EPS_PROB, LEAKY_SLOPE};
use crate::error::{Error, Result};
use crate::nn::{sigmoid_scalar, Batch, Conv2d, Dense, GlobalAvgPool, LeakyRelu, Real};

#[derive(Debug, Clone)]
pub struct Discriminator<F> {
    pub spec: DiscriminatorSpec,
    img_channels: usize,
    head: Conv2d<F>,
    blocks: Vec<Conv2d<F>>,
    act: LeakyRelu<F>,
    fc1: Dense<F>,
    fc2: Dense<F>,
}

/// Forward activations retained for one discriminator invocation.
pub struct DiscriminatorCache<F> {
    head_in: Batch<F>,
    head_out: Batch<F>,
    /// Per block: (conv input, conv output) pre-activation.
    blocks: Vec<(Batch<F>, Batch<F>)>,
    pool_in_dims: (usize, usize),
    fc1_in: Array2<F>,
    fc1_out: Array2<F>,
    fc2_in: Array2<F>,
    /// Sigmoid outputs before clamping.
    sig: Array1<F>,
}

/// Parameter gradients mirroring [`Discriminator`]'s parameter tree.
pub struct DiscriminatorGrads<F> {
    head_w: Array4<F>,
    head_b: Array1<F>,
    blocks: Vec<(Array4<F>, Array1<F>)>,
    fc1_w: Array2<F>,
    fc1_b: Array1<F>,
    fc2_w: Array2<F>,
    fc2_b: Array1<F>,
}

impl<F: Real> Discriminator<F> {
    pub fn new(spec: DiscriminatorSpec, img_channels: usize, rng: &mut ChaCha8Rng) -> Self {
        let b = spec.base_channels;
        let head = he_conv(rng, b, img_channels, BLOCK_KERNEL, 1, BLOCK_KERNEL / 2);
        let mut blocks = Vec::with_capacity(spec.n_conv_blocks);
        let mut c = b;
        for _ in 0..spec.n_conv_blocks {
            blocks.push(he_conv(rng, c * 2, c, BLOCK_KERNEL, 2, BLOCK_KERNEL / 2));
            c *= 2;
        }
        let fc1 = he_dense(rng, c, c);
        let fc2 = he_dense(rng, 1, c);
        Self {
            spec,
            img_channels,
            head,
            blocks,
            act: LeakyRelu::new(LEAKY_SLOPE),
            fc1,
            fc2,
        }
    }

    fn check_input(&self, x: &Batch<F>) -> Result<()> {
        let (_, c, h, w) = x.dim();
        if c != self.img_channels {
            return Err(Error::Shape(format!(
                "discriminator level {} expects {} channels, got {c}",
                self.spec.level, self.img_channels
            )));
        }
        let min = 1usize << self.spec.n_conv_blocks;
        if h < min || w < min {
            return Err(Error::Shape(format!(
                "discriminator level {} needs inputs >= {min}x{min}, got {h}x{w}",
                self.spec.level
            )));
        }
        Ok(())
    }

    fn leaky2(&self, x: &Array2<F>) -> Array2<F> {
        x.mapv(|v| if v > F::zero() { v } else { self.act.slope * v })
    }

    fn leaky2_back(&self, x: &Array2<F>, dy: &Array2<F>) -> Array2<F> {
        let mut dx = dy.clone();
        for (d, &xv) in dx.iter_mut().zip(x.iter()) {
            if xv <= F::zero() {
                *d *= self.act.slope;
            }
        }
        dx
    }

    fn clamp_prob(v: F) -> F {
        let eps = F::fr(EPS_PROB);
        v.max(eps).min(F::one() - eps)
    }

    /// Per-image probabilities strictly inside `(0, 1)`.
    pub fn forward(&self, x: &Batch<F>) -> Result<Array1<F>> {
        self.check_input(x)?;
        let mut a = self.act.forward(&self.head.forward(x));
        for conv in &self.blocks {
            a = self.act.forward(&conv.forward(&a));
        }
        let pooled = GlobalAvgPool.forward(&a);
        let hidden = self.leaky2(&self.fc1.forward(&pooled));
        let logits = self.fc2.forward(&hidden);
        Ok(logits
            .column(0)
            .mapv(|v| Self::clamp_prob(sigmoid_scalar(v))))
    }

    pub fn forward_cached(&self, x: &Batch<F>) -> Result<(Array1<F>, DiscriminatorCache<F>)> {
        self.check_input(x)?;
        let head_in = x.clone();
        let head_out = self.head.forward(x);
        let mut a = self.act.forward(&head_out);
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for conv in &self.blocks {
            let conv_in = a.clone();
            let conv_out = conv.forward(&a);
            a = self.act.forward(&conv_out);
            blocks.push((conv_in, conv_out));
        }
        let (_, _, h, w) = a.dim();
        let fc1_in = GlobalAvgPool.forward(&a);
        let fc1_out = self.fc1.forward(&fc1_in);
        let fc2_in = self.leaky2(&fc1_out);
        let logits = self.fc2.forward(&fc2_in);
        let sig = logits.column(0).mapv(sigmoid_scalar);
        let probs = sig.mapv(Self::clamp_prob);
        let cache = DiscriminatorCache {
            head_in,
            head_out,
            blocks,
            pool_in_dims: (h, w),
            fc1_in,
            fc1_out,
            fc2_in,
            sig,
        };
        Ok((probs, cache))
    }

    /// Backward from the probability gradient. Accumulates parameter
    /// gradients into `grads` and returns the gradient with respect to the
    /// input batch (needed to train generators through the adversary).
    pub fn backward(
        &self,
        cache: &DiscriminatorCache<F>,
        dprobs: &Array1<F>,
        grads: &mut DiscriminatorGrads<F>,
    ) -> Batch<F> {
        let eps = F::fr(EPS_PROB);
        let n = dprobs.len();
        // Through the clamp (zero gradient where saturated) and the sigmoid.
        let mut dlogits = Array2::<F>::zeros((n, 1));
        for i in 0..n {
            let y = cache.sig[i];
            let passed = if y > eps && y < F::one() - eps {
                dprobs[i]
            } else {
                F::zero()
            };
            dlogits[[i, 0]] = passed * y * (F::one() - y);
        }
        let d_fc2_in = self
            .fc2
            .backward(&cache.fc2_in, &dlogits, &mut grads.fc2_w, &mut grads.fc2_b);
        let d_fc1_out = self.leaky2_back(&cache.fc1_out, &d_fc2_in);
        let d_fc1_in = self
            .fc1
            .backward(&cache.fc1_in, &d_fc1_out, &mut grads.fc1_w, &mut grads.fc1_b);
        let (h, w) = cache.pool_in_dims;
        let mut d = GlobalAvgPool.backward(&d_fc1_in, h, w);
        for (conv, ((conv_in, conv_out), (dw, db))) in self
            .blocks
            .iter()
            .zip(cache.blocks.iter().zip(grads.blocks.iter_mut()))
            .rev()
        {
            let d_conv_out = self.act.backward(conv_out, &d);
            d = conv.backward(conv_in, &d_conv_out, dw, db);
        }
        let d_head_out = self.act.backward(&cache.head_out, &d);
        self.head
            .backward(&cache.head_in, &d_head_out, &mut grads.head_w, &mut grads.head_b)
    }

    pub fn zero_grads(&self) -> DiscriminatorGrads<F> {
        DiscriminatorGrads {
            head_w: Array4::zeros(self.head.w.dim()),
            head_b: Array1::zeros(self.head.b.dim()),
            blocks: self
                .blocks
                .iter()
                .map(|c| (Array4::zeros(c.w.dim()), Array1::zeros(c.b.dim())))
                .collect(),
            fc1_w: Array2::zeros(self.fc1.w.dim()),
            fc1_b: Array1::zeros(self.fc1.b.dim()),
            fc2_w: Array2::zeros(self.fc2.w.dim()),
            fc2_b: Array1::zeros(self.fc2.b.dim()),
        }
    }

    pub fn param_entries(&self) -> Vec<(String, &[F])> {
        let mut out: Vec<(String, &[F])> = Vec::new();
        out.push(("head/w".into(), self.head.w.as_slice().unwrap()));
        out.push(("head/b".into(), self.head.b.as_slice().unwrap()));
        for (i, c) in self.blocks.iter().enumerate() {
            out.push((format!("block{i}/w"), c.w.as_slice().unwrap()));
            out.push((format!("block{i}/b"), c.b.as_slice().unwrap()));
        }
        out.push(("fc1/w".into(), self.fc1.w.as_slice().unwrap()));
        out.push(("fc1/b".into(), self.fc1.b.as_slice().unwrap()));
        out.push(("fc2/w".into(), self.fc2.w.as_slice().unwrap()));
        out.push(("fc2/b".into(), self.fc2.b.as_slice().unwrap()));
        out
    }

    pub fn param_entries_mut(&mut self) -> Vec<(String, &mut [F])> {
        let mut out: Vec<(String, &mut [F])> = Vec::new();
        out.push(("head/w".into(), self.head.w.as_slice_mut().unwrap()));
        out.push(("head/b".into(), self.head.b.as_slice_mut().unwrap()));
        for (i, c) in self.blocks.iter_mut().enumerate() {
            out.push((format!("block{i}/w"), c.w.as_slice_mut().unwrap()));
            out.push((format!("block{i}/b"), c.b.as_slice_mut().unwrap()));
        }
        out.push(("fc1/w".into(), self.fc1.w.as_slice_mut().unwrap()));
        out.push(("fc1/b".into(), self.fc1.b.as_slice_mut().unwrap()));
        out.push(("fc2/w".into(), self.fc2.w.as_slice_mut().unwrap()));
        out.push(("fc2/b".into(), self.fc2.b.as_slice_mut().unwrap()));
        out
    }

    pub fn num_params(&self) -> usize {
        self.param_entries().iter().map(|(_, v)| v.len()).sum()
    }
}

impl<F: Real> DiscriminatorGrads<F> {
    /// Gradient tensors in the same order as
    /// [`Discriminator::param_entries`].
    pub fn entries(&self) -> Vec<&[F]> {
        let mut out: Vec<&[F]> = Vec::new();
        out.push(self.head_w.as_slice().unwrap());
        out.push(self.head_b.as_slice().unwrap());
        for (w, b) in &self.blocks {
            out.push(w.as_slice().unwrap());
            out.push(b.as_slice().unwrap());
        }
        out.push(self.fc1_w.as_slice().unwrap());
        out.push(self.fc1_b.as_slice().unwrap());
        out.push(self.fc2_w.as_slice().unwrap());
        out.push(self.fc2_b.as_slice().unwrap());
        out
    }
}
