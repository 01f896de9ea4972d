//! Pointwise and normalization layers with hand-written backward passes.

use ndarray::{Array1, Array2, Array4, Axis};

use super::{Batch, Real};

/// Per-channel, per-image normalization with learnable affine parameters.
/// Unlike batch normalization it is independent of batch composition, so
/// single-image and batched forward passes agree exactly.
#[derive(Debug, Clone)]
pub struct InstanceNorm<F> {
    pub gamma: Array1<F>,
    pub beta: Array1<F>,
    pub eps: F,
}

pub struct InstanceNormCache<F> {
    xhat: Array4<F>,
    inv_std: Array2<F>,
}

impl<F: Real> InstanceNorm<F> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Array1::from_elem(channels, F::one()),
            beta: Array1::zeros(channels),
            eps: F::fr(1e-5),
        }
    }

    pub fn forward(&self, x: &Batch<F>) -> Batch<F> {
        self.forward_impl(x).0
    }

    pub fn forward_cached(&self, x: &Batch<F>) -> (Batch<F>, InstanceNormCache<F>) {
        let (y, xhat, inv_std) = self.forward_impl(x);
        (y, InstanceNormCache { xhat, inv_std })
    }

    fn forward_impl(&self, x: &Batch<F>) -> (Batch<F>, Array4<F>, Array2<F>) {
        let (n, c, h, w) = x.dim();
        let area = F::fr((h * w) as f64);
        let mut xhat = Array4::<F>::zeros((n, c, h, w));
        let mut inv_std = Array2::<F>::zeros((n, c));
        let mut y = Array4::<F>::zeros((n, c, h, w));
        for i in 0..n {
            for ch in 0..c {
                let plane = x.slice(ndarray::s![i, ch, .., ..]);
                let mean = plane.iter().copied().sum::<F>() / area;
                let var = plane
                    .iter()
                    .map(|&v| (v - mean) * (v - mean))
                    .sum::<F>()
                    / area;
                let inv = F::one() / (var + self.eps).sqrt();
                inv_std[[i, ch]] = inv;
                let g = self.gamma[ch];
                let b = self.beta[ch];
                for yy in 0..h {
                    for xx in 0..w {
                        let xh = (x[[i, ch, yy, xx]] - mean) * inv;
                        xhat[[i, ch, yy, xx]] = xh;
                        y[[i, ch, yy, xx]] = g * xh + b;
                    }
                }
            }
        }
        (y, xhat, inv_std)
    }

    pub fn backward(
        &self,
        cache: &InstanceNormCache<F>,
        dy: &Batch<F>,
        dgamma: &mut Array1<F>,
        dbeta: &mut Array1<F>,
    ) -> Batch<F> {
        let (n, c, h, w) = dy.dim();
        let area = F::fr((h * w) as f64);
        let mut dx = Array4::<F>::zeros((n, c, h, w));
        for i in 0..n {
            for ch in 0..c {
                let g = self.gamma[ch];
                let inv = cache.inv_std[[i, ch]];
                let mut sum_dy = F::zero();
                let mut sum_dy_xhat = F::zero();
                for yy in 0..h {
                    for xx in 0..w {
                        let d = dy[[i, ch, yy, xx]];
                        let xh = cache.xhat[[i, ch, yy, xx]];
                        sum_dy += d;
                        sum_dy_xhat += d * xh;
                    }
                }
                dbeta[ch] += sum_dy;
                dgamma[ch] += sum_dy_xhat;
                let mean_dy = sum_dy / area;
                let mean_dy_xhat = sum_dy_xhat / area;
                for yy in 0..h {
                    for xx in 0..w {
                        let d = dy[[i, ch, yy, xx]];
                        let xh = cache.xhat[[i, ch, yy, xx]];
                        dx[[i, ch, yy, xx]] =
                            g * inv * (d - mean_dy - xh * mean_dy_xhat);
                    }
                }
            }
        }
        dx
    }
}

/// PReLU with one learnable slope per channel.
#[derive(Debug, Clone)]
pub struct PRelu<F> {
    pub a: Array1<F>,
}

impl<F: Real> PRelu<F> {
    pub fn new(channels: usize) -> Self {
        Self {
            a: Array1::from_elem(channels, F::fr(0.25)),
        }
    }

    pub fn forward(&self, x: &Batch<F>) -> Batch<F> {
        let mut y = x.clone();
        let c = x.dim().1;
        for ch in 0..c {
            let a = self.a[ch];
            for v in y.slice_mut(ndarray::s![.., ch, .., ..]).iter_mut() {
                if *v < F::zero() {
                    *v = a * *v;
                }
            }
        }
        y
    }

    pub fn backward(&self, x: &Batch<F>, dy: &Batch<F>, da: &mut Array1<F>) -> Batch<F> {
        let (n, c, h, w) = x.dim();
        let mut dx = Array4::<F>::zeros((n, c, h, w));
        for ch in 0..c {
            let a = self.a[ch];
            let mut acc = F::zero();
            for i in 0..n {
                for yy in 0..h {
                    for xx in 0..w {
                        let xv = x[[i, ch, yy, xx]];
                        let d = dy[[i, ch, yy, xx]];
                        if xv > F::zero() {
                            dx[[i, ch, yy, xx]] = d;
                        } else {
                            dx[[i, ch, yy, xx]] = a * d;
                            acc += d * xv;
                        }
                    }
                }
            }
            da[ch] += acc;
        }
        dx
    }
}

/// LeakyReLU with a fixed negative slope.
#[derive(Debug, Clone)]
pub struct LeakyRelu<F> {
    pub slope: F,
}

impl<F: Real> LeakyRelu<F> {
    pub fn new(slope: f64) -> Self {
        Self { slope: F::fr(slope) }
    }

    pub fn forward(&self, x: &Batch<F>) -> Batch<F> {
        x.mapv(|v| if v > F::zero() { v } else { self.slope * v })
    }

    pub fn backward(&self, x: &Batch<F>, dy: &Batch<F>) -> Batch<F> {
        let mut dx = dy.clone();
        for (d, &xv) in dx.iter_mut().zip(x.iter()) {
            if xv <= F::zero() {
                *d *= self.slope;
            }
        }
        dx
    }
}

/// Elementwise logistic function.
#[derive(Debug, Clone)]
pub struct Sigmoid;

impl Sigmoid {
    pub fn forward<F: Real>(&self, x: &Batch<F>) -> Batch<F> {
        x.mapv(sigmoid_scalar)
    }

    /// Backward given the forward *output*.
    pub fn backward<F: Real>(&self, y: &Batch<F>, dy: &Batch<F>) -> Batch<F> {
        let mut dx = dy.clone();
        for (d, &yv) in dx.iter_mut().zip(y.iter()) {
            *d *= yv * (F::one() - yv);
        }
        dx
    }
}

pub fn sigmoid_scalar<F: Real>(v: F) -> F {
    if v >= F::zero() {
        F::one() / (F::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (F::one() + e)
    }
}

/// Sub-pixel rearrangement: `(n, c*r^2, h, w) -> (n, c, h*r, w*r)`.
#[derive(Debug, Clone)]
pub struct PixelShuffle {
    pub r: usize,
}

impl PixelShuffle {
    pub fn forward<F: Real>(&self, x: &Batch<F>) -> Batch<F> {
        let (n, crr, h, w) = x.dim();
        let r = self.r;
        assert_eq!(crr % (r * r), 0, "channels divisible by r^2");
        let c = crr / (r * r);
        let mut y = Array4::<F>::zeros((n, c, h * r, w * r));
        for i in 0..n {
            for ch in 0..c {
                for yy in 0..h * r {
                    for xx in 0..w * r {
                        let src_c = ch * r * r + (yy % r) * r + (xx % r);
                        y[[i, ch, yy, xx]] = x[[i, src_c, yy / r, xx / r]];
                    }
                }
            }
        }
        y
    }

    pub fn backward<F: Real>(&self, dy: &Batch<F>) -> Batch<F> {
        let (n, c, hr, wr) = dy.dim();
        let r = self.r;
        let (h, w) = (hr / r, wr / r);
        let mut dx = Array4::<F>::zeros((n, c * r * r, h, w));
        for i in 0..n {
            for ch in 0..c {
                for yy in 0..hr {
                    for xx in 0..wr {
                        let src_c = ch * r * r + (yy % r) * r + (xx % r);
                        dx[[i, src_c, yy / r, xx / r]] = dy[[i, ch, yy, xx]];
                    }
                }
            }
        }
        dx
    }
}

/// Fully-connected layer on `(batch, features)` matrices.
#[derive(Debug, Clone)]
pub struct Dense<F> {
    /// `(out, in)`
    pub w: Array2<F>,
    pub b: Array1<F>,
}

impl<F: Real> Dense<F> {
    pub fn forward(&self, x: &Array2<F>) -> Array2<F> {
        let mut y = x.dot(&self.w.t());
        for (o, mut col) in y.axis_iter_mut(Axis(1)).enumerate() {
            col += self.b[o];
        }
        y
    }

    pub fn backward(
        &self,
        x: &Array2<F>,
        dy: &Array2<F>,
        dw: &mut Array2<F>,
        db: &mut Array1<F>,
    ) -> Array2<F> {
        *dw += &dy.t().dot(x);
        *db += &dy.sum_axis(Axis(0));
        dy.dot(&self.w)
    }
}

/// Mean over the spatial dims: `(n, c, h, w) -> (n, c)`.
#[derive(Debug, Clone)]
pub struct GlobalAvgPool;

impl GlobalAvgPool {
    pub fn forward<F: Real>(&self, x: &Batch<F>) -> Array2<F> {
        let (n, c, h, w) = x.dim();
        let area = F::fr((h * w) as f64);
        let mut y = Array2::<F>::zeros((n, c));
        for i in 0..n {
            for ch in 0..c {
                y[[i, ch]] = x.slice(ndarray::s![i, ch, .., ..]).iter().copied().sum::<F>() / area;
            }
        }
        y
    }

    pub fn backward<F: Real>(&self, dy: &Array2<F>, h: usize, w: usize) -> Batch<F> {
        let (n, c) = dy.dim();
        let area = F::fr((h * w) as f64);
        let mut dx = Array4::<F>::zeros((n, c, h, w));
        for i in 0..n {
            for ch in 0..c {
                let v = dy[[i, ch]] / area;
                dx.slice_mut(ndarray::s![i, ch, .., ..]).fill(v);
            }
        }
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn rand_batch(shape: (usize, usize, usize, usize), seed: u64) -> Array4<f64> {
        let mut rng = crate::rng::stream_rng(seed, &[7]);
        Array4::from_shape_fn(shape, |_| rng.gen_range(-1.5..1.5))
    }

    #[test]
    fn instance_norm_standardizes_and_backprops() {
        let norm = InstanceNorm::<f64>::new(2);
        let x = rand_batch((2, 2, 5, 6), 1);
        let (y, cache) = norm.forward_cached(&x);
        // zero mean, unit variance per (image, channel)
        for i in 0..2 {
            for ch in 0..2 {
                let plane = y.slice(ndarray::s![i, ch, .., ..]);
                let mean: f64 = plane.iter().sum::<f64>() / 30.0;
                let var: f64 = plane.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 30.0;
                assert!(mean.abs() < 1e-10);
                assert!((var - 1.0).abs() < 1e-4);
            }
        }

        // finite-difference check of dx, dgamma, dbeta
        let g = rand_batch(y.dim(), 2);
        let loss = |n: &InstanceNorm<f64>, x: &Array4<f64>| (n.forward(x) * &g).sum();
        let mut dgamma = Array1::<f64>::zeros(2);
        let mut dbeta = Array1::<f64>::zeros(2);
        let dx = norm.backward(&cache, &g, &mut dgamma, &mut dbeta);
        let h = 1e-6;
        for &idx in &[(0, 0, 0, 0), (1, 1, 4, 5), (0, 1, 2, 3)] {
            let mut xp = x.clone();
            xp[idx] += h;
            let up = loss(&norm, &xp);
            xp[idx] -= 2.0 * h;
            let down = loss(&norm, &xp);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - dx[idx]).abs() < 1e-5 * fd.abs().max(1.0), "dx {idx:?}");
        }
        for ch in 0..2 {
            let mut np = norm.clone();
            np.gamma[ch] += h;
            let up = loss(&np, &x);
            np.gamma[ch] -= 2.0 * h;
            let down = loss(&np, &x);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - dgamma[ch]).abs() < 1e-6 * fd.abs().max(1.0));
        }
    }

    #[test]
    fn prelu_gradients() {
        let mut act = PRelu::<f64>::new(3);
        act.a[1] = -0.1;
        let x = rand_batch((2, 3, 4, 4), 3);
        let g = rand_batch(x.dim(), 4);
        let mut da = Array1::<f64>::zeros(3);
        let dx = act.backward(&x, &g, &mut da);
        let loss = |a: &PRelu<f64>, x: &Array4<f64>| (a.forward(x) * &g).sum();
        let h = 1e-6;
        for ch in 0..3 {
            let mut ap = act.clone();
            ap.a[ch] += h;
            let up = loss(&ap, &x);
            ap.a[ch] -= 2.0 * h;
            let down = loss(&ap, &x);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - da[ch]).abs() < 1e-6 * fd.abs().max(1.0));
        }
        let mut xp = x.clone();
        xp[(0, 0, 0, 0)] += h;
        let up = loss(&act, &xp);
        xp[(0, 0, 0, 0)] -= 2.0 * h;
        let down = loss(&act, &xp);
        let fd = (up - down) / (2.0 * h);
        assert!((fd - dx[(0, 0, 0, 0)]).abs() < 1e-6 * fd.abs().max(1.0));
    }

    #[test]
    fn pixel_shuffle_round_trip() {
        let x = rand_batch((1, 8, 3, 2), 5);
        let shuffle = PixelShuffle { r: 2 };
        let y = shuffle.forward(&x);
        assert_eq!(y.dim(), (1, 2, 6, 4));
        let back = shuffle.backward(&y);
        assert_eq!(back, x);
    }

    #[test]
    fn dense_and_pool_gradients() {
        let dense = Dense {
            w: Array2::from_shape_fn((3, 4), |(i, j)| 0.3 * (i as f64) - 0.2 * (j as f64) + 0.05),
            b: Array1::from_vec(vec![0.1, 0.0, -0.1]),
        };
        let mut rng = crate::rng::stream_rng(11, &[1]);
        let x = Array2::from_shape_fn((2, 4), |_| rng.gen_range(-1.0..1.0));
        let g = Array2::from_shape_fn((2, 3), |_| rng.gen_range(-1.0..1.0));
        let mut dw = Array2::<f64>::zeros((3, 4));
        let mut db = Array1::<f64>::zeros(3);
        let dx = dense.backward(&x, &g, &mut dw, &mut db);
        let loss = |d: &Dense<f64>, x: &Array2<f64>| (d.forward(x) * &g).sum();
        let h = 1e-6;
        let mut dp = dense.clone();
        dp.w[(1, 2)] += h;
        let up = loss(&dp, &x);
        dp.w[(1, 2)] -= 2.0 * h;
        let down = loss(&dp, &x);
        assert!(((up - down) / (2.0 * h) - dw[(1, 2)]).abs() < 1e-7);
        let mut xp = x.clone();
        xp[(0, 1)] += h;
        let up = loss(&dense, &xp);
        xp[(0, 1)] -= 2.0 * h;
        let down = loss(&dense, &xp);
        assert!(((up - down) / (2.0 * h) - dx[(0, 1)]).abs() < 1e-7);

        let pool = GlobalAvgPool;
        let xb = rand_batch((2, 3, 4, 5), 6);
        let y = pool.forward(&xb);
        assert!((y[[0, 0]] - xb.slice(ndarray::s![0, 0, .., ..]).mean().unwrap()).abs() < 1e-12);
        let gy = Array2::from_elem((2, 3), 1.0);
        let dxb = pool.backward(&gy, 4, 5);
        assert!((dxb[[1, 2, 3, 4]] - 1.0 / 20.0).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert!((sigmoid_scalar(800.0f64) - 1.0).abs() < 1e-12);
        assert!(sigmoid_scalar(-800.0f64) >= 0.0);
        assert!((sigmoid_scalar(0.0f64) - 0.5).abs() < 1e-12);
    }
}
