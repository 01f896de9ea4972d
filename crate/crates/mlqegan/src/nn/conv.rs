//! 2-D convolution via im2col + GEMM, with the matching backward pass.

use ndarray::{Array1, Array2, Array3, Array4, ArrayView3, Axis};

use super::{par_map_images, stack_images, Batch, Real};

#[derive(Debug, Clone)]
pub struct Conv2d<F> {
    /// `(c_out, c_in, k, k)`
    pub w: Array4<F>,
    pub b: Array1<F>,
    pub stride: usize,
    pub pad: usize,
}

fn im2col<F: Real>(
    x: &ArrayView3<F>,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
) -> Array2<F> {
    let (c, h, w) = x.dim();
    let mut col = Array2::<F>::zeros((c * k * k, oh * ow));
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row_idx = (ci * k + ky) * k + kx;
                let mut row = col.row_mut(row_idx);
                let row = row.as_slice_mut().expect("row is contiguous");
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let base = oy * ow;
                    for ox in 0..ow {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        row[base + ox] = x[[ci, iy as usize, ix as usize]];
                    }
                }
            }
        }
    }
    col
}

fn col2im<F: Real>(
    dcol: &Array2<F>,
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
) -> Array3<F> {
    let mut dx = Array3::<F>::zeros((c, h, w));
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row_idx = (ci * k + ky) * k + kx;
                let row = dcol.row(row_idx);
                let row = row.as_slice().expect("row is contiguous");
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let base = oy * ow;
                    for ox in 0..ow {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        dx[[ci, iy as usize, ix as usize]] += row[base + ox];
                    }
                }
            }
        }
    }
    dx
}

impl<F: Real> Conv2d<F> {
    pub fn c_out(&self) -> usize {
        self.w.dim().0
    }

    pub fn c_in(&self) -> usize {
        self.w.dim().1
    }

    pub fn kernel(&self) -> usize {
        self.w.dim().2
    }

    pub fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        let k = self.kernel();
        (
            (h + 2 * self.pad - k) / self.stride + 1,
            (w + 2 * self.pad - k) / self.stride + 1,
        )
    }

    fn forward_one(&self, x: &ArrayView3<F>) -> Array3<F> {
        let (_, h, w) = x.dim();
        let (oh, ow) = self.out_dims(h, w);
        let k = self.kernel();
        let col = im2col(x, k, self.stride, self.pad, oh, ow);
        let w2 = self
            .w
            .view()
            .into_shape_with_order((self.c_out(), self.c_in() * k * k))
            .expect("weights are standard layout");
        let mut out = w2.dot(&col);
        for (co, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
            row += self.b[co];
        }
        out.into_shape_with_order((self.c_out(), oh, ow))
            .expect("conv output reshape")
    }

    pub fn forward(&self, x: &Batch<F>) -> Batch<F> {
        assert_eq!(x.dim().1, self.c_in(), "conv input channels");
        stack_images(par_map_images(x, |_, img| self.forward_one(&img)))
    }

    /// Backward pass; accumulates parameter gradients and returns the input
    /// gradient. `x` must be the forward input.
    pub fn backward(
        &self,
        x: &Batch<F>,
        dy: &Batch<F>,
        dw: &mut Array4<F>,
        db: &mut Array1<F>,
    ) -> Batch<F> {
        let (n, c, h, w) = x.dim();
        let k = self.kernel();
        let (oh, ow) = self.out_dims(h, w);
        debug_assert_eq!(dy.dim(), (n, self.c_out(), oh, ow));
        let w2 = self
            .w
            .view()
            .into_shape_with_order((self.c_out(), self.c_in() * k * k))
            .expect("weights are standard layout");

        struct PerImage<F> {
            dw: Array2<F>,
            db: Array1<F>,
            dx: Array3<F>,
        }

        let parts: Vec<PerImage<F>> = par_map_images(x, |i, img| {
            let col = im2col(&img, k, self.stride, self.pad, oh, ow);
            let dy_mat = dy
                .index_axis(Axis(0), i)
                .into_shape_with_order((self.c_out(), oh * ow))
                .expect("dy is standard layout");
            let dw_i = dy_mat.dot(&col.t());
            let db_i = dy_mat.sum_axis(Axis(1));
            let dcol = w2.t().dot(&dy_mat);
            let dx_i = col2im(&dcol, c, h, w, k, self.stride, self.pad, oh, ow);
            PerImage {
                dw: dw_i,
                db: db_i,
                dx: dx_i,
            }
        });

        let mut dx = Array4::<F>::zeros((n, c, h, w));
        let mut dw_flat = dw
            .view_mut()
            .into_shape_with_order((self.c_out(), self.c_in() * k * k))
            .expect("dw is standard layout");
        for (i, part) in parts.into_iter().enumerate() {
            dw_flat += &part.dw;
            *db += &part.db;
            dx.index_axis_mut(Axis(0), i).assign(&part.dx);
        }
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Scalar-loop convolution oracle.
    fn conv_oracle(
        x: &Array4<f64>,
        w: &Array4<f64>,
        b: &Array1<f64>,
        stride: usize,
        pad: usize,
    ) -> Array4<f64> {
        let (n, c_in, h, win) = x.dim();
        let (c_out, _, k, _) = w.dim();
        let oh = (h + 2 * pad - k) / stride + 1;
        let ow = (win + 2 * pad - k) / stride + 1;
        let mut out = Array4::<f64>::zeros((n, c_out, oh, ow));
        for i in 0..n {
            for co in 0..c_out {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = b[co];
                        for ci in 0..c_in {
                            for ky in 0..k {
                                for kx in 0..k {
                                    let iy = (oy * stride + ky) as isize - pad as isize;
                                    let ix = (ox * stride + kx) as isize - pad as isize;
                                    if iy >= 0
                                        && ix >= 0
                                        && (iy as usize) < h
                                        && (ix as usize) < win
                                    {
                                        acc += x[[i, ci, iy as usize, ix as usize]]
                                            * w[[co, ci, ky as usize, kx as usize]];
                                    }
                                }
                            }
                        }
                        out[[i, co, oy, ox]] = acc;
                    }
                }
            }
        }
        out
    }

    fn rand_array4(shape: (usize, usize, usize, usize), seed: u64) -> Array4<f64> {
        let mut v = crate::rng::stream_rng(seed, &[99]);
        use rand::Rng;
        Array4::from_shape_fn(shape, |_| v.gen_range(-1.0..1.0))
    }

    #[test]
    fn forward_matches_scalar_oracle() {
        for (stride, pad) in [(1, 1), (2, 1), (1, 4)] {
            let k = if pad == 4 { 9 } else { 3 };
            let conv = Conv2d {
                w: rand_array4((4, 3, k, k), 1),
                b: Array1::from_vec(vec![0.1, -0.2, 0.3, 0.0]),
                stride,
                pad,
            };
            let x = rand_array4((2, 3, 10, 12), 2);
            let got = conv.forward(&x);
            let want = conv_oracle(&x, &conv.w, &conv.b, stride, pad);
            assert_eq!(got.dim(), want.dim());
            for (a, b) in got.iter().zip(want.iter()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let conv = Conv2d {
            w: rand_array4((3, 2, 3, 3), 3),
            b: Array1::from_vec(vec![0.0, 0.1, -0.1]),
            stride: 1,
            pad: 1,
        };
        let x = rand_array4((2, 2, 6, 6), 4);
        let y = conv.forward(&x);
        // Loss = sum(y * g) for a fixed random g; dL/dy = g.
        let g = rand_array4(y.dim(), 5);
        let loss = |c: &Conv2d<f64>, x: &Array4<f64>| (c.forward(x) * &g).sum();

        let mut dw = Array4::<f64>::zeros(conv.w.dim());
        let mut db = Array1::<f64>::zeros(conv.b.dim());
        let dx = conv.backward(&x, &g, &mut dw, &mut db);

        let h = 1e-6;
        // Sample a few weight coordinates.
        for &idx in &[(0, 0, 0, 0), (1, 1, 2, 1), (2, 0, 1, 2)] {
            let mut cp = conv.clone();
            cp.w[idx] += h;
            let up = loss(&cp, &x);
            cp.w[idx] -= 2.0 * h;
            let down = loss(&cp, &x);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - dw[idx]).abs() / fd.abs().max(1e-8) < 1e-5, "dw {idx:?}");
        }
        // One bias and a few input coordinates.
        {
            let mut cp = conv.clone();
            cp.b[1] += h;
            let up = loss(&cp, &x);
            cp.b[1] -= 2.0 * h;
            let down = loss(&cp, &x);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - db[1]).abs() / fd.abs().max(1e-8) < 1e-5);
        }
        for &idx in &[(0, 0, 0, 0), (1, 1, 3, 4)] {
            let mut xp = x.clone();
            xp[idx] += h;
            let up = loss(&conv, &xp);
            xp[idx] -= 2.0 * h;
            let down = loss(&conv, &xp);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - dx[idx]).abs() / fd.abs().max(1e-8) < 1e-5, "dx {idx:?}");
        }
    }
}
