use crate::error::{Error, Result};
use crate::nncore::Tensor;
use crate::scalar::Scalar;

/// Stride-1, zero "same"-padded 2-D convolution over channels-last input.
///
/// The kernel is stored `(kh, kw, c_in, c_out)`; both spatial sizes are odd.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub kernel: Tensor<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2dGrads<T> {
    pub kernel: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Conv2d<T> {
    pub fn zeros(kh: usize, kw: usize, c_in: usize, c_out: usize) -> Result<Self> {
        Self::new(Tensor::zeros(&[kh, kw, c_in, c_out]), vec![T::zero(); c_out])
    }

    pub fn new(kernel: Tensor<T>, bias: Vec<T>) -> Result<Self> {
        let [kh, kw, _, c_out] = kernel.dims4()?;
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::Shape(format!("kernel {kh}×{kw} must have odd sides")));
        }
        if bias.len() != c_out {
            return Err(Error::Shape(format!("bias of {} for {c_out} output channels", bias.len())));
        }
        Ok(Self { kernel, bias })
    }

    /// `(kh, kw, c_in, c_out)`
    pub fn dims(&self) -> [usize; 4] {
        self.kernel.dims4().expect("rank-4 kernel")
    }

    pub fn fan_in(&self) -> usize {
        let [kh, kw, c_in, _] = self.dims();
        kh * kw * c_in
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<[usize; 4]> {
        let dims = x.dims4()?;
        let [_, _, c_in, _] = self.dims();
        if dims[3] != c_in {
            return Err(Error::Shape(format!("conv expects {c_in} input channels, got {}", dims[3])));
        }
        Ok(dims)
    }

    fn is_pointwise(&self) -> bool {
        let [kh, kw, _, _] = self.dims();
        kh == 1 && kw == 1
    }

    /// Unrolls one sample `(h, w, c_in)` into `(h·w) × (kh·kw·c_in)` patches.
    fn im2col(&self, x: &[T], h: usize, w: usize, patches: &mut [T]) {
        let [kh, kw, c_in, _] = self.dims();
        let (ph, pw) = ((kh / 2) as isize, (kw / 2) as isize);
        let k = kh * kw * c_in;
        for i in 0..h {
            for j in 0..w {
                let row = &mut patches[(i * w + j) * k..(i * w + j + 1) * k];
                for di in 0..kh {
                    let ii = i as isize + di as isize - ph;
                    for dj in 0..kw {
                        let jj = j as isize + dj as isize - pw;
                        let dst = &mut row[(di * kw + dj) * c_in..(di * kw + dj + 1) * c_in];
                        if ii < 0 || jj < 0 || ii >= h as isize || jj >= w as isize {
                            dst.fill(T::zero());
                        } else {
                            let src = (ii as usize * w + jj as usize) * c_in;
                            dst.copy_from_slice(&x[src..src + c_in]);
                        }
                    }
                }
            }
        }
    }

    /// Scatter-adds patch gradients back onto one sample's input gradient.
    fn col2im(&self, gpatches: &[T], h: usize, w: usize, gx: &mut [T]) {
        let [kh, kw, c_in, _] = self.dims();
        let (ph, pw) = ((kh / 2) as isize, (kw / 2) as isize);
        let k = kh * kw * c_in;
        for i in 0..h {
            for j in 0..w {
                let row = &gpatches[(i * w + j) * k..(i * w + j + 1) * k];
                for di in 0..kh {
                    let ii = i as isize + di as isize - ph;
                    if ii < 0 || ii >= h as isize {
                        continue;
                    }
                    for dj in 0..kw {
                        let jj = j as isize + dj as isize - pw;
                        if jj < 0 || jj >= w as isize {
                            continue;
                        }
                        let dst = (ii as usize * w + jj as usize) * c_in;
                        let src = &row[(di * kw + dj) * c_in..(di * kw + dj + 1) * c_in];
                        for (g, &s) in gx[dst..dst + c_in].iter_mut().zip(src) {
                            *g = *g + s;
                        }
                    }
                }
            }
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let [b, h, w, c_in] = self.check_input(x)?;
        let [_, _, _, c_out] = self.dims();
        let k = self.fan_in();
        let px = h * w;
        let mut y = Tensor::zeros(&[b, h, w, c_out]);
        let mut patches = if self.is_pointwise() { Vec::new() } else { vec![T::zero(); px * k] };
        for s in 0..b {
            let xs = &x.data()[s * px * c_in..(s + 1) * px * c_in];
            let a: &[T] = if self.is_pointwise() {
                xs
            } else {
                self.im2col(xs, h, w, &mut patches);
                &patches
            };
            let ys = &mut y.data_mut()[s * px * c_out..(s + 1) * px * c_out];
            for row in ys.chunks_exact_mut(c_out) {
                row.copy_from_slice(&self.bias);
            }
            T::gemm(px, k, c_out, a, (k, 1), self.kernel.data(), (c_out, 1), T::one(), ys, (c_out, 1));
        }
        Ok(y)
    }

    /// Gradients of the forward map at input `x`. The input gradient is only
    /// formed when `want_input_grad` is set.
    pub fn backward(
        &self,
        x: &Tensor<T>,
        grad_out: &Tensor<T>,
        want_input_grad: bool,
    ) -> Result<(Option<Tensor<T>>, Conv2dGrads<T>)> {
        let [b, h, w, c_in] = self.check_input(x)?;
        let [_, _, _, c_out] = self.dims();
        if grad_out.shape() != [b, h, w, c_out] {
            return Err(Error::Shape(format!("conv grad shape {:?}", grad_out.shape())));
        }
        let k = self.fan_in();
        let px = h * w;
        let mut gk = vec![T::zero(); k * c_out];
        let mut gb = vec![T::zero(); c_out];
        let mut gx = want_input_grad.then(|| Tensor::zeros(&[b, h, w, c_in]));
        let mut patches = if self.is_pointwise() { Vec::new() } else { vec![T::zero(); px * k] };
        let mut gpatches = if want_input_grad && !self.is_pointwise() { vec![T::zero(); px * k] } else { Vec::new() };

        for s in 0..b {
            let xs = &x.data()[s * px * c_in..(s + 1) * px * c_in];
            let gs = &grad_out.data()[s * px * c_out..(s + 1) * px * c_out];
            let a: &[T] = if self.is_pointwise() {
                xs
            } else {
                self.im2col(xs, h, w, &mut patches);
                &patches
            };
            // gk += patchesᵀ · g
            T::gemm(k, px, c_out, a, (1, k), gs, (c_out, 1), T::one(), &mut gk, (c_out, 1));
            for row in gs.chunks_exact(c_out) {
                for (acc, &g) in gb.iter_mut().zip(row) {
                    *acc = *acc + g;
                }
            }
            if let Some(gx) = gx.as_mut() {
                let gxs = &mut gx.data_mut()[s * px * c_in..(s + 1) * px * c_in];
                // g · kernelᵀ
                if self.is_pointwise() {
                    T::gemm(px, c_out, k, gs, (c_out, 1), self.kernel.data(), (1, c_out), T::zero(), gxs, (k, 1));
                } else {
                    T::gemm(
                        px,
                        c_out,
                        k,
                        gs,
                        (c_out, 1),
                        self.kernel.data(),
                        (1, c_out),
                        T::zero(),
                        &mut gpatches,
                        (k, 1),
                    );
                    self.col2im(&gpatches, h, w, gxs);
                }
            }
        }
        Ok((gx, Conv2dGrads { kernel: gk, bias: gb }))
    }
}
