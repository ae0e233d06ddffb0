//! Feed-forward layers with explicit forward/backward passes.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tensor::{Param, ParamVisitor, Tensor};
use crate::scalar::Scalar;

pub trait Layer<S: Scalar> {
    fn forward(&mut self, x: &Tensor<S>, training: bool) -> Tensor<S>;
    /// Must follow a forward call; consumes the cached activations.
    fn backward(&mut self, grad_out: &Tensor<S>) -> Tensor<S>;
    fn visit_params(&mut self, prefix: &str, f: &mut ParamVisitor<S>);
    /// Non-trainable state (e.g. batch-norm running stats).
    fn visit_state(&mut self, _prefix: &str, _f: &mut ParamVisitor<S>) {}
}

pub(crate) fn transpose<S: Scalar>(m: &[S], rows: usize, cols: usize) -> Vec<S> {
    let mut out = vec![S::zero(); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = m[r * cols + c];
        }
    }
    out
}

fn uniform_init<S: Scalar>(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor<S> {
    let bound = (1.0 / fan_in as f64).sqrt();
    let data = (0..shape.iter().product())
        .map(|_| S::from_f64(rng.gen_range(-bound..bound)))
        .collect();
    Tensor::from_vec(shape, data)
}

pub struct Conv2d<S> {
    pub in_c: usize,
    pub out_c: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub padding: (usize, usize),
    pub weight: Param<S>,
    pub bias: Param<S>,
    cache: Option<Tensor<S>>,
}

impl<S: Scalar> Conv2d<S> {
    pub fn new(
        in_c: usize,
        out_c: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let k = in_c * kernel.0 * kernel.1;
        Conv2d {
            in_c,
            out_c,
            kernel,
            stride,
            padding,
            weight: Param::new(uniform_init(&[out_c, k], k, rng)),
            bias: Param::new(Tensor::zeros(&[out_c])),
            cache: None,
        }
    }

    pub fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        let oh = (h + 2 * self.padding.0 - self.kernel.0) / self.stride.0 + 1;
        let ow = (w + 2 * self.padding.1 - self.kernel.1) / self.stride.1 + 1;
        (oh, ow)
    }

    /// [in_c*kh*kw, oh*ow] patch matrix for one image.
    fn im2col(&self, x: &[S], h: usize, w: usize, oh: usize, ow: usize) -> Vec<S> {
        let (kh, kw) = self.kernel;
        let (sh, sw) = self.stride;
        let (ph, pw) = self.padding;
        let k = self.in_c * kh * kw;
        let p = oh * ow;
        let mut col = vec![S::zero(); k * p];
        for c in 0..self.in_c {
            for ki in 0..kh {
                for kj in 0..kw {
                    let row = (c * kh + ki) * kw + kj;
                    for oi in 0..oh {
                        let ii = (oi * sh + ki) as isize - ph as isize;
                        if ii < 0 || ii as usize >= h {
                            continue;
                        }
                        for oj in 0..ow {
                            let jj = (oj * sw + kj) as isize - pw as isize;
                            if jj < 0 || jj as usize >= w {
                                continue;
                            }
                            col[row * p + oi * ow + oj] =
                                x[(c * h + ii as usize) * w + jj as usize];
                        }
                    }
                }
            }
        }
        col
    }

    fn col2im(&self, col: &[S], h: usize, w: usize, oh: usize, ow: usize, out: &mut [S]) {
        let (kh, kw) = self.kernel;
        let (sh, sw) = self.stride;
        let (ph, pw) = self.padding;
        let p = oh * ow;
        for c in 0..self.in_c {
            for ki in 0..kh {
                for kj in 0..kw {
                    let row = (c * kh + ki) * kw + kj;
                    for oi in 0..oh {
                        let ii = (oi * sh + ki) as isize - ph as isize;
                        if ii < 0 || ii as usize >= h {
                            continue;
                        }
                        for oj in 0..ow {
                            let jj = (oj * sw + kj) as isize - pw as isize;
                            if jj < 0 || jj as usize >= w {
                                continue;
                            }
                            out[(c * h + ii as usize) * w + jj as usize] =
                                out[(c * h + ii as usize) * w + jj as usize]
                                    + col[row * p + oi * ow + oj];
                        }
                    }
                }
            }
        }
    }
}

impl<S: Scalar> Layer<S> for Conv2d<S> {
    fn forward(&mut self, x: &Tensor<S>, _training: bool) -> Tensor<S> {
        let [b, c, h, w] = x.shape[..] else {
            panic!("conv2d expects [B,C,H,W], got {:?}", x.shape)
        };
        assert_eq!(c, self.in_c);
        let (oh, ow) = self.out_hw(h, w);
        let k = self.in_c * self.kernel.0 * self.kernel.1;
        let p = oh * ow;
        let mut out = Tensor::zeros(&[b, self.out_c, oh, ow]);
        for bi in 0..b {
            let col = self.im2col(&x.data[bi * c * h * w..(bi + 1) * c * h * w], h, w, oh, ow);
            let dst = &mut out.data[bi * self.out_c * p..(bi + 1) * self.out_c * p];
            S::gemm(self.out_c, k, p, S::one(), &self.weight.value.data, &col, S::zero(), dst);
            for oc in 0..self.out_c {
                let bv = self.bias.value.data[oc];
                for v in &mut dst[oc * p..(oc + 1) * p] {
                    *v = *v + bv;
                }
            }
        }
        self.cache = Some(x.clone());
        out
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Tensor<S> {
        let x = self.cache.take().expect("conv2d backward without forward");
        let [b, c, h, w] = x.shape[..] else { unreachable!() };
        let (oh, ow) = self.out_hw(h, w);
        let k = self.in_c * self.kernel.0 * self.kernel.1;
        let p = oh * ow;
        let w_t = transpose(&self.weight.value.data, self.out_c, k);
        let mut grad_in = Tensor::zeros(&x.shape);
        for bi in 0..b {
            let dy = &grad_out.data[bi * self.out_c * p..(bi + 1) * self.out_c * p];
            let col = self.im2col(&x.data[bi * c * h * w..(bi + 1) * c * h * w], h, w, oh, ow);
            // dW += dY * col^T
            let col_t = transpose(&col, k, p);
            S::gemm(self.out_c, p, k, S::one(), dy, &col_t, S::one(), &mut self.weight.grad.data);
            for oc in 0..self.out_c {
                let mut acc = S::zero();
                for &g in &dy[oc * p..(oc + 1) * p] {
                    acc = acc + g;
                }
                self.bias.grad.data[oc] = self.bias.grad.data[oc] + acc;
            }
            // dcol = W^T * dY, then scatter back.
            let mut dcol = vec![S::zero(); k * p];
            S::gemm(k, self.out_c, p, S::one(), &w_t, dy, S::zero(), &mut dcol);
            self.col2im(&dcol, h, w, oh, ow, &mut grad_in.data[bi * c * h * w..(bi + 1) * c * h * w]);
        }
        grad_in
    }

    fn visit_params(&mut self, prefix: &str, f: &mut ParamVisitor<S>) {
        f(&format!("{prefix}.weight"), &mut self.weight);
        f(&format!("{prefix}.bias"), &mut self.bias);
    }
}

pub struct BatchNorm2d<S> {
    pub gamma: Param<S>,
    pub beta: Param<S>,
    pub running_mean: Param<S>,
    pub running_var: Param<S>,
    pub momentum: f64,
    pub eps: f64,
    cache: Option<BnCache<S>>,
}

struct BnCache<S> {
    xhat: Tensor<S>,
    inv_std: Vec<S>,
    centered: Tensor<S>,
    n_per_channel: usize,
}

impl<S: Scalar> BatchNorm2d<S> {
    pub fn new(channels: usize) -> Self {
        let mut gamma = Tensor::zeros(&[channels]);
        gamma.fill(S::one());
        let mut running_var = Tensor::zeros(&[channels]);
        running_var.fill(S::one());
        BatchNorm2d {
            gamma: Param::new(gamma),
            beta: Param::new(Tensor::zeros(&[channels])),
            running_mean: Param::new(Tensor::zeros(&[channels])),
            running_var: Param::new(running_var),
            momentum: 0.1,
            eps: 1e-5,
            cache: None,
        }
    }
}

impl<S: Scalar> Layer<S> for BatchNorm2d<S> {
    fn forward(&mut self, x: &Tensor<S>, training: bool) -> Tensor<S> {
        let [b, c, h, w] = x.shape[..] else {
            panic!("batchnorm expects [B,C,H,W], got {:?}", x.shape)
        };
        let n = b * h * w;
        let mut out = Tensor::zeros(&x.shape);
        if training {
            let mut xhat = Tensor::zeros(&x.shape);
            let mut centered = Tensor::zeros(&x.shape);
            let mut inv_std = vec![S::zero(); c];
            for ch in 0..c {
                let mut mean = S::zero();
                for bi in 0..b {
                    for i in 0..h * w {
                        mean = mean + x.data[(bi * c + ch) * h * w + i];
                    }
                }
                mean = mean / S::from_usize(n);
                let mut var = S::zero();
                for bi in 0..b {
                    for i in 0..h * w {
                        let d = x.data[(bi * c + ch) * h * w + i] - mean;
                        var = var + d * d;
                    }
                }
                var = var / S::from_usize(n);
                let istd = S::one() / (var + S::from_f64(self.eps)).sqrt();
                inv_std[ch] = istd;
                for bi in 0..b {
                    for i in 0..h * w {
                        let idx = (bi * c + ch) * h * w + i;
                        let d = x.data[idx] - mean;
                        centered.data[idx] = d;
                        xhat.data[idx] = d * istd;
                        out.data[idx] =
                            self.gamma.value.data[ch] * xhat.data[idx] + self.beta.value.data[ch];
                    }
                }
                let mom = S::from_f64(self.momentum);
                self.running_mean.value.data[ch] =
                    (S::one() - mom) * self.running_mean.value.data[ch] + mom * mean;
                self.running_var.value.data[ch] =
                    (S::one() - mom) * self.running_var.value.data[ch] + mom * var;
            }
            self.cache = Some(BnCache {
                xhat,
                inv_std,
                centered,
                n_per_channel: n,
            });
        } else {
            for ch in 0..c {
                let mean = self.running_mean.value.data[ch];
                let istd = S::one() / (self.running_var.value.data[ch] + S::from_f64(self.eps)).sqrt();
                for bi in 0..b {
                    for i in 0..h * w {
                        let idx = (bi * c + ch) * h * w + i;
                        out.data[idx] = self.gamma.value.data[ch] * (x.data[idx] - mean) * istd
                            + self.beta.value.data[ch];
                    }
                }
            }
        }
        out
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Tensor<S> {
        let cache = self.cache.take().expect("batchnorm backward without forward");
        let [b, c, h, w] = grad_out.shape[..] else { unreachable!() };
        let n = S::from_usize(cache.n_per_channel);
        let mut grad_in = Tensor::zeros(&grad_out.shape);
        for ch in 0..c {
            let mut sum_dy = S::zero();
            let mut sum_dy_xhat = S::zero();
            for bi in 0..b {
                for i in 0..h * w {
                    let idx = (bi * c + ch) * h * w + i;
                    sum_dy = sum_dy + grad_out.data[idx];
                    sum_dy_xhat = sum_dy_xhat + grad_out.data[idx] * cache.xhat.data[idx];
                }
            }
            self.beta.grad.data[ch] = self.beta.grad.data[ch] + sum_dy;
            self.gamma.grad.data[ch] = self.gamma.grad.data[ch] + sum_dy_xhat;
            let g = self.gamma.value.data[ch];
            let istd = cache.inv_std[ch];
            for bi in 0..b {
                for i in 0..h * w {
                    let idx = (bi * c + ch) * h * w + i;
                    let dy = grad_out.data[idx];
                    grad_in.data[idx] = g * istd / n
                        * (n * dy - sum_dy - cache.xhat.data[idx] * sum_dy_xhat);
                }
            }
            let _ = &cache.centered;
        }
        grad_in
    }

    fn visit_params(&mut self, prefix: &str, f: &mut ParamVisitor<S>) {
        f(&format!("{prefix}.gamma"), &mut self.gamma);
        f(&format!("{prefix}.beta"), &mut self.beta);
    }

    fn visit_state(&mut self, prefix: &str, f: &mut ParamVisitor<S>) {
        f(&format!("{prefix}.running_mean"), &mut self.running_mean);
        f(&format!("{prefix}.running_var"), &mut self.running_var);
    }
}

pub struct Elu<S> {
    pub alpha: f64,
    cache: Option<Tensor<S>>,
}

impl<S: Scalar> Elu<S> {
    pub fn new() -> Self {
        Elu { alpha: 1.0, cache: None }
    }
}

impl<S: Scalar> Layer<S> for Elu<S> {
    fn forward(&mut self, x: &Tensor<S>, _training: bool) -> Tensor<S> {
        let a = S::from_f64(self.alpha);
        let out = x.map(|v| if v > S::zero() { v } else { a * (v.exp() - S::one()) });
        self.cache = Some(x.clone());
        out
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Tensor<S> {
        let x = self.cache.take().expect("elu backward without forward");
        let a = S::from_f64(self.alpha);
        let mut grad_in = grad_out.clone();
        for (g, &v) in grad_in.data.iter_mut().zip(&x.data) {
            if v <= S::zero() {
                *g = *g * a * v.exp();
            }
        }
        grad_in
    }

    fn visit_params(&mut self, _prefix: &str, _f: &mut ParamVisitor<S>) {}
}

pub struct Relu<S> {
    cache: Option<Tensor<S>>,
}

impl<S: Scalar> Relu<S> {
    pub fn new() -> Self {
        Relu { cache: None }
    }
}

impl<S: Scalar> Layer<S> for Relu<S> {
    fn forward(&mut self, x: &Tensor<S>, _training: bool) -> Tensor<S> {
        let out = x.map(|v| if v > S::zero() { v } else { S::zero() });
        self.cache = Some(x.clone());
        out
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Tensor<S> {
        let x = self.cache.take().expect("relu backward without forward");
        let mut grad_in = grad_out.clone();
        for (g, &v) in grad_in.data.iter_mut().zip(&x.data) {
            if v <= S::zero() {
                *g = S::zero();
            }
        }
        grad_in
    }

    fn visit_params(&mut self, _prefix: &str, _f: &mut ParamVisitor<S>) {}
}

pub struct MaxPool2d<S> {
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    cache: Option<(Vec<usize>, Vec<usize>)>, // input shape, argmax per output element
    _marker: std::marker::PhantomData<S>,
}

impl<S: Scalar> MaxPool2d<S> {
    pub fn new(kernel: (usize, usize), stride: (usize, usize)) -> Self {
        MaxPool2d {
            kernel,
            stride,
            cache: None,
            _marker: std::marker::PhantomData,
        }
    }

    pub fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        ((h - self.kernel.0) / self.stride.0 + 1, (w - self.kernel.1) / self.stride.1 + 1)
    }
}

impl<S: Scalar> Layer<S> for MaxPool2d<S> {
    fn forward(&mut self, x: &Tensor<S>, _training: bool) -> Tensor<S> {
        let [b, c, h, w] = x.shape[..] else {
            panic!("maxpool expects [B,C,H,W], got {:?}", x.shape)
        };
        let (oh, ow) = self.out_hw(h, w);
        let mut out = Tensor::zeros(&[b, c, oh, ow]);
        let mut argmax = vec![0usize; b * c * oh * ow];
        for bi in 0..b {
            for ch in 0..c {
                let plane = &x.data[(bi * c + ch) * h * w..(bi * c + ch + 1) * h * w];
                for oi in 0..oh {
                    for oj in 0..ow {
                        let mut best = S::neg_infinity();
                        let mut best_idx = 0usize;
                        for ki in 0..self.kernel.0 {
                            for kj in 0..self.kernel.1 {
                                let ii = oi * self.stride.0 + ki;
                                let jj = oj * self.stride.1 + kj;
                                let v = plane[ii * w + jj];
                                if v > best {
                                    best = v;
                                    best_idx = ii * w + jj;
                                }
                            }
                        }
                        let oidx = ((bi * c + ch) * oh + oi) * ow + oj;
                        out.data[oidx] = best;
                        argmax[oidx] = (bi * c + ch) * h * w + best_idx;
                    }
                }
            }
        }
        self.cache = Some((x.shape.clone(), argmax));
        out
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Tensor<S> {
        let (shape, argmax) = self.cache.take().expect("maxpool backward without forward");
        let mut grad_in = Tensor::zeros(&shape);
        for (o, &src) in argmax.iter().enumerate() {
            grad_in.data[src] = grad_in.data[src] + grad_out.data[o];
        }
        grad_in
    }

    fn visit_params(&mut self, _prefix: &str, _f: &mut ParamVisitor<S>) {}
}

pub struct Dropout<S> {
    pub p: f64,
    rng: ChaCha8Rng,
    mask: Option<Vec<bool>>,
    _marker: std::marker::PhantomData<S>,
}

impl<S: Scalar> Dropout<S> {
    pub fn new(p: f64, seed: u64) -> Self {
        assert!((0.0..1.0).contains(&p));
        Dropout {
            p,
            rng: ChaCha8Rng::seed_from_u64(seed),
            mask: None,
            _marker: std::marker::PhantomData,
        }
    }
}

impl<S: Scalar> Layer<S> for Dropout<S> {
    fn forward(&mut self, x: &Tensor<S>, training: bool) -> Tensor<S> {
        if !training || self.p == 0.0 {
            self.mask = None;
            return x.clone();
        }
        let scale = S::from_f64(1.0 / (1.0 - self.p));
        let mask: Vec<bool> = (0..x.numel()).map(|_| self.rng.gen::<f64>() >= self.p).collect();
        let mut out = x.clone();
        for (v, &keep) in out.data.iter_mut().zip(&mask) {
            *v = if keep { *v * scale } else { S::zero() };
        }
        self.mask = Some(mask);
        out
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Tensor<S> {
        match self.mask.take() {
            None => grad_out.clone(),
            Some(mask) => {
                let scale = S::from_f64(1.0 / (1.0 - self.p));
                let mut grad_in = grad_out.clone();
                for (g, keep) in grad_in.data.iter_mut().zip(mask) {
                    *g = if keep { *g * scale } else { S::zero() };
                }
                grad_in
            }
        }
    }

    fn visit_params(&mut self, _prefix: &str, _f: &mut ParamVisitor<S>) {}
}

pub struct Linear<S> {
    pub in_features: usize,
    pub out_features: usize,
    pub weight: Param<S>, // [out, in]
    pub bias: Param<S>,
    cache: Option<Tensor<S>>,
}

impl<S: Scalar> Linear<S> {
    pub fn new(in_features: usize, out_features: usize, rng: &mut ChaCha8Rng) -> Self {
        Linear {
            in_features,
            out_features,
            weight: Param::new(uniform_init(&[out_features, in_features], in_features, rng)),
            bias: Param::new(Tensor::zeros(&[out_features])),
            cache: None,
        }
    }
}

impl<S: Scalar> Layer<S> for Linear<S> {
    fn forward(&mut self, x: &Tensor<S>, _training: bool) -> Tensor<S> {
        let [b, n] = x.shape[..] else {
            panic!("linear expects [B,in], got {:?}", x.shape)
        };
        assert_eq!(n, self.in_features);
        // out = x [B,in] * W^T [in,out] + bias
        let w_t = transpose(&self.weight.value.data, self.out_features, self.in_features);
        let mut out = Tensor::zeros(&[b, self.out_features]);
        S::gemm(b, n, self.out_features, S::one(), &x.data, &w_t, S::zero(), &mut out.data);
        for bi in 0..b {
            for o in 0..self.out_features {
                out.data[bi * self.out_features + o] =
                    out.data[bi * self.out_features + o] + self.bias.value.data[o];
            }
        }
        self.cache = Some(x.clone());
        out
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Tensor<S> {
        let x = self.cache.take().expect("linear backward without forward");
        let b = x.shape[0];
        // dW += dY^T [out,B] * x [B,in]
        let dy_t = transpose(&grad_out.data, b, self.out_features);
        S::gemm(
            self.out_features,
            b,
            self.in_features,
            S::one(),
            &dy_t,
            &x.data,
            S::one(),
            &mut self.weight.grad.data,
        );
        for bi in 0..b {
            for o in 0..self.out_features {
                self.bias.grad.data[o] =
                    self.bias.grad.data[o] + grad_out.data[bi * self.out_features + o];
            }
        }
        // dX = dY [B,out] * W [out,in]
        let mut grad_in = Tensor::zeros(&x.shape);
        S::gemm(
            b,
            self.out_features,
            self.in_features,
            S::one(),
            &grad_out.data,
            &self.weight.value.data,
            S::zero(),
            &mut grad_in.data,
        );
        grad_in
    }

    fn visit_params(&mut self, prefix: &str, f: &mut ParamVisitor<S>) {
        f(&format!("{prefix}.weight"), &mut self.weight);
        f(&format!("{prefix}.bias"), &mut self.bias);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_output_shape_stride2_pad1() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut conv = Conv2d::<f64>::new(1, 4, (3, 3), (2, 2), (1, 1), &mut rng);
        let x = Tensor::zeros(&[2, 1, 128, 64]);
        let y = conv.forward(&x, true);
        assert_eq!(y.shape, vec![2, 4, 64, 32]);
    }

    #[test]
    fn maxpool_2x2_halves() {
        let mut pool = MaxPool2d::<f64>::new((2, 2), (2, 2));
        let x = Tensor::from_vec(&[1, 1, 2, 2], vec![1.0, 5.0, 3.0, 2.0]);
        let y = pool.forward(&x, true);
        assert_eq!(y.shape, vec![1, 1, 1, 1]);
        assert_eq!(y.data, vec![5.0]);
        let g = pool.backward(&Tensor::from_vec(&[1, 1, 1, 1], vec![2.0]));
        assert_eq!(g.data, vec![0.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn relu_blocks_negative_gradient() {
        let mut relu = Relu::<f64>::new();
        let x = Tensor::from_vec(&[1, 2], vec![-1.0, 1.0]);
        relu.forward(&x, true);
        let g = relu.backward(&Tensor::from_vec(&[1, 2], vec![3.0, 3.0]));
        assert_eq!(g.data, vec![0.0, 3.0]);
    }

    #[test]
    fn batchnorm_train_normalizes_batch() {
        let mut bn = BatchNorm2d::<f64>::new(2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let data: Vec<f64> = (0..2 * 2 * 3 * 4).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let x = Tensor::from_vec(&[2, 2, 3, 4], data);
        let y = bn.forward(&x, true);
        for ch in 0..2 {
            let vals: Vec<f64> = (0..2)
                .flat_map(|b| (0..12).map(move |i| (b, i)))
                .map(|(b, i)| y.data[(b * 2 + ch) * 12 + i])
                .collect();
            let mean: f64 = vals.iter().sum::<f64>() / vals.len() as f64;
            let var: f64 = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            assert!(mean.abs() < 1e-3, "mean {mean}");
            assert!((var - 1.0).abs() < 1e-3, "var {var}");
        }
    }

    #[test]
    fn dropout_eval_is_identity() {
        let mut d = Dropout::<f64>::new(0.5, 3);
        let x = Tensor::from_vec(&[1, 4], vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(d.forward(&x, false).data, x.data);
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_param_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut lin = Linear::<f64>::new(3, 2, &mut rng);
        let x = Tensor::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        lin.forward(&x, true);
        lin.backward(&Tensor::zeros(&[2, 2]));
        assert!(lin.weight.grad.data.iter().all(|&g| g == 0.0));
        assert!(lin.bias.grad.data.iter().all(|&g| g == 0.0));
    }
}
