//! Recurrent layers over [B, T, I] sequences, returning the final hidden
//! state(s). Backpropagation runs through the full sequence.

use rand_chacha::ChaCha8Rng;

use super::layers::{transpose, Layer};
use super::tensor::{Param, ParamVisitor, Tensor};
use crate::scalar::Scalar;

fn sigmoid<S: Scalar>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

fn init_weight<S: Scalar>(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor<S> {
    use rand::Rng;
    let bound = (1.0 / fan_in as f64).sqrt();
    let data = (0..shape.iter().product())
        .map(|_| S::from_f64(rng.gen_range(-bound..bound)))
        .collect();
    Tensor::from_vec(shape, data)
}

/// Extract time step t of [B, T, I] as [B, I].
fn step<S: Scalar>(x: &Tensor<S>, t: usize) -> Tensor<S> {
    let [b, tt, i] = x.shape[..] else { panic!("expect [B,T,I]") };
    let mut out = Tensor::zeros(&[b, i]);
    for bi in 0..b {
        out.data[bi * i..(bi + 1) * i]
            .copy_from_slice(&x.data[(bi * tt + t) * i..(bi * tt + t) * i + i]);
    }
    out
}

fn add_step_grad<S: Scalar>(gx: &mut Tensor<S>, t: usize, g: &Tensor<S>) {
    let [b, tt, i] = gx.shape[..] else { panic!() };
    for bi in 0..b {
        for k in 0..i {
            gx.data[(bi * tt + t) * i + k] = gx.data[(bi * tt + t) * i + k] + g.data[bi * i + k];
        }
    }
}

/// y [B,G] = x [B,N] * W^T, W: [G,N].
fn affine<S: Scalar>(x: &Tensor<S>, w: &Tensor<S>) -> Tensor<S> {
    let [b, n] = x.shape[..] else { panic!() };
    let g = w.shape[0];
    let w_t = transpose(&w.data, g, n);
    let mut out = Tensor::zeros(&[b, g]);
    S::gemm(b, n, g, S::one(), &x.data, &w_t, S::zero(), &mut out.data);
    out
}

/// dW += dg^T [G,B] * x [B,N]; dx += dg [B,G] * W [G,N].
fn affine_backward<S: Scalar>(
    dg: &Tensor<S>,
    x: &Tensor<S>,
    w: &mut Param<S>,
    dx: &mut Tensor<S>,
) {
    let [b, g] = dg.shape[..] else { panic!() };
    let n = x.shape[1];
    let dg_t = transpose(&dg.data, b, g);
    S::gemm(g, b, n, S::one(), &dg_t, &x.data, S::one(), &mut w.grad.data);
    S::gemm(b, g, n, S::one(), &dg.data, &w.value.data, S::one(), &mut dx.data);
}

struct GruStepCache<S> {
    x: Tensor<S>,
    h_prev: Tensor<S>,
    r: Tensor<S>,
    z: Tensor<S>,
    n: Tensor<S>,
    hn_pre: Tensor<S>, // W_hn h_prev + b_hn
}

pub struct Gru<S> {
    pub input_size: usize,
    pub hidden_size: usize,
    pub w_ih: Param<S>, // [3H, I], gate order r, z, n
    pub w_hh: Param<S>, // [3H, H]
    pub b_ih: Param<S>,
    pub b_hh: Param<S>,
    cache: Option<Vec<GruStepCache<S>>>,
}

impl<S: Scalar> Gru<S> {
    pub fn new(input_size: usize, hidden_size: usize, rng: &mut ChaCha8Rng) -> Self {
        Gru {
            input_size,
            hidden_size,
            w_ih: Param::new(init_weight(&[3 * hidden_size, input_size], hidden_size, rng)),
            w_hh: Param::new(init_weight(&[3 * hidden_size, hidden_size], hidden_size, rng)),
            b_ih: Param::new(Tensor::zeros(&[3 * hidden_size])),
            b_hh: Param::new(Tensor::zeros(&[3 * hidden_size])),
            cache: None,
        }
    }
}

impl<S: Scalar> Layer<S> for Gru<S> {
    fn forward(&mut self, x: &Tensor<S>, _training: bool) -> Tensor<S> {
        let [b, t, i] = x.shape[..] else { panic!("gru expects [B,T,I]") };
        assert_eq!(i, self.input_size);
        let hs = self.hidden_size;
        let mut h = Tensor::zeros(&[b, hs]);
        let mut caches = Vec::with_capacity(t);
        for tt in 0..t {
            let xt = step(x, tt);
            let gi = affine(&xt, &self.w_ih.value);
            let gh = affine(&h, &self.w_hh.value);
            let mut r = Tensor::zeros(&[b, hs]);
            let mut z = Tensor::zeros(&[b, hs]);
            let mut n = Tensor::zeros(&[b, hs]);
            let mut hn_pre = Tensor::zeros(&[b, hs]);
            let mut h_new = Tensor::zeros(&[b, hs]);
            for bi in 0..b {
                for k in 0..hs {
                    let ri = sigmoid(
                        gi.data[bi * 3 * hs + k]
                            + self.b_ih.value.data[k]
                            + gh.data[bi * 3 * hs + k]
                            + self.b_hh.value.data[k],
                    );
                    let zi = sigmoid(
                        gi.data[bi * 3 * hs + hs + k]
                            + self.b_ih.value.data[hs + k]
                            + gh.data[bi * 3 * hs + hs + k]
                            + self.b_hh.value.data[hs + k],
                    );
                    let hn = gh.data[bi * 3 * hs + 2 * hs + k] + self.b_hh.value.data[2 * hs + k];
                    let ni = (gi.data[bi * 3 * hs + 2 * hs + k]
                        + self.b_ih.value.data[2 * hs + k]
                        + ri * hn)
                        .tanh();
                    r.data[bi * hs + k] = ri;
                    z.data[bi * hs + k] = zi;
                    n.data[bi * hs + k] = ni;
                    hn_pre.data[bi * hs + k] = hn;
                    h_new.data[bi * hs + k] =
                        (S::one() - zi) * ni + zi * h.data[bi * hs + k];
                }
            }
            caches.push(GruStepCache {
                x: xt,
                h_prev: h,
                r,
                z,
                n,
                hn_pre,
            });
            h = h_new;
        }
        self.cache = Some(caches);
        h
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Tensor<S> {
        let caches = self.cache.take().expect("gru backward without forward");
        let t = caches.len();
        let [b, hs] = grad_out.shape[..] else { panic!() };
        let mut gx = Tensor::zeros(&[b, t, self.input_size]);
        let mut dh = grad_out.clone();
        for (tt, c) in caches.iter().enumerate().rev() {
            // Gate pre-activation gradients, order r, z, n.
            let mut dgi = Tensor::zeros(&[b, 3 * hs]); // wrt W_ih x + b_ih
            let mut dgh = Tensor::zeros(&[b, 3 * hs]); // wrt W_hh h + b_hh
            let mut dh_prev = Tensor::zeros(&[b, hs]);
            for bi in 0..b {
                for k in 0..hs {
                    let idx = bi * hs + k;
                    let (r, z, n) = (c.r.data[idx], c.z.data[idx], c.n.data[idx]);
                    let dh_k = dh.data[idx];
                    let dz = dh_k * (c.h_prev.data[idx] - n);
                    let dn = dh_k * (S::one() - z);
                    let dn_pre = dn * (S::one() - n * n);
                    let dr = dn_pre * c.hn_pre.data[idx];
                    let dr_pre = dr * r * (S::one() - r);
                    let dz_pre = dz * z * (S::one() - z);
                    dgi.data[bi * 3 * hs + k] = dr_pre;
                    dgi.data[bi * 3 * hs + hs + k] = dz_pre;
                    dgi.data[bi * 3 * hs + 2 * hs + k] = dn_pre;
                    dgh.data[bi * 3 * hs + k] = dr_pre;
                    dgh.data[bi * 3 * hs + hs + k] = dz_pre;
                    dgh.data[bi * 3 * hs + 2 * hs + k] = dn_pre * r;
                    dh_prev.data[idx] = dh_k * z;
                }
            }
            for bi in 0..b {
                for k in 0..3 * hs {
                    self.b_ih.grad.data[k] = self.b_ih.grad.data[k] + dgi.data[bi * 3 * hs + k];
                    self.b_hh.grad.data[k] = self.b_hh.grad.data[k] + dgh.data[bi * 3 * hs + k];
                }
            }
            let mut dx = Tensor::zeros(&[b, self.input_size]);
            affine_backward(&dgi, &c.x, &mut self.w_ih, &mut dx);
            affine_backward(&dgh, &c.h_prev, &mut self.w_hh, &mut dh_prev);
            add_step_grad(&mut gx, tt, &dx);
            dh = dh_prev;
        }
        gx
    }

    fn visit_params(&mut self, prefix: &str, f: &mut ParamVisitor<S>) {
        f(&format!("{prefix}.w_ih"), &mut self.w_ih);
        f(&format!("{prefix}.w_hh"), &mut self.w_hh);
        f(&format!("{prefix}.b_ih"), &mut self.b_ih);
        f(&format!("{prefix}.b_hh"), &mut self.b_hh);
    }
}

struct LstmStepCache<S> {
    x: Tensor<S>,
    h_prev: Tensor<S>,
    c_prev: Tensor<S>,
    i: Tensor<S>,
    f: Tensor<S>,
    g: Tensor<S>,
    o: Tensor<S>,
    c: Tensor<S>,
}

pub struct Lstm<S> {
    pub input_size: usize,
    pub hidden_size: usize,
    pub w_ih: Param<S>, // [4H, I], gate order i, f, g, o
    pub w_hh: Param<S>, // [4H, H]
    pub b_ih: Param<S>,
    pub b_hh: Param<S>,
    cache: Option<Vec<LstmStepCache<S>>>,
}

impl<S: Scalar> Lstm<S> {
    pub fn new(input_size: usize, hidden_size: usize, rng: &mut ChaCha8Rng) -> Self {
        Lstm {
            input_size,
            hidden_size,
            w_ih: Param::new(init_weight(&[4 * hidden_size, input_size], hidden_size, rng)),
            w_hh: Param::new(init_weight(&[4 * hidden_size, hidden_size], hidden_size, rng)),
            b_ih: Param::new(Tensor::zeros(&[4 * hidden_size])),
            b_hh: Param::new(Tensor::zeros(&[4 * hidden_size])),
            cache: None,
        }
    }
}

impl<S: Scalar> Layer<S> for Lstm<S> {
    fn forward(&mut self, x: &Tensor<S>, _training: bool) -> Tensor<S> {
        let [b, t, i] = x.shape[..] else { panic!("lstm expects [B,T,I]") };
        assert_eq!(i, self.input_size);
        let hs = self.hidden_size;
        let mut h = Tensor::zeros(&[b, hs]);
        let mut c = Tensor::zeros(&[b, hs]);
        let mut caches = Vec::with_capacity(t);
        for tt in 0..t {
            let xt = step(x, tt);
            let gi = affine(&xt, &self.w_ih.value);
            let gh = affine(&h, &self.w_hh.value);
            let mut ig = Tensor::zeros(&[b, hs]);
            let mut fg = Tensor::zeros(&[b, hs]);
            let mut gg = Tensor::zeros(&[b, hs]);
            let mut og = Tensor::zeros(&[b, hs]);
            let mut c_new = Tensor::zeros(&[b, hs]);
            let mut h_new = Tensor::zeros(&[b, hs]);
            for bi in 0..b {
                for k in 0..hs {
                    let pre = |gate: usize| {
                        gi.data[bi * 4 * hs + gate * hs + k]
                            + self.b_ih.value.data[gate * hs + k]
                            + gh.data[bi * 4 * hs + gate * hs + k]
                            + self.b_hh.value.data[gate * hs + k]
                    };
                    let iv = sigmoid(pre(0));
                    let fv = sigmoid(pre(1));
                    let gv = pre(2).tanh();
                    let ov = sigmoid(pre(3));
                    let idx = bi * hs + k;
                    let cv = fv * c.data[idx] + iv * gv;
                    ig.data[idx] = iv;
                    fg.data[idx] = fv;
                    gg.data[idx] = gv;
                    og.data[idx] = ov;
                    c_new.data[idx] = cv;
                    h_new.data[idx] = ov * cv.tanh();
                }
            }
            caches.push(LstmStepCache {
                x: xt,
                h_prev: h,
                c_prev: c,
                i: ig,
                f: fg,
                g: gg,
                o: og,
                c: c_new.clone(),
            });
            h = h_new;
            c = c_new;
        }
        self.cache = Some(caches);
        h
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Tensor<S> {
        let caches = self.cache.take().expect("lstm backward without forward");
        let t = caches.len();
        let [b, hs] = grad_out.shape[..] else { panic!() };
        let mut gx = Tensor::zeros(&[b, t, self.input_size]);
        let mut dh = grad_out.clone();
        let mut dc = Tensor::<S>::zeros(&[b, hs]);
        for (tt, cch) in caches.iter().enumerate().rev() {
            let mut dgates = Tensor::zeros(&[b, 4 * hs]);
            let mut dh_prev = Tensor::zeros(&[b, hs]);
            let mut dc_prev = Tensor::zeros(&[b, hs]);
            for bi in 0..b {
                for k in 0..hs {
                    let idx = bi * hs + k;
                    let tanh_c = cch.c.data[idx].tanh();
                    let do_ = dh.data[idx] * tanh_c;
                    let dc_k = dc.data[idx]
                        + dh.data[idx] * cch.o.data[idx] * (S::one() - tanh_c * tanh_c);
                    let di = dc_k * cch.g.data[idx];
                    let df = dc_k * cch.c_prev.data[idx];
                    let dg = dc_k * cch.i.data[idx];
                    dc_prev.data[idx] = dc_k * cch.f.data[idx];
                    let (iv, fv, gv, ov) = (
                        cch.i.data[idx],
                        cch.f.data[idx],
                        cch.g.data[idx],
                        cch.o.data[idx],
                    );
                    dgates.data[bi * 4 * hs + k] = di * iv * (S::one() - iv);
                    dgates.data[bi * 4 * hs + hs + k] = df * fv * (S::one() - fv);
                    dgates.data[bi * 4 * hs + 2 * hs + k] = dg * (S::one() - gv * gv);
                    dgates.data[bi * 4 * hs + 3 * hs + k] = do_ * ov * (S::one() - ov);
                }
            }
            for bi in 0..b {
                for k in 0..4 * hs {
                    let d = dgates.data[bi * 4 * hs + k];
                    self.b_ih.grad.data[k] = self.b_ih.grad.data[k] + d;
                    self.b_hh.grad.data[k] = self.b_hh.grad.data[k] + d;
                }
            }
            let mut dx = Tensor::zeros(&[b, self.input_size]);
            affine_backward(&dgates, &cch.x, &mut self.w_ih, &mut dx);
            affine_backward(&dgates, &cch.h_prev, &mut self.w_hh, &mut dh_prev);
            add_step_grad(&mut gx, tt, &dx);
            dh = dh_prev;
            dc = dc_prev;
        }
        gx
    }

    fn visit_params(&mut self, prefix: &str, f: &mut ParamVisitor<S>) {
        f(&format!("{prefix}.w_ih"), &mut self.w_ih);
        f(&format!("{prefix}.w_hh"), &mut self.w_hh);
        f(&format!("{prefix}.b_ih"), &mut self.b_ih);
        f(&format!("{prefix}.b_hh"), &mut self.b_hh);
    }
}

fn reverse_time<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let [b, t, i] = x.shape[..] else { panic!() };
    let mut out = Tensor::zeros(&x.shape);
    for bi in 0..b {
        for tt in 0..t {
            let src = (bi * t + tt) * i;
            let dst = (bi * t + (t - 1 - tt)) * i;
            out.data[dst..dst + i].copy_from_slice(&x.data[src..src + i]);
        }
    }
    out
}

/// Bidirectional LSTM; output is the concatenation of the forward and
/// backward final hidden states [B, 2H] (the intonation embedding).
pub struct BiLstm<S> {
    pub forward_lstm: Lstm<S>,
    pub backward_lstm: Lstm<S>,
}

impl<S: Scalar> BiLstm<S> {
    pub fn new(input_size: usize, hidden_size: usize, rng: &mut ChaCha8Rng) -> Self {
        BiLstm {
            forward_lstm: Lstm::new(input_size, hidden_size, rng),
            backward_lstm: Lstm::new(input_size, hidden_size, rng),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.forward_lstm.hidden_size
    }
}

impl<S: Scalar> Layer<S> for BiLstm<S> {
    fn forward(&mut self, x: &Tensor<S>, training: bool) -> Tensor<S> {
        let hf = self.forward_lstm.forward(x, training);
        let hb = self.backward_lstm.forward(&reverse_time(x), training);
        let [b, hs] = hf.shape[..] else { panic!() };
        let mut out = Tensor::zeros(&[b, 2 * hs]);
        for bi in 0..b {
            out.data[bi * 2 * hs..bi * 2 * hs + hs].copy_from_slice(&hf.data[bi * hs..(bi + 1) * hs]);
            out.data[bi * 2 * hs + hs..(bi + 1) * 2 * hs]
                .copy_from_slice(&hb.data[bi * hs..(bi + 1) * hs]);
        }
        out
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Tensor<S> {
        let hs = self.hidden_size();
        let b = grad_out.shape[0];
        let mut gf = Tensor::zeros(&[b, hs]);
        let mut gb = Tensor::zeros(&[b, hs]);
        for bi in 0..b {
            gf.data[bi * hs..(bi + 1) * hs]
                .copy_from_slice(&grad_out.data[bi * 2 * hs..bi * 2 * hs + hs]);
            gb.data[bi * hs..(bi + 1) * hs]
                .copy_from_slice(&grad_out.data[bi * 2 * hs + hs..(bi + 1) * 2 * hs]);
        }
        let gx_f = self.forward_lstm.backward(&gf);
        let gx_b = reverse_time(&self.backward_lstm.backward(&gb));
        let mut gx = gx_f;
        for (a, b) in gx.data.iter_mut().zip(&gx_b.data) {
            *a = *a + *b;
        }
        gx
    }

    fn visit_params(&mut self, prefix: &str, f: &mut ParamVisitor<S>) {
        self.forward_lstm.visit_params(&format!("{prefix}.fwd"), f);
        self.backward_lstm.visit_params(&format!("{prefix}.bwd"), f);
    }
}
