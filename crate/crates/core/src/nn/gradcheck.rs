//! Central finite-difference verification of analytic gradients, run at f64.

use super::layers::Layer;
use super::tensor::Tensor;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub n_checked: usize,
}

fn rel_err(a: f64, n: f64) -> f64 {
    let denom = (a.abs() + n.abs()).max(1e-6);
    (a - n).abs() / denom
}

/// Deterministic non-degenerate weighting for reducing a tensor to a scalar.
fn loss_weights(n: usize) -> Vec<f64> {
    (0..n).map(|i| (0.3 + i as f64 * 0.7).sin()).collect()
}

fn weighted_loss(y: &Tensor<f64>, w: &[f64]) -> f64 {
    y.data.iter().zip(w).map(|(&v, &wi)| v * wi).sum()
}

fn param_layout(layer: &mut dyn Layer<f64>) -> Vec<(String, usize)> {
    let mut out = Vec::new();
    layer.visit_params("p", &mut |name, p| out.push((name.to_string(), p.value.numel())));
    out
}

fn add_to_param(layer: &mut dyn Layer<f64>, target: &str, idx: usize, delta: f64) {
    layer.visit_params("p", &mut |name, p| {
        if name == target {
            p.value.data[idx] += delta;
        }
    });
}

fn param_grad(layer: &mut dyn Layer<f64>, target: &str) -> Vec<f64> {
    let mut out = Vec::new();
    layer.visit_params("p", &mut |name, p| {
        if name == target {
            out = p.grad.data.clone();
        }
    });
    out
}

/// Compare the layer's analytic input and parameter gradients against
/// central finite differences of a fixed scalar loss. Returns the maximum
/// relative error over every checked coordinate.
pub fn check_layer(
    layer: &mut dyn Layer<f64>,
    x: &Tensor<f64>,
    training: bool,
    eps: f64,
) -> GradCheckReport {
    let y0 = layer.forward(x, training);
    let w = loss_weights(y0.numel());
    layer.visit_params("p", &mut |_, p| p.zero_grad());
    // Fresh forward so the cache matches the backward call.
    let _ = layer.forward(x, training);
    let grad_w = Tensor::from_vec(&y0.shape, w.clone());
    let dx = layer.backward(&grad_w);

    let mut max_err: f64 = 0.0;
    let mut n_checked = 0;

    for i in 0..x.numel() {
        let mut xp = x.clone();
        xp.data[i] += eps;
        let lp = weighted_loss(&layer.forward(&xp, training), &w);
        let mut xm = x.clone();
        xm.data[i] -= eps;
        let lm = weighted_loss(&layer.forward(&xm, training), &w);
        let numeric = (lp - lm) / (2.0 * eps);
        max_err = max_err.max(rel_err(dx.data[i], numeric));
        n_checked += 1;
    }

    for (name, numel) in param_layout(layer) {
        let analytic = param_grad(layer, &name);
        for i in 0..numel {
            add_to_param(layer, &name, i, eps);
            let lp = weighted_loss(&layer.forward(x, training), &w);
            add_to_param(layer, &name, i, -2.0 * eps);
            let lm = weighted_loss(&layer.forward(x, training), &w);
            add_to_param(layer, &name, i, eps);
            let numeric = (lp - lm) / (2.0 * eps);
            max_err = max_err.max(rel_err(analytic[i], numeric));
            n_checked += 1;
        }
    }

    GradCheckReport {
        max_rel_err: max_err,
        n_checked,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layers::{BatchNorm2d, Conv2d, Elu, Linear, MaxPool2d, Relu};
    use crate::nn::rnn::{BiLstm, Gru, Lstm};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TOL: f64 = 1e-4;
    const EPS: f64 = 1e-5;

    fn random_input(shape: &[usize], seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..shape.iter().product())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        Tensor::from_vec(shape, data)
    }

    #[test]
    fn linear_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut lin = Linear::<f64>::new(5, 3, &mut rng);
        let r = check_layer(&mut lin, &random_input(&[4, 5], 2), true, EPS);
        assert!(r.max_rel_err < TOL, "rel err {}", r.max_rel_err);
    }

    #[test]
    fn conv_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut conv = Conv2d::<f64>::new(2, 3, (3, 3), (2, 2), (1, 1), &mut rng);
        let r = check_layer(&mut conv, &random_input(&[2, 2, 6, 5], 4), true, EPS);
        assert!(r.max_rel_err < TOL, "rel err {}", r.max_rel_err);
    }

    #[test]
    fn batchnorm_gradients() {
        let mut bn = BatchNorm2d::<f64>::new(3);
        let r = check_layer(&mut bn, &random_input(&[2, 3, 3, 4], 5), true, EPS);
        assert!(r.max_rel_err < TOL, "rel err {}", r.max_rel_err);
    }

    #[test]
    fn activation_gradients() {
        let mut elu = Elu::<f64>::new();
        let r = check_layer(&mut elu, &random_input(&[3, 7], 6), true, EPS);
        assert!(r.max_rel_err < TOL, "elu rel err {}", r.max_rel_err);
        let mut relu = Relu::<f64>::new();
        // Keep inputs away from the kink at zero.
        let x = random_input(&[3, 7], 7).map(|v| if v.abs() < 0.05 { v + 0.1 } else { v });
        let r = check_layer(&mut relu, &x, true, EPS);
        assert!(r.max_rel_err < TOL, "relu rel err {}", r.max_rel_err);
    }

    #[test]
    fn maxpool_gradients() {
        let mut pool = MaxPool2d::<f64>::new((2, 2), (2, 2));
        let r = check_layer(&mut pool, &random_input(&[2, 2, 4, 4], 8), true, EPS);
        assert!(r.max_rel_err < TOL, "rel err {}", r.max_rel_err);
    }

    #[test]
    fn recurrent_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut gru = Gru::<f64>::new(3, 4, &mut rng);
        let r = check_layer(&mut gru, &random_input(&[2, 5, 3], 10), true, EPS);
        assert!(r.max_rel_err < TOL, "gru rel err {}", r.max_rel_err);

        let mut lstm = Lstm::<f64>::new(3, 4, &mut rng);
        let r = check_layer(&mut lstm, &random_input(&[2, 5, 3], 11), true, EPS);
        assert!(r.max_rel_err < TOL, "lstm rel err {}", r.max_rel_err);

        let mut bl = BiLstm::<f64>::new(3, 2, &mut rng);
        let r = check_layer(&mut bl, &random_input(&[2, 4, 3], 12), true, EPS);
        assert!(r.max_rel_err < TOL, "bilstm rel err {}", r.max_rel_err);
    }
}
