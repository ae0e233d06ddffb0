//! ADAM optimizer with bias-corrected moment estimates.

use super::model::Model;
use super::tensor::Param;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

pub struct Adam {
    pub config: AdamConfig,
    step: u64,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam { config, step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    fn update_param<S: Scalar>(&self, name: &str, p: &mut Param<S>) -> Result<()> {
        let b1 = S::from_f64(self.config.beta1);
        let b2 = S::from_f64(self.config.beta2);
        let t = self.step as i32;
        let corr1 = S::from_f64(1.0 - self.config.beta1.powi(t));
        let corr2 = S::from_f64(1.0 - self.config.beta2.powi(t));
        let lr = S::from_f64(self.config.lr);
        let eps = S::from_f64(self.config.eps);
        for i in 0..p.value.numel() {
            let g = p.grad.data[i];
            if !g.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite gradient in parameter '{name}'"
                )));
            }
            p.m.data[i] = b1 * p.m.data[i] + (S::one() - b1) * g;
            p.v.data[i] = b2 * p.v.data[i] + (S::one() - b2) * g * g;
            let m_hat = p.m.data[i] / corr1;
            let v_hat = p.v.data[i] / corr2;
            p.value.data[i] = p.value.data[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }

    /// Apply one update using the gradients currently accumulated in the
    /// model's parameters. Fails on any non-finite gradient.
    pub fn step<S: Scalar>(&mut self, model: &mut Model<S>) -> Result<()> {
        self.step += 1;
        let mut result = Ok(());
        let cfg_self: &Adam = self;
        model.visit_params(&mut |name, p| {
            if result.is_ok() {
                result = cfg_self.update_param(name, p);
            }
        });
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::{cross_entropy_loss, Model, ModelSpec};
    use crate::nn::tensor::Tensor;

    fn tiny_model() -> Model<f64> {
        let spec = ModelSpec {
            conv_channels: vec![2],
            recurrent_hidden: 3,
            n_mels: 8,
            t_fixed: 8,
            dropout_p: 0.0,
            ..ModelSpec::crnn(2, 42)
        };
        Model::new(spec).unwrap()
    }

    #[test]
    fn zero_gradients_leave_params_unchanged_after_reset() {
        // With m = v = 0 and g = 0 the update term is 0 / (0 + eps) = 0.
        let mut m = tiny_model();
        let mut before = Vec::new();
        m.visit_params(&mut |_, p| before.push(p.value.clone()));
        m.zero_grads();
        let mut opt = Adam::new(AdamConfig::default());
        opt.step(&mut m).unwrap();
        let mut after = Vec::new();
        m.visit_params(&mut |_, p| after.push(p.value.clone()));
        assert_eq!(before, after);
    }

    #[test]
    fn first_step_moves_each_weight_by_about_lr() {
        // With bias correction, the first update is lr * g / (|g| + eps),
        // i.e. magnitude ~lr for any nonzero gradient.
        let mut m = tiny_model();
        m.zero_grads();
        m.visit_params(&mut |_, p| p.grad.fill(0.37));
        let mut before = Vec::new();
        m.visit_params(&mut |_, p| before.push(p.value.clone()));
        let mut opt = Adam::new(AdamConfig::default());
        opt.step(&mut m).unwrap();
        let mut idx = 0;
        m.visit_params(&mut |_, p| {
            for (a, b) in p.value.data.iter().zip(&before[idx].data) {
                assert!(((b - a) - 0.001).abs() < 1e-7, "delta {}", b - a);
            }
            idx += 1;
        });
    }

    #[test]
    fn non_finite_gradient_is_an_error() {
        let mut m = tiny_model();
        m.zero_grads();
        m.visit_params(&mut |_, p| p.grad.fill(f64::NAN));
        let mut opt = Adam::new(AdamConfig::default());
        assert!(opt.step(&mut m).is_err());
    }

    #[test]
    fn optimization_reduces_loss_on_fixed_batch() {
        let mut m = tiny_model();
        let x = {
            let data: Vec<f64> = (0..2 * 8 * 8).map(|i| ((i * 7) % 13) as f64 / 13.0 - 0.5).collect();
            Tensor::from_vec(&[2, 1, 8, 8], data)
        };
        let labels = [0usize, 1];
        let mut opt = Adam::new(AdamConfig::default());
        let (loss0, _) = cross_entropy_loss(&m.forward(&x, true), &labels);
        for _ in 0..60 {
            m.zero_grads();
            let logits = m.forward(&x, true);
            let (_, grad) = cross_entropy_loss(&logits, &labels);
            m.backward(&grad);
            opt.step(&mut m).unwrap();
        }
        let (loss1, _) = cross_entropy_loss(&m.forward(&x, true), &labels);
        assert!(loss1 < loss0 * 0.5, "loss {loss0} -> {loss1}");
    }
}
