//! Mini-batch training loop with seeded shuffling, ADAM updates, and early
//! stopping on validation accuracy.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::model::{cross_entropy_loss, softmax, Model, ModelKind};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const ALLOWED_BATCH_SIZES: [usize; 4] = [32, 40, 80, 128];
pub const ALLOWED_PATIENCE: [usize; 2] = [2, 5];

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub lr: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// Default hyperparameters for each architecture:
    /// CRNN batch 80 / 20 epochs / patience 5,
    /// Res-BLSTM batch 128 / 15 epochs / patience 2.
    pub fn for_kind(kind: ModelKind, seed: u64) -> Self {
        match kind {
            ModelKind::Crnn => TrainConfig {
                batch_size: 80,
                epochs: 20,
                patience: 5,
                lr: 0.001,
                seed,
            },
            ModelKind::ResBlstm => TrainConfig {
                batch_size: 128,
                epochs: 15,
                patience: 2,
                lr: 0.001,
                seed,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !ALLOWED_BATCH_SIZES.contains(&self.batch_size) {
            return Err(Error::InvalidConfig(format!(
                "batch size {} not in {ALLOWED_BATCH_SIZES:?}",
                self.batch_size
            )));
        }
        if !ALLOWED_PATIENCE.contains(&self.patience) {
            return Err(Error::InvalidConfig(format!(
                "patience {} not in {ALLOWED_PATIENCE:?}",
                self.patience
            )));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::InvalidConfig(format!("bad learning rate {}", self.lr)));
        }
        Ok(())
    }
}

/// A set of fixed-size spectrogram examples; each feature vector is a
/// row-major [n_mels, t] image.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub features: Vec<Vec<f32>>,
    pub labels: Vec<usize>,
    pub n_mels: usize,
    pub t: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn push(&mut self, feature: Vec<f32>, label: usize) {
        debug_assert_eq!(feature.len(), self.n_mels * self.t);
        self.features.push(feature);
        self.labels.push(label);
    }

    fn batch_tensor(&self, idx: &[usize]) -> Tensor<f32> {
        let plane = self.n_mels * self.t;
        let mut data = Vec::with_capacity(idx.len() * plane);
        for &i in idx {
            data.extend_from_slice(&self.features[i]);
        }
        Tensor::from_vec(&[idx.len(), 1, self.n_mels, self.t], data)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub history: Vec<EpochStats>,
    pub best_epoch: Option<usize>,
    pub best_val_accuracy: f64,
    pub stopped_early: bool,
}

fn snapshot(model: &mut Model<f32>) -> Vec<Tensor<f32>> {
    let mut out = Vec::new();
    model.visit_params(&mut |_, p| out.push(p.value.clone()));
    model.visit_state(&mut |_, p| out.push(p.value.clone()));
    out
}

fn restore(model: &mut Model<f32>, saved: &[Tensor<f32>]) {
    let mut it = saved.iter();
    model.visit_params(&mut |_, p| p.value = it.next().expect("snapshot size").clone());
    model.visit_state(&mut |_, p| p.value = it.next().expect("snapshot size").clone());
}

/// Class probabilities for every example, in dataset order.
pub fn predict_proba(model: &mut Model<f32>, data: &Dataset, batch_size: usize) -> Vec<Vec<f32>> {
    let mut out = Vec::with_capacity(data.len());
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(batch_size.max(1)) {
        let x = data.batch_tensor(chunk);
        let probs = softmax(&model.forward(&x, false));
        let k = probs.shape[1];
        for bi in 0..chunk.len() {
            out.push(probs.data[bi * k..(bi + 1) * k].to_vec());
        }
    }
    out
}

pub fn predict(model: &mut Model<f32>, data: &Dataset, batch_size: usize) -> Vec<usize> {
    predict_proba(model, data, batch_size)
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .unwrap()
        })
        .collect()
}

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let correct = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    correct as f64 / labels.len() as f64
}

/// Train the model, tracking validation accuracy after every epoch. The
/// model is left holding the weights of its best validation epoch.
pub fn train(
    model: &mut Model<f32>,
    train_data: &Dataset,
    val_data: &Dataset,
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if train_data.is_empty() {
        return Err(Error::Training("empty training set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut opt = Adam::new(AdamConfig {
        lr: config.lr,
        ..AdamConfig::default()
    });
    let mut history = Vec::new();
    let mut best: Option<(usize, f64, Vec<Tensor<f32>>)> = None;
    let mut since_best = 0usize;
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut n_batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let x = train_data.batch_tensor(chunk);
            let labels: Vec<usize> = chunk.iter().map(|&i| train_data.labels[i]).collect();
            model.zero_grads();
            let logits = model.forward(&x, true);
            let (loss, grad) = cross_entropy_loss(&logits, &labels);
            model.backward(&grad);
            opt.step(model)?;
            loss_sum += loss;
            n_batches += 1;
        }
        let val_acc = if val_data.is_empty() {
            0.0
        } else {
            accuracy(
                &predict(model, val_data, config.batch_size),
                &val_data.labels,
            )
        };
        history.push(EpochStats {
            epoch,
            train_loss: loss_sum / n_batches.max(1) as f64,
            val_accuracy: val_acc,
        });
        let improved = best.as_ref().map_or(true, |(_, acc, _)| val_acc > *acc);
        if improved {
            best = Some((epoch, val_acc, snapshot(model)));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }
    let (best_epoch, best_val_accuracy, stopped_early) = match &best {
        Some((e, acc, saved)) => {
            restore(model, saved);
            (Some(*e), *acc, history.len() < config.epochs)
        }
        None => (None, 0.0, false),
    };
    Ok(TrainReport {
        history,
        best_epoch,
        best_val_accuracy,
        stopped_early,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::ModelSpec;

    fn toy_dataset(n_per_class: usize, seed: u64) -> Dataset {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n_mels, t) = (8, 8);
        let mut ds = Dataset {
            n_mels,
            t,
            ..Default::default()
        };
        for label in 0..2usize {
            for _ in 0..n_per_class {
                let base = if label == 0 { -1.0 } else { 1.0 };
                let feat = (0..n_mels * t)
                    .map(|_| base + rng.gen_range(-0.2..0.2))
                    .collect();
                ds.push(feat, label);
            }
        }
        ds
    }

    fn tiny_model(seed: u64) -> Model<f32> {
        let spec = ModelSpec {
            conv_channels: vec![2],
            recurrent_hidden: 3,
            n_mels: 8,
            t_fixed: 8,
            dropout_p: 0.0,
            ..ModelSpec::crnn(2, seed)
        };
        Model::new(spec).unwrap()
    }

    #[test]
    fn zero_epochs_is_a_no_op() {
        let ds = toy_dataset(4, 1);
        let mut m = tiny_model(3);
        let before = snapshot(&mut m);
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::for_kind(ModelKind::Crnn, 0)
        };
        let report = train(&mut m, &ds, &ds, &cfg).unwrap();
        assert!(report.history.is_empty());
        assert_eq!(snapshot(&mut m), before);
    }

    #[test]
    fn invalid_batch_size_rejected() {
        let cfg = TrainConfig {
            batch_size: 7,
            ..TrainConfig::for_kind(ModelKind::Crnn, 0)
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn learns_separable_toy_data() {
        let ds = toy_dataset(20, 2);
        let mut m = tiny_model(5);
        let cfg = TrainConfig {
            batch_size: 40,
            epochs: 12,
            patience: 5,
            lr: 0.005,
            seed: 9,
        };
        let report = train(&mut m, &ds, &ds, &cfg).unwrap();
        assert!(
            report.best_val_accuracy > 0.95,
            "val acc {}",
            report.best_val_accuracy
        );
    }

    #[test]
    fn identical_seeds_reproduce_training_exactly(){
        let ds = toy_dataset(10, 4);
        let cfg = TrainConfig {
            batch_size: 32,
            epochs: 3,
            patience: 5,
            lr: 0.002,
            seed: 11,
        };
        let mut m1 = tiny_model(6);
        let mut m2 = tiny_model(6);
        let r1 = train(&mut m1, &ds, &ds, &cfg).unwrap();
        let r2 = train(&mut m2, &ds, &ds, &cfg).unwrap();
        assert_eq!(snapshot(&mut m1), snapshot(&mut m2));
        assert_eq!(
            serde_json::to_string(&r1).unwrap(),
            serde_json::to_string(&r2).unwrap()
        );
    }
}
