//! Classifier assembly: a convolutional-recurrent network (CRNN) and a
//! residual-convolutional bidirectional-LSTM network (Res-BLSTM), both
//! consuming log-mel spectrograms shaped [B, 1, n_mels, T].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{BatchNorm2d, Conv2d, Dropout, Elu, Layer, Linear, MaxPool2d, Relu};
use super::rnn::{BiLstm, Gru};
use super::tensor::{ParamVisitor, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const FC_UNITS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Crnn,
    ResBlstm,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "crnn" => Ok(ModelKind::Crnn),
            "resblstm" => Ok(ModelKind::ResBlstm),
            other => Err(Error::Model(format!("unknown model kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub conv_channels: Vec<usize>,
    pub recurrent_hidden: usize,
    pub fc_units: usize,
    pub n_classes: usize,
    pub dropout_p: f64,
    pub n_mels: usize,
    pub t_fixed: usize,
    pub seed: u64,
}

impl ModelSpec {
    pub fn crnn(n_classes: usize, seed: u64) -> Self {
        ModelSpec {
            kind: ModelKind::Crnn,
            conv_channels: vec![8, 16, 32, 32],
            recurrent_hidden: 64,
            fc_units: FC_UNITS,
            n_classes,
            dropout_p: 0.3,
            n_mels: crate::features::N_MELS,
            t_fixed: crate::features::T_FIXED,
            seed,
        }
    }

    pub fn res_blstm(n_classes: usize, seed: u64) -> Self {
        ModelSpec {
            kind: ModelKind::ResBlstm,
            conv_channels: vec![8, 16],
            recurrent_hidden: 64,
            fc_units: FC_UNITS,
            n_classes,
            dropout_p: 0.3,
            n_mels: crate::features::N_MELS,
            t_fixed: crate::features::T_FIXED,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fc_units != FC_UNITS {
            return Err(Error::Model(format!(
                "fc_units must be {FC_UNITS}, got {}",
                self.fc_units
            )));
        }
        if self.n_classes < 2 {
            return Err(Error::Model(format!(
                "need at least 2 classes, got {}",
                self.n_classes
            )));
        }
        if self.conv_channels.is_empty() {
            return Err(Error::Model("conv_channels must be non-empty".into()));
        }
        if self.recurrent_hidden == 0 {
            return Err(Error::Model("recurrent_hidden must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Model(format!(
                "dropout_p must be in [0,1), got {}",
                self.dropout_p
            )));
        }
        if self.n_mels == 0 || self.t_fixed == 0 {
            return Err(Error::Model("n_mels and t_fixed must be positive".into()));
        }
        Ok(())
    }
}

/// Pre-activation residual block: y = shortcut(x) + conv2(act2(bn2(conv1(act1(bn1(x)))))).
/// With all residual-branch conv weights and biases at zero the block is the
/// shortcut alone, i.e. the identity when channels and stride are unchanged.
pub struct ResBlock<S> {
    pub bn1: BatchNorm2d<S>,
    pub act1: Elu<S>,
    pub conv1: Conv2d<S>,
    pub bn2: BatchNorm2d<S>,
    pub act2: Elu<S>,
    pub conv2: Conv2d<S>,
    pub shortcut: Option<Conv2d<S>>, // 1x1 projection when shape changes
}

impl<S: Scalar> ResBlock<S> {
    pub fn new(in_c: usize, out_c: usize, stride: usize, rng: &mut ChaCha8Rng) -> Self {
        let shortcut = if in_c != out_c || stride != 1 {
            Some(Conv2d::new(in_c, out_c, (1, 1), (stride, stride), (0, 0), rng))
        } else {
            None
        };
        ResBlock {
            bn1: BatchNorm2d::new(in_c),
            act1: Elu::new(),
            conv1: Conv2d::new(in_c, out_c, (3, 3), (stride, stride), (1, 1), rng),
            bn2: BatchNorm2d::new(out_c),
            act2: Elu::new(),
            conv2: Conv2d::new(out_c, out_c, (3, 3), (1, 1), (1, 1), rng),
            shortcut,
        }
    }
}

impl<S: Scalar> Layer<S> for ResBlock<S> {
    fn forward(&mut self, x: &Tensor<S>, training: bool) -> Tensor<S> {
        let a = self.bn1.forward(x, training);
        let a = self.act1.forward(&a, training);
        let a = self.conv1.forward(&a, training);
        let a = self.bn2.forward(&a, training);
        let a = self.act2.forward(&a, training);
        let branch = self.conv2.forward(&a, training);
        let base = match &mut self.shortcut {
            Some(proj) => proj.forward(x, training),
            None => x.clone(),
        };
        let mut out = branch;
        for (o, &s) in out.data.iter_mut().zip(&base.data) {
            *o = *o + s;
        }
        out
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Tensor<S> {
        let g = self.conv2.backward(grad_out);
        let g = self.act2.backward(&g);
        let g = self.bn2.backward(&g);
        let g = self.conv1.backward(&g);
        let g = self.act1.backward(&g);
        let mut gx = self.bn1.backward(&g);
        let g_short = match &mut self.shortcut {
            Some(proj) => proj.backward(grad_out),
            None => grad_out.clone(),
        };
        for (a, &b) in gx.data.iter_mut().zip(&g_short.data) {
            *a = *a + b;
        }
        gx
    }

    fn visit_params(&mut self, prefix: &str, f: &mut ParamVisitor<S>) {
        self.bn1.visit_params(&format!("{prefix}.bn1"), f);
        self.conv1.visit_params(&format!("{prefix}.conv1"), f);
        self.bn2.visit_params(&format!("{prefix}.bn2"), f);
        self.conv2.visit_params(&format!("{prefix}.conv2"), f);
        if let Some(proj) = &mut self.shortcut {
            proj.visit_params(&format!("{prefix}.shortcut"), f);
        }
    }

    fn visit_state(&mut self, prefix: &str, f: &mut ParamVisitor<S>) {
        self.bn1.visit_state(&format!("{prefix}.bn1"), f);
        self.bn2.visit_state(&format!("{prefix}.bn2"), f);
    }
}

/// Reshape [B, C, H, W] into a time-major sequence [B, W, C*H].
struct TimeFlatten<S> {
    in_shape: Option<Vec<usize>>,
    _marker: std::marker::PhantomData<S>,
}

impl<S: Scalar> TimeFlatten<S> {
    fn new() -> Self {
        TimeFlatten {
            in_shape: None,
            _marker: std::marker::PhantomData,
        }
    }
}

impl<S: Scalar> Layer<S> for TimeFlatten<S> {
    fn forward(&mut self, x: &Tensor<S>, _training: bool) -> Tensor<S> {
        let [b, c, h, w] = x.shape[..] else {
            panic!("time-flatten expects [B,C,H,W], got {:?}", x.shape)
        };
        let mut out = Tensor::zeros(&[b, w, c * h]);
        for bi in 0..b {
            for ch in 0..c {
                for hi in 0..h {
                    for wi in 0..w {
                        out.data[(bi * w + wi) * c * h + ch * h + hi] =
                            x.data[((bi * c + ch) * h + hi) * w + wi];
                    }
                }
            }
        }
        self.in_shape = Some(x.shape.clone());
        out
    }

    fn backward(&mut self, grad_out: &Tensor<S>) -> Tensor<S> {
        let shape = self.in_shape.take().expect("time-flatten backward without forward");
        let [b, c, h, w] = shape[..] else { unreachable!() };
        let mut grad_in = Tensor::zeros(&shape);
        for bi in 0..b {
            for ch in 0..c {
                for hi in 0..h {
                    for wi in 0..w {
                        grad_in.data[((bi * c + ch) * h + hi) * w + wi] =
                            grad_out.data[(bi * w + wi) * c * h + ch * h + hi];
                    }
                }
            }
        }
        grad_in
    }

    fn visit_params(&mut self, _prefix: &str, _f: &mut ParamVisitor<S>) {}
}

enum Recurrent<S> {
    Gru(Gru<S>),
    BiLstm(BiLstm<S>),
}

impl<S: Scalar> Recurrent<S> {
    fn as_layer(&mut self) -> &mut dyn Layer<S> {
        match self {
            Recurrent::Gru(g) => g,
            Recurrent::BiLstm(b) => b,
        }
    }
}

pub struct Model<S> {
    pub spec: ModelSpec,
    front: Vec<Box<dyn Layer<S>>>,
    recurrent: Recurrent<S>,
    head: Vec<Box<dyn Layer<S>>>,
    last_embedding: Option<Tensor<S>>,
}

impl<S: Scalar> Model<S> {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut drop_seed = spec.seed.wrapping_mul(0x9e37_79b9).wrapping_add(1);
        let mut next_drop = || {
            drop_seed = drop_seed.wrapping_add(1);
            drop_seed
        };
        let mut front: Vec<Box<dyn Layer<S>>> = Vec::new();
        let mut h;
        let mut w;
        let embed_dim;
        let recurrent;
        match spec.kind {
            ModelKind::Crnn => {
                let chans = &spec.conv_channels;
                // Block 1: strided conv then 2x2 pool.
                front.push(Box::new(Conv2d::new(1, chans[0], (3, 3), (2, 2), (1, 1), &mut rng)));
                front.push(Box::new(BatchNorm2d::new(chans[0])));
                front.push(Box::new(Elu::new()));
                front.push(Box::new(MaxPool2d::new((2, 2), (2, 2))));
                front.push(Box::new(Dropout::new(spec.dropout_p, next_drop())));
                h = spec.n_mels.div_ceil(2) / 2;
                w = spec.t_fixed.div_ceil(2) / 2;
                // Remaining blocks: unit-stride conv, frequency-only pooling.
                for i in 1..chans.len() {
                    front.push(Box::new(Conv2d::new(
                        chans[i - 1],
                        chans[i],
                        (3, 3),
                        (1, 1),
                        (1, 1),
                        &mut rng,
                    )));
                    front.push(Box::new(BatchNorm2d::new(chans[i])));
                    front.push(Box::new(Elu::new()));
                    front.push(Box::new(MaxPool2d::new((2, 1), (2, 1))));
                    front.push(Box::new(Dropout::new(spec.dropout_p, next_drop())));
                    h /= 2;
                }
                if h == 0 || w == 0 {
                    return Err(Error::Model(
                        "input too small for the configured convolution stack".into(),
                    ));
                }
                front.push(Box::new(TimeFlatten::new()));
                let input_size = chans[chans.len() - 1] * h;
                recurrent = Recurrent::Gru(Gru::new(input_size, spec.recurrent_hidden, &mut rng));
                embed_dim = spec.recurrent_hidden;
            }
            ModelKind::ResBlstm => {
                let chans = &spec.conv_channels;
                front.push(Box::new(Conv2d::new(1, chans[0], (3, 3), (2, 2), (1, 1), &mut rng)));
                front.push(Box::new(BatchNorm2d::new(chans[0])));
                front.push(Box::new(Elu::new()));
                h = spec.n_mels.div_ceil(2);
                w = spec.t_fixed.div_ceil(2);
                for i in 1..chans.len() {
                    front.push(Box::new(ResBlock::new(chans[i - 1], chans[i - 1], 1, &mut rng)));
                    front.push(Box::new(ResBlock::new(chans[i - 1], chans[i], 2, &mut rng)));
                    h = h.div_ceil(2);
                    w = w.div_ceil(2);
                }
                front.push(Box::new(Dropout::new(spec.dropout_p, next_drop())));
                if h == 0 || w == 0 {
                    return Err(Error::Model(
                        "input too small for the configured residual stack".into(),
                    ));
                }
                front.push(Box::new(TimeFlatten::new()));
                let input_size = chans[chans.len() - 1] * h;
                recurrent =
                    Recurrent::BiLstm(BiLstm::new(input_size, spec.recurrent_hidden, &mut rng));
                embed_dim = 2 * spec.recurrent_hidden;
            }
        }
        let mut head: Vec<Box<dyn Layer<S>>> = Vec::new();
        head.push(Box::new(Linear::new(embed_dim, spec.fc_units, &mut rng)));
        head.push(Box::new(Relu::new()));
        head.push(Box::new(Dropout::new(spec.dropout_p, next_drop())));
        head.push(Box::new(Linear::new(spec.fc_units, spec.n_classes, &mut rng)));
        Ok(Model {
            spec,
            front,
            recurrent,
            head,
            last_embedding: None,
        })
    }

    /// Forward pass returning raw class scores [B, n_classes].
    pub fn forward(&mut self, x: &Tensor<S>, training: bool) -> Tensor<S> {
        let mut a = x.clone();
        for layer in &mut self.front {
            a = layer.forward(&a, training);
        }
        a = self.recurrent.as_layer().forward(&a, training);
        self.last_embedding = Some(a.clone());
        for layer in &mut self.head {
            a = layer.forward(&a, training);
        }
        a
    }

    /// Backward pass from the gradient of the loss wrt the raw scores.
    pub fn backward(&mut self, grad_logits: &Tensor<S>) {
        let mut g = grad_logits.clone();
        for layer in self.head.iter_mut().rev() {
            g = layer.backward(&g);
        }
        g = self.recurrent.as_layer().backward(&g);
        for layer in self.front.iter_mut().rev() {
            g = layer.backward(&g);
        }
    }

    /// The fixed-length utterance embedding produced by the recurrent stage
    /// in the most recent forward pass.
    pub fn last_embedding(&self) -> Option<&Tensor<S>> {
        self.last_embedding.as_ref()
    }

    pub fn embed_dim(&self) -> usize {
        match self.spec.kind {
            ModelKind::Crnn => self.spec.recurrent_hidden,
            ModelKind::ResBlstm => 2 * self.spec.recurrent_hidden,
        }
    }

    pub fn visit_params(&mut self, f: &mut ParamVisitor<S>) {
        for (i, layer) in self.front.iter_mut().enumerate() {
            layer.visit_params(&format!("front.{i}"), f);
        }
        self.recurrent.as_layer().visit_params("recurrent", f);
        for (i, layer) in self.head.iter_mut().enumerate() {
            layer.visit_params(&format!("head.{i}"), f);
        }
    }

    pub fn visit_state(&mut self, f: &mut ParamVisitor<S>) {
        for (i, layer) in self.front.iter_mut().enumerate() {
            layer.visit_state(&format!("front.{i}"), f);
        }
        self.recurrent.as_layer().visit_state("recurrent", f);
        for (i, layer) in self.head.iter_mut().enumerate() {
            layer.visit_state(&format!("head.{i}"), f);
        }
    }

    pub fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, p| n += p.value.numel());
        n
    }

    pub fn zero_grads(&mut self) {
        self.visit_params(&mut |_, p| p.zero_grad());
    }
}

/// Numerically stable row-wise softmax of [B, K].
pub fn softmax<S: Scalar>(logits: &Tensor<S>) -> Tensor<S> {
    let [b, k] = logits.shape[..] else {
        panic!("softmax expects [B,K], got {:?}", logits.shape)
    };
    let mut out = Tensor::zeros(&[b, k]);
    for bi in 0..b {
        let row = &logits.data[bi * k..(bi + 1) * k];
        let max = row.iter().cloned().fold(S::neg_infinity(), S::max);
        let mut denom = S::zero();
        for (o, &v) in out.data[bi * k..(bi + 1) * k].iter_mut().zip(row) {
            *o = (v - max).exp();
            denom = denom + *o;
        }
        for o in &mut out.data[bi * k..(bi + 1) * k] {
            *o = *o / denom;
        }
    }
    out
}

pub const PROB_FLOOR: f64 = 1e-12;

/// Mean cross-entropy of softmax probabilities against integer labels,
/// together with the gradient wrt the raw scores: (p - onehot) / B.
pub fn cross_entropy_loss<S: Scalar>(
    logits: &Tensor<S>,
    labels: &[usize],
) -> (f64, Tensor<S>) {
    let [b, k] = logits.shape[..] else {
        panic!("loss expects [B,K], got {:?}", logits.shape)
    };
    assert_eq!(labels.len(), b, "labels/batch mismatch");
    let probs = softmax(logits);
    let mut loss = 0.0;
    let mut grad = probs.clone();
    let inv_b = S::one() / S::from_usize(b);
    for (bi, &y) in labels.iter().enumerate() {
        assert!(y < k, "label {y} out of range for {k} classes");
        let p = Scalar::to_f64(probs.data[bi * k + y]).max(PROB_FLOOR);
        loss -= p.ln();
        grad.data[bi * k + y] = grad.data[bi * k + y] - S::one();
        for g in &mut grad.data[bi * k..(bi + 1) * k] {
            *g = *g * inv_b;
        }
    }
    (loss / b as f64, grad)
}

/// Euclidean distance between two embeddings of equal dimension.
pub fn embedding_distance<S: Scalar>(a: &[S], b: &[S]) -> f64 {
    assert_eq!(a.len(), b.len(), "embedding dimension mismatch");
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = Scalar::to_f64(x) - Scalar::to_f64(y);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Same-class decision for a pair of embeddings: distance at most theta.
pub fn embeddings_match<S: Scalar>(a: &[S], b: &[S], theta: f64) -> bool {
    embedding_distance(a, b) <= theta
}
