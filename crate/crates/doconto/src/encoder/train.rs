//! Seed-deterministic minibatch training for both autoencoders.
//!
//! The validation split is the tail of one seeded shuffle, fixed for the
//! whole run. Epoch telemetry is evaluated noise-free (z = mean) so the
//! history is a pure function of the parameters.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{Tape, Tensor};

use super::cae::CaeParameters;
use super::vae::{sample_normal, VaeParameters};
use super::{EncodedHeader, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    RmsProp,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rmsprop" => Ok(OptimizerKind::RmsProp),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(format!("unknown optimizer {other:?} (expected rmsprop|adam)")),
        }
    }
}

const RMSPROP_DECAY: f64 = 0.9;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const OPT_EPS: f64 = 1e-8;

/// Per-tensor moment buffers; one step updates all tensors in order.
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    steps: u64,
    v: Vec<Vec<f64>>,
    m: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, sizes: &[usize]) -> Self {
        Optimizer {
            kind,
            lr,
            steps: 0,
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step(&mut self, tensors: &mut [&mut Tensor], grads: &[Vec<f64>]) {
        assert_eq!(tensors.len(), grads.len());
        self.steps += 1;
        for (pi, (t, g)) in tensors.iter_mut().zip(grads).enumerate() {
            match self.kind {
                OptimizerKind::RmsProp => {
                    for (i, (&gi, vi)) in g.iter().zip(self.v[pi].iter_mut()).enumerate() {
                        *vi = RMSPROP_DECAY * *vi + (1.0 - RMSPROP_DECAY) * gi * gi;
                        t.data[i] -= self.lr * gi / (vi.sqrt() + OPT_EPS);
                    }
                }
                OptimizerKind::Adam => {
                    let bc1 = 1.0 - ADAM_BETA1.powi(self.steps as i32);
                    let bc2 = 1.0 - ADAM_BETA2.powi(self.steps as i32);
                    for (i, &gi) in g.iter().enumerate() {
                        let m = &mut self.m[pi][i];
                        let v = &mut self.v[pi][i];
                        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * gi;
                        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * gi * gi;
                        let mhat = *m / bc1;
                        let vhat = *v / bc2;
                        t.data[i] -= self.lr * mhat / (vhat.sqrt() + OPT_EPS);
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_total: f64,
    pub val_total: f64,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("training split leaves no training rows (n={n}, validation_fraction={fraction})")]
    DegenerateSplit { n: usize, fraction: f64 },
    #[error("non-finite loss at epoch {epoch}, batch {batch} (layer {layer})")]
    Diverged { epoch: usize, batch: usize, layer: &'static str },
}

trait Trainable {
    /// Mean per-example total loss on the tape; gradients accumulate into
    /// `grads` (aligned with tensor order).
    fn accumulate(
        &self,
        input: &EncodedHeader,
        rng: &mut ChaCha8Rng,
        grads: &mut [Vec<f64>],
    ) -> Result<f64, &'static str>;

    /// Deterministic noise-free loss used for epoch telemetry.
    fn eval_loss(&self, input: &EncodedHeader) -> f64;

    fn tensor_sizes(&self) -> Vec<usize>;
    fn apply(&mut self, opt: &mut Optimizer, grads: &[Vec<f64>]);
}

impl Trainable for VaeParameters {
    fn accumulate(
        &self,
        input: &EncodedHeader,
        rng: &mut ChaCha8Rng,
        grads: &mut [Vec<f64>],
    ) -> Result<f64, &'static str> {
        let eps: Vec<f64> = (0..self.latent_dim)
            .map(|_| self.eps_std * sample_normal(rng))
            .collect();
        let mut tape = Tape::new();
        let g = self.loss_graph(&mut tape, input, &eps);
        tape.check_finite().map_err(|e| e.layer)?;
        tape.backward(g.total);
        for (acc, &id) in grads.iter_mut().zip(&g.params) {
            for (a, &gv) in acc.iter_mut().zip(tape.grad(id)) {
                *a += gv;
            }
        }
        Ok(tape.value(g.total).data[0])
    }

    fn eval_loss(&self, input: &EncodedHeader) -> f64 {
        let mut tape = Tape::new();
        let g = self.loss_graph(&mut tape, input, &vec![0.0; self.latent_dim]);
        tape.value(g.total).data[0]
    }

    fn tensor_sizes(&self) -> Vec<usize> {
        self.tensors().iter().map(|t| t.len()).collect()
    }

    fn apply(&mut self, opt: &mut Optimizer, grads: &[Vec<f64>]) {
        opt.step(&mut self.tensors_mut(), grads);
    }
}

impl Trainable for CaeParameters {
    fn accumulate(
        &self,
        input: &EncodedHeader,
        _rng: &mut ChaCha8Rng,
        grads: &mut [Vec<f64>],
    ) -> Result<f64, &'static str> {
        let mut tape = Tape::new();
        let g = self.loss_graph(&mut tape, input);
        tape.check_finite().map_err(|e| e.layer)?;
        tape.backward(g.total);
        for (acc, &id) in grads.iter_mut().zip(&g.params) {
            for (a, &gv) in acc.iter_mut().zip(tape.grad(id)) {
                *a += gv;
            }
        }
        Ok(tape.value(g.total).data[0])
    }

    fn eval_loss(&self, input: &EncodedHeader) -> f64 {
        let mut tape = Tape::new();
        let g = self.loss_graph(&mut tape, input);
        tape.value(g.total).data[0]
    }

    fn tensor_sizes(&self) -> Vec<usize> {
        self.tensors().iter().map(|t| t.len()).collect()
    }

    fn apply(&mut self, opt: &mut Optimizer, grads: &[Vec<f64>]) {
        opt.step(&mut self.tensors_mut(), grads);
    }
}

fn train_model<M: Trainable>(
    mut model: M,
    corpus: &[EncodedHeader],
    cfg: &TrainConfig,
    mut rng: ChaCha8Rng,
) -> Result<(M, Vec<EpochLoss>), TrainError> {
    let n = corpus.len();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let val_count = ((n as f64) * cfg.validation_fraction).ceil() as usize;
    if val_count >= n {
        return Err(TrainError::DegenerateSplit { n, fraction: cfg.validation_fraction });
    }
    let (train_idx, val_idx) = perm.split_at(n - val_count);
    let mut train_idx = train_idx.to_vec();
    let val_idx = val_idx.to_vec();

    let sizes = model.tensor_sizes();
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, &sizes);
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        train_idx.shuffle(&mut rng);
        for (batch_no, batch) in train_idx.chunks(cfg.batch_size).enumerate() {
            let mut grads: Vec<Vec<f64>> = sizes.iter().map(|&s| vec![0.0; s]).collect();
            for &i in batch {
                model
                    .accumulate(&corpus[i], &mut rng, &mut grads)
                    .map_err(|layer| TrainError::Diverged { epoch, batch: batch_no, layer })?;
            }
            let scale = 1.0 / batch.len() as f64;
            for g in &mut grads {
                g.iter_mut().for_each(|v| *v *= scale);
            }
            model.apply(&mut opt, &grads);
        }
        let mean = |idx: &[usize]| {
            idx.iter().map(|&i| model.eval_loss(&corpus[i])).sum::<f64>() / idx.len() as f64
        };
        let (train_total, val_total) = (mean(&train_idx), mean(&val_idx));
        if !train_total.is_finite() || !val_total.is_finite() {
            return Err(TrainError::Diverged { epoch, batch: 0, layer: "epoch-eval" });
        }
        history.push(EpochLoss { epoch, train_total, val_total });
    }
    Ok((model, history))
}

/// Train a VAE; deterministic given `cfg.seed`.
pub fn train_vae(
    corpus: &[EncodedHeader],
    vocab_size: usize,
    cfg: &TrainConfig,
) -> Result<(VaeParameters, Vec<EpochLoss>), TrainError> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let model = VaeParameters::init(cfg, vocab_size, &mut rng);
    train_model(model, corpus, cfg, rng)
}

/// Train a CAE; deterministic given `cfg.seed`.
pub fn train_cae(
    corpus: &[EncodedHeader],
    vocab_size: usize,
    cfg: &TrainConfig,
) -> Result<(CaeParameters, Vec<EpochLoss>), TrainError> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let model = CaeParameters::init(cfg, vocab_size, &mut rng);
    train_model(model, corpus, cfg, rng)
}
