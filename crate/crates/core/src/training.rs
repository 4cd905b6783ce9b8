//! Minibatch SGD on the quadratic cost.
//!
//! Targets use a 10/1 encoding: 10 at the true class, 1 everywhere else.
//! The gradient always goes through the analytic activation derivative
//! (implicit differentiation for the q-root family), never through a
//! simulation.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::index;

use crate::neural_net::{quadratic_cost, Activation, Gradients, HardwiredNetwork, Parameters};
use crate::{Error, Result};

pub const NUM_CLASSES: usize = 10;
pub const TARGET_HIGH: f64 = 10.0;
pub const TARGET_LOW: f64 = 1.0;

/// Labelled examples with images stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    images: Vec<f64>,
    labels: Vec<u8>,
    input_dim: usize,
}

impl Dataset {
    pub fn new(images: Vec<f64>, labels: Vec<u8>, input_dim: usize) -> Result<Self> {
        if input_dim == 0 || images.len() != labels.len() * input_dim {
            return Err(Error::DimensionMismatch {
                what: "image buffer",
                expected: labels.len() * input_dim,
                got: images.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|l| usize::from(**l) >= NUM_CLASSES) {
            return Err(Error::LabelOutOfRange(bad));
        }
        if let Some(p) = images.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidParameter(format!("pixel {p} outside [0, 1]")));
        }
        Ok(Dataset {
            images,
            labels,
            input_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn image(&self, k: usize) -> &[f64] {
        &self.images[k * self.input_dim..(k + 1) * self.input_dim]
    }

    pub fn label(&self, k: usize) -> u8 {
        self.labels[k]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }
}

pub fn encode_target(label: u8) -> Result<[f64; NUM_CLASSES]> {
    if usize::from(label) >= NUM_CLASSES {
        return Err(Error::LabelOutOfRange(label));
    }
    let mut t = [TARGET_LOW; NUM_CLASSES];
    t[usize::from(label)] = TARGET_HIGH;
    Ok(t)
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub seed: u64,
    /// Batches are drawn from the first `sample_pool` examples.
    pub sample_pool: usize,
    pub h: f64,
    pub q: u32,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 0.1,
            batch_size: 300,
            iterations: 1000,
            seed: 1234,
            sample_pool: 60_000,
            h: 1.0,
            q: 2,
        }
    }
}

impl TrainingConfig {
    /// `q = 2` gives the smoothed ReLU (plain ReLU at `h = 0`), larger `q`
    /// the implicit root family.
    pub fn activation(&self) -> Activation {
        if self.q == 2 {
            Activation::SmoothedRelu { h: self.h }
        } else {
            Activation::ImplicitRoot { h: self.h, q: self.q }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.batch_size > self.sample_pool {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= batch_size <= sample_pool, got {} and {}",
                self.batch_size, self.sample_pool
            )));
        }
        self.activation().validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterationRecord {
    pub iteration: usize,
    /// Batch mean of the quadratic cost before the update.
    pub cost: f64,
    /// Batch accuracy before the update.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMetrics {
    pub records: Vec<IterationRecord>,
    pub parameters: Parameters,
    /// Indices of the last batch drawn.
    pub last_batch: Vec<usize>,
}

impl TrainingMetrics {
    /// Mean batch accuracy over the last `n` iterations.
    pub fn final_mean_accuracy(&self, n: usize) -> f64 {
        let tail = &self.records[self.records.len().saturating_sub(n)..];
        if tail.is_empty() {
            return 0.0;
        }
        tail.iter().map(|r| r.accuracy).sum::<f64>() / tail.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Evaluation {
    pub accuracy: f64,
    pub mean_cost: f64,
}

fn check_shapes(net: &HardwiredNetwork, data: &Dataset) -> Result<()> {
    let arch = net.architecture();
    if arch.input_size() != data.input_dim() {
        return Err(Error::DimensionMismatch {
            what: "network input layer",
            expected: data.input_dim(),
            got: arch.input_size(),
        });
    }
    if arch.output_size() != NUM_CLASSES {
        return Err(Error::DimensionMismatch {
            what: "network output layer",
            expected: NUM_CLASSES,
            got: arch.output_size(),
        });
    }
    Ok(())
}

/// One SGD step on the given batch. Returns the batch statistics computed
/// with the parameters before the update.
pub fn sgd_step(net: &mut HardwiredNetwork, data: &Dataset, batch: &[usize], learning_rate: f64) -> Result<Evaluation> {
    let mut grads = Gradients::zeros(net.architecture());
    let scale = 1.0 / batch.len() as f64;
    let (mut cost, mut correct) = (0.0, 0usize);
    for &k in batch {
        let fr = net.forward(data.image(k))?;
        let target = encode_target(data.label(k))?;
        cost += quadratic_cost(fr.output(), &target)?;
        if argmax(fr.output()) == usize::from(data.label(k)) {
            correct += 1;
        }
        net.accumulate_gradients(&fr, &target, scale, &mut grads)?;
    }
    net.apply_gradient(&grads, learning_rate);
    Ok(Evaluation {
        accuracy: correct as f64 / batch.len() as f64,
        mean_cost: cost * scale,
    })
}

/// Train `net` in place and return one record per iteration.
///
/// Each iteration draws `batch_size` distinct indices uniformly from the
/// first `sample_pool` examples, so batches may overlap across iterations.
pub fn train(data: &Dataset, net: &mut HardwiredNetwork, cfg: &TrainingConfig) -> Result<TrainingMetrics> {
    train_with(data, net, cfg, |_, _| Ok(()))
}

/// [`train`], calling `observe` after every update with the iteration's
/// record and the updated network. An error from `observe` stops training.
pub fn train_with<F>(
    data: &Dataset,
    net: &mut HardwiredNetwork,
    cfg: &TrainingConfig,
    mut observe: F,
) -> Result<TrainingMetrics>
where
    F: FnMut(&IterationRecord, &HardwiredNetwork) -> Result<()>,
{
    cfg.validate()?;
    check_shapes(net, data)?;
    if cfg.sample_pool > data.len() {
        return Err(Error::InvalidParameter(format!(
            "sample_pool {} exceeds the {} available examples",
            cfg.sample_pool,
            data.len()
        )));
    }
    let mut rng = crate::seeded_rng(cfg.seed);
    let mut records = Vec::with_capacity(cfg.iterations);
    let mut batch = Vec::new();
    for iteration in 0..cfg.iterations {
        batch = index::sample(&mut rng, cfg.sample_pool, cfg.batch_size).into_vec();
        // shapes and labels are checked up front, so a failure here is a
        // non-finite pre-activation or a root solve blowing up
        let stats = match sgd_step(net, data, &batch, cfg.learning_rate) {
            Ok(s) => s,
            Err(Error::InvalidParameter(_) | Error::RootNotConverged { .. }) => return Err(Error::Diverged(iteration)),
            Err(e) => return Err(e),
        };
        if !stats.mean_cost.is_finite() || !net.parameters().all_finite() {
            return Err(Error::Diverged(iteration));
        }
        let record = IterationRecord {
            iteration,
            cost: stats.mean_cost,
            accuracy: stats.accuracy,
        };
        observe(&record, net)?;
        records.push(record);
    }
    Ok(TrainingMetrics {
        records,
        parameters: net.parameters().clone(),
        last_batch: batch,
    })
}

/// Accuracy (argmax against label) and mean quadratic cost over `indices`.
pub fn evaluate(net: &HardwiredNetwork, data: &Dataset, indices: &[usize]) -> Result<Evaluation> {
    check_shapes(net, data)?;
    if indices.is_empty() {
        return Err(Error::InvalidParameter("no examples to evaluate".into()));
    }
    let (mut cost, mut correct) = (0.0, 0usize);
    for &k in indices {
        if k >= data.len() {
            return Err(Error::InvalidParameter(format!("example index {k} out of range")));
        }
        let fr = net.forward(data.image(k))?;
        cost += quadratic_cost(fr.output(), &encode_target(data.label(k))?)?;
        if argmax(fr.output()) == usize::from(data.label(k)) {
            correct += 1;
        }
    }
    Ok(Evaluation {
        accuracy: correct as f64 / indices.len() as f64,
        mean_cost: cost / indices.len() as f64,
    })
}
