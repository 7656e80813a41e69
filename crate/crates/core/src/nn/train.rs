use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::OutputKind;
use super::optim::{LrSchedule, OptimizerKind, OptimizerState};
use super::{Network, NnError};
use crate::dataset::{DatasetSplit, Targets};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub lr_schedule: LrSchedule,
    pub batch_size: usize,
    pub epochs: usize,
    /// Drives the per-epoch shuffle.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: OptimizerKind::adam(),
            learning_rate: 1e-3,
            lr_schedule: LrSchedule::Constant,
            batch_size: 128,
            epochs: 5,
            seed: 42,
        }
    }
}

impl TrainConfig {
    /// A learning rate of exactly 0 is accepted and freezes the parameters.
    pub fn validate(&self) -> Result<(), NnError> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(NnError::InvalidConfig(format!(
                "learning rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(NnError::InvalidConfig("batch size must be >= 1".into()));
        }
        self.optimizer.validate().map_err(NnError::InvalidConfig)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean loss over the epoch's mini-batches, each measured before its update.
    pub train_loss: f64,
    pub train_accuracy: Option<f64>,
    pub test_loss: f64,
    pub test_accuracy: Option<f64>,
    pub learning_rate: f64,
    pub wall_seconds: f64,
    /// Slopes of the trainable hidden layers at the end of the epoch.
    pub alphas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub activation: String,
    /// Hidden-layer indices whose slopes appear in `EpochRecord::alphas`.
    pub alpha_layers: Vec<usize>,
    pub records: Vec<EpochRecord>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|a| a.to_string()).unwrap_or_default()
}

impl TrainReport {
    /// Metrics CSV, one row per epoch. Wall time is left out so reruns are
    /// byte-identical.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,train_acc,test_loss,test_acc");
        for h in &self.alpha_layers {
            write!(out, ",alpha_layer_{h}").unwrap();
        }
        out.push('\n');
        for r in &self.records {
            write!(
                out,
                "{},{},{},{},{}",
                r.epoch,
                r.train_loss,
                fmt_opt(r.train_accuracy),
                r.test_loss,
                fmt_opt(r.test_accuracy)
            )
            .unwrap();
            for a in &r.alphas {
                write!(out, ",{a}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn total_wall_seconds(&self) -> f64 {
        self.records.iter().map(|r| r.wall_seconds).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    /// Fraction of argmax-correct predictions; `None` for regression.
    pub accuracy: Option<f64>,
}

const EVAL_CHUNK: usize = 1000;

fn check_data(net: &Network, data: &DatasetSplit) -> Result<(), NnError> {
    if data.inputs.cols() != net.input_size() {
        return Err(NnError::ShapeMismatch(format!(
            "dataset '{}' has {} features, network expects {}",
            data.name,
            data.inputs.cols(),
            net.input_size()
        )));
    }
    match (&data.targets, net.spec().output) {
        (Targets::Classes { class_count, .. }, OutputKind::Softmax) if *class_count != net.output_size() => {
            Err(NnError::ShapeMismatch(format!(
                "dataset '{}' has {class_count} classes, network outputs {}",
                data.name,
                net.output_size()
            )))
        }
        _ => Ok(()),
    }
}

/// Mean loss and accuracy over `data`. Ties in the argmax go to the lowest class index.
pub fn evaluate(net: &Network, data: &DatasetSplit) -> Result<Evaluation, NnError> {
    check_data(net, data)?;
    let n = data.len();
    let mut loss = 0.0;
    let mut correct = 0usize;
    let mut start = 0;
    while start < n {
        let idx: Vec<usize> = (start..(start + EVAL_CHUNK).min(n)).collect();
        let part = data.subset(&idx);
        let out = net.batch_outcome(&part.inputs, &part.targets, false)?;
        loss += out.loss;
        correct += out.correct.unwrap_or(0);
        start += EVAL_CHUNK;
    }
    let denom = n.max(1) as f64;
    let accuracy = match data.targets {
        Targets::Classes { .. } => Some(correct as f64 / denom),
        Targets::Values(_) => None,
    };
    Ok(Evaluation {
        loss: loss / denom,
        accuracy,
    })
}

/// Mini-batch training. Each epoch reshuffles with a generator seeded from
/// `cfg.seed`; gradients are reduced sequentially over the batch, so equal
/// seeds give bit-identical runs.
pub fn train(
    net: &mut Network,
    train_set: &DatasetSplit,
    test_set: &DatasetSplit,
    cfg: &TrainConfig,
) -> Result<TrainReport, NnError> {
    cfg.validate()?;
    check_data(net, train_set)?;
    check_data(net, test_set)?;
    let mut report = TrainReport {
        activation: net.spec().activation.name().to_string(),
        alpha_layers: net.alpha_layers(),
        records: Vec::with_capacity(cfg.epochs),
    };
    let n = train_set.len();
    if n == 0 && cfg.epochs > 0 {
        return Err(NnError::ShapeMismatch(format!("dataset '{}' is empty", train_set.name)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = OptimizerState::new(cfg.optimizer, net.weight_mask());
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let lr = cfg.lr_schedule.rate(cfg.learning_rate, epoch);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (step, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch = train_set.subset(idx);
            let out = net.batch_outcome(&batch.inputs, &batch.targets, true)?;
            let grads = out.gradients.expect("gradients requested");
            if !out.loss.is_finite() || !grads.all_finite() {
                return Err(NnError::NonFiniteLoss {
                    epoch: epoch + 1,
                    step: step + 1,
                });
            }
            loss_sum += out.loss;
            correct += out.correct.unwrap_or(0);
            opt.step(net.parameters_mut(), grads.flatten(), lr);
        }
        let test = evaluate(net, test_set)?;
        let train_accuracy = match train_set.targets {
            Targets::Classes { .. } => Some(correct as f64 / n as f64),
            Targets::Values(_) => None,
        };
        let record = EpochRecord {
            epoch: epoch + 1,
            train_loss: loss_sum / n as f64,
            train_accuracy,
            test_loss: test.loss,
            test_accuracy: test.accuracy,
            learning_rate: lr,
            wall_seconds: started.elapsed().as_secs_f64(),
            alphas: net.alphas(),
        };
        log::info!(
            "epoch {} train_loss {:.6} test_loss {:.6} test_acc {} ({:.1}s)",
            record.epoch,
            record.train_loss,
            record.test_loss,
            fmt_opt(record.test_accuracy),
            record.wall_seconds
        );
        report.records.push(record);
    }
    Ok(report)
}
