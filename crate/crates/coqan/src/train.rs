//! Training loop: dual Adam groups, early stopping, epoch logging.
//!
//! Two Adam optimizers share the work: parameters under `text.` train with
//! the text-encoder learning rate, everything else with the general rate.
//! Batches are shuffled with a seeded generator and the last partial batch
//! is kept. After each epoch the validation loss decides early stopping:
//! when it fails to improve for `patience` consecutive epochs, training
//! stops, and the checkpoint with the best validation loss wins.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ModelConfig, SubnetSet, TrainConfig};
use crate::metrics::{evaluate_predictions, MetricsReport};
use crate::model::{forward_batch, Mode, Sample};
use crate::nn::{Graph, ParamGroup, ParameterStore};
use crate::subnet::SubnetError;

const EVAL_BATCH: usize = 32;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error(transparent)]
    Subnet(#[from] SubnetError),
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("sample {0} has no label")]
    Unlabeled(String),
}

struct AdamSlot {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

/// Adam with two parameter groups, each under its own learning rate and
/// step counter. Moment estimates are kept per parameter.
pub struct DualAdam {
    lr_text: f64,
    lr_other: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    slots: BTreeMap<String, AdamSlot>,
}

impl DualAdam {
    pub fn new(cfg: &TrainConfig) -> Self {
        DualAdam {
            lr_text: cfg.lr_text,
            lr_other: cfg.lr_other,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            slots: BTreeMap::new(),
        }
    }

    /// Apply one update to every parameter carrying a gradient, then leave
    /// the gradients in place for the caller to clear.
    pub fn step(&mut self, store: &mut ParameterStore) {
        for (name, param) in store.iter_mut() {
            let Some(grad) = &param.grad else { continue };
            let lr = match ParamGroup::of(name) {
                ParamGroup::TextEncoder => self.lr_text,
                ParamGroup::Other => self.lr_other,
            };
            let slot = self.slots.entry(name.to_string()).or_insert_with(|| AdamSlot {
                m: vec![0.0; grad.len()],
                v: vec![0.0; grad.len()],
                step: 0,
            });
            slot.step += 1;
            let bc1 = 1.0 - self.beta1.powi(slot.step as i32);
            let bc2 = 1.0 - self.beta2.powi(slot.step as i32);
            for ((value, &g), (m, v)) in param
                .value
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(slot.m.iter_mut().zip(slot.v.iter_mut()))
            {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *value -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    NoImprovement,
    Stop,
}

/// Tracks the best validation loss and counts consecutive epochs without
/// strict improvement.
pub struct EarlyStop {
    patience: usize,
    best: Option<f64>,
    best_epoch: usize,
    streak: usize,
}

impl EarlyStop {
    pub fn new(patience: usize) -> Self {
        assert!(patience >= 1, "patience must be at least 1");
        EarlyStop {
            patience,
            best: None,
            best_epoch: 0,
            streak: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopDecision {
        let improved = self.best.map_or(true, |b| loss < b);
        if improved {
            self.best = Some(loss);
            self.best_epoch = epoch;
            self.streak = 0;
            StopDecision::Improved
        } else {
            self.streak += 1;
            if self.streak >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::NoImprovement
            }
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub val_auc: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation loss.
    pub store: ParameterStore,
    pub best_epoch: usize,
    pub log: Vec<EpochRecord>,
    pub stopped_early: bool,
}

fn require_labels(samples: &[Sample]) -> Result<Vec<u8>, TrainError> {
    samples
        .iter()
        .map(|s| s.label.ok_or_else(|| TrainError::Unlabeled(s.id.clone())))
        .collect()
}

fn numeric_failure(graph: &Graph, store: &ParameterStore, context: &str) -> TrainError {
    let op = graph
        .poisoned()
        .map(str::to_owned)
        .unwrap_or_else(|| "loss is not finite".to_string());
    let param = store
        .iter()
        .find(|(_, p)| !p.value.all_finite())
        .map(|(name, _)| format!("; parameter {} is not finite", name))
        .unwrap_or_default();
    TrainError::Numeric(format!("{}: {}{}", context, op, param))
}

/// Score every sample (inference mode) and report metrics plus mean loss.
pub fn evaluate(
    store: &ParameterStore,
    samples: &[Sample],
    cfg: &ModelConfig,
    subnets: SubnetSet,
) -> Result<(MetricsReport, f64), TrainError> {
    if samples.is_empty() {
        return Err(TrainError::EmptySplit("evaluation"));
    }
    let labels = require_labels(samples)?;
    let mut probabilities = Vec::with_capacity(samples.len());
    let mut loss_sum = 0.0;
    for batch in samples.chunks(EVAL_BATCH) {
        let fwd = forward_batch(store, batch, cfg, subnets, Mode::Infer)?;
        if fwd.graph.poisoned().is_some() {
            return Err(numeric_failure(&fwd.graph, store, "evaluation"));
        }
        let loss = fwd.loss.expect("labeled batch has a loss");
        loss_sum += fwd.graph.value(loss).item() * batch.len() as f64;
        for i in 0..batch.len() {
            probabilities.push(fwd.probability(i));
        }
    }
    let mean_loss = loss_sum / samples.len() as f64;
    Ok((evaluate_predictions(&probabilities, &labels), mean_loss))
}

/// Run the full training loop and return the best checkpoint plus the
/// per-epoch log. Deterministic for a fixed seed.
pub fn train(
    mut store: ParameterStore,
    train_samples: &[Sample],
    val_samples: &[Sample],
    cfg: &ModelConfig,
    subnets: SubnetSet,
    tcfg: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome, TrainError> {
    if train_samples.is_empty() {
        return Err(TrainError::EmptySplit("train"));
    }
    if val_samples.is_empty() {
        return Err(TrainError::EmptySplit("validation"));
    }
    require_labels(train_samples)?;
    require_labels(val_samples)?;

    let mut optimizer = DualAdam::new(tcfg);
    let mut stopper = EarlyStop::new(tcfg.patience);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log = Vec::new();
    let mut best_store = store.clone();
    let mut stopped_early = false;

    for epoch in 1..=tcfg.max_epochs {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..train_samples.len()).collect();
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        for chunk in order.chunks(tcfg.batch_size) {
            let batch: Vec<Sample> = chunk.iter().map(|&i| train_samples[i].clone()).collect();
            let mode = Mode::Train {
                dropout_text: tcfg.dropout_text,
                dropout_other: tcfg.dropout_other,
                seed: rng.next_u64(),
            };
            let mut fwd = forward_batch(&store, &batch, cfg, subnets, mode)?;
            let context = format!("epoch {}", epoch);
            if fwd.graph.poisoned().is_some() {
                return Err(numeric_failure(&fwd.graph, &store, &context));
            }
            let loss = fwd.loss.expect("labeled batch has a loss");
            let loss_value = fwd.graph.value(loss).item();
            if !loss_value.is_finite() {
                return Err(numeric_failure(&fwd.graph, &store, &context));
            }
            loss_sum += loss_value * batch.len() as f64;

            let grads = fwd.graph.backward(loss);
            store.absorb_gradients(&fwd.binding, &fwd.graph, &grads);
            optimizer.step(&mut store);
            store.clear_gradients();
        }
        let train_loss = loss_sum / train_samples.len() as f64;

        let (val_metrics, val_loss) = evaluate(&store, val_samples, cfg, subnets)?;
        log.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_acc: val_metrics.accuracy,
            val_auc: val_metrics.auc,
            seconds: started.elapsed().as_secs_f64(),
        });

        match stopper.observe(epoch, val_loss) {
            StopDecision::Improved => best_store = store.clone(),
            StopDecision::NoImprovement => {}
            StopDecision::Stop => {
                stopped_early = true;
                break;
            }
        }
    }

    Ok(TrainOutcome {
        store: best_store,
        best_epoch: stopper.best_epoch(),
        log,
        stopped_early,
    })
}

/// Render the per-epoch log as CSV with a leading comment line that pins
/// the run seed and config fingerprint.
pub fn epoch_log_csv(log: &[EpochRecord], seed: u64, config_fingerprint: &str) -> String {
    let mut out = format!("# seed={} config={}\n", seed, config_fingerprint);
    out.push_str("epoch,train_loss,val_loss,val_acc,val_auc,seconds\n");
    for r in log {
        let auc = r
            .val_auc
            .map(|a| format!("{:.6}", a))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{},{:.3}\n",
            r.epoch, r.train_loss, r.val_loss, r.val_acc, auc, r.seconds
        ));
    }
    out
}

/// Drop the wall-clock column so two logs of the same run compare equal.
pub fn strip_seconds(csv: &str) -> String {
    csv.lines()
        .map(|line| {
            if line.starts_with('#') || line.is_empty() {
                line.to_string()
            } else {
                match line.rsplit_once(',') {
                    Some((rest, _)) => rest.to_string(),
                    None => line.to_string(),
                }
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}
