use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::{instance_loss, Example, LossParts, SeamTargets};
use super::optim::{learning_rate, Adam};
use crate::corpus::TableInstance;
use crate::error::{PtsError, Result};
use crate::inference::Generator;
use crate::metrics::bleu;
use crate::model::Model;
use crate::nnet::{Gradients, ParamStore, Tape};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Weight of the planning loss.
    pub lambda: f64,
    pub peak_lr: f64,
    pub warmup: usize,
    pub max_steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Rescale gradients whose global norm exceeds this.
    pub clip_norm: Option<f64>,
    /// Validate every this many steps; 0 disables validation.
    pub eval_every: usize,
    /// Stop after this many validations without improvement.
    pub patience: usize,
    /// Stop as soon as validation BLEU reaches this value.
    pub target_bleu: Option<f64>,
    /// Iteration cap used when decoding the validation set.
    pub eval_max_iter: usize,
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 0.05,
            peak_lr: 5e-4,
            warmup: 10_000,
            max_steps: 300_000,
            batch_size: 32,
            seed: 1,
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-8,
            clip_norm: None,
            eval_every: 1_000,
            patience: 10,
            target_bleu: None,
            eval_max_iter: 10,
            log_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(PtsError::Config(m.into()));
        if self.lambda.is_nan() || self.lambda < 0.0 {
            return bad("lambda must be nonnegative");
        }
        if self.warmup == 0 {
            return bad("warmup must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.peak_lr.is_nan() || self.peak_lr <= 0.0 {
            return bad("peak_lr must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if self.eval_every > 0 && self.eval_max_iter == 0 {
            return bad("eval_max_iter must be at least 1");
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct LogEntry {
    pub step: usize,
    pub lr: f64,
    /// Batch means.
    pub parts: LossParts<f64>,
    pub loss: f64,
    pub grad_norm: f64,
    pub valid_bleu: Option<f64>,
}

impl LogEntry {
    /// `key=value` pairs separated by spaces.
    pub fn to_line(&self) -> String {
        let p = &self.parts;
        let mut s = format!(
            "step={} lr={:.6e} loss={:.6} plan_count={:.6} plan_pointer={:.6} plan_delete={:.6} \
             seam_insert={:.6} seam_token={:.6} seam_delete={:.6} grad_norm={:.4}",
            self.step,
            self.lr,
            self.loss,
            p.plan_count,
            p.plan_pointer,
            p.plan_delete,
            p.seam_insert,
            p.seam_token,
            p.seam_delete,
            self.grad_norm
        );
        if let Some(b) = self.valid_bleu {
            let _ = write!(s, " valid_bleu={b:.4}");
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub steps: usize,
    pub best_bleu: Option<f64>,
    pub best_step: Option<usize>,
    pub stopped_early: bool,
    pub log: Vec<LogEntry>,
}

/// Holds the optimizer state and the data order between steps.
pub struct Trainer<'a> {
    model: &'a mut Model,
    config: TrainConfig,
    adam: Adam,
    rng: ChaCha8Rng,
    examples: Vec<Example>,
    order: Vec<usize>,
    cursor: usize,
    step: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(model: &'a mut Model, train: &[TableInstance], config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if train.is_empty() {
            return Err(PtsError::EmptyCorpus);
        }
        let limit = model.config().max_length;
        let records = model.config().max_records;
        for (i, inst) in train.iter().enumerate() {
            inst.validate()?;
            if inst.description.len() + 2 > limit || inst.plan_pointers.len() + 2 > limit {
                return Err(PtsError::Config(format!(
                    "instance {i}: {} description tokens exceed max_length {limit}",
                    inst.description.len()
                )));
            }
            if inst.records.len() > records {
                return Err(PtsError::TableTooLarge {
                    records: inst.records.len(),
                    limit: records,
                });
            }
        }
        let examples = train.iter().map(|i| Example::new(model, i)).collect();
        Ok(Self {
            adam: Adam::new(&model.params, config.beta1, config.beta2, config.eps),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            examples,
            order: Vec::new(),
            cursor: 0,
            step: 0,
            model,
            config,
        })
    }

    pub fn model(&self) -> &Model {
        self.model
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    fn next_batch(&mut self) -> Vec<usize> {
        let mut batch = Vec::with_capacity(self.config.batch_size);
        while batch.len() < self.config.batch_size {
            if self.cursor == self.order.len() {
                self.order = (0..self.examples.len()).collect();
                self.order.shuffle(&mut self.rng);
                self.cursor = 0;
            }
            batch.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        batch
    }

    /// Mean loss and gradient over a batch, computed per instance in
    /// parallel and summed in batch order.
    pub fn batch_gradients(&self, batch: &[usize], seeds: &[u64]) -> Result<(LossParts<f64>, Gradients<f32>)> {
        let net = &self.model.net;
        let params = &self.model.params;
        let lambda = self.config.lambda;
        let results: Vec<Result<(LossParts<f64>, Gradients<f32>)>> = batch
            .par_iter()
            .zip(seeds)
            .map(|(&i, &seed)| {
                let ex = &self.examples[i];
                let seam = SeamTargets::sample(ex, &mut ChaCha8Rng::seed_from_u64(seed))?;
                let mut tape = Tape::new(params);
                let graph = instance_loss(net, &mut tape, ex, &seam, lambda, None)?;
                Ok((graph.values(&tape), tape.backward(graph.total)))
            })
            .collect();
        let mut parts = LossParts::default();
        let mut grads = Gradients::zeros_like(params);
        for r in results {
            let (p, g) = r?;
            parts.add(&p);
            grads.add_assign(&g);
        }
        let inv = 1.0 / batch.len() as f64;
        parts.scale(inv);
        grads.scale(inv as f32);
        Ok((parts, grads))
    }

    /// One optimizer update.
    pub fn step(&mut self) -> Result<LogEntry> {
        let batch = self.next_batch();
        let seeds: Vec<u64> = batch.iter().map(|_| self.rng.random()).collect();
        let (parts, mut grads) = self.batch_gradients(&batch, &seeds)?;
        self.step += 1;
        let loss = parts.total(self.config.lambda);
        if !loss.is_finite() || !grads.all_finite() {
            return Err(PtsError::NonFiniteLoss {
                step: self.step,
                detail: format!("loss {loss}, parts {parts:?}"),
            });
        }
        let grad_norm = grads.global_norm() as f64;
        if let Some(max) = self.config.clip_norm {
            if grad_norm > max {
                grads.scale((max / grad_norm) as f32);
            }
        }
        let lr = learning_rate(self.step, self.config.peak_lr, self.config.warmup);
        self.adam.update(&mut self.model.params, &grads, lr);
        Ok(LogEntry {
            step: self.step,
            lr,
            parts,
            loss,
            grad_norm,
            valid_bleu: None,
        })
    }
}

/// BLEU of greedy decoding against the references.
pub fn validation_bleu(model: &Model, valid: &[TableInstance], max_iter: usize) -> Result<f64> {
    let tables: Vec<&[_]> = valid.iter().map(|i| &i.records[..]).collect();
    let out = Generator::new(model, max_iter).generate_batch(&tables)?;
    let hyps: Vec<Vec<String>> = out.into_iter().map(|g| g.text).collect();
    let refs: Vec<Vec<String>> = valid.iter().map(|i| i.description.clone()).collect();
    bleu(&hyps, &refs)
}

/// Trains `model` in place. With a validation set, the weights with the
/// best validation BLEU are kept and training stops early once BLEU stops
/// improving (or reaches `target_bleu`).
pub fn train(
    model: &mut Model,
    train: &[TableInstance],
    valid: Option<&[TableInstance]>,
    config: &TrainConfig,
    mut on_log: impl FnMut(&LogEntry),
) -> Result<TrainReport> {
    let mut trainer = Trainer::new(model, train, config.clone())?;
    let mut log = Vec::new();
    let mut best: Option<(f64, usize, ParamStore<f32>)> = None;
    let mut since_best = 0;
    let mut stopped_early = false;
    while trainer.steps_done() < config.max_steps {
        let mut entry = trainer.step()?;
        let step = entry.step;
        let validate = valid.filter(|v| !v.is_empty() && config.eval_every > 0 && step % config.eval_every == 0);
        if let Some(v) = validate {
            let b = validation_bleu(trainer.model(), v, config.eval_max_iter)?;
            entry.valid_bleu = Some(b);
            if best.as_ref().is_none_or(|(bb, _, _)| b > *bb) {
                best = Some((b, step, trainer.model().params.clone()));
                since_best = 0;
            } else {
                since_best += 1;
            }
        }
        if entry.valid_bleu.is_some() || step % config.log_every.max(1) == 0 || step == 1 {
            on_log(&entry);
        }
        let reached = matches!((entry.valid_bleu, config.target_bleu), (Some(b), Some(t)) if b >= t);
        log.push(entry);
        if reached || (config.patience > 0 && since_best >= config.patience) {
            stopped_early = true;
            break;
        }
    }
    let steps = trainer.steps_done();
    drop(trainer);
    let (best_bleu, best_step) = match best {
        Some((b, s, params)) => {
            model.params = params;
            (Some(b), Some(s))
        }
        None => (None, None),
    };
    Ok(TrainReport {
        steps,
        best_bleu,
        best_step,
        stopped_early,
        log,
    })
}
