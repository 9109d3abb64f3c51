//! Dual-group mini-batch training with pair sampling, Adam updates and
//! validation-based model selection.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::format;

use log::{debug, info, warn};
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SampleRecord};
use crate::error::{Error, Result};
use crate::losses::{LossBreakdown, LossWeights};
use crate::metrics::{evaluate, MetricOptions, MetricReport, ScoredSample};
use crate::model::{init_model, predict_both, ModelConfig, ModelParams};
use crate::objective::{all_pairs, PairSet, UpliftObjective};
use crate::optim::{adam_step, AdamConfig, AdamState};

/// Totals above this are treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub pair_sample_size: usize,
    pub learning_rate: f64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub weights: LossWeights,
    pub metrics: MetricOptions,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 256,
            pair_sample_size: 32,
            learning_rate: 1e-3,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            max_epochs: 100,
            patience: 10,
            seed: 0,
            weights: LossWeights::default(),
            metrics: MetricOptions::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.batch_size < 2 {
            return fail(format!("batch_size must be at least 2, got {}", self.batch_size));
        }
        if self.pair_sample_size < 2 || self.pair_sample_size > self.batch_size {
            return fail(format!(
                "pair_sample_size must lie in [2, batch_size={}], got {}",
                self.batch_size, self.pair_sample_size
            ));
        }
        // Zero is accepted so a run can be replayed without moving parameters.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate must be finite and non-negative, got {}", self.learning_rate));
        }
        let (b1, b2) = self.adam_betas;
        if !(0.0..1.0).contains(&b1) || !(0.0..1.0).contains(&b2) {
            return fail(format!("adam_betas must lie in [0, 1), got ({b1}, {b2})"));
        }
        if !(self.adam_eps > 0.0) {
            return fail(format!("adam_eps must be positive, got {}", self.adam_eps));
        }
        if self.max_epochs == 0 {
            return fail("max_epochs must be at least 1".into());
        }
        if self.patience == 0 {
            return fail("patience must be at least 1".into());
        }
        if self.metrics.buckets == 0 {
            return fail("metrics.buckets must be at least 1".into());
        }
        if !(self.metrics.lift_h > 0.0 && self.metrics.lift_h <= 100.0) {
            return fail(format!("metrics.lift_h must lie in (0, 100], got {}", self.metrics.lift_h));
        }
        self.weights.validate()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_betas.0,
            beta2: self.adam_betas.1,
            eps: self.adam_eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean over the epoch's steps.
    pub train_loss: LossBreakdown,
    pub validation: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub seed: u64,
    pub stopped_early: bool,
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
}

impl TrainHistory {
    pub fn best(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch]
    }
}

/// Draw `s` distinct positions from each batch and form every pair over
/// the draws.
pub fn sample_pairs<R: Rng + ?Sized>(batch_t: usize, batch_c: usize, s: usize, rng: &mut R) -> Result<PairSet> {
    for (group, size) in [("treated", batch_t), ("control", batch_c)] {
        if s > size {
            return Err(Error::GroupTooSmall { group, size, required: s });
        }
    }
    if s < 2 {
        warn!("pair sample size {s} yields no within-group pairs");
    }
    let dt = sample(rng, batch_t, s).into_vec();
    let dc = sample(rng, batch_c, s).into_vec();
    Ok(all_pairs(&dt, &dc))
}

/// Predicted uplift and observed-arm point prediction for every record.
pub fn score_dataset(params: &ModelParams, config: &ModelConfig, data: &Dataset) -> Result<Vec<ScoredSample>> {
    let both = predict_both(params, config, data.records())?;
    Ok(data
        .records()
        .iter()
        .zip(both)
        .map(|(r, (m1, m0))| ScoredSample {
            uplift: m1 - m0,
            treated: r.treated,
            response: r.response,
            predicted_response: Some(if r.treated { m1 } else { m0 }),
        })
        .collect())
}

pub fn evaluate_epoch(
    params: &ModelParams,
    config: &ModelConfig,
    val: &Dataset,
    options: &MetricOptions,
) -> Result<MetricReport> {
    if val.treated_count() == 0 {
        return Err(Error::EmptyGroup("treated"));
    }
    if val.control_count() == 0 {
        return Err(Error::EmptyGroup("control"));
    }
    Ok(evaluate(&score_dataset(params, config, val)?, options)?.report)
}

fn improves(candidate: Option<f64>, best: Option<f64>) -> bool {
    match (candidate, best) {
        (Some(c), Some(b)) => c > b,
        (Some(_), None) => true,
        (None, _) => false,
    }
}

fn split_groups(data: &Dataset) -> (Vec<&SampleRecord>, Vec<&SampleRecord>) {
    data.records().iter().partition(|r| r.treated)
}

/// Train from a seeded initialization.
pub fn train(
    train_set: &Dataset,
    val: &Dataset,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
) -> Result<(ModelParams, TrainHistory)> {
    model_config.validate()?;
    train_config.validate()?;
    let params = init_model(model_config, train_set.schema(), train_config.seed)?;
    train_from(params, train_set, val, model_config, train_config)
}

/// Train starting from `params`.
pub fn train_from(
    mut params: ModelParams,
    train_set: &Dataset,
    val: &Dataset,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
) -> Result<(ModelParams, TrainHistory)> {
    model_config.validate()?;
    train_config.validate()?;
    let b = train_config.batch_size;
    let (mut treated, mut control) = split_groups(train_set);
    for (group, size) in [("treated", treated.len()), ("control", control.len())] {
        if size < b {
            return Err(Error::GroupTooSmall { group, size, required: b });
        }
    }
    if val.treated_count() == 0 || val.control_count() == 0 {
        return Err(Error::EmptyGroup(if val.treated_count() == 0 { "validation treated" } else { "validation control" }));
    }

    let mut shuffle_rng = SplitMix64::seed_from_u64(train_config.seed ^ 0x5348_5546_464c_4521);
    let mut pair_rng = SplitMix64::seed_from_u64(train_config.seed ^ 0x5041_4952_5321_0000);
    let adam = train_config.adam();
    let mut state = AdamState::new(&params);
    let steps = treated.len().max(control.len()).div_ceil(b);

    let mut epochs = Vec::new();
    let mut best = (0usize, None::<f64>, params.clone());
    let mut stale = 0;
    let mut stopped_early = false;
    let mut batch_t: Vec<&SampleRecord> = Vec::with_capacity(b);
    let mut batch_c: Vec<&SampleRecord> = Vec::with_capacity(b);

    for epoch in 0..train_config.max_epochs {
        treated.shuffle(&mut shuffle_rng);
        control.shuffle(&mut shuffle_rng);
        let mut losses = Vec::with_capacity(steps);
        for step in 0..steps {
            batch_t.clear();
            batch_c.clear();
            batch_t.extend((0..b).map(|i| treated[(step * b + i) % treated.len()]));
            batch_c.extend((0..b).map(|i| control[(step * b + i) % control.len()]));
            let pairs = sample_pairs(b, b, train_config.pair_sample_size, &mut pair_rng)?;
            let objective = UpliftObjective {
                config: model_config,
                weights: &train_config.weights,
                treated: &batch_t,
                control: &batch_c,
                pairs: &pairs,
            };
            let diverged = |loss: f64| Error::Diverged { epoch, step, loss };
            let (breakdown, grads) = match objective.evaluate(&params, true) {
                Ok((bd, g)) => (bd, g.expect("gradient requested")),
                Err(Error::NonFiniteLoss(_) | Error::NonFinite { .. }) => return Err(diverged(f64::NAN)),
                Err(e) => return Err(e),
            };
            if !(breakdown.total <= DIVERGENCE_LIMIT) {
                return Err(diverged(breakdown.total));
            }
            adam_step(&mut params, &grads, &mut state, &adam).map_err(|e| match e {
                Error::NonFiniteGradient(_) => diverged(breakdown.total),
                other => other,
            })?;
            losses.push(breakdown);
        }
        let validation = evaluate_epoch(&params, model_config, val, &train_config.metrics)?;
        let train_loss = LossBreakdown::mean(&losses);
        debug!("epoch {epoch}: train loss {:.6}, validation AUUC {:?}", train_loss.total, validation.auuc_norm);
        let auuc = validation.auuc_norm;
        epochs.push(EpochRecord { epoch, train_loss, validation });
        if epoch == 0 || improves(auuc, best.1) {
            best = (epoch, auuc, params.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= train_config.patience {
                stopped_early = epoch + 1 < train_config.max_epochs;
                break;
            }
        }
    }

    info!(
        "training finished after {} epochs; best epoch {} with validation AUUC {:?}",
        epochs.len(),
        best.0,
        best.1
    );
    let history = TrainHistory {
        epochs,
        best_epoch: best.0,
        seed: train_config.seed,
        stopped_early,
        model_config: model_config.clone(),
        train_config: train_config.clone(),
    };
    Ok((best.2, history))
}
