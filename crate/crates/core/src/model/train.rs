use std::collections::BTreeMap;

use log::{debug, info};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::encoder::PairSource;
use super::inference::{predict_pairs, Aggregation, InferenceSpec};
use super::network::GroupwiseModel;
use super::predictor::mse_loss;
use crate::autodiff::{Adam, LinearWarmupDecay, Tape};
use crate::data::RetrievalRun;
use crate::error::{QppError, Result};
use crate::grouping::{build_groups, GroupingStrategy};
use crate::metrics::{kendall_tau_b, or_zero_if_degenerate};
use crate::rng;

const INIT_STREAM: u64 = 0x1417;
const INNER_STREAM: u64 = 0x1e5e;
const FINAL_INDEX: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub group_size: usize,
    pub lr_grid: Vec<f64>,
    pub warmup_fraction: f64,
    pub train_depth: usize,
    pub infer_depth: usize,
    pub strategy: GroupingStrategy,
    pub aggregations: Vec<Aggregation>,
    /// Share of the training queries kept for fitting during selection.
    pub inner_train_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 5,
            group_size: 8,
            lr_grid: vec![1e-4, 1e-5, 1e-6],
            warmup_fraction: 0.1,
            train_depth: 100,
            infer_depth: 25,
            strategy: GroupingStrategy::Rqd,
            aggregations: Aggregation::ALL.to_vec(),
            inner_train_fraction: 0.8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.epochs > 0 && self.group_size > 0 && self.train_depth > 0 && self.infer_depth > 0;
        if !positive {
            return Err(QppError::Input("epochs, group size and depths must be >= 1".into()));
        }
        if self.lr_grid.is_empty() || self.lr_grid.iter().any(|&lr| !(lr > 0.0 && lr.is_finite())) {
            return Err(QppError::Input("learning-rate grid must be non-empty and positive".into()));
        }
        if !(self.warmup_fraction > 0.0 && self.warmup_fraction < 1.0) {
            return Err(QppError::Input("warmup fraction must lie in (0, 1)".into()));
        }
        if !(self.inner_train_fraction > 0.0 && self.inner_train_fraction < 1.0) {
            return Err(QppError::Input("inner train fraction must lie in (0, 1)".into()));
        }
        if self.aggregations.is_empty() {
            return Err(QppError::Input("at least one aggregation is required".into()));
        }
        Ok(())
    }

    pub fn inference_spec(&self) -> InferenceSpec {
        InferenceSpec {
            strategy: self.strategy.default_inference(),
            group_size: self.group_size,
            depth: self.infer_depth,
            seed: self.seed,
        }
    }
}

/// Inputs shared by fitting and selection.
///
/// `labels` supervise every pair of a query; `targets` are what selection
/// correlates against (usually AP@1000). `initial_qpp` orders queries in
/// query-ordered groups and must be label-free.
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub run: &'a RetrievalRun,
    pub labels: &'a BTreeMap<String, f64>,
    pub targets: &'a BTreeMap<String, f64>,
    pub source: &'a PairSource,
    pub initial_qpp: Option<&'a BTreeMap<String, f64>>,
}

impl<'a> TrainData<'a> {
    fn training_run(&self) -> Result<RetrievalRun> {
        let run = self.run.restrict(self.labels.keys().map(String::as_str));
        if run.is_empty() {
            return Err(QppError::Input("no labelled query in the run".into()));
        }
        Ok(run)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitLog {
    pub records: Vec<LogRecord>,
    pub epoch_mean_loss: Vec<f64>,
}

impl FitLog {
    /// `step lr loss` lines.
    pub fn to_lines(&self) -> String {
        self.records
            .iter()
            .map(|r| format!("{} {:e} {:.9e}\n", r.step, r.lr, r.loss))
            .collect()
    }
}

/// Train one freshly initialised model at a fixed base learning rate.
///
/// The initial weights come from the stream `(seed, init, stream)`; groups
/// are rebuilt every epoch from `seed`.
pub fn fit(
    model_config: ModelConfig,
    data: TrainData<'_>,
    cfg: &TrainConfig,
    lr: f64,
    stream: u64,
) -> Result<(GroupwiseModel, FitLog)> {
    cfg.validate()?;
    let run = data.training_run()?;
    let mut model = GroupwiseModel::init(model_config, &mut rng::stream(cfg.seed, &[INIT_STREAM, stream]))?;
    let groups_of = |epoch| {
        build_groups(
            cfg.strategy,
            &run,
            cfg.train_depth,
            cfg.group_size,
            cfg.seed,
            epoch,
            data.initial_qpp,
        )
    };
    let first = groups_of(0)?;
    let total_steps = first.len() * cfg.epochs;
    let mut adam = Adam::new(
        &model.params,
        LinearWarmupDecay::new(lr, total_steps, cfg.warmup_fraction),
    );
    let mut log = FitLog::default();
    let mut groups = first;
    for epoch in 0..cfg.epochs {
        if epoch > 0 {
            groups = groups_of(epoch)?;
        }
        let mut epoch_loss = 0.0;
        for (gi, group) in groups.iter().enumerate() {
            let step = adam.step_count();
            let step_lr = adam.next_lr();
            let labels: Vec<f64> = group
                .items
                .iter()
                .map(|it| it.as_ref().map_or(0.0, |k| data.labels[&k.qid]))
                .collect();
            let mut tape = Tape::new();
            let vars = model.params.bind(&mut tape);
            let out = model.forward_group(&mut tape, &vars, group, data.source)?;
            let loss_var = mse_loss(&mut tape, out, &labels, &group.mask)?;
            let loss = tape.value(loss_var).item();
            if !loss.is_finite() {
                return Err(QppError::NonFinite {
                    loss,
                    lr: step_lr,
                    step,
                    group: gi,
                });
            }
            let mut grads = tape.backward(loss_var)?;
            let grads: Vec<_> = vars.iter().map(|&v| grads.take(v)).collect();
            adam.step(&mut model.params, &grads)?;
            epoch_loss += loss;
            log.records.push(LogRecord {
                step,
                lr: step_lr,
                loss,
            });
        }
        let mean = epoch_loss / groups.len() as f64;
        debug!("lr {lr:e} epoch {epoch}: mean loss {mean:.6}");
        log.epoch_mean_loss.push(mean);
    }
    if !model.params.all_finite() {
        return Err(QppError::NonFinite {
            loss: f64::NAN,
            lr,
            step: adam.step_count(),
            group: 0,
        });
    }
    Ok((model, log))
}

/// Validation score of one learning rate and aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub lr: f64,
    pub aggregation: Aggregation,
    pub tau: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: GroupwiseModel,
    pub log: FitLog,
    pub lr: f64,
    pub aggregation: Aggregation,
    pub candidates: Vec<Candidate>,
    /// Inner-validation predictions of the selected candidate; empty when
    /// there was nothing to select.
    pub validation: BTreeMap<String, f64>,
}

/// Split the labelled queries into inner-train and inner-validation parts.
pub fn inner_split(qids: &[String], fraction: f64, seed: u64) -> (Vec<String>, Vec<String>) {
    let mut ids = qids.to_vec();
    ids.sort();
    ids.shuffle(&mut rng::stream(seed, &[INNER_STREAM]));
    let cut = ((ids.len() as f64 * fraction).ceil() as usize).min(ids.len());
    let mut fit = ids[..cut].to_vec();
    let mut val = ids[cut..].to_vec();
    fit.sort();
    val.sort();
    (fit, val)
}

/// Select the learning rate and aggregation on an inner split, then retrain
/// on all labelled queries.
pub fn train(model_config: ModelConfig, data: TrainData<'_>, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let run = data.training_run()?;
    let qids: Vec<String> = run.qids().map(str::to_string).collect();
    let single = cfg.lr_grid.len() == 1 && cfg.aggregations.len() == 1;
    let (fit_ids, val_ids) = inner_split(&qids, cfg.inner_train_fraction, cfg.seed);

    let (mut lr, mut aggregation) = (cfg.lr_grid[0], cfg.aggregations[0]);
    let mut candidates = Vec::new();
    let mut validation = BTreeMap::new();
    if !single {
        if val_ids.len() < 2 || fit_ids.is_empty() {
            return Err(QppError::Input(format!(
                "{} labelled queries are too few for an inner validation split",
                qids.len()
            )));
        }
        let fit_labels: BTreeMap<String, f64> =
            fit_ids.iter().map(|q| (q.clone(), data.labels[q])).collect();
        let val_run = run.restrict(val_ids.iter().map(String::as_str));
        let inner = TrainData {
            labels: &fit_labels,
            ..data
        };
        let target: Vec<f64> = val_ids
            .iter()
            .map(|q| {
                data.targets.get(q).copied().ok_or_else(|| {
                    QppError::Input(format!("no selection target for query {q}"))
                })
            })
            .collect::<Result<_>>()?;
        let per_lr = cfg
            .lr_grid
            .par_iter()
            .enumerate()
            .map(|(i, &lr)| {
                let (model, _) = fit(model_config, inner, cfg, lr, i as u64)?;
                let preds = predict_pairs(&model, &val_run, data.source, cfg.inference_spec(), data.initial_qpp)?;
                cfg.aggregations
                    .iter()
                    .map(|&a| {
                        let agg = preds.aggregate(a)?;
                        let pred: Vec<f64> = val_ids.iter().map(|q| agg[q]).collect();
                        let tau = or_zero_if_degenerate(kendall_tau_b(&pred, &target))?;
                        Ok((Candidate { lr, aggregation: a, tau }, agg))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let mut best: Option<(Candidate, BTreeMap<String, f64>)> = None;
        for (c, agg) in per_lr.into_iter().flatten() {
            candidates.push(c);
            if best.as_ref().is_none_or(|(b, _)| c.tau > b.tau) {
                best = Some((c, agg));
            }
        }
        let (c, agg) = best.expect("non-empty grid");
        info!("selected lr {:e}, aggregation {} (inner τ {:.4})", c.lr, c.aggregation, c.tau);
        lr = c.lr;
        aggregation = c.aggregation;
        validation = agg;
    }
    let (model, log) = fit(model_config, data, cfg, lr, FINAL_INDEX)?;
    Ok(TrainOutcome {
        model,
        log,
        lr,
        aggregation,
        candidates,
        validation,
    })
}
