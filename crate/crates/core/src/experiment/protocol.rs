use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::inputs::ExperimentInputs;
use super::report::{build_report, ExperimentReport};
use crate::baselines::{interpolate, score_queries, InterpolationConfig, ScorePredictor};
use crate::error::{QppError, Result};
use crate::metrics::{kendall_tau_b, make_splits, or_zero_if_degenerate, pearson, Split, SplitPlan};
use crate::model::{predict_queries, train, Aggregation, TrainConfig, TrainData, TrainOutcome};
use crate::rng;

const SPLIT_STREAM: u64 = 0x5b1;

/// Hyper-parameters a method chose on the training fold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TunedParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aggregation: Option<Aggregation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSplit {
    pub pearson: f64,
    pub kendall: f64,
    pub tuned: TunedParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub index: usize,
    pub fold1: Vec<String>,
    pub fold2: Vec<String>,
    pub methods: BTreeMap<String, MethodSplit>,
}

fn stage<T>(name: &str, split: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        e @ QppError::Stage { .. } => e,
        e => QppError::Stage {
            stage: name.to_string(),
            split,
            source: Box::new(e),
        },
    })
}

fn values(map: &BTreeMap<String, f64>, qids: &[String]) -> Result<Vec<f64>> {
    qids.iter()
        .map(|q| {
            map.get(q)
                .copied()
                .ok_or_else(|| QppError::MissingData(format!("no value for query {q}")))
        })
        .collect()
}

/// (Pearson, Kendall) of `preds` against `targets` over `qids`; a constant
/// side counts as no correlation.
pub fn correlate(preds: &BTreeMap<String, f64>, targets: &BTreeMap<String, f64>, qids: &[String]) -> Result<(f64, f64)> {
    let p = values(preds, qids)?;
    let t = values(targets, qids)?;
    Ok((
        or_zero_if_degenerate(pearson(&p, &t))?,
        or_zero_if_degenerate(kendall_tau_b(&p, &t))?,
    ))
}

/// Index of the first maximum.
fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// The split's training-fold inputs only ever reach the tuning code through
/// this view, so test-fold labels cannot influence a tuned value.
struct TrainFold<'a> {
    labels: BTreeMap<String, f64>,
    targets: BTreeMap<String, f64>,
    qids: &'a [String],
}

fn nsigma_scores(inputs: &ExperimentInputs, x: f64, qids: &[String]) -> Result<BTreeMap<String, f64>> {
    score_queries(ScorePredictor::NSigma(x), &inputs.run, &inputs.side, qids.iter().map(String::as_str))
}

fn tune_x(cfg: &ExperimentConfig, inputs: &ExperimentInputs, fold: &TrainFold<'_>) -> Result<f64> {
    let taus = cfg
        .x_grid
        .iter()
        .map(|&x| Ok(correlate(&nsigma_scores(inputs, x, fold.qids)?, &fold.targets, fold.qids)?.1))
        .collect::<Result<Vec<_>>>()?;
    Ok(cfg.x_grid[argmax(&taus)])
}

/// Run every configured method on one split.
pub fn run_split(
    cfg: &ExperimentConfig,
    inputs: &ExperimentInputs,
    index: usize,
    split: &Split,
    initial_qpp: Option<&BTreeMap<String, f64>>,
) -> Result<SplitResult> {
    let fold = TrainFold {
        labels: split.fold1.iter().map(|q| (q.clone(), inputs.labels[q])).collect(),
        targets: split.fold1.iter().map(|q| (q.clone(), inputs.targets[q])).collect(),
        qids: &split.fold1,
    };
    let test = &split.fold2;
    let mut x_cache: Option<f64> = None;
    let mut model_cache: Option<(TrainOutcome, BTreeMap<String, f64>)> = None;
    let mut methods = BTreeMap::new();

    for name in &cfg.methods {
        let (preds, tuned) = match name.as_str() {
            "sigma_k" | "nqc" | "wig" | "smv" => {
                let p = ScorePredictor::from_name(name, cfg.k, 50.0)?;
                let preds = stage(name, index, score_queries(p, &inputs.run, &inputs.side, test.iter().map(String::as_str)))?;
                (preds, TunedParams::default())
            }
            "nsigma" => {
                let x = match x_cache {
                    Some(x) => x,
                    None => *x_cache.insert(stage("tune-x", index, tune_x(cfg, inputs, &fold))?),
                };
                let preds = stage(name, index, nsigma_scores(inputs, x, test))?;
                (preds, TunedParams { x: Some(x), ..Default::default() })
            }
            "model" | "model+nsigma" => {
                if model_cache.is_none() {
                    model_cache = Some(stage("train", index, train_model(cfg, inputs, index, &fold, test, initial_qpp))?);
                }
                let (outcome, model_preds) = model_cache.as_ref().expect("trained above");
                let base = TunedParams {
                    lr: Some(outcome.lr),
                    aggregation: Some(outcome.aggregation),
                    ..Default::default()
                };
                if name == "model" {
                    (model_preds.clone(), base)
                } else {
                    let x = match x_cache {
                        Some(x) => x,
                        None => *x_cache.insert(stage("tune-x", index, tune_x(cfg, inputs, &fold))?),
                    };
                    let lambda = stage("tune-lambda", index, tune_lambda(cfg, inputs, &fold, &split_train_config(cfg, index), outcome, x, initial_qpp))?;
                    let preds = stage(
                        "interpolate",
                        index,
                        nsigma_scores(inputs, x, test)
                            .and_then(|ns| interpolate(model_preds, &ns, InterpolationConfig::new(lambda)?)),
                    )?;
                    (preds, TunedParams { x: Some(x), lambda: Some(lambda), ..base })
                }
            }
            other => return Err(QppError::Input(format!("unknown method '{other}'"))),
        };
        let (rho, tau) = stage("correlate", index, correlate(&preds, &inputs.targets, test))?;
        methods.insert(
            name.clone(),
            MethodSplit {
                pearson: rho,
                kendall: tau,
                tuned,
            },
        );
    }
    Ok(SplitResult {
        index,
        fold1: split.fold1.clone(),
        fold2: split.fold2.clone(),
        methods,
    })
}

fn split_train_config(cfg: &ExperimentConfig, index: usize) -> TrainConfig {
    TrainConfig {
        seed: rng::derive_seed(cfg.seed, &[SPLIT_STREAM, index as u64]),
        ..cfg.train_config()
    }
}

fn train_model(
    cfg: &ExperimentConfig,
    inputs: &ExperimentInputs,
    index: usize,
    fold: &TrainFold<'_>,
    test: &[String],
    initial_qpp: Option<&BTreeMap<String, f64>>,
) -> Result<(TrainOutcome, BTreeMap<String, f64>)> {
    let source = inputs
        .source
        .as_ref()
        .ok_or_else(|| QppError::Input("model methods need a pair source".into()))?;
    let tc = split_train_config(cfg, index);
    let data = TrainData {
        run: &inputs.run,
        labels: &fold.labels,
        targets: &fold.targets,
        source,
        initial_qpp,
    };
    let outcome = train(inputs.model_config(cfg)?, data, &tc)?;
    let test_run = inputs.run.restrict(test.iter().map(String::as_str));
    let preds = predict_queries(&outcome.model, &test_run, source, tc.inference_spec(), initial_qpp, outcome.aggregation)?;
    Ok((outcome, preds))
}

/// λ is chosen on the model's inner-validation predictions when there are
/// any, otherwise on its in-sample training-fold predictions.
fn tune_lambda(
    cfg: &ExperimentConfig,
    inputs: &ExperimentInputs,
    fold: &TrainFold<'_>,
    tc: &TrainConfig,
    outcome: &TrainOutcome,
    x: f64,
    initial_qpp: Option<&BTreeMap<String, f64>>,
) -> Result<f64> {
    let primary = if outcome.validation.is_empty() {
        let source = inputs.source.as_ref().expect("model was trained");
        let fold_run = inputs.run.restrict(fold.qids.iter().map(String::as_str));
        predict_queries(&outcome.model, &fold_run, source, tc.inference_spec(), initial_qpp, outcome.aggregation)?
    } else {
        outcome.validation.clone()
    };
    let qids: Vec<String> = primary.keys().cloned().collect();
    let baseline = nsigma_scores(inputs, x, &qids)?;
    let taus = cfg
        .lambda_grid
        .iter()
        .map(|&l| {
            let mixed = interpolate(&primary, &baseline, InterpolationConfig::new(l)?)?;
            Ok(correlate(&mixed, &fold.targets, &qids)?.1)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(cfg.lambda_grid[argmax(&taus)])
}

/// n(σ_X%) over every query with the configured initial X; label-free.
pub fn initial_qpp(cfg: &ExperimentConfig, inputs: &ExperimentInputs) -> Result<BTreeMap<String, f64>> {
    score_queries(
        ScorePredictor::NSigma(cfg.initial_x),
        &inputs.run,
        &inputs.side,
        inputs.run.qids(),
    )
}

pub fn split_plan(cfg: &ExperimentConfig, inputs: &ExperimentInputs) -> Result<SplitPlan> {
    let qids = inputs.qids();
    if qids.len() < 4 {
        return Err(QppError::Input(format!(
            "{} usable queries; the protocol needs at least 4",
            qids.len()
        )));
    }
    make_splits(&qids, cfg.n_splits, cfg.seed)
}

/// Every split's result, in split order; the first failure (by split index)
/// is returned together with whatever completed.
pub fn run_splits(
    cfg: &ExperimentConfig,
    inputs: &ExperimentInputs,
    plan: &SplitPlan,
) -> (Vec<SplitResult>, Option<QppError>) {
    let qpp = if cfg.strategy.needs_initial_qpp() && cfg.needs_model() {
        match initial_qpp(cfg, inputs) {
            Ok(q) => Some(q),
            Err(e) => {
                let e = QppError::Stage {
                    stage: "initial-qpp".into(),
                    split: 0,
                    source: Box::new(e),
                };
                return (Vec::new(), Some(e));
            }
        }
    } else {
        None
    };
    let results: Vec<Result<SplitResult>> = plan
        .splits
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let r = run_split(cfg, inputs, i, s, qpp.as_ref());
            if r.is_ok() {
                info!("split {i} done");
            }
            r
        })
        .collect();
    let mut done = Vec::new();
    let mut first_err = None;
    for r in results {
        match r {
            Ok(s) => done.push(s),
            Err(e) if first_err.is_none() => first_err = Some(e),
            Err(_) => {}
        }
    }
    (done, first_err)
}

pub fn run_experiment(cfg: &ExperimentConfig, inputs: &ExperimentInputs) -> Result<ExperimentReport> {
    cfg.validate()?;
    let plan = split_plan(cfg, inputs)?;
    let (splits, err) = run_splits(cfg, inputs, &plan);
    if let Some(e) = err {
        return Err(e);
    }
    build_report(cfg, inputs, splits)
}

/// Run the protocol and write `report.json`, `report.txt` and `splits.txt`
/// under `cfg.out`. When a stage fails, completed splits are written to
/// `partial.json` before the error is returned.
pub fn run_and_write(cfg: &ExperimentConfig, inputs: &ExperimentInputs) -> Result<ExperimentReport> {
    cfg.validate()?;
    let out = &cfg.out;
    fs::create_dir_all(out).map_err(|e| QppError::io(out, e))?;
    let plan = split_plan(cfg, inputs)?;
    write(&out.join("splits.txt"), &plan.export())?;
    let (splits, err) = run_splits(cfg, inputs, &plan);
    if let Some(e) = err {
        warn!("{e}; writing {} completed splits", splits.len());
        let json = serde_json::to_string_pretty(&splits).expect("splits serialize");
        write(&out.join("partial.json"), &json)?;
        return Err(e);
    }
    let report = build_report(cfg, inputs, splits)?;
    write(&out.join("report.json"), &report.to_json())?;
    write(&out.join("report.txt"), &report.to_table())?;
    Ok(report)
}

pub(crate) fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| QppError::io(path, e))
}

#[cfg(test)]
mod tests {
    use rand::seq::SliceRandom;

    use super::*;
    use crate::synthetic::judged_collection;

    fn fixture_config(methods: &[&str], n_splits: usize) -> ExperimentConfig {
        ExperimentConfig {
            methods: methods.iter().map(|m| m.to_string()).collect(),
            n_splits,
            epochs: 2,
            lr_grid: vec![1e-3, 1e-4],
            n_heads: 2,
            k: 10,
            seed: 7,
            ..Default::default()
        }
    }

    fn inputs(cfg: &ExperimentConfig) -> ExperimentInputs {
        let c = judged_collection(40, 30, 8, 1).unwrap();
        ExperimentInputs::from_synthetic(&c, cfg, false).unwrap()
    }

    #[test]
    fn baseline_protocol_structure() {
        let cfg = fixture_config(&["nsigma", "nqc"], 30);
        let inp = inputs(&cfg);
        let report = run_experiment(&cfg, &inp).unwrap();
        assert_eq!(report.splits.len(), 30);
        assert!(report.splits.iter().all(|s| s.methods.len() == 2));
        let taus: Vec<f64> = report.splits.iter().map(|s| s.methods["nsigma"].kendall).collect();
        assert_eq!(report.method("nsigma").unwrap().mean_kendall, taus.iter().sum::<f64>() / 30.0);
        assert_eq!(report.regenerate().unwrap(), report);
        assert_eq!(report.significance.len(), 2);
        let back = ExperimentReport::from_json(&report.to_json()).unwrap();
        assert_eq!(back.to_json(), report.to_json());
        assert!(report.to_table().contains("nsigma"));
    }

    #[test]
    fn full_protocol_is_deterministic_and_leak_free() {
        let cfg = fixture_config(&METHODS_ALL, 3);
        let inp = inputs(&cfg);
        let t0 = std::time::Instant::now();
        let a = run_experiment(&cfg, &inp).unwrap();
        let b = run_experiment(&cfg, &inp).unwrap();
        eprintln!("two runs: {:?}", t0.elapsed());
        assert_eq!(a.to_json(), b.to_json());
        for s in &a.splits {
            let t = s.methods["model+nsigma"].tuned;
            assert!(t.lambda.is_some() && t.x.is_some() && t.lr.is_some() && t.aggregation.is_some());
        }

        let plan = split_plan(&cfg, &inp).unwrap();
        let qpp = initial_qpp(&cfg, &inp).unwrap();
        for (i, split) in plan.splits.iter().enumerate() {
            let mut leaked = inp.clone();
            let mut order = split.fold2.clone();
            order.shuffle(&mut crate::rng::stream(99, &[i as u64]));
            for (q, p) in split.fold2.iter().zip(&order) {
                leaked.labels.insert(q.clone(), inp.labels[p]);
                leaked.targets.insert(q.clone(), inp.targets[p]);
            }
            let r = run_split(&cfg, &leaked, i, split, Some(&qpp)).unwrap();
            for (m, res) in &r.methods {
                assert_eq!(res.tuned, a.splits[i].methods[m].tuned, "method {m}, split {i}");
            }
        }
    }

    const METHODS_ALL: [&str; 7] = crate::experiment::METHODS;

    #[test]
    fn stage_failures_name_stage_and_split() {
        let cfg = fixture_config(&["model"], 2);
        let mut inp = inputs(&cfg);
        inp.source = None;
        let err = run_experiment(&cfg, &inp).unwrap_err();
        assert!(matches!(&err, QppError::Stage { stage, split: 0, .. } if stage == "train"), "{err}");

        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            out: dir.path().to_path_buf(),
            methods: vec!["nqc".into(), "model".into()],
            ..cfg
        };
        assert!(run_and_write(&cfg, &inp).is_err());
        assert!(dir.path().join("partial.json").exists());
        assert!(dir.path().join("splits.txt").exists());
    }
}
