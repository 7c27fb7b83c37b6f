//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Every numeric check uses an oracle coded here, independently of the crate.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qpp_core::autodiff::grad_check;
use qpp_core::baselines::{n_sigma_x, nqc, sigma_k, smv, wig, ScoreListContext, SHIFT_EPSILON};
use qpp_core::data::{parse_qrels, PairEmbedding, PairEmbeddingStore};
use qpp_core::experiment::{
    initial_qpp, run_and_write, run_split, split_plan, sweep, ExperimentConfig, ExperimentInputs,
    SweepAxis, METHODS,
};
use qpp_core::grouping::{pad_group, Group, GroupKind, GroupingStrategy, PairKey};
use qpp_core::metrics::{average_precision, kendall_tau_b, paired_t_test, pearson};
use qpp_core::model::{
    aggregate, mse_loss, predict_queries, train, Aggregation, EncoderConfig, GroupwiseModel,
    ModelConfig, PairSource, PairTokens, PredictorConfig, TrainConfig, TrainData,
};
use qpp_core::synthetic::{dispersion_fixture, judged_collection, overfit_fixture};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- gradients

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let enc = EncoderConfig {
        vocab_size: 64,
        token_dim: 8,
        max_pair_tokens: 256,
    };
    let cfg = ModelConfig {
        predictor: PredictorConfig::new(16, 4, 6),
        encoder: Some(enc),
    };
    let mut r = rng(1);
    let model = GroupwiseModel::init(cfg, &mut qpp_core::rng::stream(1, &[1])).map_err(|e| e.to_string())?;
    let mut tokens = std::collections::HashMap::new();
    let mut keys = Vec::new();
    for i in 0..5 {
        let key = PairKey::new(format!("q{}", i % 3), format!("d{i}"));
        let q: Vec<String> = (0..r.random_range(1..5)).map(|_| format!("t{}", r.random_range(0..40))).collect();
        let d: Vec<String> = (0..r.random_range(3..12)).map(|_| format!("t{}", r.random_range(0..40))).collect();
        tokens.insert(key.clone(), PairTokens::new(&q, &d, &enc).map_err(|e| e.to_string())?);
        keys.push(key);
    }
    let group = pad_group(
        Group::new(keys, vec![3, 0, 4, 1, 2], GroupKind::Doc).map_err(|e| e.to_string())?,
        6,
    )
    .map_err(|e| e.to_string())?;
    let source = PairSource::Tokens(Arc::new(tokens));
    let labels: Vec<f64> = (0..6).map(|_| r.random()).collect();
    let report = grad_check(
        |tape, vars| {
            let out = model.forward_group(tape, vars, &group, &source)?;
            mse_loss(tape, out, &labels, &group.mask)
        },
        &model.params,
        1e-5,
    )
    .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(
        report.max_rel_error <= 1e-4 && elapsed < Duration::from_secs(60) && report.coordinates == model.params.num_scalars(),
        format!(
            "max relative error {:.2e} over {} coordinates (worst {:?}), {:.1}s",
            report.max_rel_error,
            report.coordinates,
            report.worst,
            elapsed.as_secs_f64()
        ),
    )
}

// ------------------------------------------------------------------ metrics

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn brute_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mut s, mut n1, mut n2) = (0.0, 0.0, 0.0);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let (a, b) = (sign(x[i] - x[j]), sign(y[i] - y[j]));
            s += a * b;
            n1 += a.abs();
            n2 += b.abs();
        }
    }
    (n1 > 0.0 && n2 > 0.0).then(|| s / (n1 * n2).sqrt())
}

fn textbook_pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    let den = ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt();
    (den > 1e-9).then(|| (n * sxy - sx * sy) / den)
}

fn metric_oracles() -> Outcome {
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for i in 0..100 {
        let n = r.random_range(2..=12);
        let tied = i % 2 == 0;
        let draw = |r: &mut ChaCha8Rng| {
            if tied {
                f64::from(r.random_range(0..4u8))
            } else {
                r.random_range(-5.0..5.0)
            }
        };
        let x: Vec<f64> = (0..n).map(|_| draw(&mut r)).collect();
        let y: Vec<f64> = (0..n).map(|_| draw(&mut r)).collect();
        match (brute_tau_b(&x, &y), kendall_tau_b(&x, &y)) {
            (Some(a), Ok(b)) => worst = worst.max((a - b).abs()),
            (None, Err(_)) => {}
            (a, b) => return Err(format!("tau disagreement on {x:?} {y:?}: {a:?} vs {b:?}")),
        }
        match (textbook_pearson(&x, &y), pearson(&x, &y)) {
            (Some(a), Ok(b)) => worst = worst.max((a - b).abs()),
            (None, Err(_)) => {}
            (a, b) => return Err(format!("pearson disagreement on {x:?} {y:?}: {a:?} vs {b:?}")),
        }
        compared += 1;
    }
    let qrels = parse_qrels("q 0 a 1\nq 0 c 1\nr 0 a 1\n").map_err(|e| e.to_string())?;
    let ap1 = average_precision("q", &["a", "b", "c"], &qrels, 1000);
    let ap2 = average_precision("r", &["a"], &qrels, 1000);
    let t = paired_t_test(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).map_err(|e| e.to_string())?;
    let ok = worst <= 1e-12
        && ap1 == Some((1.0 + 2.0 / 3.0) / 2.0)
        && ap2 == Some(1.0)
        && (t.t - 3.4641).abs() < 5e-5
        && (t.p - 0.0742).abs() <= 1e-3;
    check(
        ok,
        format!(
            "{compared} vector pairs, max |diff| {worst:.1e}; AP {:.6}, {:.1}; t {:.4}, p {:.4}",
            ap1.unwrap_or(f64::NAN),
            ap2.unwrap_or(f64::NAN),
            t.t,
            t.p
        ),
    )
}

// --------------------------------------------------------------- predictors

fn pairwise_std(v: &[f64]) -> f64 {
    let k = v.len() as f64;
    let mut s = 0.0;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            s += (v[i] - v[j]).powi(2);
        }
    }
    (s / (k * k)).sqrt()
}

struct Oracle;

impl Oracle {
    fn sigma(s: &[f64], k: usize) -> f64 {
        pairwise_std(&s[..k])
    }
    fn nqc(s: &[f64], k: usize, sc: f64) -> f64 {
        pairwise_std(&s[..k]) / sc.abs()
    }
    fn wig(s: &[f64], k: usize, sc: f64, q: usize) -> f64 {
        s[..k].iter().map(|x| (x - sc) / k as f64).sum::<f64>() / (q as f64).sqrt()
    }
    fn smv(s: &[f64], k: usize, sc: f64) -> f64 {
        let top = &s[..k];
        let lowest = top.iter().copied().fold(f64::INFINITY, f64::min);
        let v: Vec<f64> = if lowest <= 0.0 {
            top.iter().map(|x| x - lowest + SHIFT_EPSILON).collect()
        } else {
            top.to_vec()
        };
        let mu = v.iter().sum::<f64>() / k as f64;
        v.iter().map(|x| x * (x.ln() - mu.ln()).abs()).sum::<f64>() / k as f64 / sc.abs()
    }
    fn nsigma(s: &[f64], x: f64, sc: f64) -> f64 {
        let lowest = s.iter().copied().fold(f64::INFINITY, f64::min);
        let shift = if s[0] <= 0.0 { SHIFT_EPSILON - lowest } else { 0.0 };
        let cut = x / 100.0 * (s[0] + shift);
        let set: Vec<f64> = s.iter().copied().filter(|v| v + shift >= cut).collect();
        if set.len() < 2 {
            0.0
        } else {
            pairwise_std(&set) / sc.abs()
        }
    }
}

fn predictor_oracles() -> Outcome {
    let mut r = rng(3);
    let mut worst: f64 = 0.0;
    let mut worst_scale: f64 = 0.0;
    for i in 0..1000 {
        let m = r.random_range(1..=60);
        let positive = i % 3 != 0;
        let mut s: Vec<f64> = (0..m)
            .map(|_| if positive { r.random_range(0.5..30.0) } else { r.random_range(-20.0..20.0) })
            .collect();
        s.sort_by(|a, b| b.total_cmp(a));
        let k = r.random_range(1..=m);
        let sc = if r.random() { r.random_range(0.5..10.0) } else { -r.random_range(0.5..10.0) };
        let q = r.random_range(1..8);
        let x = [10.0, 25.0, 50.0, 75.0, 100.0][r.random_range(0..5)];
        let ctx = ScoreListContext::new(s.clone(), sc, q).map_err(|e| e.to_string())?;
        let got = [
            sigma_k(&ctx, k),
            nqc(&ctx, k),
            wig(&ctx, k),
            smv(&ctx, k),
            n_sigma_x(&ctx, x),
        ];
        let want = [
            Oracle::sigma(&s, k),
            Oracle::nqc(&s, k, sc),
            Oracle::wig(&s, k, sc, q),
            Oracle::smv(&s, k, sc),
            Oracle::nsigma(&s, x, sc),
        ];
        for (g, w) in got.into_iter().zip(want) {
            let g = g.map_err(|e| e.to_string())?;
            worst = worst.max((g - w).abs());
        }
        if positive {
            let c = r.random_range(0.1..20.0);
            let scaled = ScoreListContext::new(s.iter().map(|v| v * c).collect(), sc * c, q).map_err(|e| e.to_string())?;
            let pairs = [
                (nqc(&ctx, k), nqc(&scaled, k)),
                (smv(&ctx, k), smv(&scaled, k)),
                (n_sigma_x(&ctx, x), n_sigma_x(&scaled, x)),
            ];
            for (a, b) in pairs {
                let (a, b) = (a.map_err(|e| e.to_string())?, b.map_err(|e| e.to_string())?);
                worst_scale = worst_scale.max((a - b).abs());
            }
        }
    }
    check(
        worst <= 1e-9 && worst_scale <= 1e-9,
        format!("1000 lists: max |diff| {worst:.1e}; scaling invariance max |diff| {worst_scale:.1e}"),
    )
}

// -------------------------------------------------------------- equivariance

fn permutations(v: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == v.len() {
        out.push(v.clone());
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permutations(v, k + 1, out);
        v.swap(k, i);
    }
}

fn permutation_equivariance() -> Outcome {
    let d = 16;
    let cfg = ModelConfig {
        predictor: PredictorConfig::new(d, 4, 4),
        encoder: None,
    };
    let model = GroupwiseModel::init(cfg, &mut qpp_core::rng::stream(4, &[0])).map_err(|e| e.to_string())?;
    let mut r = rng(4);
    let mut store = PairEmbeddingStore::new(d, "random").map_err(|e| e.to_string())?;
    let keys: Vec<PairKey> = (0..4).map(|i| PairKey::new(format!("q{i}"), "d")).collect();
    for k in &keys {
        store
            .push(PairEmbedding {
                qid: k.qid.clone(),
                docid: k.docid.clone(),
                rank: 1,
                vec: (0..d).map(|_| r.random_range(-2.0f32..2.0)).collect(),
            })
            .map_err(|e| e.to_string())?;
    }
    let source = PairSource::Frozen(Arc::new(store));
    let base_group = Group::new(keys.clone(), vec![0; 4], GroupKind::Query).map_err(|e| e.to_string())?;
    let base = model.predict_group(&base_group, &source).map_err(|e| e.to_string())?;
    let mut perms = Vec::new();
    permutations(&mut vec![0, 1, 2, 3], 0, &mut perms);
    let mut worst: f64 = 0.0;
    for p in &perms {
        let g = Group::new(p.iter().map(|&i| keys[i].clone()).collect(), vec![0; 4], GroupKind::Query)
            .map_err(|e| e.to_string())?;
        let out = model.predict_group(&g, &source).map_err(|e| e.to_string())?;
        for (slot, &i) in p.iter().enumerate() {
            worst = worst.max((out[slot].1 - base[i].1).abs());
        }
    }
    check(
        perms.len() == 24 && worst <= 1e-9,
        format!("{} permutations, max |diff| {worst:.1e}", perms.len()),
    )
}

// ----------------------------------------------------------------- overfit

fn overfit_sanity() -> Outcome {
    let start = Instant::now();
    let c = overfit_fixture(0).map_err(|e| e.to_string())?;
    let cfg = ExperimentConfig {
        initial_x: 50.0,
        ..Default::default()
    };
    let inputs = ExperimentInputs::from_synthetic(&c, &cfg, true).map_err(|e| e.to_string())?;
    let qpp = initial_qpp(&cfg, &inputs).map_err(|e| e.to_string())?;
    let source = inputs.source.clone().expect("frozen embeddings");
    let tc = TrainConfig {
        epochs: 2,
        group_size: 8,
        lr_grid: vec![1e-3],
        aggregations: vec![Aggregation::Mean],
        train_depth: 16,
        infer_depth: 16,
        strategy: GroupingStrategy::Rqd,
        ..Default::default()
    };
    let mc = ModelConfig {
        predictor: PredictorConfig::new(16, 4, 8),
        encoder: None,
    };
    let data = TrainData {
        run: &c.run,
        labels: &c.planted,
        targets: &c.planted,
        source: &source,
        initial_qpp: Some(&qpp),
    };
    let out = train(mc, data, &tc).map_err(|e| e.to_string())?;
    let preds = predict_queries(&out.model, &c.run, &source, tc.inference_spec(), Some(&qpp), Aggregation::Mean)
        .map_err(|e| e.to_string())?;
    let p: Vec<f64> = c.planted.keys().map(|q| preds[q]).collect();
    let l: Vec<f64> = c.planted.values().copied().collect();
    let tau = brute_tau_b(&p, &l).unwrap_or(0.0);
    let steps = out.log.records.len();
    let elapsed = start.elapsed();
    check(
        steps <= 500 && tau >= 0.9 && elapsed < Duration::from_secs(300),
        format!("train τ {tau:.4} after {steps} steps (R+Q+D, n=8), {:.1}s", elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------- groupwise benefit

fn groupwise_benefit() -> Outcome {
    let mut at1 = Vec::new();
    let mut at8 = Vec::new();
    for seed in 0..5u64 {
        let c = dispersion_fixture(120, 16, 16, seed).map_err(|e| e.to_string())?;
        let cfg = ExperimentConfig {
            methods: vec!["model".into()],
            strategy: GroupingStrategy::DocOrder,
            train_depth: 16,
            infer_depth: 16,
            epochs: 20,
            lr_grid: vec![1e-3],
            aggregations: vec![Aggregation::Mean],
            n_heads: 4,
            n_splits: 1,
            seed,
            ..Default::default()
        };
        let inputs = ExperimentInputs::from_synthetic(&c, &cfg, true).map_err(|e| e.to_string())?;
        let report = sweep(&cfg, &inputs, SweepAxis::GroupSize, &[1, 8]).map_err(|e| e.to_string())?;
        at1.push(report.rows[0].methods[0].mean_kendall);
        at8.push(report.rows[1].methods[0].mean_kendall);
    }
    let m1 = at1.iter().sum::<f64>() / 5.0;
    let m8 = at8.iter().sum::<f64>() / 5.0;
    check(
        m8 - m1 >= 0.05,
        format!("mean test τ over 5 seeds: n=8 {m8:.4}, n=1 {m1:.4}, margin {:.4}", m8 - m1),
    )
}

// ----------------------------------------------------- determinism, leakage

fn protocol_determinism_and_leakage() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let c = judged_collection(40, 30, 8, 1).map_err(|e| e.to_string())?;
    let base = ExperimentConfig {
        methods: METHODS.iter().map(|m| m.to_string()).collect(),
        n_splits: 30,
        epochs: 2,
        n_heads: 2,
        k: 10,
        train_depth: 30,
        seed: 11,
        ..Default::default()
    };
    let inputs = ExperimentInputs::from_synthetic(&c, &base, false).map_err(|e| e.to_string())?;
    let mut bytes = Vec::new();
    let mut reports = Vec::new();
    for name in ["a", "b"] {
        let cfg = ExperimentConfig {
            out: dir.path().join(name),
            ..base.clone()
        };
        reports.push(run_and_write(&cfg, &inputs).map_err(|e| e.to_string())?);
        let read = |f: &str| std::fs::read(cfg.out.join(f)).map_err(|e| e.to_string());
        bytes.push((read("report.json")?, read("report.txt")?, read("splits.txt")?));
    }
    let identical = bytes[0] == bytes[1];
    let report = &reports[0];

    let plan = split_plan(&base, &inputs).map_err(|e| e.to_string())?;
    let qpp = initial_qpp(&base, &inputs).map_err(|e| e.to_string())?;
    let mut changed = Vec::new();
    let mut compared = 0;
    for (i, split) in plan.splits.iter().enumerate() {
        let mut permuted = inputs.clone();
        let mut order = split.fold2.clone();
        order.shuffle(&mut rng(1000 + i as u64));
        let mut moved = BTreeMap::new();
        for (q, p) in split.fold2.iter().zip(&order) {
            moved.insert(q.clone(), (inputs.labels[p], inputs.targets[p]));
        }
        for (q, (l, t)) in moved {
            permuted.labels.insert(q.clone(), l);
            permuted.targets.insert(q, t);
        }
        let r = run_split(&base, &permuted, i, split, Some(&qpp)).map_err(|e| e.to_string())?;
        for (m, res) in &r.methods {
            compared += 1;
            if res.tuned != report.splits[i].methods[m].tuned {
                changed.push(format!("split {i} {m}"));
            }
        }
    }
    check(
        identical && changed.is_empty() && report.splits.len() == 30,
        format!(
            "30 splits × {} methods: reports {}; {compared} tuned settings re-derived with permuted test labels, {} changed",
            base.methods.len(),
            if identical { "byte-identical" } else { "DIFFER" },
            changed.len()
        ),
    )
}

// ------------------------------------------------------------- aggregation

fn aggregation_contract() -> Outcome {
    let p = [0.2, 0.8, 0.5];
    let got = [
        aggregate(&p, Aggregation::Max),
        aggregate(&p, Aggregation::Mean),
        aggregate(&p, Aggregation::FirstRankedDoc),
    ]
    .map(|r| r.unwrap_or(f64::NAN));
    check(
        got == [0.8, 0.5, 0.2],
        format!("max {} mean {} first {}", got[0], got[1], got[2]),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("gradient correctness", gradient_correctness),
        ("metric oracles", metric_oracles),
        ("predictor oracles and symmetries", predictor_oracles),
        ("permutation equivariance", permutation_equivariance),
        ("overfit sanity", overfit_sanity),
        ("groupwise benefit", groupwise_benefit),
        ("protocol determinism and leakage", protocol_determinism_and_leakage),
        ("aggregation contract", aggregation_contract),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {name}: {detail} [{:.1}s]", start.elapsed().as_secs_f64());
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
