//! The `qpp` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamSet, Tape};
use crate::baselines::{parse_collection_scores, score_queries, QuerySideInfo, ScorePredictor};
use crate::data::{
    parse_qrels, parse_run, parse_texts, read_to_string, serialize_qrels, serialize_run, tokenize,
    PairEmbedding, PairEmbeddingStore, RetrievalRun,
};
use crate::error::{QppError, Result};
use crate::experiment::{
    correlate, parse_label_file, parse_predictions, pair_tokens, run_and_write, serialize_labels,
    serialize_predictions, sweep, ExperimentConfig, ExperimentInputs, SweepAxis,
};
use crate::grouping::GroupingStrategy;
use crate::metrics::{paired_t_test, LabelKind, SplitPlan};
use crate::model::{
    predict_queries, train, Aggregation, EncoderConfig, GroupwiseModel, InferenceSpec, PairSource,
    ToyEncoder, TrainData,
};
use crate::rng;
use crate::synthetic::{dispersion_fixture, judged_collection, planted_signal, SyntheticCollection};

#[derive(Debug, Parser)]
#[command(name = "qpp", version, about = "Groupwise query performance prediction workbench")]
pub struct Cli {
    /// Log progress (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate runs, judgments and texts and write normalized copies.
    Ingest(IngestArgs),
    /// Produce pair embeddings with the toy encoder, or import an existing file.
    Embed(EmbedArgs),
    /// Score queries with a score-distribution predictor.
    Baseline(BaselineArgs),
    /// Train the groupwise model on every labelled query.
    Train(ExperimentArgs),
    /// Predict query performance with a trained model.
    Predict(PredictArgs),
    /// Correlate prediction files with labels; t-tests across splits.
    Evaluate(EvaluateArgs),
    /// Run the repeated two-fold protocol.
    Experiment(ExperimentArgs),
    /// Repeat the protocol over group sizes or inference depths.
    Sweep(SweepArgs),
    /// Write a seeded synthetic collection.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub qrels: Option<PathBuf>,
    #[arg(long)]
    pub queries: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub run: PathBuf,
    /// Existing embedding file to validate against the run and re-save.
    #[arg(long = "import")]
    pub import: Option<PathBuf>,
    #[arg(long)]
    pub queries: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Output path; `.jsonl` selects the text format.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub d_model: usize,
    #[arg(long, default_value_t = 100)]
    pub depth: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub method: String,
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    /// X of n(σ_X%).
    #[arg(long, default_value_t = 50.0)]
    pub x: f64,
    #[arg(long)]
    pub collection_scores: Option<PathBuf>,
    /// Query texts; their token counts feed WIG.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub queries: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub collection_scores: Option<PathBuf>,
    #[arg(long)]
    pub aggregation: Option<Aggregation>,
    #[arg(long)]
    pub infer_depth: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Prediction files (`qid score [method]`); repeat to compare methods.
    #[arg(long = "pred", required = true)]
    pub pred: Vec<PathBuf>,
    /// Label file (`qid value kind`).
    #[arg(long)]
    pub labels: PathBuf,
    /// Split file (`split fold qid`); adds per-split fold-2 correlations and t-tests.
    #[arg(long)]
    pub splits: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub axis: SweepAxis,
    /// Grid values; defaults to the axis' standard grid.
    #[arg(long, value_delimiter = ',')]
    pub values: Vec<usize>,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// judged, planted or dispersion.
    #[arg(long, default_value = "judged")]
    pub kind: String,
    #[arg(long, default_value_t = 40)]
    pub queries: usize,
    #[arg(long, default_value_t = 30)]
    pub depth: usize,
    #[arg(long, default_value_t = 8)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Flags mirroring [`ExperimentConfig`]; any flag given overrides the file.
#[derive(Debug, Args, Default)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    pub dump_config: bool,
    #[arg(long)]
    pub run: Option<PathBuf>,
    #[arg(long)]
    pub qrels: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub queries: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub collection_scores: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[arg(long)]
    pub strategy: Option<GroupingStrategy>,
    #[arg(long)]
    pub group_size: Option<usize>,
    #[arg(long)]
    pub train_depth: Option<usize>,
    #[arg(long)]
    pub infer_depth: Option<usize>,
    #[arg(long)]
    pub label_kind: Option<LabelKind>,
    #[arg(long)]
    pub target_kind: Option<LabelKind>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub x_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub initial_x: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub lr_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub warmup_fraction: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub aggregations: Option<Vec<Aggregation>>,
    #[arg(long)]
    pub d_model: Option<usize>,
    #[arg(long)]
    pub n_heads: Option<usize>,
    #[arg(long)]
    pub n_layers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_splits: Option<usize>,
}

macro_rules! overlay {
    ($cfg:ident, $args:ident; $($path:ident),*; $($plain:ident),*) => {
        $(if let Some(v) = &$args.$path { $cfg.$path = Some(v.clone()); })*
        $(if let Some(v) = &$args.$plain { $cfg.$plain = v.clone(); })*
    };
}

impl ExperimentArgs {
    /// The config file (or defaults) with every given flag applied.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        overlay!(cfg, self;
            run, qrels, labels, embeddings, queries, corpus, collection_scores;
            out, methods, strategy, group_size, train_depth, infer_depth, label_kind, target_kind,
            k, lambda_grid, x_grid, initial_x, epochs, lr_grid, warmup_fraction, aggregations,
            d_model, n_heads, n_layers, seed, n_splits);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Metadata written next to a trained checkpoint so `predict` can rebuild
/// the inference setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModelInfo {
    pub strategy: GroupingStrategy,
    pub group_size: usize,
    pub infer_depth: usize,
    pub aggregation: Aggregation,
    pub lr: f64,
    pub initial_x: f64,
    pub seed: u64,
    pub window: usize,
    pub stride: usize,
}

fn info_path(model: &Path) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(".train.json");
    PathBuf::from(s)
}

/// Entry point shared by the binary and the tests.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .try_init();
    match run(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn emit(text: &str, out: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| QppError::io(p, e)),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| QppError::io("<stdout>", e)),
    }
}

fn ensure_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| QppError::io(p, e))
}

fn write_file(p: &Path, text: &str) -> Result<()> {
    fs::write(p, text).map_err(|e| QppError::io(p, e))
}

pub fn run(command: Command, stdout: &mut dyn Write) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(&a, stdout),
        Command::Embed(a) => embed(&a, stdout),
        Command::Baseline(a) => baseline(&a, stdout),
        Command::Train(a) => train_cmd(&a, stdout),
        Command::Predict(a) => predict(&a, stdout),
        Command::Evaluate(a) => evaluate(&a, stdout),
        Command::Experiment(a) => experiment(&a, stdout),
        Command::Sweep(a) => sweep_cmd(&a, stdout),
        Command::Synth(a) => synth(&a, stdout),
    }
}

fn load_run(p: &Path) -> Result<RetrievalRun> {
    parse_run(&read_to_string(p)?)
}

fn ingest(a: &IngestArgs, stdout: &mut dyn Write) -> Result<()> {
    let run = load_run(&a.run)?;
    ensure_dir(&a.out)?;
    write_file(&a.out.join("run.txt"), &serialize_run(&run, "qpp"))?;
    let mut summary = format!("queries {}\npairs {}\n", run.len(), run.iter().map(|(_, l)| l.len()).sum::<usize>());
    if let Some(p) = &a.qrels {
        let qrels = parse_qrels(&read_to_string(p)?)?;
        let unjudged = run.qids().filter(|q| qrels.num_relevant(q) == 0).count();
        write_file(&a.out.join("qrels.txt"), &serialize_qrels(&qrels))?;
        summary += &format!("judgments {}\nqueries-without-relevant {unjudged}\n", qrels.len());
    }
    for (name, path) in [("queries", &a.queries), ("corpus", &a.corpus)] {
        if let Some(p) = path {
            let texts = parse_texts(&read_to_string(p)?)?;
            let body: String = texts.iter().map(|(id, t)| format!("{id}\t{}\n", tokenize(t).join(" "))).collect();
            write_file(&a.out.join(format!("{name}.tsv")), &body)?;
            summary += &format!("{name} {}\n", texts.len());
        }
    }
    write_file(&a.out.join("summary.txt"), &summary)?;
    emit(&summary, None, stdout)
}

fn embed(a: &EmbedArgs, stdout: &mut dyn Write) -> Result<()> {
    let run = load_run(&a.run)?;
    let store = if let Some(p) = &a.import {
        let store = PairEmbeddingStore::load(p)?;
        let missing = run
            .iter()
            .flat_map(|(q, l)| l.iter().take(a.depth).map(move |e| (q, e)))
            .filter(|(q, e)| store.get(q, &e.docid).is_none())
            .count();
        if missing > 0 {
            log::warn!("{missing} top-{} pairs have no embedding", a.depth);
        }
        store
    } else {
        let (Some(qp), Some(cp)) = (&a.queries, &a.corpus) else {
            return Err(QppError::Input("embed needs --import or both --queries and --corpus".into()));
        };
        let queries = parse_texts(&read_to_string(qp)?)?;
        let corpus = parse_texts(&read_to_string(cp)?)?;
        let enc_cfg = EncoderConfig::default();
        let tokens = pair_tokens(&run, &queries, &corpus, a.depth, crate::data::DEFAULT_WINDOW, crate::data::DEFAULT_STRIDE, &enc_cfg)?;
        let mut params = ParamSet::new();
        let encoder = ToyEncoder::init(enc_cfg, a.d_model, &mut params, &mut rng::stream(a.seed, &[0xe4b]))?;
        let mut store = PairEmbeddingStore::new(a.d_model, format!("toy-encoder/seed{}", a.seed))?;
        for (q, list) in run.iter() {
            for e in list.iter().take(a.depth) {
                let pair = &tokens[&crate::grouping::PairKey::new(q, &e.docid)];
                let mut tape = Tape::new();
                let vars = params.bind_frozen(&mut tape);
                let v = encoder.encode(&mut tape, &vars, pair)?;
                store.push(PairEmbedding {
                    qid: q.to_string(),
                    docid: e.docid.clone(),
                    rank: e.rank,
                    vec: tape.value(v).data().iter().map(|&x| x as f32).collect(),
                })?;
            }
        }
        store
    };
    store.save(&a.out)?;
    emit(&format!("wrote {} pair embeddings of dimension {}\n", store.len(), store.dim()), None, stdout)
}

fn side_info(collection_scores: &Option<PathBuf>, queries: &Option<PathBuf>) -> Result<QuerySideInfo> {
    let mut side = QuerySideInfo::default();
    if let Some(p) = collection_scores {
        side.collection_scores = parse_collection_scores(&read_to_string(p)?)?;
    }
    if let Some(p) = queries {
        side.query_lengths = parse_texts(&read_to_string(p)?)?
            .iter()
            .map(|(q, t)| (q.clone(), tokenize(t).len().max(1)))
            .collect();
    }
    Ok(side)
}

fn baseline(a: &BaselineArgs, stdout: &mut dyn Write) -> Result<()> {
    let predictor = ScorePredictor::from_name(&a.method, a.k, a.x)?;
    let run = load_run(&a.run)?;
    let side = side_info(&a.collection_scores, &a.queries)?;
    let scores = score_queries(predictor, &run, &side, run.qids())?;
    emit(&serialize_predictions(&scores, predictor.name()), a.out.as_deref(), stdout)
}

fn train_cmd(a: &ExperimentArgs, stdout: &mut dyn Write) -> Result<()> {
    let cfg = a.resolve()?;
    if a.dump_config {
        return emit(&cfg.to_toml(), None, stdout);
    }
    let inputs = ExperimentInputs::load(&cfg)?;
    let source = inputs.source.as_ref().expect("checked by load");
    let qpp = crate::experiment::initial_qpp(&cfg, &inputs)?;
    let qids = inputs.qids();
    let labels: BTreeMap<String, f64> = qids.iter().map(|q| (q.clone(), inputs.labels[q])).collect();
    let targets: BTreeMap<String, f64> = qids.iter().map(|q| (q.clone(), inputs.targets[q])).collect();
    let data = TrainData {
        run: &inputs.run,
        labels: &labels,
        targets: &targets,
        source,
        initial_qpp: Some(&qpp),
    };
    let outcome = train(inputs.model_config(&cfg)?, data, &cfg.train_config())?;
    ensure_dir(&cfg.out)?;
    let model_path = cfg.out.join("model.qppm");
    outcome.model.save(&model_path)?;
    let info = TrainedModelInfo {
        strategy: cfg.strategy,
        group_size: cfg.group_size,
        infer_depth: cfg.infer_depth,
        aggregation: outcome.aggregation,
        lr: outcome.lr,
        initial_x: cfg.initial_x,
        seed: cfg.seed,
        window: cfg.window,
        stride: cfg.stride,
    };
    write_file(&info_path(&model_path), &serde_json::to_string_pretty(&info).expect("serializes"))?;
    write_file(&cfg.out.join("train.log"), &outcome.log.to_lines())?;
    write_file(
        &cfg.out.join("selection.json"),
        &serde_json::to_string_pretty(&outcome.candidates).expect("serializes"),
    )?;
    emit(
        &format!(
            "trained on {} queries: lr {:e}, aggregation {}; wrote {}\n",
            qids.len(),
            outcome.lr,
            outcome.aggregation,
            model_path.display()
        ),
        None,
        stdout,
    )
}

fn predict(a: &PredictArgs, stdout: &mut dyn Write) -> Result<()> {
    let model = GroupwiseModel::load(&a.model)?;
    let info: TrainedModelInfo = {
        let p = info_path(&a.model);
        serde_json::from_str(&read_to_string(&p)?).map_err(|e| QppError::Format(format!("{}: {e}", p.display())))?
    };
    let run = load_run(&a.run)?;
    let depth = a.infer_depth.unwrap_or(info.infer_depth);
    let source = match (&a.embeddings, &a.queries, &a.corpus) {
        (Some(p), _, _) => PairSource::Frozen(Arc::new(PairEmbeddingStore::load(p)?)),
        (None, Some(q), Some(c)) => {
            let enc = model
                .config
                .encoder
                .ok_or_else(|| QppError::Input("model has no encoder; pass --embeddings".into()))?;
            let queries = parse_texts(&read_to_string(q)?)?;
            let corpus = parse_texts(&read_to_string(c)?)?;
            PairSource::Tokens(Arc::new(pair_tokens(&run, &queries, &corpus, depth, info.window, info.stride, &enc)?))
        }
        _ => return Err(QppError::Input("predict needs --embeddings or --queries and --corpus".into())),
    };
    let spec = InferenceSpec {
        strategy: info.strategy.default_inference(),
        group_size: info.group_size,
        depth,
        seed: info.seed,
    };
    let qpp = if spec.strategy.needs_initial_qpp() {
        let side = side_info(&a.collection_scores, &a.queries)?;
        Some(score_queries(ScorePredictor::NSigma(info.initial_x), &run, &side, run.qids())?)
    } else {
        None
    };
    let preds = predict_queries(&model, &run, &source, spec, qpp.as_ref(), a.aggregation.unwrap_or(info.aggregation))?;
    emit(&serialize_predictions(&preds, "model"), a.out.as_deref(), stdout)
}

fn evaluate(a: &EvaluateArgs, stdout: &mut dyn Write) -> Result<()> {
    let labels = parse_label_file(&read_to_string(&a.labels)?)?;
    let preds = a
        .pred
        .iter()
        .map(|p| Ok((p.display().to_string(), parse_predictions(&read_to_string(p)?)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut out = String::new();
    out += &format!("{:<32} {:>6} {:>10} {:>10}\n", "predictions", "n", "pearson", "kendall");
    for (name, p) in &preds {
        let qids: Vec<String> = p.keys().filter(|q| labels.values.contains_key(*q)).cloned().collect();
        let (rho, tau) = correlate(p, &labels.values, &qids)?;
        out += &format!("{name:<32} {:>6} {rho:>10.6} {tau:>10.6}\n", qids.len());
    }
    if let Some(sp) = &a.splits {
        let plan = SplitPlan::import(&read_to_string(sp)?, 0)?;
        let per_split = preds
            .iter()
            .map(|(_, p)| {
                plan.splits
                    .iter()
                    .map(|s| correlate(p, &labels.values, &s.fold2))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        out += &format!("\nmean over {} splits (fold 2)\n", plan.splits.len());
        for ((name, _), v) in preds.iter().zip(&per_split) {
            let n = v.len() as f64;
            let rho = v.iter().map(|x| x.0).sum::<f64>() / n;
            let tau = v.iter().map(|x| x.1).sum::<f64>() / n;
            out += &format!("{name:<32} {:>6} {rho:>10.6} {tau:>10.6}\n", "");
        }
        if preds.len() > 1 {
            out += "\npaired two-tailed t-tests\n";
            for i in 0..preds.len() {
                for j in i + 1..preds.len() {
                    for (metric, pick) in [("pearson", 0), ("kendall", 1)] {
                        let get = |k: usize| -> Vec<f64> {
                            per_split[k].iter().map(|x| if pick == 0 { x.0 } else { x.1 }).collect()
                        };
                        let t = paired_t_test(&get(i), &get(j))?;
                        out += &format!("{} vs {} {metric}: t {:.4} p {:.4}\n", preds[i].0, preds[j].0, t.t, t.p);
                    }
                }
            }
        }
    }
    emit(&out, None, stdout)
}

fn experiment(a: &ExperimentArgs, stdout: &mut dyn Write) -> Result<()> {
    let cfg = a.resolve()?;
    if a.dump_config {
        return emit(&cfg.to_toml(), None, stdout);
    }
    let inputs = ExperimentInputs::load(&cfg)?;
    let report = run_and_write(&cfg, &inputs)?;
    emit(&report.to_table(), None, stdout)
}

fn sweep_cmd(a: &SweepArgs, stdout: &mut dyn Write) -> Result<()> {
    let cfg = a.experiment.resolve()?;
    if a.experiment.dump_config {
        return emit(&cfg.to_toml(), None, stdout);
    }
    let inputs = ExperimentInputs::load(&cfg)?;
    let values = if a.values.is_empty() {
        a.axis.default_values().to_vec()
    } else {
        a.values.clone()
    };
    let report = sweep(&cfg, &inputs, a.axis, &values)?;
    ensure_dir(&cfg.out)?;
    write_file(&cfg.out.join(format!("sweep-{}.json", a.axis)), &report.to_json())?;
    let table = report.to_table();
    write_file(&cfg.out.join(format!("sweep-{}.txt", a.axis)), &table)?;
    emit(&table, None, stdout)
}

fn synth(a: &SynthArgs, stdout: &mut dyn Write) -> Result<()> {
    let c: SyntheticCollection = match a.kind.as_str() {
        "judged" => judged_collection(a.queries, a.depth, a.dim, a.seed)?,
        "planted" => planted_signal(a.queries, a.depth, a.dim, a.seed)?,
        "dispersion" => dispersion_fixture(a.queries, a.depth, a.dim, a.seed)?,
        k => return Err(QppError::Input(format!("unknown synthetic kind '{k}'"))),
    };
    write_collection(&c, &a.out)?;
    emit(&format!("wrote {} queries to {}\n", c.run.len(), a.out.display()), None, stdout)
}

/// Write `run.txt`, `qrels.txt`, `embeddings.qppe`, `collection.txt` and
/// `labels.txt` (the planted labels) under `dir`.
pub fn write_collection(c: &SyntheticCollection, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    write_file(&dir.join("run.txt"), &serialize_run(&c.run, "synthetic"))?;
    write_file(&dir.join("qrels.txt"), &serialize_qrels(&c.qrels))?;
    c.embeddings.save(dir.join("embeddings.qppe"))?;
    let sc: String = c.collection_scores.iter().map(|(q, s)| format!("{q} {s}\n")).collect();
    write_file(&dir.join("collection.txt"), &sc)?;
    write_file(&dir.join("labels.txt"), &serialize_labels(&c.planted, "planted"))
}
