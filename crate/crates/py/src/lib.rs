//! Python bindings over `qpp_core`: metrics, score predictors, the pair
//! embedding store, the groupwise model and the experiment driver.

use std::collections::BTreeMap;
use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use qpp_core::baselines::{ScoreListContext, ScorePredictor};
use qpp_core::data::{PairEmbedding, PairEmbeddingStore, Qrels, QrelsRecord};
use qpp_core::error::QppError;
use qpp_core::experiment::{run_and_write, ExperimentConfig, ExperimentInputs};
use qpp_core::grouping::{Group, GroupKind, PairKey};
use qpp_core::metrics;
use qpp_core::model::{self, Aggregation, GroupwiseModel, ModelConfig, PairSource, PredictorConfig};

create_exception!(qpp, QppException, PyException);

fn err(e: QppError) -> PyErr {
    QppException::new_err(e.to_string())
}

fn aggregation(name: &str) -> PyResult<Aggregation> {
    name.parse().map_err(|e: QppError| PyValueError::new_err(e.to_string()))
}

#[pyfunction]
fn kendall_tau(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    metrics::kendall_tau_b(&x, &y).map_err(err)
}

#[pyfunction]
fn pearson(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    metrics::pearson(&x, &y).map_err(err)
}

/// AP of `ranked` against the set of relevant docids; `None` when `relevant` is empty.
#[pyfunction]
#[pyo3(signature = (ranked, relevant, cutoff = 1000))]
fn average_precision(ranked: Vec<String>, relevant: Vec<String>, cutoff: usize) -> PyResult<Option<f64>> {
    if cutoff == 0 {
        return Err(PyValueError::new_err("cutoff must be >= 1"));
    }
    let qrels = Qrels::from_records(relevant.into_iter().map(|docid| QrelsRecord {
        qid: "q".into(),
        docid,
        grade: 1,
    }));
    Ok(metrics::average_precision("q", &ranked, &qrels, cutoff))
}

/// Returns `(t, p)`.
#[pyfunction]
fn paired_t_test(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64)> {
    let t = metrics::paired_t_test(&a, &b).map_err(err)?;
    Ok((t.t, t.p))
}

/// Score one ranked list with `sigma_k`, `nqc`, `wig`, `smv` or `nsigma`.
#[pyfunction]
#[pyo3(signature = (method, scores, collection_score, query_length = 1, k = 100, x = 50.0))]
fn predict(
    method: &str,
    scores: Vec<f64>,
    collection_score: f64,
    query_length: usize,
    k: usize,
    x: f64,
) -> PyResult<f64> {
    let p = ScorePredictor::from_name(method, k, x).map_err(err)?;
    let ctx = ScoreListContext::new(scores, collection_score, query_length).map_err(err)?;
    p.evaluate(&ctx).map_err(err)
}

#[pyfunction]
fn aggregate(by_rank: Vec<f64>, how: &str) -> PyResult<f64> {
    model::aggregate(&by_rank, aggregation(how)?).map_err(err)
}

#[pyclass(name = "EmbeddingStore", module = "qpp")]
struct PyEmbeddingStore {
    inner: PairEmbeddingStore,
}

#[pymethods]
impl PyEmbeddingStore {
    #[new]
    #[pyo3(signature = (dim, encoder_name = "unknown"))]
    fn new(dim: usize, encoder_name: &str) -> PyResult<Self> {
        Ok(Self {
            inner: PairEmbeddingStore::new(dim, encoder_name).map_err(err)?,
        })
    }

    /// Binary, or textual when the path ends in `.jsonl`.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: PairEmbeddingStore::load(path).map_err(err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(err)
    }

    fn add(&mut self, qid: String, docid: String, rank: u32, vec: Vec<f32>) -> PyResult<()> {
        self.inner
            .push(PairEmbedding { qid, docid, rank, vec })
            .map_err(err)
    }

    fn get(&self, qid: &str, docid: &str) -> Option<Vec<f32>> {
        self.inner.get(qid, docid).map(|r| r.vec.clone())
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn encoder_name(&self) -> String {
        self.inner.encoder_name().to_string()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// The groupwise predictor over frozen pair vectors.
#[pyclass(name = "GroupwiseModel", module = "qpp")]
struct PyGroupwiseModel {
    inner: GroupwiseModel,
}

#[pymethods]
impl PyGroupwiseModel {
    #[new]
    #[pyo3(signature = (d_model, n_heads = 4, n_layers = 4, group_size = 8, seed = 0))]
    fn new(d_model: usize, n_heads: usize, n_layers: usize, group_size: usize, seed: u64) -> PyResult<Self> {
        let mut predictor = PredictorConfig::new(d_model, n_heads, group_size);
        predictor.n_layers = n_layers;
        let config = ModelConfig { predictor, encoder: None };
        let mut rng = qpp_core::rng::stream(seed, &[0]);
        Ok(Self {
            inner: GroupwiseModel::init(config, &mut rng).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: GroupwiseModel::load(path).map_err(err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(err)
    }

    /// Score one group of pair vectors; `positions` defaults to all zeros.
    #[pyo3(signature = (vectors, positions = None))]
    fn predict_group(&self, vectors: Vec<Vec<f32>>, positions: Option<Vec<usize>>) -> PyResult<Vec<f64>> {
        let n = vectors.len();
        let dim = vectors.first().map_or(0, Vec::len);
        let mut store = PairEmbeddingStore::new(dim.max(1), "python").map_err(err)?;
        let mut keys = Vec::with_capacity(n);
        for (i, vec) in vectors.into_iter().enumerate() {
            let key = PairKey::new(format!("slot{i}"), "d");
            store
                .push(PairEmbedding {
                    qid: key.qid.clone(),
                    docid: key.docid.clone(),
                    rank: 1,
                    vec,
                })
                .map_err(err)?;
            keys.push(key);
        }
        let group = Group::new(keys, positions.unwrap_or_else(|| vec![0; n]), GroupKind::Query).map_err(err)?;
        let out = self
            .inner
            .predict_group(&group, &PairSource::Frozen(Arc::new(store)))
            .map_err(err)?;
        Ok(out.into_iter().map(|(_, v)| v).collect())
    }

    #[getter]
    fn num_parameters(&self) -> usize {
        self.inner.params.num_scalars()
    }
}

/// Run the repeated two-fold protocol from a TOML configuration and return the report as JSON.
#[pyfunction]
fn run_experiment(py: Python<'_>, config_toml: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::from_toml(config_toml).map_err(err)?;
    py.detach(|| {
        let inputs = ExperimentInputs::load(&cfg)?;
        Ok(run_and_write(&cfg, &inputs)?.to_json())
    })
    .map_err(err)
}

/// Correlations of `predictions` against `labels` over their shared qids: `(pearson, kendall)`.
#[pyfunction]
fn correlate(predictions: BTreeMap<String, f64>, labels: BTreeMap<String, f64>) -> PyResult<(f64, f64)> {
    let qids: Vec<String> = predictions.keys().filter(|q| labels.contains_key(*q)).cloned().collect();
    qpp_core::experiment::correlate(&predictions, &labels, &qids).map_err(err)
}

#[pymodule]
fn qpp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("QppError", m.py().get_type::<QppException>())?;
    m.add_function(wrap_pyfunction!(kendall_tau, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(average_precision, m)?)?;
    m.add_function(wrap_pyfunction!(paired_t_test, m)?)?;
    m.add_function(wrap_pyfunction!(predict, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(correlate, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_class::<PyEmbeddingStore>()?;
    m.add_class::<PyGroupwiseModel>()?;
    Ok(())
}
