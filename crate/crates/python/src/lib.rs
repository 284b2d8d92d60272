//! Python bindings for the attribute insertion pipeline and its metrics.
//!
//! Structured results cross the boundary as plain dicts and lists built from
//! the same JSON the command line tool writes.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use xmai_core::augmenter::augment_example;
use xmai_core::harness::{self, Method, ProviderPaths, ProviderSet, Source};
use xmai_core::metrics::{self, RetrievalRun};
use xmai_core::model::tokenize;
use xmai_core::{io, AugmentationConfig, Detection, Error, Example, Label};

fn py_err(err: Error) -> PyErr {
    match err {
        Error::Io { .. } => PyIOError::new_err(err.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let json = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (json,))
}

fn labels(values: Vec<String>) -> PyResult<Vec<Label>> {
    values
        .iter()
        .map(|v| v.parse::<Label>().map_err(PyValueError::new_err))
        .collect()
}

/// Surface tokens of `text`, punctuation included.
#[pyfunction]
fn tokenize_text(text: &str) -> Vec<String> {
    tokenize(text).surfaces()
}

/// Lowercased word tokens used by the text metrics.
#[pyfunction]
fn word_tokens(text: &str) -> Vec<String> {
    metrics::word_tokens(text)
}

#[pyfunction]
fn stem(word: &str) -> String {
    metrics::porter::stem(word)
}

#[pyfunction]
#[pyo3(signature = (reference, hypothesis, max_n = 4))]
fn bleu(reference: &str, hypothesis: &str, max_n: usize) -> f64 {
    metrics::bleu(&metrics::word_tokens(reference), &metrics::word_tokens(hypothesis), max_n)
}

#[pyfunction]
fn meteor(reference: &str, hypothesis: &str) -> f64 {
    metrics::meteor_lite(&metrics::word_tokens(reference), &metrics::word_tokens(hypothesis))
}

/// Words of `augmented` beyond those of `original`.
#[pyfunction]
fn count_insertions(original: &str, augmented: &str) -> usize {
    metrics::count_insertions(&metrics::word_tokens(original), &metrics::word_tokens(augmented))
}

/// Mean reciprocal rank of 1-based ranks.
#[pyfunction]
fn mrr(ranks: Vec<usize>) -> PyResult<f64> {
    if ranks.contains(&0) {
        return Err(PyValueError::new_err("ranks are 1-based"));
    }
    metrics::mrr(&RetrievalRun::from_ranks(&ranks)).map_err(py_err)
}

#[pyfunction]
fn classification_report<'py>(
    py: Python<'py>,
    gold: Vec<String>,
    predicted: Vec<String>,
) -> PyResult<Bound<'py, PyAny>> {
    let report = metrics::classification_report(&labels(gold)?, &labels(predicted)?).map_err(py_err)?;
    to_py(py, &report)
}

/// Hyper-parameters of an augmentation run.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: AugmentationConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (lambda1 = 1.0, lambda2 = 5.0, lambda3 = 5.0, k = 3, threshold = 0.7, seed = 0))]
    fn new(lambda1: f64, lambda2: f64, lambda3: f64, k: usize, threshold: f64, seed: u64) -> PyResult<Self> {
        let inner = AugmentationConfig {
            lambda1,
            lambda2,
            lambda3,
            k,
            threshold,
            seed,
            max_gallery: None,
        }
        .validate()
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyConfig { inner })
    }

    #[getter]
    fn lambdas(&self) -> (f64, f64, f64) {
        (self.inner.lambda1, self.inner.lambda2, self.inner.lambda3)
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    #[getter]
    fn threshold(&self) -> f64 {
        self.inner.threshold
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "Config(lambda1={}, lambda2={}, lambda3={}, k={}, threshold={}, seed={})",
            c.lambda1, c.lambda2, c.lambda3, c.k, c.threshold, c.seed
        )
    }
}

fn source(spec: Option<&str>) -> PyResult<Option<Source>> {
    spec.map(|s| s.parse::<Source>().map_err(PyValueError::new_err)).transpose()
}

/// Attribute inserter backed by fixture files or remote adapters.
///
/// `mask_filler` and `pos_tagger` take `fixture:<path>` or `remote:<uri>`.
#[pyclass(name = "Augmenter")]
struct PyAugmenter {
    providers: ProviderSet,
    config: AugmentationConfig,
}

#[pymethods]
impl PyAugmenter {
    #[new]
    #[pyo3(signature = (
        word_vectors = None,
        image_vectors = None,
        mask_filler = None,
        pos_tagger = None,
        encoder = None,
        config = None,
    ))]
    fn new(
        word_vectors: Option<PathBuf>,
        image_vectors: Option<PathBuf>,
        mask_filler: Option<&str>,
        pos_tagger: Option<&str>,
        encoder: Option<String>,
        config: Option<PyConfig>,
    ) -> PyResult<Self> {
        let paths = ProviderPaths {
            word_vectors,
            image_vectors,
            mask_filler: source(mask_filler)?,
            pos_tagger: source(pos_tagger)?,
            encoder,
            ..ProviderPaths::default()
        };
        Ok(PyAugmenter {
            providers: ProviderSet::load(&paths).map_err(py_err)?,
            config: config.map(|c| c.inner).unwrap_or_default(),
        })
    }

    #[getter]
    fn config(&self) -> PyConfig {
        PyConfig { inner: self.config }
    }

    /// Augments one caption. `detections` is a list of (object, attribute)
    /// pairs. Returns the full result record including per-site decisions.
    #[pyo3(signature = (text, image_id, detections, id = "0"))]
    fn augment<'py>(
        &self,
        py: Python<'py>,
        text: &str,
        image_id: &str,
        detections: Vec<(String, String)>,
        id: &str,
    ) -> PyResult<Bound<'py, PyAny>> {
        let example = Example {
            id: id.to_string(),
            text: text.to_string(),
            image_id: image_id.to_string(),
            gold_label: None,
        };
        let detections: Vec<Detection> = detections.into_iter().map(|(o, a)| Detection::new(o, a)).collect();
        let providers = self.providers.worker().map_err(py_err)?;
        let result = py
            .detach(|| augment_example(&example, &detections, &providers, &self.config))
            .map_err(|e| py_err(e.into()))?;
        to_py(py, &result)
    }

    /// Augments a corpus file against a detections file. Returns
    /// `(results, summary)`.
    #[pyo3(signature = (corpus, detections, workers = 1))]
    fn augment_corpus<'py>(
        &self,
        py: Python<'py>,
        corpus: PathBuf,
        detections: PathBuf,
        workers: usize,
    ) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyAny>)> {
        let run = py
            .detach(|| -> Result<_, Error> {
                let corpus = io::load_corpus(&corpus)?;
                let detections = io::load_detections(&detections)?;
                harness::augment_corpus(&corpus, &detections, &self.providers, &Method::Xmai, &self.config, workers)
            })
            .map_err(py_err)?;
        Ok((to_py(py, &run.results)?, to_py(py, &run.summary)?))
    }
}

#[pymodule]
fn xmai(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(tokenize_text, m)?)?;
    m.add_function(wrap_pyfunction!(word_tokens, m)?)?;
    m.add_function(wrap_pyfunction!(stem, m)?)?;
    m.add_function(wrap_pyfunction!(bleu, m)?)?;
    m.add_function(wrap_pyfunction!(meteor, m)?)?;
    m.add_function(wrap_pyfunction!(count_insertions, m)?)?;
    m.add_function(wrap_pyfunction!(mrr, m)?)?;
    m.add_function(wrap_pyfunction!(classification_report, m)?)?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyAugmenter>()?;
    Ok(())
}
