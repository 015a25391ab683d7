//! Python bindings: corpora, scoring, closure, splitting, generation and
//! the reference baselines.

use std::collections::BTreeSet;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use tie::baselines::{run_baseline, train_memorizer, Components, MemorizationLexicon};
use tie::closure::{check_consistency, close_contains, RelationGraph};
use tie::io::{self, CorpusError};
use tie::metrics::{self, MatchMode, Score};
use tie::runner::{self, ClosureMode, ReportFormat, Scenario, ScenarioConfig, Subtask};
use tie::split::{split_by_patient, SplitSpec};
use tie::synthetic::{generate_synthetic, GeneratorConfig};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn corpus_error(e: CorpusError) -> PyErr {
    match e {
        CorpusError::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => value_error(e),
    }
}

/// An annotated corpus of clinical notes.
#[pyclass(name = "Corpus", module = "temporal_ie", frozen)]
struct PyCorpus {
    inner: tie::model::Corpus,
}

#[pymethods]
impl PyCorpus {
    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        io::read_corpus(path).map(|inner| Self { inner }).map_err(corpus_error)
    }

    #[staticmethod]
    fn parse(data: &[u8]) -> PyResult<Self> {
        io::parse_corpus(data).map(|inner| Self { inner }).map_err(corpus_error)
    }

    #[staticmethod]
    #[pyo3(signature = (patients, seed, unambiguous = false, density = 0.3, calibrated = false))]
    fn generate(patients: usize, seed: u64, unambiguous: bool, density: f64, calibrated: bool) -> PyResult<Self> {
        let mut config = if calibrated {
            GeneratorConfig::calibrated(seed)
        } else {
            GeneratorConfig::small(patients, seed)
        };
        config.n_patients = patients;
        config.unambiguous_surfaces = unambiguous;
        config.relation_density = density;
        generate_synthetic(&config).map(|inner| Self { inner }).map_err(value_error)
    }

    fn write(&self, path: &str) -> PyResult<()> {
        io::write_corpus(&self.inner, path).map_err(corpus_error)
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let bytes = io::encode_corpus(&self.inner).map_err(corpus_error)?;
        Ok(PyBytes::new(py, &bytes))
    }

    /// Violations as `(doc_id, message)` pairs; empty when valid.
    fn validate(&self) -> Vec<(String, String)> {
        self.inner
            .validate()
            .into_iter()
            .map(|(doc, v)| (doc, v.to_string()))
            .collect()
    }

    #[pyo3(signature = (seed, fractions = "0.5,0.25,0.25"))]
    fn split(&self, seed: u64, fractions: &str) -> PyResult<(Self, Self, Self)> {
        let spec = SplitSpec::from_fractions(fractions, seed).map_err(value_error)?;
        let s = split_by_patient(&self.inner, &spec).map_err(value_error)?;
        Ok((Self { inner: s.train }, Self { inner: s.dev }, Self { inner: s.test }))
    }

    /// Copy with every document's CONTAINS relations transitively closed.
    fn closure(&self) -> PyResult<Self> {
        let mut inner = self.inner.clone();
        for doc in &mut inner.documents {
            let graph = RelationGraph::from_document(doc).map_err(value_error)?;
            let closed = close_contains(&graph).map_err(|e| value_error(format!("document {}: {e}", doc.doc_id)))?;
            doc.relations = closed.relations();
        }
        Ok(Self { inner })
    }

    /// Copy with text only.
    fn strip(&self) -> Self {
        let documents = self.inner.documents.iter().map(|d| d.without_annotations()).collect();
        Self {
            inner: tie::model::Corpus::new(documents),
        }
    }

    #[getter]
    fn doc_ids(&self) -> Vec<String> {
        self.inner.documents.iter().map(|d| d.doc_id.clone()).collect()
    }

    #[getter]
    fn patient_ids(&self) -> Vec<String> {
        self.inner.patient_ids().into_iter().map(String::from).collect()
    }

    #[getter]
    fn n_events(&self) -> usize {
        self.inner.event_count()
    }

    #[getter]
    fn n_timexes(&self) -> usize {
        self.inner.timex_count()
    }

    #[getter]
    fn n_relations(&self) -> usize {
        self.inner.relation_count()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner.canonical() == other.inner.canonical()
    }

    fn __repr__(&self) -> String {
        format!(
            "Corpus(documents={}, timexes={}, events={}, relations={})",
            self.inner.len(),
            self.inner.timex_count(),
            self.inner.event_count(),
            self.inner.relation_count()
        )
    }
}

/// Scores of one evaluation run.
#[pyclass(name = "Report", module = "temporal_ie", frozen)]
struct PyReport {
    inner: runner::Report,
}

#[pymethods]
impl PyReport {
    /// `(subtask, metric, headline)` per row, where headline is F1 or accuracy.
    #[getter]
    fn rows(&self) -> Vec<(String, String, f64)> {
        self.inner
            .rows
            .iter()
            .map(|r| (r.subtask.to_string(), r.metric.clone(), r.score.headline()))
            .collect()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    #[getter]
    fn system_digest(&self) -> &str {
        &self.inner.system_digest
    }

    #[getter]
    fn gold_digest(&self) -> &str {
        &self.inner.gold_digest
    }

    /// `(P, R, F1)` for a PRF row, `(accuracy,)` for an accuracy row.
    fn get(&self, subtask: &str, metric: &str) -> PyResult<Option<Vec<f64>>> {
        let subtask: Subtask = subtask.parse().map_err(PyValueError::new_err)?;
        Ok(self.inner.get(subtask, metric).map(|s| match s {
            Score::Prf(p) => vec![p.precision, p.recall, p.f1],
            Score::Accuracy(a) => vec![a.accuracy],
        }))
    }

    fn to_tsv(&self) -> String {
        String::from_utf8(runner::emit_report(&self.inner, ReportFormat::Tsv)).expect("utf-8 report")
    }

    fn to_json(&self) -> String {
        String::from_utf8(runner::emit_report(&self.inner, ReportFormat::Json)).expect("utf-8 report")
    }

    fn __repr__(&self) -> String {
        format!("Report(scenario={}, rows={})", self.inner.scenario, self.inner.rows.len())
    }
}

#[pyfunction]
#[pyo3(signature = (system, gold, scenario = 1, subtasks = None, r#match = "exact", closure = "both-closed"))]
fn score(
    system: &PyCorpus,
    gold: &PyCorpus,
    scenario: u8,
    subtasks: Option<Vec<String>>,
    r#match: &str,
    closure: &str,
) -> PyResult<PyReport> {
    let scenario = Scenario::from_number(scenario).ok_or_else(|| value_error(format!("no scenario {scenario}")))?;
    let mut config = ScenarioConfig::new(scenario);
    if let Some(names) = subtasks {
        let parsed = names
            .iter()
            .map(|s| s.parse::<Subtask>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(PyValueError::new_err)?;
        config = config.with_subtasks(parsed).map_err(value_error)?;
    }
    config.match_mode = r#match.parse::<MatchMode>().map_err(PyValueError::new_err)?;
    config.closure_mode = closure.parse::<ClosureMode>().map_err(PyValueError::new_err)?;
    runner::run_scenario(&config, &system.inner, &gold.inner)
        .map(|inner| PyReport { inner })
        .map_err(value_error)
}

/// `(precision, recall, f1)`.
#[pyfunction]
fn prf(tp: usize, system: usize, gold: usize) -> PyResult<(f64, f64, f64)> {
    if tp > system || tp > gold {
        return Err(value_error("tp exceeds a denominator"));
    }
    let s = metrics::prf(tp, system, gold);
    Ok((s.precision, s.recall, s.f1))
}

fn graph(edges: Vec<(String, String)>) -> PyResult<RelationGraph> {
    RelationGraph::from_edges(edges).map_err(value_error)
}

/// Transitive closure of CONTAINS edges, sorted.
#[pyfunction(name = "close_contains")]
fn py_close_contains(edges: Vec<(String, String)>) -> PyResult<Vec<(String, String)>> {
    let closed = close_contains(&graph(edges)?).map_err(value_error)?;
    Ok(closed.edges().iter().cloned().collect())
}

/// `(consistent, witness_cycle)`.
#[pyfunction(name = "check_consistency")]
fn py_check_consistency(edges: Vec<(String, String)>) -> PyResult<(bool, Option<Vec<String>>)> {
    let r = check_consistency(&graph(edges)?);
    Ok((r.consistent, r.witness_cycle))
}

/// Surface lexicon learned by the memorization baseline.
#[pyclass(name = "Lexicon", module = "temporal_ie", frozen)]
struct PyLexicon {
    inner: MemorizationLexicon,
}

#[pymethods]
impl PyLexicon {
    #[staticmethod]
    #[pyo3(signature = (corpus, case_sensitive = false))]
    fn train(corpus: &PyCorpus, case_sensitive: bool) -> Self {
        Self {
            inner: train_memorizer(&corpus.inner, case_sensitive),
        }
    }

    fn dump(&self) -> String {
        self.inner.dump()
    }

    /// Surfaces seen with more than one bundle or as both kinds.
    fn conflicts(&self) -> BTreeSet<String> {
        self.inner.conflicts().iter().map(|c| c.surface.clone()).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyfunction]
#[pyo3(signature = (train, input, components = "memorize,dr-majority,dr-memorize,cr-closest", case_sensitive = false))]
fn baseline(train: &PyCorpus, input: &PyCorpus, components: &str, case_sensitive: bool) -> PyResult<PyCorpus> {
    let components: Components = components.parse().map_err(value_error)?;
    run_baseline(&train.inner, &input.inner, components, case_sensitive)
        .map(|inner| PyCorpus { inner })
        .map_err(value_error)
}

#[pymodule]
fn temporal_ie(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyReport>()?;
    m.add_class::<PyLexicon>()?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(prf, m)?)?;
    m.add_function(wrap_pyfunction!(py_close_contains, m)?)?;
    m.add_function(wrap_pyfunction!(py_check_consistency, m)?)?;
    m.add_function(wrap_pyfunction!(baseline, m)?)?;
    Ok(())
}
