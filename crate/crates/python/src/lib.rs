//! Python bindings for sparse topical coding.
//!
//! ```python
//! import pystc
//! corpus = pystc.Corpus.load("docword.txt")
//! model, codes = pystc.train_stc(corpus, 20, pystc.Hyperparams(lambda_=0.1), seed=1)
//! model.save("model.stc")
//! ```

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use stc_core::corpus::{load_corpus, load_vocabulary};
use stc_core::metrics;
use stc_core::numerics;
use stc_core::{
    encode_corpus, load_model, predict, save_model, train_medstc, train_stc, ClassifierWeights, DocEncoding, Document,
    LabeledCorpus, Regularizer, SavedModel, StcError,
};

fn to_py(err: StcError) -> PyErr {
    match err {
        StcError::Io { .. } | StcError::Stream(_) => PyIOError::new_err(err.to_string()),
        StcError::Numerical { .. } | StcError::Training { .. } => PyRuntimeError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn parse_reg(name: &str) -> PyResult<Regularizer> {
    name.parse()
        .map_err(|_| PyValueError::new_err(format!("unknown regularizer {name:?}, expected l1 or l2")))
}

fn reg_name(r: Regularizer) -> &'static str {
    match r {
        Regularizer::L1 => "l1",
        Regularizer::L2 => "l2",
    }
}

/// A bag-of-words corpus.
#[pyclass(frozen)]
struct Corpus {
    inner: stc_core::Corpus,
}

#[pymethods]
impl Corpus {
    /// Build from per-document lists of `(word, count)` pairs.
    #[new]
    fn new(num_words: usize, documents: Vec<Vec<(usize, u32)>>) -> PyResult<Self> {
        let docs = documents
            .into_iter()
            .map(Document::new)
            .collect::<Result<Vec<_>, _>>()
            .map_err(to_py)?;
        let inner = stc_core::Corpus::new(num_words, docs).map_err(to_py)?;
        Ok(Corpus { inner })
    }

    /// Read a UCI "docword" file.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let file = std::fs::File::open(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
        let inner = load_corpus(std::io::BufReader::new(file)).map_err(to_py)?;
        Ok(Corpus { inner })
    }

    #[getter]
    fn num_words(&self) -> usize {
        self.inner.num_words()
    }

    #[getter]
    fn num_docs(&self) -> usize {
        self.inner.len()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn document(&self, index: usize) -> PyResult<Vec<(usize, u32)>> {
        self.inner
            .documents()
            .get(index)
            .map(|d| d.entries().to_vec())
            .ok_or_else(|| PyValueError::new_err(format!("document {index} out of range")))
    }
}

/// Model and solver settings. Unset `gamma` and `rho` follow `lambda_`.
#[pyclass(get_all, set_all, skip_from_py_object)]
#[derive(Clone)]
struct Hyperparams {
    lambda_: f64,
    gamma: f64,
    rho: f64,
    theta_reg: String,
    s_reg: String,
    svm_c: f64,
    cost_ell: f64,
    inner_sweeps: usize,
    tol_obj: f64,
    outer_iters: usize,
    outer_tol: f64,
}

#[pymethods]
impl Hyperparams {
    #[new]
    #[pyo3(signature = (
        lambda_=0.1, gamma=None, rho=None, theta_reg="l1", s_reg="l1", svm_c=1.0, cost_ell=3600.0,
        inner_sweeps=25, tol_obj=1e-5, outer_iters=50, outer_tol=1e-4
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        lambda_: f64,
        gamma: Option<f64>,
        rho: Option<f64>,
        theta_reg: &str,
        s_reg: &str,
        svm_c: f64,
        cost_ell: f64,
        inner_sweeps: usize,
        tol_obj: f64,
        outer_iters: usize,
        outer_tol: f64,
    ) -> PyResult<Self> {
        let hp = Hyperparams {
            lambda_,
            gamma: gamma.unwrap_or(lambda_),
            rho: rho.unwrap_or(lambda_),
            theta_reg: theta_reg.to_owned(),
            s_reg: s_reg.to_owned(),
            svm_c,
            cost_ell,
            inner_sweeps,
            tol_obj,
            outer_iters,
            outer_tol,
        };
        hp.to_core()?;
        Ok(hp)
    }

    fn __repr__(&self) -> String {
        format!(
            "Hyperparams(lambda_={}, gamma={}, rho={}, theta_reg='{}', s_reg='{}', svm_c={}, cost_ell={})",
            self.lambda_, self.gamma, self.rho, self.theta_reg, self.s_reg, self.svm_c, self.cost_ell
        )
    }
}

impl Hyperparams {
    fn to_core(&self) -> PyResult<stc_core::Hyperparams> {
        let hp = stc_core::Hyperparams {
            lambda: self.lambda_,
            gamma: self.gamma,
            rho: self.rho,
            theta_reg: parse_reg(&self.theta_reg)?,
            s_reg: parse_reg(&self.s_reg)?,
            svm_c: self.svm_c,
            cost_ell: self.cost_ell,
            inner_sweeps: self.inner_sweeps,
            tol_obj: self.tol_obj,
            outer_iters: self.outer_iters,
            outer_tol: self.outer_tol,
            ..stc_core::Hyperparams::default()
        };
        hp.validate().map_err(to_py)?;
        Ok(hp)
    }

    fn from_core(hp: &stc_core::Hyperparams) -> Self {
        Hyperparams {
            lambda_: hp.lambda,
            gamma: hp.gamma,
            rho: hp.rho,
            theta_reg: reg_name(hp.theta_reg).to_owned(),
            s_reg: reg_name(hp.s_reg).to_owned(),
            svm_c: hp.svm_c,
            cost_ell: hp.cost_ell,
            inner_sweeps: hp.inner_sweeps,
            tol_obj: hp.tol_obj,
            outer_iters: hp.outer_iters,
            outer_tol: hp.outer_tol,
        }
    }
}

/// Codes of one document.
#[pyclass(frozen)]
struct Encoding {
    inner: DocEncoding,
}

#[pymethods]
impl Encoding {
    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.inner.theta.clone()
    }

    /// One code per distinct word of the document, in word order.
    #[getter]
    fn word_codes(&self) -> Vec<Vec<f64>> {
        self.inner.word_codes().map(<[f64]>::to_vec).collect()
    }

    #[getter]
    fn objective(&self) -> f64 {
        self.inner.objective
    }

    #[getter]
    fn sweeps(&self) -> usize {
        self.inner.sweeps
    }
}

fn wrap(encodings: Vec<DocEncoding>) -> Vec<Encoding> {
    encodings.into_iter().map(|inner| Encoding { inner }).collect()
}

/// A trained dictionary, with a classifier when one was fitted.
#[pyclass(frozen)]
struct Model {
    inner: SavedModel,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Model {
            inner: load_model(path).map_err(to_py)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_model(&self.inner, path).map_err(to_py)
    }

    /// "stc" or "medstc".
    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner {
            SavedModel::Stc(_) => "stc",
            SavedModel::MedStc(_) => "medstc",
        }
    }

    #[getter]
    fn num_topics(&self) -> usize {
        self.inner.beta().num_topics()
    }

    #[getter]
    fn hyperparams(&self) -> Hyperparams {
        Hyperparams::from_core(self.inner.hyperparams())
    }

    /// Dictionary rows, one per topic.
    fn beta(&self) -> Vec<Vec<f64>> {
        self.inner.beta().rows().map(<[f64]>::to_vec).collect()
    }

    /// Classifier weights, one row per class.
    fn eta(&self) -> Option<Vec<Vec<f64>>> {
        self.inner.classifier().map(|c| c.rows().map(<[f64]>::to_vec).collect())
    }

    /// `(iteration, step, objective)` after every half-step of training.
    fn trace(&self) -> Vec<(usize, String, f64)> {
        let trace = match &self.inner {
            SavedModel::Stc(m) => &m.trace,
            SavedModel::MedStc(m) => &m.trace,
        };
        trace
            .iter()
            .map(|t| (t.iter, t.step.to_string(), t.objective))
            .collect()
    }

    /// Unsupervised codes of every document of `corpus`.
    fn encode(&self, py: Python<'_>, corpus: &Corpus) -> PyResult<Vec<Encoding>> {
        let hp = stc_core::Hyperparams {
            svm_c: 0.0,
            ..self.inner.hyperparams().clone()
        };
        let beta = self.inner.beta();
        let codes = py
            .detach(|| encode_corpus(&corpus.inner, beta, &hp, None))
            .map_err(to_py)?;
        Ok(wrap(codes))
    }

    fn predict(&self, py: Python<'_>, corpus: &Corpus) -> PyResult<Vec<usize>> {
        let eta: &ClassifierWeights = self
            .inner
            .classifier()
            .ok_or_else(|| PyValueError::new_err("model has no classifier"))?;
        let codes = self.encode(py, corpus)?;
        Ok(codes.iter().map(|e| predict(eta, &e.inner.theta)).collect())
    }

    /// The `m` heaviest `(term, weight)` pairs of `topic`.
    fn top_words(&self, topic: usize, m: usize, vocab: Vec<String>) -> PyResult<Vec<(String, f64)>> {
        let text: String = vocab.iter().map(|t| format!("{t}\n")).collect();
        let vocab = load_vocabulary(text.as_bytes()).map_err(to_py)?;
        metrics::top_words(self.inner.beta(), topic, m, &vocab).map_err(to_py)
    }
}

fn core_hp(hp: Option<&Hyperparams>) -> PyResult<stc_core::Hyperparams> {
    match hp {
        Some(h) => h.to_core(),
        None => Ok(stc_core::Hyperparams::default()),
    }
}

/// Unsupervised training. Returns the model and the training codes.
#[pyfunction]
#[pyo3(name = "train_stc", signature = (corpus, num_topics, hyperparams=None, seed=0))]
fn py_train_stc(
    py: Python<'_>,
    corpus: &Corpus,
    num_topics: usize,
    hyperparams: Option<&Hyperparams>,
    seed: u64,
) -> PyResult<(Model, Vec<Encoding>)> {
    let hp = core_hp(hyperparams)?;
    let (model, codes) = py
        .detach(|| train_stc(&corpus.inner, num_topics, &hp, seed))
        .map_err(to_py)?;
    Ok((
        Model {
            inner: SavedModel::Stc(model),
        },
        wrap(codes),
    ))
}

/// Max-margin supervised training. Returns the model and the training codes.
#[pyfunction]
#[pyo3(name = "train_medstc", signature = (corpus, labels, num_topics, hyperparams=None, seed=0))]
fn py_train_medstc(
    py: Python<'_>,
    corpus: &Corpus,
    labels: Vec<usize>,
    num_topics: usize,
    hyperparams: Option<&Hyperparams>,
    seed: u64,
) -> PyResult<(Model, Vec<Encoding>)> {
    let hp = core_hp(hyperparams)?;
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    let data = LabeledCorpus::new(corpus.inner.clone(), labels, num_classes).map_err(to_py)?;
    let (model, codes) = py
        .detach(|| train_medstc(&data, num_topics, &hp, seed))
        .map_err(to_py)?;
    Ok((
        Model {
            inner: SavedModel::MedStc(model),
        },
        wrap(codes),
    ))
}

#[pyfunction]
fn project_to_simplex(v: Vec<f64>) -> PyResult<Vec<f64>> {
    numerics::project_to_simplex(&v).map_err(to_py)
}

#[pyfunction]
fn poisson_loss(w: u32, mean: f64) -> PyResult<f64> {
    numerics::poisson_loss(w, mean).map_err(to_py)
}

#[pyfunction]
fn unnorm_kl(w: u32, mean: f64) -> PyResult<f64> {
    numerics::unnorm_kl(w, mean).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (code, zero_tol=0.0))]
fn sparsity_ratio(code: Vec<f64>, zero_tol: f64) -> f64 {
    metrics::sparsity_ratio(&code, zero_tol)
}

#[pyfunction]
fn accuracy(predictions: Vec<usize>, labels: Vec<usize>) -> PyResult<f64> {
    metrics::accuracy(&predictions, &labels).map_err(to_py)
}

#[pymodule]
fn pystc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Corpus>()?;
    m.add_class::<Hyperparams>()?;
    m.add_class::<Encoding>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(py_train_stc, m)?)?;
    m.add_function(wrap_pyfunction!(py_train_medstc, m)?)?;
    m.add_function(wrap_pyfunction!(project_to_simplex, m)?)?;
    m.add_function(wrap_pyfunction!(poisson_loss, m)?)?;
    m.add_function(wrap_pyfunction!(unnorm_kl, m)?)?;
    m.add_function(wrap_pyfunction!(sparsity_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy, m)?)?;
    Ok(())
}
