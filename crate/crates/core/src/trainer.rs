//! Alternating minimization for the unsupervised and max-margin models.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coder::{encode_impl, gather_columns, objective_with_columns, DocEncoding, Supervision};
use crate::corpus::{Corpus, LabeledCorpus};
use crate::dictionary::{update_dictionary, Dictionary};
use crate::error::{Result, StcError};
use crate::numerics::project_in_place;
use crate::params::Hyperparams;
use crate::svm::{hinge_risk, train_svm, ClassifierWeights, SvmFit, SvmParams};

/// Row-sum tolerance when checking dictionaries handed to the objectives.
const OBJECTIVE_SIMPLEX_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Step {
    Init,
    Encode,
    Dict,
    Svm,
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Step::Init => "init",
            Step::Encode => "encode",
            Step::Dict => "dict",
            Step::Svm => "svm",
        })
    }
}

/// Objective value after one half-step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub step: Step,
    pub objective: f64,
}

/// What a training observer sees after every half-step.
pub struct TrainState<'a> {
    pub iter: usize,
    pub step: Step,
    pub objective: f64,
    pub beta: &'a Dictionary,
    pub encodings: &'a [DocEncoding],
    pub eta: Option<&'a ClassifierWeights>,
}

#[derive(Debug, Clone)]
pub struct StcModel {
    pub beta: Dictionary,
    pub hp: Hyperparams,
    pub trace: Vec<TraceEntry>,
    pub seed: u64,
    /// Classifier fitted on the learned codes after training, if any.
    pub classifier: Option<ClassifierWeights>,
}

#[derive(Debug, Clone)]
pub struct MedStcModel {
    pub beta: Dictionary,
    pub eta: ClassifierWeights,
    pub hp: Hyperparams,
    pub trace: Vec<TraceEntry>,
    pub seed: u64,
}

impl StcModel {
    pub fn objective_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|t| t.objective).collect()
    }
}

impl MedStcModel {
    pub fn objective_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|t| t.objective).collect()
    }
}

fn check_constraints(beta: &Dictionary, encodings: &[DocEncoding]) -> Result<()> {
    let violation = beta.max_simplex_violation();
    if violation > OBJECTIVE_SIMPLEX_TOL {
        return Err(StcError::contract(format!(
            "dictionary row off the simplex by {violation:e}"
        )));
    }
    for (d, enc) in encodings.iter().enumerate() {
        if enc.theta.iter().chain(&enc.word_codes).any(|&v| !(v >= 0.0)) {
            return Err(StcError::contract(format!("document {d} has a negative or NaN code")));
        }
    }
    Ok(())
}

/// Corpus objective: reconstruction loss plus all code regularizers, with
/// `log(w!)` dropped.
pub fn stc_objective(beta: &Dictionary, encodings: &[DocEncoding], corpus: &Corpus, hp: &Hyperparams) -> Result<f64> {
    if encodings.len() != corpus.len() {
        return Err(StcError::contract(format!(
            "{} encodings for {} documents",
            encodings.len(),
            corpus.len()
        )));
    }
    if corpus.is_empty() {
        return Ok(0.0);
    }
    check_constraints(beta, encodings)?;
    let k = beta.num_topics();
    for (d, (enc, doc)) in encodings.iter().zip(corpus.documents()).enumerate() {
        if enc.theta.len() != k || enc.word_codes.len() != k * doc.len() {
            return Err(StcError::contract(format!("encoding {d} does not match its document")));
        }
        if doc.word_indices().any(|w| w >= beta.num_words()) {
            return Err(StcError::contract(format!(
                "document {d} has words outside the dictionary"
            )));
        }
    }
    let per_doc: Vec<f64> = corpus
        .documents()
        .par_iter()
        .zip(encodings.par_iter())
        .map(|(doc, enc)| objective_with_columns(doc, &gather_columns(doc, beta), enc, hp))
        .collect();
    Ok(per_doc.into_iter().sum())
}

/// Supervised objective: `stc_objective + C * hinge_risk + 1/2 ||eta||^2`.
pub fn medstc_objective(
    beta: &Dictionary,
    encodings: &[DocEncoding],
    corpus: &Corpus,
    labels: &[usize],
    eta: &ClassifierWeights,
    hp: &Hyperparams,
) -> Result<f64> {
    let base = stc_objective(beta, encodings, corpus, hp)?;
    if corpus.is_empty() {
        return Ok(0.5 * eta.squared_norm());
    }
    let thetas: Vec<&[f64]> = encodings.iter().map(|e| e.theta.as_slice()).collect();
    let risk = hinge_risk(eta, &thetas, labels, hp.cost_ell)?;
    Ok(base + hp.svm_c * risk + 0.5 * eta.squared_norm())
}

/// Near-uniform dictionary: `1/N` plus seeded `U(0, jitter)` noise per
/// entry, projected back onto the simplex. `jitter = 0` gives exact rows.
pub fn init_dictionary(num_topics: usize, num_words: usize, seed: u64, jitter: f64) -> Result<Dictionary> {
    let mut beta = Dictionary::uniform(num_topics, num_words)?;
    if jitter > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = 1.0 / num_words as f64;
        let mut data: Vec<f64> = (0..num_topics * num_words)
            .map(|_| base + rng.gen::<f64>() * jitter)
            .collect();
        for row in data.chunks_exact_mut(num_words) {
            project_in_place(row, 1.0);
        }
        beta = Dictionary::from_raw(num_topics, num_words, data);
    }
    Ok(beta)
}

/// Starting point of training: a jittered uniform dictionary (jitter
/// `1e-3 / N`) and `1/K` for every code entry.
pub fn init_model(corpus: &Corpus, num_topics: usize, seed: u64) -> Result<(Dictionary, Vec<DocEncoding>)> {
    let n = corpus.num_words();
    let beta = init_dictionary(num_topics, n, seed, 1e-3 / n.max(1) as f64)?;
    let encodings = corpus
        .documents()
        .iter()
        .map(|d| DocEncoding::uniform(num_topics, d.len()))
        .collect();
    Ok((beta, encodings))
}

/// Encodes every document against `beta` in parallel; results keep
/// document order and do not depend on the thread count.
pub fn encode_corpus(
    corpus: &Corpus,
    beta: &Dictionary,
    hp: &Hyperparams,
    warm: Option<&[DocEncoding]>,
) -> Result<Vec<DocEncoding>> {
    if let Some(w) = warm {
        if w.len() != corpus.len() {
            return Err(StcError::contract("warm start does not match corpus"));
        }
    }
    corpus
        .documents()
        .par_iter()
        .enumerate()
        .map(|(d, doc)| encode_impl(d, doc, beta, hp, warm.map(|w| &w[d]), None))
        .collect()
}

fn encode_corpus_supervised(
    corpus: &Corpus,
    labels: &[usize],
    beta: &Dictionary,
    eta: &ClassifierWeights,
    hp: &Hyperparams,
    warm: &[DocEncoding],
) -> Result<Vec<DocEncoding>> {
    let num_docs = corpus.len();
    corpus
        .documents()
        .par_iter()
        .enumerate()
        .map(|(d, doc)| {
            let sup = Supervision {
                eta,
                label: labels[d],
                num_docs,
            };
            encode_impl(d, doc, beta, hp, Some(&warm[d]), Some(&sup))
        })
        .collect()
}

fn relative_change(prev: f64, cur: f64) -> f64 {
    let denom = prev.abs().max(f64::MIN_POSITIVE);
    (prev - cur).abs() / denom
}

fn record(trace: &mut Vec<TraceEntry>, iter: usize, step: Step, objective: f64) {
    log::info!("iter={iter} step={step} objective={objective}");
    trace.push(TraceEntry { iter, step, objective });
}

fn svm_params(hp: &Hyperparams, seed: u64) -> SvmParams {
    SvmParams {
        svm_c: hp.svm_c,
        cost_ell: hp.cost_ell,
        max_epochs: hp.svm_max_epochs,
        tol: hp.svm_tol,
        seed,
    }
}

fn training_error(iter: usize) -> impl Fn(StcError) -> StcError {
    move |e| match e {
        e @ StcError::Numerical { .. } => StcError::Training {
            iter,
            source: Box::new(e),
        },
        other => other,
    }
}

/// Unsupervised training.
pub fn train_stc(
    corpus: &Corpus,
    num_topics: usize,
    hp: &Hyperparams,
    seed: u64,
) -> Result<(StcModel, Vec<DocEncoding>)> {
    train_stc_observed(corpus, num_topics, hp, seed, |_| {})
}

/// [`train_stc`] with a callback after every half-step.
pub fn train_stc_observed(
    corpus: &Corpus,
    num_topics: usize,
    hp: &Hyperparams,
    seed: u64,
    mut observe: impl FnMut(&TrainState<'_>),
) -> Result<(StcModel, Vec<DocEncoding>)> {
    hp.validate()?;
    if corpus.is_empty() {
        return Err(StcError::domain("cannot train on an empty corpus"));
    }
    if num_topics == 0 {
        return Err(StcError::domain("need at least one topic"));
    }
    let (mut beta, mut encodings) = init_model(corpus, num_topics, seed)?;
    let mut trace = Vec::new();
    let mut prev = stc_objective(&beta, &encodings, corpus, hp)?;
    record(&mut trace, 0, Step::Init, prev);
    observe(&TrainState {
        iter: 0,
        step: Step::Init,
        objective: prev,
        beta: &beta,
        encodings: &encodings,
        eta: None,
    });

    for iter in 1..=hp.outer_iters {
        encodings = encode_corpus(corpus, &beta, hp, Some(&encodings)).map_err(training_error(iter))?;
        let f = stc_objective(&beta, &encodings, corpus, hp)?;
        record(&mut trace, iter, Step::Encode, f);
        observe(&TrainState {
            iter,
            step: Step::Encode,
            objective: f,
            beta: &beta,
            encodings: &encodings,
            eta: None,
        });

        let up = update_dictionary(&beta, &encodings, corpus, hp.pg_steps, hp.step0, hp.mean_floor)?;
        if up.stalled {
            log::warn!("iter={iter} dictionary step stalled");
        }
        beta = up.beta;
        let f = stc_objective(&beta, &encodings, corpus, hp)?;
        record(&mut trace, iter, Step::Dict, f);
        observe(&TrainState {
            iter,
            step: Step::Dict,
            objective: f,
            beta: &beta,
            encodings: &encodings,
            eta: None,
        });

        let change = relative_change(prev, f);
        prev = f;
        if change < hp.outer_tol {
            break;
        }
    }

    let model = StcModel {
        beta,
        hp: hp.clone(),
        trace,
        seed,
        classifier: None,
    };
    Ok((model, encodings))
}

/// Fits a classifier on already-learned document codes.
pub fn fit_classifier(
    encodings: &[DocEncoding],
    labels: &[usize],
    num_classes: usize,
    hp: &Hyperparams,
    seed: u64,
) -> Result<SvmFit> {
    let thetas: Vec<&[f64]> = encodings.iter().map(|e| e.theta.as_slice()).collect();
    train_svm(&thetas, labels, num_classes, &svm_params(hp, seed))
}

/// Max-margin supervised training.
pub fn train_medstc(
    data: &LabeledCorpus,
    num_topics: usize,
    hp: &Hyperparams,
    seed: u64,
) -> Result<(MedStcModel, Vec<DocEncoding>)> {
    train_medstc_observed(data, num_topics, hp, seed, |_| {})
}

/// [`train_medstc`] with a callback after every half-step.
pub fn train_medstc_observed(
    data: &LabeledCorpus,
    num_topics: usize,
    hp: &Hyperparams,
    seed: u64,
    mut observe: impl FnMut(&TrainState<'_>),
) -> Result<(MedStcModel, Vec<DocEncoding>)> {
    hp.validate()?;
    let corpus = data.corpus();
    let labels = data.labels();
    if corpus.is_empty() {
        return Err(StcError::domain("cannot train on an empty corpus"));
    }
    if data.num_classes() < 2 {
        return Err(StcError::domain("supervised training needs at least two classes"));
    }
    if num_topics == 0 {
        return Err(StcError::domain("need at least one topic"));
    }
    let (mut beta, mut encodings) = init_model(corpus, num_topics, seed)?;
    let mut eta = ClassifierWeights::zeros(data.num_classes(), num_topics);
    let mut trace = Vec::new();
    let objective = |beta: &Dictionary, enc: &[DocEncoding], eta: &ClassifierWeights| {
        medstc_objective(beta, enc, corpus, labels, eta, hp)
    };
    let mut prev = objective(&beta, &encodings, &eta)?;
    record(&mut trace, 0, Step::Init, prev);
    observe(&TrainState {
        iter: 0,
        step: Step::Init,
        objective: prev,
        beta: &beta,
        encodings: &encodings,
        eta: Some(&eta),
    });

    for iter in 1..=hp.outer_iters {
        encodings =
            encode_corpus_supervised(corpus, labels, &beta, &eta, hp, &encodings).map_err(training_error(iter))?;
        let f = objective(&beta, &encodings, &eta)?;
        record(&mut trace, iter, Step::Encode, f);
        observe(&TrainState {
            iter,
            step: Step::Encode,
            objective: f,
            beta: &beta,
            encodings: &encodings,
            eta: Some(&eta),
        });

        let up = update_dictionary(&beta, &encodings, corpus, hp.pg_steps, hp.step0, hp.mean_floor)?;
        if up.stalled {
            log::warn!("iter={iter} dictionary step stalled");
        }
        beta = up.beta;
        let f_dict = objective(&beta, &encodings, &eta)?;
        record(&mut trace, iter, Step::Dict, f_dict);
        observe(&TrainState {
            iter,
            step: Step::Dict,
            objective: f_dict,
            beta: &beta,
            encodings: &encodings,
            eta: Some(&eta),
        });

        let fit = fit_classifier(&encodings, labels, data.num_classes(), hp, seed)?;
        let f_svm = objective(&beta, &encodings, &fit.eta)?;
        // Keep the previous weights if the refit is no better on the new codes.
        let f = if f_svm <= f_dict {
            eta = fit.eta;
            f_svm
        } else {
            f_dict
        };
        record(&mut trace, iter, Step::Svm, f);
        observe(&TrainState {
            iter,
            step: Step::Svm,
            objective: f,
            beta: &beta,
            encodings: &encodings,
            eta: Some(&eta),
        });

        let change = relative_change(prev, f);
        prev = f;
        if change < hp.outer_tol {
            break;
        }
    }

    let model = MedStcModel {
        beta,
        eta,
        hp: hp.clone(),
        trace,
        seed,
    };
    Ok((model, encodings))
}
