//! Topic dictionary and its projected-gradient update.

use rayon::prelude::*;

use crate::coder::DocEncoding;
use crate::corpus::{Corpus, Document};
use crate::error::{Result, StcError};
use crate::numerics::{is_on_simplex, project_in_place, CountLoss, Poisson, SIMPLEX_EPS};

/// Sufficient-decrease constant of the Armijo rule.
pub const ARMIJO_C: f64 = 1e-4;
/// Halvings tried before a projected-gradient step is declared stalled.
pub const MAX_HALVINGS: usize = 30;

/// Documents per block in parallel reductions. Fixed so that sums do not
/// depend on the thread count.
const REDUCE_BLOCK: usize = 64;

/// `K x N` matrix whose rows are distributions over the vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    num_topics: usize,
    num_words: usize,
    data: Vec<f64>,
}

impl Dictionary {
    /// Builds a dictionary from rows, checking each is on the simplex.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let num_topics = rows.len();
        let num_words = rows.first().map_or(0, Vec::len);
        if num_topics == 0 || num_words == 0 {
            return Err(StcError::domain("dictionary needs K >= 1 and N >= 1"));
        }
        let mut data = Vec::with_capacity(num_topics * num_words);
        for (k, row) in rows.into_iter().enumerate() {
            if row.len() != num_words {
                return Err(StcError::contract(format!(
                    "row {k} has {} entries, expected {num_words}",
                    row.len()
                )));
            }
            if !is_on_simplex(&row, SIMPLEX_EPS) {
                return Err(StcError::domain(format!("row {k} is not on the probability simplex")));
            }
            data.extend(row);
        }
        Ok(Dictionary {
            num_topics,
            num_words,
            data,
        })
    }

    /// Every row equal to `1/N`.
    pub fn uniform(num_topics: usize, num_words: usize) -> Result<Self> {
        if num_topics == 0 || num_words == 0 {
            return Err(StcError::domain("dictionary needs K >= 1 and N >= 1"));
        }
        Ok(Dictionary {
            num_topics,
            num_words,
            data: vec![1.0 / num_words as f64; num_topics * num_words],
        })
    }

    /// Row-major data, unchecked. Callers guarantee the simplex invariant.
    pub(crate) fn from_raw(num_topics: usize, num_words: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), num_topics * num_words);
        Dictionary {
            num_topics,
            num_words,
            data,
        }
    }

    pub fn num_topics(&self) -> usize {
        self.num_topics
    }

    pub fn num_words(&self) -> usize {
        self.num_words
    }

    #[inline]
    pub fn get(&self, topic: usize, word: usize) -> f64 {
        self.data[topic * self.num_words + word]
    }

    pub fn row(&self, topic: usize) -> &[f64] {
        &self.data[topic * self.num_words..(topic + 1) * self.num_words]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.num_words)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Largest `|sum(row) - 1|` over all rows; negative entries give infinity.
    pub fn max_simplex_violation(&self) -> f64 {
        self.rows()
            .map(|r| {
                if r.iter().any(|&x| x < 0.0 || !x.is_finite()) {
                    f64::INFINITY
                } else {
                    (r.iter().sum::<f64>() - 1.0).abs()
                }
            })
            .fold(0.0, f64::max)
    }
}

fn check_alignment(beta: &Dictionary, encodings: &[DocEncoding], corpus: &Corpus) -> Result<()> {
    if encodings.len() != corpus.len() {
        return Err(StcError::contract(format!(
            "{} encodings for {} documents",
            encodings.len(),
            corpus.len()
        )));
    }
    if corpus.num_words() > beta.num_words() {
        return Err(StcError::contract("corpus vocabulary is larger than the dictionary"));
    }
    for (d, (enc, doc)) in encodings.iter().zip(corpus.documents()).enumerate() {
        if enc.theta.len() != beta.num_topics() || enc.word_codes.len() != doc.len() * beta.num_topics() {
            return Err(StcError::contract(format!("encoding {d} does not match its document")));
        }
    }
    Ok(())
}

#[inline]
fn reconstruction(data: &[f64], num_words: usize, s: &[f64], word: usize) -> f64 {
    s.iter()
        .enumerate()
        .map(|(k, sk)| sk * data[k * num_words + word])
        .sum()
}

fn block_loss(data: &[f64], num_words: usize, docs: &[Document], encs: &[DocEncoding], floor: f64) -> f64 {
    let mut total = 0.0;
    for (doc, enc) in docs.iter().zip(encs) {
        for (i, &(n, w)) in doc.entries().iter().enumerate() {
            let mean = reconstruction(data, num_words, enc.word_code(i), n).max(floor);
            total += Poisson.loss(w, mean);
        }
    }
    total
}

fn loss_of(data: &[f64], num_words: usize, encodings: &[DocEncoding], corpus: &Corpus, floor: f64) -> f64 {
    corpus
        .documents()
        .par_chunks(REDUCE_BLOCK)
        .zip(encodings.par_chunks(REDUCE_BLOCK))
        .map(|(docs, encs)| block_loss(data, num_words, docs, encs, floor))
        .collect::<Vec<_>>()
        .into_iter()
        .sum()
}

/// Total Poisson reconstruction loss `sum_{d, n in I_d} loss(w_dn, s_dn . beta_n)`.
pub fn reconstruction_loss(
    beta: &Dictionary,
    encodings: &[DocEncoding],
    corpus: &Corpus,
    mean_floor: f64,
) -> Result<f64> {
    check_alignment(beta, encodings, corpus)?;
    Ok(loss_of(&beta.data, beta.num_words, encodings, corpus, mean_floor))
}

/// Gradient of the total reconstruction loss with respect to `beta`,
/// row-major `K x N`. Columns of words that appear nowhere are zero.
pub fn reconstruction_gradient(
    beta: &Dictionary,
    encodings: &[DocEncoding],
    corpus: &Corpus,
    mean_floor: f64,
) -> Result<Vec<f64>> {
    check_alignment(beta, encodings, corpus)?;
    let (k_topics, num_words) = (beta.num_topics, beta.num_words);
    let partials: Vec<Vec<f64>> = corpus
        .documents()
        .par_chunks(REDUCE_BLOCK)
        .zip(encodings.par_chunks(REDUCE_BLOCK))
        .map(|(docs, encs)| {
            let mut g = vec![0.0; k_topics * num_words];
            for (doc, enc) in docs.iter().zip(encs) {
                for (i, &(n, w)) in doc.entries().iter().enumerate() {
                    let s = enc.word_code(i);
                    let mean = reconstruction(&beta.data, num_words, s, n).max(mean_floor);
                    let factor = Poisson.dloss(w, mean);
                    for (k, sk) in s.iter().enumerate() {
                        g[k * num_words + n] += sk * factor;
                    }
                }
            }
            g
        })
        .collect();
    let mut grad = vec![0.0; k_topics * num_words];
    for part in partials {
        for (a, b) in grad.iter_mut().zip(part) {
            *a += b;
        }
    }
    Ok(grad)
}

/// Outcome of [`update_dictionary`].
#[derive(Debug, Clone)]
pub struct DictionaryUpdate {
    pub beta: Dictionary,
    pub loss_before: f64,
    pub loss_after: f64,
    /// Accepted projected-gradient steps.
    pub steps: usize,
    /// True when not a single step passed the Armijo test; `beta` is then
    /// the input unchanged.
    pub stalled: bool,
}

/// Projected gradient descent on the reconstruction loss with every row
/// kept on the simplex. Each step backtracks from `step0` by halving until
/// the Armijo condition along the projection arc holds.
pub fn update_dictionary(
    beta: &Dictionary,
    encodings: &[DocEncoding],
    corpus: &Corpus,
    pg_steps: usize,
    step0: f64,
    mean_floor: f64,
) -> Result<DictionaryUpdate> {
    check_alignment(beta, encodings, corpus)?;
    if pg_steps == 0 || !(step0 > 0.0) {
        return Err(StcError::domain("pg_steps must be >= 1 and step0 > 0"));
    }
    let num_words = beta.num_words;
    let mut current = beta.data.clone();
    let loss_before = loss_of(&current, num_words, encodings, corpus, mean_floor);
    let mut loss = loss_before;
    let mut steps = 0;
    let mut stalled = false;
    let mut candidate = vec![0.0; current.len()];

    'outer: for _ in 0..pg_steps {
        let grad = reconstruction_gradient(
            &Dictionary::from_raw(beta.num_topics, num_words, current.clone()),
            encodings,
            corpus,
            mean_floor,
        )?;
        let mut step = step0;
        for _ in 0..=MAX_HALVINGS {
            for ((c, x), g) in candidate.iter_mut().zip(&current).zip(&grad) {
                *c = x - step * g;
            }
            for row in candidate.chunks_exact_mut(num_words) {
                project_in_place(row, 1.0);
            }
            let decrease: f64 = grad
                .iter()
                .zip(candidate.iter().zip(&current))
                .map(|(g, (c, x))| g * (c - x))
                .sum();
            let cand_loss = loss_of(&candidate, num_words, encodings, corpus, mean_floor);
            if cand_loss <= loss + ARMIJO_C * decrease {
                if candidate == current {
                    break 'outer;
                }
                std::mem::swap(&mut current, &mut candidate);
                loss = cand_loss;
                steps += 1;
                continue 'outer;
            }
            step *= 0.5;
        }
        stalled = steps == 0;
        break;
    }

    let beta = Dictionary::from_raw(beta.num_topics, num_words, current);
    Ok(DictionaryUpdate {
        beta,
        loss_before,
        loss_after: loss,
        steps,
        stalled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn single(k: usize, s: &[f64], theta: &[f64]) -> DocEncoding {
        assert_eq!(theta.len(), k);
        DocEncoding {
            theta: theta.to_vec(),
            word_codes: s.to_vec(),
            objective: 0.0,
            sweeps: 0,
        }
    }

    #[test]
    fn stationary_single_entry_gradient() {
        let beta = Dictionary::from_rows(vec![vec![0.5, 0.5]]).unwrap();
        let corpus = Corpus::new(2, vec![Document::new(vec![(0, 1)]).unwrap()]).unwrap();
        let enc = vec![single(1, &[2.0], &[2.0])];
        let g = reconstruction_gradient(&beta, &enc, &corpus, 1e-12).unwrap();
        assert_abs_diff_eq!(g[0], 0.0, epsilon = 1e-15);
        // Word 1 appears nowhere.
        assert_eq!(g[1], 0.0);

        // Central difference of the loss s*b - w log(s*b) at b = 0.5.
        let f = |b: f64| 2.0 * b - (2.0 * b).ln();
        let h = 1e-6;
        let fd = (f(0.5 + h) - f(0.5 - h)) / (2.0 * h);
        assert!(fd.abs() < 1e-8);
    }

    #[test]
    fn zero_codes_give_zero_gradient() {
        let beta = Dictionary::uniform(2, 3).unwrap();
        let corpus = Corpus::new(3, vec![Document::new(vec![(0, 2), (2, 1)]).unwrap()]).unwrap();
        let enc = vec![single(2, &[0.0; 4], &[0.0, 0.0])];
        let g = reconstruction_gradient(&beta, &enc, &corpus, 1e-12).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn misaligned_encodings_rejected() {
        let beta = Dictionary::uniform(2, 3).unwrap();
        let corpus = Corpus::new(3, vec![Document::new(vec![(0, 2)]).unwrap()]).unwrap();
        assert!(reconstruction_gradient(&beta, &[], &corpus, 1e-12).is_err());
        let wrong = vec![single(2, &[0.0; 4], &[0.0, 0.0])];
        assert!(reconstruction_gradient(&beta, &wrong, &corpus, 1e-12).is_err());
    }

    #[test]
    fn stationary_dictionary_is_fixed() {
        // One doc over two words with counts matching beta * s exactly.
        let beta = Dictionary::from_rows(vec![vec![0.25, 0.75]]).unwrap();
        let corpus = Corpus::new(2, vec![Document::new(vec![(0, 1), (1, 3)]).unwrap()]).unwrap();
        let enc = vec![single(1, &[4.0, 4.0], &[4.0])];
        let g = reconstruction_gradient(&beta, &enc, &corpus, 1e-12).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-14));
        let up = update_dictionary(&beta, &enc, &corpus, 10, 1.0, 1e-12).unwrap();
        for (a, b) in up.beta.as_slice().iter().zip(beta.as_slice()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn converges_to_vertex() {
        // loss = 3 b0 - 3 log(3 b0) is decreasing on (0, 1]; optimum [1, 0].
        let beta = Dictionary::uniform(1, 2).unwrap();
        let corpus = Corpus::new(2, vec![Document::new(vec![(0, 3)]).unwrap()]).unwrap();
        let enc = vec![single(1, &[3.0], &[3.0])];
        let mut b = beta;
        for _ in 0..50 {
            b = update_dictionary(&b, &enc, &corpus, 1, 1.0, 1e-12).unwrap().beta;
            assert!(b.max_simplex_violation() <= 1e-10);
        }
        assert!((b.get(0, 0) - 1.0).abs() < 1e-3, "{:?}", b.row(0));
        assert!(b.get(0, 1) < 1e-3);
    }

    #[test]
    fn symmetric_words_share_mass() {
        let beta = Dictionary::from_rows(vec![vec![0.8, 0.2]]).unwrap();
        let corpus = Corpus::new(2, vec![Document::new(vec![(0, 2), (1, 2)]).unwrap()]).unwrap();
        let enc = vec![single(1, &[1.5, 1.5], &[1.5])];
        let up = update_dictionary(&beta, &enc, &corpus, 200, 1.0, 1e-12).unwrap();
        assert!((up.beta.get(0, 0) - 0.5).abs() < 1e-6, "{:?}", up.beta.row(0));
        assert!((up.beta.get(0, 1) - 0.5).abs() < 1e-6);
        assert!(up.loss_after <= up.loss_before);
    }

    #[test]
    fn from_rows_validates() {
        assert!(Dictionary::from_rows(vec![vec![0.5, 0.6]]).is_err());
        assert!(Dictionary::from_rows(vec![vec![1.2, -0.2]]).is_err());
        assert!(Dictionary::from_rows(vec![vec![0.5, 0.5], vec![1.0]]).is_err());
        assert!(Dictionary::from_rows(vec![]).is_err());
    }
}
