//! Per-document hierarchical sparse coding with a fixed dictionary.
//!
//! For a document with index set `I`, the coder minimizes
//!
//! ```text
//! sum_n loss(w_n, s_n . beta_n) + lambda R_theta(theta)
//!     + sum_n ( gamma ||s_n - theta||^2 + rho R_s(s_n) )
//! ```
//!
//! over `theta >= 0` and `s_n >= 0` by exact coordinate minimization: each
//! word-code entry has a closed form (larger root of a quadratic, clamped at
//! zero) and the document code is a truncated or scaled average of the word
//! codes.

use crate::corpus::Document;
use crate::dictionary::Dictionary;
use crate::error::{Result, StcError};
use crate::numerics::poisson_loss_unchecked;
use crate::params::{Hyperparams, Regularizer};
use crate::svm::{loss_augmented_predict, ClassifierWeights};

/// Below this a dictionary entry is treated as exactly zero.
pub const BETA_ZERO_TOL: f64 = 1e-12;

/// Document code plus one word code per entry of the document.
#[derive(Debug, Clone, PartialEq)]
pub struct DocEncoding {
    /// Document code, length `K`.
    pub theta: Vec<f64>,
    /// Word codes stored densely, row `i` belongs to the document's `i`-th entry.
    pub word_codes: Vec<f64>,
    /// Per-document objective at the returned codes.
    pub objective: f64,
    /// Number of sweeps performed by the last encode call.
    pub sweeps: usize,
}

impl DocEncoding {
    /// Every entry of `theta` and of every word code set to `1/K`.
    pub fn uniform(num_topics: usize, num_entries: usize) -> Self {
        let v = 1.0 / num_topics as f64;
        DocEncoding {
            theta: vec![v; num_topics],
            word_codes: vec![v; num_topics * num_entries],
            objective: f64::NAN,
            sweeps: 0,
        }
    }

    pub fn num_topics(&self) -> usize {
        self.theta.len()
    }

    pub fn num_entries(&self) -> usize {
        self.word_codes.len() / self.theta.len().max(1)
    }

    pub fn word_code(&self, i: usize) -> &[f64] {
        let k = self.theta.len();
        &self.word_codes[i * k..(i + 1) * k]
    }

    pub fn word_codes(&self) -> impl Iterator<Item = &[f64]> {
        self.word_codes.chunks_exact(self.theta.len().max(1))
    }
}

/// Dictionary columns `beta_n` for each entry of `doc`, stored `|I| x K`.
pub(crate) fn gather_columns(doc: &Document, beta: &Dictionary) -> Vec<f64> {
    let k = beta.num_topics();
    let mut cols = Vec::with_capacity(doc.len() * k);
    for n in doc.word_indices() {
        cols.extend((0..k).map(|t| beta.get(t, n)));
    }
    cols
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Exact minimizer over `s >= 0` of the univariate word-code objective
///
/// `(mu + s b) - w log(mu + s b) + gamma (s - theta_k)^2 + rho R_s(s)`
///
/// where `mu` is the reconstruction contributed by the other topics.
pub(crate) fn solve_element(mu: f64, b: f64, theta_k: f64, w: u32, hp: &Hyperparams) -> f64 {
    let gamma = hp.gamma;
    let (rho_l1, gamma_eff) = match hp.s_reg {
        Regularizer::L1 => (hp.rho, gamma),
        Regularizer::L2 => (0.0, gamma + hp.rho),
    };
    if b < BETA_ZERO_TOL {
        let nu = match hp.s_reg {
            Regularizer::L1 => theta_k - hp.rho / (2.0 * gamma),
            Regularizer::L2 => gamma * theta_k / (gamma + hp.rho),
        };
        return nu.max(0.0);
    }
    let w = f64::from(w);
    let tau = b + rho_l1 - 2.0 * gamma * theta_k;
    let a = 2.0 * gamma_eff * b;
    let lin = 2.0 * gamma_eff * mu + b * tau;
    let cst = mu * tau - w * b;
    // Analytically positive; rounding can push it a hair below zero.
    let diff = 2.0 * gamma_eff * mu - b * tau;
    let disc = (diff * diff + 8.0 * gamma_eff * w * b * b).max(0.0);
    let sq = disc.sqrt();
    let nu = if lin >= 0.0 {
        let denom = -lin - sq;
        if denom == 0.0 {
            0.0
        } else {
            2.0 * cst / denom
        }
    } else {
        (-lin + sq) / (2.0 * a)
    };
    nu.max(0.0)
}

/// New value of `s_n[k]` with every other entry held fixed.
pub fn update_word_code_element(
    k: usize,
    s_n: &[f64],
    theta: &[f64],
    beta_col: &[f64],
    w: u32,
    hp: &Hyperparams,
) -> f64 {
    let mu: f64 = s_n
        .iter()
        .zip(beta_col)
        .enumerate()
        .filter(|&(j, _)| j != k)
        .map(|(_, (s, b))| s * b)
        .sum();
    solve_element(mu, beta_col[k], theta[k], w, hp)
}

/// One in-order sweep over all topics of a single word code.
pub fn update_word_code(s_n: &mut [f64], theta: &[f64], beta_col: &[f64], w: u32, hp: &Hyperparams) {
    let mut recon = dot(s_n, beta_col);
    for k in 0..s_n.len() {
        let b = beta_col[k];
        let mu = (recon - s_n[k] * b).max(0.0);
        let s = solve_element(mu, b, theta[k], w, hp);
        s_n[k] = s;
        recon = mu + s * b;
    }
}

/// Document code from the word codes (flattened `|I| x K`).
///
/// `shift`, when given, is added to the word-code mean before the
/// regularizer-specific shrinkage.
pub fn update_document_code(
    word_codes: &[f64],
    num_topics: usize,
    hp: &Hyperparams,
    shift: Option<&[f64]>,
) -> Result<Vec<f64>> {
    if num_topics == 0 || word_codes.is_empty() || !word_codes.len().is_multiple_of(num_topics) {
        return Err(StcError::domain("document code needs at least one word code"));
    }
    if shift.is_some_and(|s| s.len() != num_topics) {
        return Err(StcError::contract("shift length differs from topic count"));
    }
    let len = (word_codes.len() / num_topics) as f64;
    let mut mean = vec![0.0; num_topics];
    for code in word_codes.chunks_exact(num_topics) {
        for (m, s) in mean.iter_mut().zip(code) {
            *m += s;
        }
    }
    for (k, m) in mean.iter_mut().enumerate() {
        *m /= len;
        if let Some(shift) = shift {
            *m += shift[k];
        }
    }
    let theta = match hp.theta_reg {
        Regularizer::L1 => {
            let cut = hp.lambda / (2.0 * hp.gamma * len);
            mean.iter().map(|&m| (m - cut).max(0.0)).collect()
        }
        Regularizer::L2 => {
            let scale = hp.gamma / (hp.lambda / len + hp.gamma);
            mean.iter().map(|&m| (scale * m).max(0.0)).collect()
        }
    };
    Ok(theta)
}

/// Terms of the per-document objective that depend on `theta` given the
/// word codes.
fn theta_terms(theta: &[f64], word_codes: &[f64], hp: &Hyperparams) -> f64 {
    let k = theta.len();
    let coupling: f64 = word_codes
        .chunks_exact(k)
        .map(|s| s.iter().zip(theta).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum();
    hp.theta_reg.penalty(hp.lambda, theta) + hp.gamma * coupling
}

/// Per-document objective (the document's summand of the corpus objective).
pub fn document_objective(doc: &Document, beta: &Dictionary, enc: &DocEncoding, hp: &Hyperparams) -> f64 {
    let cols = gather_columns(doc, beta);
    objective_with_columns(doc, &cols, enc, hp)
}

pub(crate) fn objective_with_columns(doc: &Document, cols: &[f64], enc: &DocEncoding, hp: &Hyperparams) -> f64 {
    let k = enc.theta.len();
    let mut total = hp.theta_reg.penalty(hp.lambda, &enc.theta);
    for (i, &(_, w)) in doc.entries().iter().enumerate() {
        let s = &enc.word_codes[i * k..(i + 1) * k];
        let col = &cols[i * k..(i + 1) * k];
        let mean = dot(s, col).max(hp.mean_floor);
        let coupling: f64 = s.iter().zip(&enc.theta).map(|(a, b)| (a - b) * (a - b)).sum();
        total += poisson_loss_unchecked(w, mean) + hp.gamma * coupling + hp.s_reg.penalty(hp.rho, s);
    }
    total
}

/// Label information for supervised encoding.
#[derive(Debug, Clone, Copy)]
pub struct Supervision<'a> {
    pub eta: &'a ClassifierWeights,
    pub label: usize,
    /// Training-set size `D`, which scales the per-document hinge term.
    pub num_docs: usize,
}

impl Supervision<'_> {
    /// `(C / D) * max_y [cost(y) + eta_y . theta - eta_label . theta]`.
    fn hinge_term(&self, theta: &[f64], hp: &Hyperparams) -> f64 {
        let truth = self.eta.score(self.label, theta);
        let worst = (0..self.eta.num_classes())
            .map(|y| {
                let cost = if y == self.label { 0.0 } else { hp.cost_ell };
                cost + self.eta.score(y, theta) - truth
            })
            .fold(f64::NEG_INFINITY, f64::max);
        hp.svm_c / self.num_docs as f64 * worst
    }
}

/// Encodes one document against a fixed dictionary.
///
/// Starts from `init` when given (warm start), otherwise from uniform `1/K`
/// codes.
pub fn encode_document(
    doc: &Document,
    beta: &Dictionary,
    hp: &Hyperparams,
    init: Option<&DocEncoding>,
) -> Result<DocEncoding> {
    encode_impl(0, doc, beta, hp, init, None)
}

/// Encodes one labelled training document; the document-code update uses
/// the mean shifted by the loss-augmented prediction of `sup.eta`.
pub fn encode_document_supervised(
    doc: &Document,
    beta: &Dictionary,
    hp: &Hyperparams,
    sup: &Supervision<'_>,
    init: Option<&DocEncoding>,
) -> Result<DocEncoding> {
    encode_impl(0, doc, beta, hp, init, Some(sup))
}

pub(crate) fn encode_impl(
    doc_id: usize,
    doc: &Document,
    beta: &Dictionary,
    hp: &Hyperparams,
    init: Option<&DocEncoding>,
    sup: Option<&Supervision<'_>>,
) -> Result<DocEncoding> {
    let k = beta.num_topics();
    if doc.is_empty() {
        return Err(StcError::domain("cannot encode an empty document"));
    }
    if let Some(w) = doc.word_indices().find(|&w| w >= beta.num_words()) {
        return Err(StcError::contract(format!(
            "word {w} is outside the dictionary's {} words",
            beta.num_words()
        )));
    }
    let mut enc = match init {
        Some(e) => {
            if e.theta.len() != k || e.word_codes.len() != k * doc.len() {
                return Err(StcError::contract("warm-start encoding does not match document"));
            }
            e.clone()
        }
        None => DocEncoding::uniform(k, doc.len()),
    };
    if let Some(sup) = sup {
        if sup.eta.num_topics() != k || sup.label >= sup.eta.num_classes() || sup.num_docs == 0 {
            return Err(StcError::contract("supervision does not match dictionary"));
        }
    }
    // A zero hinge weight leaves exactly the unsupervised problem.
    let sup = sup.filter(|_| hp.svm_c > 0.0);

    let cols = gather_columns(doc, beta);
    let total = |enc: &DocEncoding| {
        let base = objective_with_columns(doc, &cols, enc, hp);
        match sup {
            Some(s) => base + s.hinge_term(&enc.theta, hp),
            None => base,
        }
    };
    let mut obj = total(&enc);
    enc.sweeps = 0;
    for sweep in 1..=hp.inner_sweeps {
        for (i, &(_, w)) in doc.entries().iter().enumerate() {
            let col = &cols[i * k..(i + 1) * k];
            update_word_code(&mut enc.word_codes[i * k..(i + 1) * k], &enc.theta, col, w, hp);
        }
        match sup {
            None => enc.theta = update_document_code(&enc.word_codes, k, hp, None)?,
            Some(s) => {
                let y_hat = loss_augmented_predict(s.eta, &enc.theta, s.label, hp.cost_ell);
                let scale = hp.svm_c / (2.0 * s.num_docs as f64 * hp.gamma * doc.len() as f64);
                let shift: Vec<f64> = (0..k)
                    .map(|t| scale * (s.eta.get(s.label, t) - s.eta.get(y_hat, t)))
                    .collect();
                let candidate = update_document_code(&enc.word_codes, k, hp, Some(&shift))?;
                // The shifted mean is exact only while the loss-augmented
                // prediction stays put; keep the old code if it would ascend.
                let old = theta_terms(&enc.theta, &enc.word_codes, hp) + s.hinge_term(&enc.theta, hp);
                let new = theta_terms(&candidate, &enc.word_codes, hp) + s.hinge_term(&candidate, hp);
                if new <= old {
                    enc.theta = candidate;
                }
            }
        }
        let new_obj = total(&enc);
        enc.sweeps = sweep;
        if !new_obj.is_finite() || enc.theta.iter().chain(&enc.word_codes).any(|v| !v.is_finite()) {
            return Err(StcError::Numerical { doc: doc_id, sweep });
        }
        let change = (obj - new_obj).abs();
        obj = new_obj;
        if change <= hp.tol_obj * obj.abs() {
            break;
        }
    }
    enc.objective = match sup {
        Some(_) => objective_with_columns(doc, &cols, &enc, hp),
        None => obj,
    };
    Ok(enc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn hp(gamma: f64, rho: f64, lambda: f64) -> Hyperparams {
        Hyperparams {
            gamma,
            rho,
            lambda,
            ..Hyperparams::default()
        }
    }

    /// Golden-section minimizer of a unimodal function on `[lo, hi]`.
    fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = hi - r * (hi - lo);
        let mut x2 = lo + r * (hi - lo);
        let (mut f1, mut f2) = (f(x1), f(x2));
        for _ in 0..200 {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - r * (hi - lo);
                f1 = f(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + r * (hi - lo);
                f2 = f(x2);
            }
        }
        let mid = 0.5 * (lo + hi);
        [mid, 0.0].into_iter().min_by(|a, b| f(*a).total_cmp(&f(*b))).unwrap()
    }

    #[test]
    fn golden_ratio_root() {
        let h = hp(0.5, 0.0, 0.0);
        let s = update_word_code_element(0, &[0.3], &[0.0], &[1.0], 1, &h);
        let expected = (5f64.sqrt() - 1.0) / 2.0;
        assert_abs_diff_eq!(s, expected, epsilon = 1e-14);
        let oracle = golden_min(|x| x - x.ln() + 0.5 * x * x, 1e-12, 10.0);
        assert_abs_diff_eq!(s, oracle, epsilon = 1e-6);
    }

    #[test]
    fn zero_beta_branch() {
        let h = hp(0.5, 1.0, 0.0);
        let s = update_word_code_element(0, &[0.7], &[1.0], &[0.0], 3, &h);
        assert_eq!(s, 0.0);
        let h = hp(1.0, 1.0, 0.0);
        assert_abs_diff_eq!(solve_element(0.4, 0.0, 2.0, 5, &h), 1.5, epsilon = 1e-15);
    }

    #[test]
    fn negative_larger_root_clamps() {
        // gamma 0.5, rho 10, theta 0, beta 1, mu 1, w 1.
        let h = hp(0.5, 10.0, 0.0);
        let s = update_word_code_element(0, &[0.0, 1.0], &[0.0, 0.0], &[1.0, 1.0], 1, &h);
        assert_eq!(s, 0.0);
        // Larger root of v^2 + 12v + 10 = 0 is -6 + sqrt(26).
        assert_abs_diff_eq!(-6.0 + 26f64.sqrt(), -0.900_980_486_407_215, epsilon = 1e-12);
        let g = |x: f64| (1.0 + x) - (1.0 + x).ln() + 0.5 * x * x + 10.0 * x;
        let grid_best = (0..=10_000)
            .map(|i| i as f64 * 1e-3)
            .min_by(|a, b| g(*a).total_cmp(&g(*b)))
            .unwrap();
        assert_eq!(grid_best, 0.0);
    }

    #[test]
    fn sweep_over_two_topics() {
        let h = hp(0.5, 0.0, 0.0);
        let mut s = vec![0.0, 0.0];
        update_word_code(&mut s, &[0.0, 0.0], &[1.0, 0.0], 1, &h);
        assert_abs_diff_eq!(s[0], (5f64.sqrt() - 1.0) / 2.0, epsilon = 1e-14);
        assert_eq!(s[1], 0.0);
    }

    #[test]
    fn vanishing_regularization_recovers_count() {
        let h = hp(1e-6, 0.0, 0.0);
        let mut s = vec![1.0];
        update_word_code(&mut s, &[0.0], &[1.0], 100, &h);
        // Stationary point of s - 100 log s + 1e-6 s^2.
        let exact = (-1.0 + (1.0 + 8e-6 * 100.0f64).sqrt()) / 4e-6;
        assert_abs_diff_eq!(s[0], exact, epsilon = 1e-8);
        assert!((s[0] - 100.0).abs() < 0.05, "{}", s[0]);
    }

    #[test]
    fn l2_matches_l1_at_zero_rho() {
        let mut l1 = hp(0.7, 0.0, 0.0);
        let mut l2 = l1.clone();
        l1.s_reg = Regularizer::L1;
        l2.s_reg = Regularizer::L2;
        for &(mu, b, th, w) in &[
            (0.3, 0.4, 1.2, 3),
            (0.0, 0.9, 0.0, 1),
            (2.0, 0.01, 0.5, 7),
            (1.0, 0.0, 0.8, 2),
        ] {
            let a = solve_element(mu, b, th, w, &l1);
            let c = solve_element(mu, b, th, w, &l2);
            assert!((a - c).abs() <= 1e-12, "{a} vs {c}");
        }
    }

    #[test]
    fn l2_word_code_matches_oracle() {
        let mut h = hp(0.4, 2.0, 0.0);
        h.s_reg = Regularizer::L2;
        let (mu, b, th, w) = (0.5, 0.3, 1.5, 4u32);
        let s = solve_element(mu, b, th, w, &h);
        let g = |x: f64| {
            let m = mu + x * b;
            m - f64::from(w) * m.ln() + 0.4 * (x - th).powi(2) + 2.0 * x * x
        };
        let oracle = golden_min(g, 0.0, 50.0);
        assert_abs_diff_eq!(s, oracle, epsilon = 1e-6);
    }

    #[test]
    fn document_code_examples() {
        let h = hp(1.0, 0.0, 1.0);
        // Ten identical word codes with mean 0.5.
        let codes = vec![0.5; 10];
        let theta = update_document_code(&codes, 1, &h, None).unwrap();
        assert_abs_diff_eq!(theta[0], 0.45, epsilon = 1e-15);
        let codes = vec![0.01; 10];
        assert_eq!(update_document_code(&codes, 1, &h, None).unwrap()[0], 0.0);

        let mut h2 = h.clone();
        h2.theta_reg = Regularizer::L2;
        let codes = vec![1.0; 9];
        let theta = update_document_code(&codes, 1, &h2, None).unwrap();
        assert_abs_diff_eq!(theta[0], 0.9, epsilon = 1e-15);

        assert!(update_document_code(&[], 1, &h, None).is_err());
    }

    #[test]
    fn shifted_mean_example() {
        // C = 2, D = 1, |I| = 1, lambda = gamma = 1, raw mean (0.5, 0.5),
        // eta_true = (1, 0), eta_hat = (0, 1).
        let h = hp(1.0, 0.0, 1.0);
        let (c, d, len, gamma) = (2.0, 1.0, 1.0, 1.0);
        let scale = c / (2.0 * d * gamma * len);
        let shift = [scale * (1.0 - 0.0), scale * (0.0 - 1.0)];
        let theta = update_document_code(&[0.5, 0.5], 2, &h, Some(&shift)).unwrap();

        // Oracle: per-coordinate minimization of
        // lambda t + gamma (s - t)^2 + (C/D)(eta_hat - eta_true)_k t over t >= 0.
        let lin = [c / d * (0.0 - 1.0), c / d * (1.0 - 0.0)];
        for k in 0..2 {
            let f = |t: f64| t + (0.5 - t).powi(2) + lin[k] * t;
            let oracle = golden_min(f, 0.0, 10.0);
            assert!((theta[k] - oracle).abs() < 1e-7, "k={k} {} vs {oracle}", theta[k]);
        }
        assert_abs_diff_eq!(theta[0], 1.0, epsilon = 1e-15);
        assert_eq!(theta[1], 0.0);
    }

    #[test]
    fn descent_on_each_update() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let k = 4;
        let n = 6;
        for trial in 0..50 {
            let rows: Vec<Vec<f64>> = (0..k)
                .map(|_| {
                    let v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
                    let s: f64 = v.iter().sum();
                    v.into_iter().map(|x| x / s).collect()
                })
                .collect();
            let beta = Dictionary::from_rows(rows).unwrap();
            let doc = Document::new(vec![(0, 3), (2, 1), (5, 8)]).unwrap();
            let mut h = hp(
                rng.gen_range(0.1..2.0),
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.0..1.0),
            );
            if trial % 2 == 1 {
                h.s_reg = Regularizer::L2;
                h.theta_reg = Regularizer::L2;
            }
            let mut enc = DocEncoding::uniform(k, doc.len());
            let cols = gather_columns(&doc, &beta);
            let mut prev = objective_with_columns(&doc, &cols, &enc, &h);
            for _ in 0..5 {
                for (i, &(_, w)) in doc.entries().iter().enumerate() {
                    update_word_code(
                        &mut enc.word_codes[i * k..(i + 1) * k],
                        &enc.theta,
                        &cols[i * k..(i + 1) * k],
                        w,
                        &h,
                    );
                    let cur = objective_with_columns(&doc, &cols, &enc, &h);
                    assert!(
                        cur <= prev + 1e-9 * prev.abs().max(1.0),
                        "word step ascended {prev} -> {cur}"
                    );
                    prev = cur;
                }
                enc.theta = update_document_code(&enc.word_codes, k, &h, None).unwrap();
                let cur = objective_with_columns(&doc, &cols, &enc, &h);
                assert!(
                    cur <= prev + 1e-9 * prev.abs().max(1.0),
                    "theta step ascended {prev} -> {cur}"
                );
                prev = cur;
                assert!(enc.theta.iter().chain(&enc.word_codes).all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn encode_reaches_poisson_stationarity() {
        let beta = Dictionary::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let doc = Document::new(vec![(0, 5)]).unwrap();
        let mut h = hp(0.1, 0.0, 0.0);
        h.inner_sweeps = 5000;
        h.tol_obj = 1e-15;
        let enc = encode_document(&doc, &beta, &h, None).unwrap();
        assert!((enc.word_code(0)[0] - 5.0).abs() < 1e-4, "{:?}", enc.word_codes);
        assert!((enc.theta[0] - 5.0).abs() < 1e-4);
    }

    #[test]
    fn huge_rho_zeroes_everything() {
        let beta = Dictionary::from_rows(vec![vec![0.5, 0.5], vec![0.2, 0.8]]).unwrap();
        let doc = Document::new(vec![(0, 2), (1, 1)]).unwrap();
        let h = hp(0.1, 1e6, 0.1);
        let enc = encode_document(&doc, &beta, &h, None).unwrap();
        assert!(enc.theta.iter().all(|&v| v == 0.0));
        // The log barrier keeps one code per word positive, of order w / rho.
        assert!(
            enc.word_codes.iter().all(|&v| (0.0..=2.0 / 1e6 / 0.5).contains(&v)),
            "{:?}",
            enc.word_codes
        );
        assert!(enc.objective.is_finite());
    }

    #[test]
    fn warm_start_at_fixed_point_stops_immediately() {
        let beta = Dictionary::from_rows(vec![vec![0.6, 0.3, 0.1], vec![0.1, 0.2, 0.7]]).unwrap();
        let doc = Document::new(vec![(0, 4), (1, 2), (2, 3)]).unwrap();
        let mut h = hp(0.2, 0.1, 0.2);
        h.inner_sweeps = 2000;
        h.tol_obj = 1e-14;
        let converged = encode_document(&doc, &beta, &h, None).unwrap();
        let h2 = Hyperparams {
            tol_obj: 1e-5,
            ..h.clone()
        };
        let again = encode_document(&doc, &beta, &h2, Some(&converged)).unwrap();
        assert_eq!(again.sweeps, 1);
        assert!((again.objective - converged.objective).abs() <= 1e-5 * converged.objective.abs());
    }

    #[test]
    fn supervised_with_zero_c_matches_unsupervised() {
        let beta = Dictionary::from_rows(vec![vec![0.6, 0.3, 0.1], vec![0.1, 0.2, 0.7]]).unwrap();
        let doc = Document::new(vec![(0, 4), (2, 3)]).unwrap();
        let mut h = hp(0.2, 0.1, 0.2);
        h.svm_c = 0.0;
        let eta = ClassifierWeights::from_rows(vec![vec![1.0, -1.0], vec![0.5, 2.0]]).unwrap();
        let sup = Supervision {
            eta: &eta,
            label: 1,
            num_docs: 10,
        };
        let a = encode_document(&doc, &beta, &h, None).unwrap();
        let b = encode_document_supervised(&doc, &beta, &h, &sup, None).unwrap();
        assert_eq!(a, b);

        // Zero weights only add a constant, so the iterates coincide when
        // both runs do the same number of sweeps.
        h.svm_c = 5.0;
        h.inner_sweeps = 40;
        h.tol_obj = 1e-300;
        let zero = ClassifierWeights::zeros(2, 2);
        let sup = Supervision {
            eta: &zero,
            label: 0,
            num_docs: 10,
        };
        let c = encode_document_supervised(&doc, &beta, &h, &sup, None).unwrap();
        let d = encode_document(&doc, &beta, &h, None).unwrap();
        assert_eq!(c.sweeps, d.sweeps);
        for (x, y) in c
            .theta
            .iter()
            .chain(&c.word_codes)
            .zip(d.theta.iter().chain(&d.word_codes))
        {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_mismatched_warm_start() {
        let beta = Dictionary::from_rows(vec![vec![0.5, 0.5]]).unwrap();
        let doc = Document::new(vec![(0, 1)]).unwrap();
        let bad = DocEncoding::uniform(1, 3);
        assert!(encode_document(&doc, &beta, &Hyperparams::default(), Some(&bad)).is_err());
    }
}
