//! Sparsity, averaged codes, accuracy and topic inspection.

use std::io::Write;

use crate::coder::DocEncoding;
use crate::corpus::{Corpus, Vocabulary};
use crate::dictionary::Dictionary;
use crate::error::{Result, StcError};

/// Fraction of entries with `|x| <= zero_tol`.
pub fn sparsity_ratio(code: &[f64], zero_tol: f64) -> f64 {
    if code.is_empty() {
        return 0.0;
    }
    let zeros = code.iter().filter(|x| x.abs() <= zero_tol).count();
    zeros as f64 / code.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityReport {
    /// Mean sparsity ratio over every word code in the corpus.
    pub per_word_ratio: f64,
    /// Mean sparsity ratio over document codes.
    pub per_doc_ratio: f64,
    pub zero_tolerance: f64,
}

pub fn sparsity_report(encodings: &[DocEncoding], zero_tol: f64) -> SparsityReport {
    let (mut word_sum, mut word_n) = (0.0, 0usize);
    let mut doc_sum = 0.0;
    for enc in encodings {
        for s in enc.word_codes() {
            word_sum += sparsity_ratio(s, zero_tol);
            word_n += 1;
        }
        doc_sum += sparsity_ratio(&enc.theta, zero_tol);
    }
    SparsityReport {
        per_word_ratio: if word_n == 0 { 0.0 } else { word_sum / word_n as f64 },
        per_doc_ratio: if encodings.is_empty() {
            0.0
        } else {
            doc_sum / encodings.len() as f64
        },
        zero_tolerance: zero_tol,
    }
}

/// Mean code of `word` over the documents that contain it.
pub fn average_word_code(word: usize, encodings: &[DocEncoding], corpus: &Corpus) -> Result<Vec<f64>> {
    if encodings.len() != corpus.len() {
        return Err(StcError::contract("encodings do not match corpus"));
    }
    let mut sum: Option<Vec<f64>> = None;
    let mut count = 0usize;
    for (doc, enc) in corpus.documents().iter().zip(encodings) {
        if let Some(i) = doc.position_of(word) {
            let s = enc.word_code(i);
            let acc = sum.get_or_insert_with(|| vec![0.0; s.len()]);
            for (a, v) in acc.iter_mut().zip(s) {
                *a += v;
            }
            count += 1;
        }
    }
    let mut mean = sum.ok_or_else(|| StcError::domain(format!("word {word} does not occur in the corpus")))?;
    for v in &mut mean {
        *v /= count as f64;
    }
    Ok(mean)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassCode {
    /// Mean document code of the class, l1-normalized.
    pub values: Vec<f64>,
    /// The mean was all zeros and could not be normalized.
    pub degenerate: bool,
}

/// l1-normalized mean document code of class `class`.
pub fn average_document_code(encodings: &[DocEncoding], labels: &[usize], class: usize) -> Result<ClassCode> {
    if encodings.len() != labels.len() {
        return Err(StcError::contract("encodings do not match labels"));
    }
    let members: Vec<&DocEncoding> = encodings
        .iter()
        .zip(labels)
        .filter(|(_, &y)| y == class)
        .map(|(e, _)| e)
        .collect();
    let first = members
        .first()
        .ok_or_else(|| StcError::domain(format!("class {class} has no documents")))?;
    let mut mean = vec![0.0; first.theta.len()];
    for e in &members {
        for (m, t) in mean.iter_mut().zip(&e.theta) {
            *m += t;
        }
    }
    let total: f64 = mean.iter().sum();
    if total <= 0.0 {
        return Ok(ClassCode {
            values: vec![0.0; mean.len()],
            degenerate: true,
        });
    }
    for m in &mut mean {
        *m /= total;
    }
    Ok(ClassCode {
        values: mean,
        degenerate: false,
    })
}

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(StcError::contract("predictions and labels differ in length"));
    }
    if labels.is_empty() {
        return Err(StcError::domain("accuracy of an empty set"));
    }
    let hits = predictions.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// The `m` heaviest words of topic `topic`, descending, ties by word index.
pub fn top_words(beta: &Dictionary, topic: usize, m: usize, vocab: &Vocabulary) -> Result<Vec<(String, f64)>> {
    if topic >= beta.num_topics() {
        return Err(StcError::domain(format!("topic {topic} out of range")));
    }
    if vocab.len() != beta.num_words() {
        return Err(StcError::contract(format!(
            "vocabulary has {} terms, dictionary has {} words",
            vocab.len(),
            beta.num_words()
        )));
    }
    if m > beta.num_words() {
        return Err(StcError::domain(format!(
            "asked for {m} words from a vocabulary of {}",
            beta.num_words()
        )));
    }
    let row = beta.row(topic);
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    Ok(idx
        .into_iter()
        .take(m)
        .map(|n| (vocab.term(n).unwrap_or_default().to_owned(), row[n]))
        .collect())
}

pub fn write_sparsity_tsv<W: Write>(mut out: W, model: &str, report: &SparsityReport) -> Result<()> {
    writeln!(out, "#model\tword_sparsity\tdoc_sparsity\tzero_tol")?;
    writeln!(
        out,
        "{model}\t{}\t{}\t{}",
        report.per_word_ratio, report.per_doc_ratio, report.zero_tolerance
    )?;
    Ok(())
}

pub fn write_class_codes_tsv<W: Write>(mut out: W, codes: &[(usize, ClassCode)]) -> Result<()> {
    let k = codes.first().map_or(0, |(_, c)| c.values.len());
    let header: Vec<String> = (0..k).map(|t| format!("topic{t}")).collect();
    writeln!(out, "#class\tdegenerate\t{}", header.join("\t"))?;
    for (class, code) in codes {
        let vals: Vec<String> = code.values.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{class}\t{}\t{}", code.degenerate, vals.join("\t"))?;
    }
    Ok(())
}

pub fn write_top_words_tsv<W: Write>(mut out: W, beta: &Dictionary, m: usize, vocab: &Vocabulary) -> Result<()> {
    writeln!(out, "#topic\trank\tterm\tweight")?;
    for k in 0..beta.num_topics() {
        for (rank, (term, weight)) in top_words(beta, k, m, vocab)?.into_iter().enumerate() {
            writeln!(out, "{k}\t{}\t{term}\t{weight}", rank + 1)?;
        }
    }
    Ok(())
}
