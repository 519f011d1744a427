//! Bag-of-words corpora, vocabularies and label files.
//!
//! On disk, word and document IDs are 1-based (UCI "docword" convention).
//! Everything in memory is 0-based; the conversion happens only here.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Result, StcError};

/// A document as the sorted set of words with positive counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    entries: Vec<(usize, u32)>,
}

impl Document {
    /// Builds a document from `(word_index, count)` pairs in any order.
    pub fn new(mut entries: Vec<(usize, u32)>) -> Result<Self> {
        entries.sort_unstable_by_key(|&(w, _)| w);
        for pair in entries.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(StcError::domain(format!(
                    "duplicate word index {} in document",
                    pair[0].0
                )));
            }
        }
        if let Some(&(w, _)) = entries.iter().find(|&&(_, c)| c == 0) {
            return Err(StcError::domain(format!("zero count for word index {w}")));
        }
        if entries.is_empty() {
            return Err(StcError::domain("document has no entries"));
        }
        Ok(Document { entries })
    }

    pub fn entries(&self) -> &[(usize, u32)] {
        &self.entries
    }

    /// Size of the index set `I`.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn word_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|&(w, _)| w)
    }

    pub fn total_count(&self) -> u64 {
        self.entries.iter().map(|&(_, c)| u64::from(c)).sum()
    }

    /// Position of `word` in this document's entries, if present.
    pub fn position_of(&self, word: usize) -> Option<usize> {
        self.entries.binary_search_by_key(&word, |&(w, _)| w).ok()
    }
}

/// A sequence of documents over a vocabulary of `num_words` terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    num_words: usize,
    documents: Vec<Document>,
}

impl Corpus {
    pub fn new(num_words: usize, documents: Vec<Document>) -> Result<Self> {
        for (d, doc) in documents.iter().enumerate() {
            if let Some(w) = doc.word_indices().find(|&w| w >= num_words) {
                return Err(StcError::domain(format!(
                    "document {d} references word {w} outside a vocabulary of {num_words}"
                )));
            }
        }
        Ok(Corpus { num_words, documents })
    }

    pub fn num_words(&self) -> usize {
        self.num_words
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn num_nonzeros(&self) -> usize {
        self.documents.iter().map(Document::len).sum()
    }

    pub fn total_count(&self) -> u64 {
        self.documents.iter().map(Document::total_count).sum()
    }
}

/// A corpus paired with one class label per document.
#[derive(Debug, Clone)]
pub struct LabeledCorpus {
    corpus: Corpus,
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabeledCorpus {
    pub fn new(corpus: Corpus, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if labels.len() != corpus.len() {
            return Err(StcError::contract(format!(
                "{} labels for {} documents",
                labels.len(),
                corpus.len()
            )));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(StcError::domain(format!(
                "label {y} out of range for {num_classes} classes"
            )));
        }
        Ok(LabeledCorpus {
            corpus,
            labels,
            num_classes,
        })
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }
}

/// Parses a UCI bag-of-words "docword" stream.
///
/// The header is three integers `D`, `W`, `NNZ` (one per line in the UCI
/// files, but any whitespace layout is accepted), followed by `NNZ` lines of
/// `docID wordID count`.
pub fn load_corpus<R: BufRead>(reader: R) -> Result<Corpus> {
    let mut header = Vec::with_capacity(3);
    let mut lines = reader.lines().enumerate();
    while header.len() < 3 {
        let (idx, line) = lines
            .next()
            .ok_or_else(|| StcError::parse(idx_or_end(&header), "truncated header"))?;
        let line = line?;
        for tok in line.split_whitespace() {
            if header.len() == 3 {
                return Err(StcError::parse(idx + 1, "unexpected token after header"));
            }
            let v: usize = tok
                .parse()
                .map_err(|_| StcError::parse(idx + 1, format!("invalid header value {tok:?}")))?;
            header.push(v);
        }
    }
    let (num_docs, num_words, nnz) = (header[0], header[1], header[2]);

    let mut per_doc: Vec<Vec<(usize, u32, usize)>> = vec![Vec::new(); num_docs];
    let mut seen = 0usize;
    let mut last_line = 3;
    for (idx, line) in lines {
        let lineno = idx + 1;
        last_line = lineno;
        let line = line?;
        let mut toks = line.split_whitespace();
        let Some(first) = toks.next() else { continue };
        let fields: Vec<&str> = std::iter::once(first).chain(toks).collect();
        if fields.len() != 3 {
            return Err(StcError::parse(
                lineno,
                format!("expected 3 fields, found {}", fields.len()),
            ));
        }
        let doc_id: usize = parse_field(fields[0], lineno, "docID")?;
        let word_id: usize = parse_field(fields[1], lineno, "wordID")?;
        let count: i64 = parse_field(fields[2], lineno, "count")?;
        if doc_id == 0 || doc_id > num_docs {
            return Err(StcError::parse(
                lineno,
                format!("docID {doc_id} out of range 1..={num_docs}"),
            ));
        }
        if word_id == 0 || word_id > num_words {
            return Err(StcError::parse(
                lineno,
                format!("wordID {word_id} out of range 1..={num_words}"),
            ));
        }
        if count <= 0 {
            return Err(StcError::parse(lineno, format!("non-positive count {count}")));
        }
        let count = u32::try_from(count).map_err(|_| StcError::parse(lineno, format!("count {count} too large")))?;
        seen += 1;
        if seen > nnz {
            return Err(StcError::parse(lineno, format!("more than the declared {nnz} entries")));
        }
        per_doc[doc_id - 1].push((word_id - 1, count, lineno));
    }
    if seen != nnz {
        return Err(StcError::parse(
            last_line,
            format!("declared {nnz} entries but found {seen}"),
        ));
    }

    let mut documents = Vec::with_capacity(num_docs);
    for (d, mut raw) in per_doc.into_iter().enumerate() {
        if raw.is_empty() {
            return Err(StcError::domain(format!("document {} is empty", d + 1)));
        }
        raw.sort_by_key(|&(w, _, line)| (w, line));
        if let Some(pair) = raw.windows(2).find(|p| p[0].0 == p[1].0) {
            return Err(StcError::parse(
                pair[1].2,
                format!(
                    "duplicate wordID {} in document {} (first seen at line {})",
                    pair[1].0 + 1,
                    d + 1,
                    pair[0].2
                ),
            ));
        }
        documents.push(Document {
            entries: raw.into_iter().map(|(w, c, _)| (w, c)).collect(),
        });
    }
    Ok(Corpus { num_words, documents })
}

fn idx_or_end(header: &[usize]) -> usize {
    header.len() + 1
}

fn parse_field<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| StcError::parse(line, format!("invalid {what} {tok:?}")))
}

/// Writes a corpus in docword layout (header on three lines, 1-based IDs).
pub fn write_corpus<W: Write>(corpus: &Corpus, mut out: W) -> Result<()> {
    writeln!(out, "{}", corpus.len())?;
    writeln!(out, "{}", corpus.num_words())?;
    writeln!(out, "{}", corpus.num_nonzeros())?;
    for (d, doc) in corpus.documents().iter().enumerate() {
        for &(w, c) in doc.entries() {
            writeln!(out, "{} {} {}", d + 1, w + 1, c)?;
        }
    }
    Ok(())
}

/// Ordered, duplicate-free list of terms; term `i` has external ID `i + 1`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term(&self, idx: usize) -> Option<&str> {
        self.terms.get(idx).map(String::as_str)
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }
}

/// Reads one term per line. Blank lines are skipped.
pub fn load_vocabulary<R: BufRead>(reader: R) -> Result<Vocabulary> {
    let mut vocab = Vocabulary::default();
    let mut first_line: HashMap<String, usize> = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let term = line.trim();
        if term.is_empty() {
            continue;
        }
        if let Some(prev) = first_line.get(term) {
            return Err(StcError::parse(
                idx + 1,
                format!("duplicate term {term:?} (lines {prev} and {})", idx + 1),
            ));
        }
        first_line.insert(term.to_owned(), idx + 1);
        vocab.index.insert(term.to_owned(), vocab.terms.len());
        vocab.terms.push(term.to_owned());
    }
    Ok(vocab)
}

/// Labels aligned with document order plus the class count `L = 1 + max`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labels {
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

/// Reads one 0-based integer label per line and checks the count.
pub fn load_labels<R: BufRead>(reader: R, num_docs: usize) -> Result<Labels> {
    let mut labels = Vec::with_capacity(num_docs);
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let tok = line.trim();
        if tok.is_empty() {
            continue;
        }
        let v: i64 = tok
            .parse()
            .map_err(|_| StcError::parse(idx + 1, format!("invalid label {tok:?}")))?;
        if v < 0 {
            return Err(StcError::parse(idx + 1, format!("negative label {v}")));
        }
        labels.push(v as usize);
    }
    if labels.len() != num_docs {
        return Err(StcError::contract(format!(
            "label file has {} entries but the corpus has {num_docs} documents",
            labels.len()
        )));
    }
    let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut present = vec![false; num_classes];
    for &y in &labels {
        present[y] = true;
    }
    let missing: Vec<usize> = (0..num_classes).filter(|&y| !present[y]).collect();
    if !missing.is_empty() {
        log::warn!("classes with no documents: {missing:?}");
    }
    Ok(Labels { labels, num_classes })
}
