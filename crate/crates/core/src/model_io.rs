//! Text model files.
//!
//! ```text
//! {"format_version":1,"kind":"stc",...}   <- one-line JSON header
//! beta
//! <N numbers>                              <- K rows
//! eta                                      <- only when a classifier is present
//! <K numbers>                              <- L rows
//! ```
//!
//! Numbers are written with 17 significant digits so that a load/save
//! cycle reproduces the file byte for byte.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dictionary::Dictionary;
use crate::error::{Result, StcError};
use crate::numerics::{project_in_place, SIMPLEX_EPS};
use crate::params::Hyperparams;
use crate::svm::ClassifierWeights;
use crate::trainer::{MedStcModel, StcModel, TraceEntry};

pub const FORMAT_VERSION: u32 = 1;

/// Rows further than this from the simplex are rejected on load; closer
/// rows are re-projected.
pub const LOAD_SIMPLEX_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Stc,
    Medstc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    kind: ModelKind,
    k: usize,
    n: usize,
    l: Option<usize>,
    seed: u64,
    hyperparams: Hyperparams,
    trace: Vec<TraceEntry>,
}

/// Either kind of trained model.
#[derive(Debug, Clone)]
pub enum SavedModel {
    Stc(StcModel),
    MedStc(MedStcModel),
}

impl SavedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            SavedModel::Stc(_) => ModelKind::Stc,
            SavedModel::MedStc(_) => ModelKind::Medstc,
        }
    }

    pub fn beta(&self) -> &Dictionary {
        match self {
            SavedModel::Stc(m) => &m.beta,
            SavedModel::MedStc(m) => &m.beta,
        }
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        match self {
            SavedModel::Stc(m) => &m.hp,
            SavedModel::MedStc(m) => &m.hp,
        }
    }

    /// The model's classifier: `eta` for the supervised model, the
    /// post-hoc classifier (if any) otherwise.
    pub fn classifier(&self) -> Option<&ClassifierWeights> {
        match self {
            SavedModel::Stc(m) => m.classifier.as_ref(),
            SavedModel::MedStc(m) => Some(&m.eta),
        }
    }
}

fn write_row<W: Write>(out: &mut W, row: &[f64]) -> std::io::Result<()> {
    let mut first = true;
    for v in row {
        if !first {
            out.write_all(b" ")?;
        }
        first = false;
        write!(out, "{v:.16e}")?;
    }
    out.write_all(b"\n")
}

/// Serializes a model to any writer.
pub fn write_model<W: Write>(model: &SavedModel, mut out: W) -> Result<()> {
    let (beta, eta, hp, trace, seed) = match model {
        SavedModel::Stc(m) => (&m.beta, m.classifier.as_ref(), &m.hp, &m.trace, m.seed),
        SavedModel::MedStc(m) => (&m.beta, Some(&m.eta), &m.hp, &m.trace, m.seed),
    };
    let header = Header {
        format_version: FORMAT_VERSION,
        kind: model.kind(),
        k: beta.num_topics(),
        n: beta.num_words(),
        l: eta.map(ClassifierWeights::num_classes),
        seed,
        hyperparams: hp.clone(),
        trace: trace.clone(),
    };
    let json = serde_json::to_string(&header).map_err(|e| StcError::Model(e.to_string()))?;
    writeln!(out, "{json}")?;
    writeln!(out, "beta")?;
    for row in beta.rows() {
        write_row(&mut out, row)?;
    }
    if let Some(eta) = eta {
        writeln!(out, "eta")?;
        for row in eta.rows() {
            write_row(&mut out, row)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn save_model(model: &SavedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| StcError::io(path, e))?;
    write_model(model, BufWriter::new(file)).map_err(|e| match e {
        StcError::Stream(io) => StcError::io(path, io),
        other => other,
    })
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    lineno: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self, what: &str) -> Result<String> {
        self.lineno += 1;
        match self.inner.next() {
            Some(line) => Ok(line?),
            None => Err(StcError::Model(format!(
                "truncated file: expected {what} at line {}",
                self.lineno
            ))),
        }
    }

    fn numbers(&mut self, what: &str, expected: usize) -> Result<Vec<f64>> {
        let line = self.next_line(what)?;
        let row = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| StcError::parse(self.lineno, format!("{what}: {e}")))?;
        if row.len() != expected {
            return Err(StcError::parse(
                self.lineno,
                format!("{what} has {} values, expected {expected}", row.len()),
            ));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(StcError::parse(self.lineno, format!("{what} has non-finite values")));
        }
        Ok(row)
    }

    fn marker(&mut self, name: &str) -> Result<()> {
        let line = self.next_line(name)?;
        if line.trim() != name {
            return Err(StcError::parse(
                self.lineno,
                format!("expected {name:?}, found {line:?}"),
            ));
        }
        Ok(())
    }
}

/// Parses and validates a model from any reader.
pub fn read_model<R: BufRead>(reader: R) -> Result<SavedModel> {
    let mut lines = Lines {
        inner: reader.lines(),
        lineno: 0,
    };
    let header_line = lines.next_line("header")?;
    let probe: serde_json::Value =
        serde_json::from_str(&header_line).map_err(|e| StcError::Model(format!("bad header: {e}")))?;
    match probe.get("format_version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(FORMAT_VERSION) => {}
        Some(v) => return Err(StcError::Model(format!("unsupported format version {v}"))),
        None => return Err(StcError::Model("header lacks format_version".into())),
    }
    let header: Header = serde_json::from_value(probe).map_err(|e| StcError::Model(format!("bad header: {e}")))?;
    header.hyperparams.validate()?;
    if header.k == 0 || header.n == 0 {
        return Err(StcError::Model("K and N must be positive".into()));
    }
    if header.kind == ModelKind::Medstc && header.l.is_none() {
        return Err(StcError::Model("medstc model without eta".into()));
    }

    lines.marker("beta")?;
    let mut data = Vec::with_capacity(header.k * header.n);
    for k in 0..header.k {
        let mut row = lines.numbers(&format!("beta row {k}"), header.n)?;
        let negative = row.iter().fold(0.0f64, |m, &v| m.max(-v));
        let off = (row.iter().sum::<f64>() - 1.0).abs().max(negative);
        if off > LOAD_SIMPLEX_TOL {
            return Err(StcError::Model(format!("beta row {k} is off the simplex by {off:e}")));
        }
        if off > SIMPLEX_EPS {
            project_in_place(&mut row, 1.0);
        }
        data.extend(row);
    }
    let beta = Dictionary::from_raw(header.k, header.n, data);

    let eta = match header.l {
        Some(l) => {
            lines.marker("eta")?;
            let rows = (0..l)
                .map(|y| lines.numbers(&format!("eta row {y}"), header.k))
                .collect::<Result<Vec<_>>>()?;
            Some(ClassifierWeights::from_rows(rows)?)
        }
        None => None,
    };

    Ok(match header.kind {
        ModelKind::Stc => SavedModel::Stc(StcModel {
            beta,
            hp: header.hyperparams,
            trace: header.trace,
            seed: header.seed,
            classifier: eta,
        }),
        ModelKind::Medstc => SavedModel::MedStc(MedStcModel {
            beta,
            eta: eta.expect("checked above"),
            hp: header.hyperparams,
            trace: header.trace,
            seed: header.seed,
        }),
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SavedModel> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| StcError::io(path, e))?;
    read_model(BufReader::new(file))
}

/// Loads a model and insists it is an unsupervised one.
pub fn load_stc_model(path: impl AsRef<Path>) -> Result<StcModel> {
    match load_model(path)? {
        SavedModel::Stc(m) => Ok(m),
        SavedModel::MedStc(_) => Err(StcError::Model("kind mismatch: expected stc, found medstc".into())),
    }
}

/// Loads a model and insists it is a supervised one.
pub fn load_medstc_model(path: impl AsRef<Path>) -> Result<MedStcModel> {
    match load_model(path)? {
        SavedModel::MedStc(m) => Ok(m),
        SavedModel::Stc(_) => Err(StcError::Model("kind mismatch: expected medstc, found stc".into())),
    }
}
