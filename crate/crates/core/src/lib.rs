//! Sparse topical coding: non-probabilistic topic models with sparse
//! word and document codes, and a max-margin supervised variant.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN.

pub mod coder;
pub mod corpus;
pub mod dictionary;
pub mod error;
pub mod metrics;
pub mod model_io;
pub mod numerics;
pub mod params;
pub mod svm;
pub mod trainer;

pub use coder::{encode_document, encode_document_supervised, DocEncoding, Supervision};
pub use corpus::{load_corpus, load_labels, load_vocabulary, Corpus, Document, LabeledCorpus, Labels, Vocabulary};
pub use dictionary::{update_dictionary, Dictionary};
pub use error::{Result, StcError};
pub use model_io::{load_medstc_model, load_model, load_stc_model, save_model, SavedModel};
pub use params::{Hyperparams, Regularizer};
pub use svm::{predict, train_svm, ClassifierWeights, SvmFit, SvmParams};
pub use trainer::{
    encode_corpus, medstc_objective, stc_objective, train_medstc, train_stc, MedStcModel, StcModel, Step, TraceEntry,
};
