use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stc_core::error::{Result, StcError};
use stc_core::metrics::{
    accuracy, average_document_code, sparsity_report, write_class_codes_tsv, write_sparsity_tsv, write_top_words_tsv,
};
use stc_core::trainer::fit_classifier;
use stc_core::{
    encode_corpus, load_corpus, load_labels, load_model, load_vocabulary, predict, save_model, train_medstc, train_stc,
    Corpus, DocEncoding, Hyperparams, LabeledCorpus, Regularizer, SavedModel,
};

/// Zero tolerance used by the sparsity report.
const ZERO_TOL: f64 = 0.0;

#[derive(Parser)]
#[command(name = "stc", version, about = "Sparse topical coding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn an unsupervised dictionary.
    Train(TrainArgs),
    /// Learn a dictionary and a max-margin classifier jointly.
    TrainSup(TrainArgs),
    /// Write document and word codes for a corpus.
    Encode(ApplyArgs),
    /// Write predicted labels for a corpus.
    Predict(ApplyArgs),
    /// Print accuracy and a sparsity report.
    Eval(EvalArgs),
    /// Print the heaviest words of every topic.
    Topics(TopicsArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    docword: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    #[arg(long, default_value = "l1")]
    theta_reg: Regularizer,
    #[arg(long, default_value = "l1")]
    s_reg: Regularizer,
    /// Outer alternation iterations.
    #[arg(long, default_value_t = 50)]
    outer: usize,
    /// Coordinate-descent sweeps per document.
    #[arg(long, default_value_t = 25)]
    inner: usize,
    /// Relative objective tolerance of the outer loop.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    /// One label per document; required for train-sup, optional post-hoc classifier for train.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    svm_c: f64,
    #[arg(long, default_value_t = 3600.0)]
    cost_ell: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ApplyArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    docword: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    docword: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Also write the per-class mean document codes here.
    #[arg(long)]
    class_codes: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct TopicsArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long, default_value_t = 10)]
    top: usize,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| StcError::Io {
        path: path.to_owned(),
        source: e,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| StcError::Io {
        path: path.to_owned(),
        source: e,
    })
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        StcError::Stream(source) => StcError::Io {
            path: path.to_owned(),
            source,
        },
        other => other,
    })
}

fn read_with<T>(path: &Path, f: impl FnOnce(BufReader<File>) -> Result<T>) -> Result<T> {
    let reader = open(path)?;
    with_path(path, f(reader))
}

fn set_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(StcError::Domain("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| StcError::Domain(e.to_string()))?;
    }
    Ok(())
}

fn hyperparams(a: &TrainArgs, supervised: bool) -> Hyperparams {
    Hyperparams {
        lambda: a.lambda,
        gamma: a.gamma,
        rho: a.rho,
        theta_reg: a.theta_reg,
        s_reg: a.s_reg,
        svm_c: if supervised { a.svm_c } else { 0.0 },
        cost_ell: a.cost_ell,
        inner_sweeps: a.inner,
        outer_iters: a.outer,
        outer_tol: a.tol,
        ..Hyperparams::default()
    }
}

fn load_training_corpus(a: &TrainArgs) -> Result<Corpus> {
    let corpus = read_with(&a.docword, load_corpus)?;
    let vocab = read_with(&a.vocab, load_vocabulary)?;
    if vocab.len() != corpus.num_words() {
        return Err(StcError::Contract(format!(
            "vocabulary has {} terms but the corpus declares {} words",
            vocab.len(),
            corpus.num_words()
        )));
    }
    Ok(corpus)
}

fn train(a: TrainArgs, supervised: bool) -> Result<()> {
    set_threads(a.threads)?;
    let corpus = load_training_corpus(&a)?;
    let hp = hyperparams(&a, supervised);
    let labels = match &a.labels {
        Some(p) => Some(read_with(p, |r| load_labels(r, corpus.len()))?),
        None if supervised => return Err(StcError::Domain("train-sup needs --labels".into())),
        None => None,
    };
    let model = if supervised {
        let labels = labels.expect("checked above");
        let data = LabeledCorpus::new(corpus, labels.labels, labels.num_classes)?;
        let (model, _) = train_medstc(&data, a.k, &hp, a.seed)?;
        SavedModel::MedStc(model)
    } else {
        let (mut model, encodings) = train_stc(&corpus, a.k, &hp, a.seed)?;
        if let Some(labels) = labels {
            let svm_hp = Hyperparams { svm_c: a.svm_c, ..hp };
            let fit = fit_classifier(&encodings, &labels.labels, labels.num_classes, &svm_hp, a.seed)?;
            model.classifier = Some(fit.eta);
        }
        SavedModel::Stc(model)
    };
    save_model(&model, &a.out)
}

/// Test-time codes always come from the unsupervised coder.
fn encode_with(model: &SavedModel, docword: &Path) -> Result<(Corpus, Vec<DocEncoding>)> {
    let corpus = read_with(docword, load_corpus)?;
    if corpus.num_words() != model.beta().num_words() {
        return Err(StcError::Contract(format!(
            "corpus has {} words but the model has {}",
            corpus.num_words(),
            model.beta().num_words()
        )));
    }
    let hp = Hyperparams {
        svm_c: 0.0,
        ..model.hyperparams().clone()
    };
    let encodings = encode_corpus(&corpus, model.beta(), &hp, None)?;
    Ok((corpus, encodings))
}

fn sparse(code: &[f64]) -> String {
    code.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(k, v)| format!("{k}:{v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn encode(a: ApplyArgs) -> Result<()> {
    set_threads(a.threads)?;
    let model = load_model(&a.model)?;
    let (corpus, encodings) = encode_with(&model, &a.docword)?;
    let mut out = create(&a.out)?;
    let written: io::Result<()> = (|| {
        writeln!(out, "#doc\tword\tcodes")?;
        for (d, (doc, enc)) in corpus.documents().iter().zip(&encodings).enumerate() {
            writeln!(out, "{d}\ttheta\t{}", sparse(&enc.theta))?;
            for (i, word) in doc.word_indices().enumerate() {
                writeln!(out, "{d}\t{word}\t{}", sparse(enc.word_code(i)))?;
            }
        }
        out.flush()
    })();
    written.map_err(|e| StcError::Io {
        path: a.out.clone(),
        source: e,
    })
}

fn classifier_or_err(model: &SavedModel) -> Result<&stc_core::ClassifierWeights> {
    model
        .classifier()
        .ok_or_else(|| StcError::Model("model has no classifier; train with --labels or use train-sup".into()))
}

fn predict_cmd(a: ApplyArgs) -> Result<()> {
    set_threads(a.threads)?;
    let model = load_model(&a.model)?;
    let eta = classifier_or_err(&model)?;
    let (_, encodings) = encode_with(&model, &a.docword)?;
    let mut out = create(&a.out)?;
    let written: io::Result<()> = (|| {
        writeln!(out, "#doc\tlabel")?;
        for (d, enc) in encodings.iter().enumerate() {
            writeln!(out, "{d}\t{}", predict(eta, &enc.theta))?;
        }
        out.flush()
    })();
    written.map_err(|e| StcError::Io {
        path: a.out.clone(),
        source: e,
    })
}

fn eval(a: EvalArgs) -> Result<()> {
    set_threads(a.threads)?;
    let model = load_model(&a.model)?;
    let eta = classifier_or_err(&model)?;
    let (corpus, encodings) = encode_with(&model, &a.docword)?;
    let labels = read_with(&a.labels, |r| load_labels(r, corpus.len()))?;
    let predictions: Vec<usize> = encodings.iter().map(|e| predict(eta, &e.theta)).collect();
    let acc = accuracy(&predictions, &labels.labels)?;
    let kind = match model {
        SavedModel::Stc(_) => "stc",
        SavedModel::MedStc(_) => "medstc",
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "#metric\tvalue")?;
    writeln!(out, "accuracy\t{acc}")?;
    write_sparsity_tsv(&mut out, kind, &sparsity_report(&encodings, ZERO_TOL))?;
    if let Some(path) = &a.class_codes {
        let mut codes = Vec::new();
        for class in 0..labels.num_classes {
            match average_document_code(&encodings, &labels.labels, class) {
                Ok(code) => codes.push((class, code)),
                Err(StcError::Domain(msg)) => log::warn!("{msg}"),
                Err(e) => return Err(e),
            }
        }
        let mut w = create(path)?;
        with_path(path, write_class_codes_tsv(&mut w, &codes))?;
        w.flush().map_err(|e| StcError::Io {
            path: path.clone(),
            source: e,
        })?;
    }
    Ok(())
}

fn topics(a: TopicsArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let vocab = read_with(&a.vocab, load_vocabulary)?;
    let stdout = io::stdout();
    write_top_words_tsv(stdout.lock(), model.beta(), a.top, &vocab)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => train(a, false),
        Command::TrainSup(a) => train(a, true),
        Command::Encode(a) => encode(a),
        Command::Predict(a) => predict_cmd(a),
        Command::Eval(a) => eval(a),
        Command::Topics(a) => topics(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
