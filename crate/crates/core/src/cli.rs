//! Command-line front end. [`run`] parses argv, executes one subcommand and
//! returns the process exit code.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::seq::SliceRandom;

use crate::config::{BandwidthSetting, PipelineConfig};
use crate::container;
use crate::ensemble::{self, EnsembleModel};
use crate::error::{Error, Result};
use crate::eval::{self, Averaging, ConfusionMatrix, Metrics};
use crate::ingest::{self, ClassLabel, RawRecord};
use crate::preprocess::Preprocessor;
use crate::seed;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

pub const DEFAULT_MODEL_PATH: &str = "model.ceids";

#[derive(Debug, Parser)]
#[command(name = "ceids", version, about = "Cluster-then-specialize intrusion detection on NSL-KDD records")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse NSL-KDD files and report record counts.
    Ingest {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: Option<PathBuf>,
        /// Per-class counts instead of totals only.
        #[arg(long)]
        summary: bool,
    },
    /// Fit encoder + scaler on a file, write the scaled matrix as CSV.
    Preprocess {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Where to store the fitted encoder and scaler.
        #[arg(long)]
        scaler: PathBuf,
    },
    /// Train the full pipeline and save a model.
    Train {
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Train on a seeded subsample of this many records.
        #[arg(long)]
        subsample: Option<usize>,
        /// Mean-shift bandwidth: "auto" or a positive number.
        #[arg(long, allow_hyphen_values = true)]
        bandwidth: Option<String>,
        #[arg(long)]
        ms_subsample: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        ms_tol: Option<f64>,
        #[arg(long)]
        ms_max_iter: Option<usize>,
        /// Run log path (default: <out>.log).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Score a model on a labeled file.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Key-value report path (default: <model>.report).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Classify every record of a file.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Describe a saved model.
    Report {
        #[arg(long)]
        model: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

/// Runs one command, writing normal output to stdout.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    run_with_output(argv, &mut stdout.lock())
}

pub fn run_with_output<I, T>(argv: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_config_error() {
        EXIT_CONFIG
    } else {
        EXIT_DATA
    }
}

fn execute(cmd: Command, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    match cmd {
        Command::Ingest { train, test, summary } => ingest(&train, test.as_deref(), summary, out),
        Command::Preprocess { input, out: dest, scaler } => preprocess(&input, &dest, &scaler, out),
        Command::Train {
            train,
            config,
            seed,
            out: dest,
            subsample,
            bandwidth,
            ms_subsample,
            ms_tol,
            ms_max_iter,
            log,
        } => {
            let mut cfg = match &config {
                Some(p) => PipelineConfig::load(p)?,
                None => PipelineConfig::default(),
            };
            if let Some(p) = train {
                cfg.train_path = Some(p);
            }
            if let Some(p) = dest {
                cfg.model_path = Some(p);
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(n) = subsample {
                cfg.train_subsample = n;
            }
            if let Some(b) = bandwidth {
                cfg.ms_bandwidth = match b.parse::<f64>() {
                    Ok(h) => BandwidthSetting::Fixed(h),
                    Err(_) => BandwidthSetting::Named(b),
                };
            }
            if let Some(n) = ms_subsample {
                cfg.ms_subsample = n;
            }
            if let Some(t) = ms_tol {
                cfg.ms_tol = t;
            }
            if let Some(n) = ms_max_iter {
                cfg.ms_max_iter = n;
            }
            cfg.validate()?;
            train_command(&cfg, log, out)
        }
        Command::Evaluate { model, test, report } => evaluate(&model, &test, report, out),
        Command::Predict { model, input, out: dest } => predict(&model, &input, &dest, out),
        Command::Report { model } => report(&model, out),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(io_err(Path::new("<stdout>")))
}

fn class_table(label: &str, counts: &[usize; 5]) -> String {
    let mut s = format!("{label}\n");
    for c in ClassLabel::ALL {
        let _ = writeln!(s, "  {:<7}{:>9}", c.name(), counts[c.index()]);
    }
    let _ = writeln!(s, "  {:<7}{:>9}", "total", counts.iter().sum::<usize>());
    s
}

fn ingest(train: &Path, test: Option<&Path>, summary: bool, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let mut text = String::new();
    for (name, path) in std::iter::once(("train", train)).chain(test.map(|t| ("test", t))) {
        let data = ingest::load_dataset(path)?;
        let counts = ingest::class_counts(data.iter());
        if summary {
            text.push_str(&class_table(&format!("{name}: {}", path.display()), &counts));
        } else {
            let _ = writeln!(text, "{name}: {} records", data.len());
        }
    }
    emit(out, &text)?;
    Ok(())
}

fn preprocess(input: &Path, dest: &Path, scaler: &Path, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let data = ingest::load_dataset(input)?;
    let pre = Preprocessor::fit(data.iter().map(|(r, _)| r))?;
    let mut csv = String::new();
    for (r, c) in &data {
        for v in pre.transform(r) {
            let _ = write!(csv, "{v},");
        }
        csv.push_str(c.name());
        csv.push('\n');
    }
    fs::write(dest, csv).map_err(io_err(dest))?;
    container::write(scaler, &pre)?;
    emit(
        out,
        &format!(
            "wrote {} scaled rows to {}; encoder and scaler to {}\n",
            data.len(),
            dest.display(),
            scaler.display()
        ),
    )?;
    Ok(())
}

/// Seeded subsample of `n` records, kept in file order.
pub fn subsample<T: Clone>(data: &[T], n: usize, seed: u64) -> Vec<T> {
    if n == 0 || n >= data.len() {
        return data.to_vec();
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut seed::rng(seed::derive(seed, "train-subsample", 0)));
    let mut keep = idx[..n].to_vec();
    keep.sort_unstable();
    keep.into_iter().map(|i| data[i].clone()).collect()
}

fn metrics_block(prefix: &str, m: &Metrics) -> String {
    let mut s = String::new();
    for (key, v) in [
        ("accuracy", m.accuracy),
        ("precision", m.precision),
        ("recall", m.recall),
        ("f_score", m.f_score),
        ("tpr", m.tpr),
        ("fpr", m.fpr),
    ] {
        let _ = writeln!(s, "{prefix}{key}={v}");
    }
    let _ = writeln!(s, "{prefix}degenerate={}", m.degenerate);
    s
}

fn selection_line(model: &EnsembleModel) -> String {
    model
        .selections()
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{i}:{s}"))
        .collect::<Vec<_>>()
        .join(";")
}

/// Machine-readable metrics: weighted-per-class under the bare keys,
/// binary attack/normal under `binary.`.
pub fn key_value_report(model: &EnsembleModel, cm: &ConfusionMatrix) -> Result<String> {
    let weighted = eval::metrics(cm, Averaging::WeightedPerClass)?;
    let binary = eval::metrics(cm, Averaging::BinaryAttack)?;
    let mut s = metrics_block("", &weighted);
    s.push_str(&metrics_block("binary.", &binary));
    let _ = writeln!(s, "records={}", cm.total());
    let _ = writeln!(s, "K={}", model.k());
    let _ = writeln!(s, "bandwidth={}", model.meanshift.bandwidth());
    let _ = writeln!(s, "per_cluster_selection={}", selection_line(model));
    let _ = writeln!(s, "seed={}", model.seed);
    Ok(s)
}

/// Human-readable confusion matrix and metric table.
pub fn metrics_table(cm: &ConfusionMatrix) -> Result<String> {
    let weighted = eval::metrics(cm, Averaging::WeightedPerClass)?;
    let binary = eval::metrics(cm, Averaging::BinaryAttack)?;
    let mut s = String::from("confusion matrix (rows = truth, columns = prediction)\n        ");
    for c in ClassLabel::ALL {
        let _ = write!(s, "{:>9}", c.name());
    }
    s.push('\n');
    for t in ClassLabel::ALL {
        let _ = write!(s, "{:<8}", t.name());
        for p in ClassLabel::ALL {
            let _ = write!(s, "{:>9}", cm.count(t.index(), p.index()));
        }
        s.push('\n');
    }
    let _ = writeln!(
        s,
        "\n{:<18}{:>9}{:>10}{:>9}{:>9}{:>9}{:>9}",
        "averaging", "accuracy", "precision", "recall", "f_score", "tpr", "fpr"
    );
    for (name, m) in [("weighted-per-class", weighted), ("binary-attack", binary)] {
        let _ = writeln!(
            s,
            "{:<18}{:>9.4}{:>10.4}{:>9.4}{:>9.4}{:>9.4}{:>9.4}",
            name, m.accuracy, m.precision, m.recall, m.f_score, m.tpr, m.fpr
        );
    }
    Ok(s)
}

fn score(model: &EnsembleModel, data: &[(RawRecord, ClassLabel)]) -> Result<ConfusionMatrix> {
    let records: Vec<RawRecord> = data.iter().map(|(r, _)| r.clone()).collect();
    let preds: Vec<ClassLabel> = ensemble::predict_batch(model, &records)?.into_iter().map(|(c, _)| c).collect();
    let truths: Vec<ClassLabel> = data.iter().map(|(_, c)| *c).collect();
    eval::confusion(&preds, &truths)
}

fn train_command(cfg: &PipelineConfig, log: Option<PathBuf>, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let train_path = cfg
        .train_path
        .clone()
        .ok_or_else(|| Failure::Usage("no training file: pass --train or set train_path in the config".into()))?;
    let model_path = cfg.model_path.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_MODEL_PATH));
    let log_path = log.unwrap_or_else(|| with_suffix(&model_path, "log"));

    let data = ingest::load_dataset(&train_path)?;
    let data = subsample(&data, cfg.train_subsample, cfg.seed);
    let (model, training) = ensemble::train_pipeline_with_report(&data, &cfg.ensemble()?, cfg.seed)?;
    container::save_model(&model, &model_path)?;

    let cm = score(&model, &data)?;
    let mut log_text = String::from("# resolved config\n");
    log_text.push_str(&cfg.to_toml_string());
    log_text.push_str("\n# run\n");
    let _ = writeln!(log_text, "train_records={}", data.len());
    let counts = training.class_counts_after_oversample;
    let _ = writeln!(
        log_text,
        "class_counts_after_oversample={}",
        counts.map(|c| c.to_string()).join(",")
    );
    let _ = writeln!(
        log_text,
        "cluster_sizes={}",
        training.cluster_sizes.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
    );
    let _ = writeln!(log_text, "autoencoder_final_loss={}", training.autoencoder_loss.last().copied().unwrap_or(f64::NAN));
    let _ = writeln!(
        log_text,
        "final_net_epochs={} final_net_batch_size={} final_net_loss={}",
        model.config.final_net.epochs,
        model.config.final_net.batch_size,
        training.final_loss.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(",")
    );
    log_text.push_str("\n# training-set metrics\n");
    log_text.push_str(&key_value_report(&model, &cm)?);
    fs::write(&log_path, &log_text).map_err(io_err(&log_path))?;

    let mut text = format!(
        "trained on {} records: K = {}, bandwidth = {:.4}\n",
        data.len(),
        model.k(),
        model.meanshift.bandwidth()
    );
    for (i, s) in model.selections().iter().enumerate() {
        let _ = writeln!(text, "  cluster {i}: {s}");
    }
    text.push_str(&metrics_table(&cm)?);
    let _ = writeln!(text, "model: {}\nlog: {}", model_path.display(), log_path.display());
    emit(out, &text)?;
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn evaluate(model_path: &Path, test: &Path, report: Option<PathBuf>, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let model = container::load_model(model_path)?;
    let data = ingest::load_dataset(test)?;
    let cm = score(&model, &data)?;
    let report_path = report.unwrap_or_else(|| with_suffix(model_path, "report"));
    let mut kv = key_value_report(&model, &cm)?;
    let _ = writeln!(kv, "test_path={}", test.display());
    fs::write(&report_path, kv).map_err(io_err(&report_path))?;
    let mut text = format!("{} records from {}\n", data.len(), test.display());
    text.push_str(&metrics_table(&cm)?);
    let _ = writeln!(text, "K = {}\nreport: {}", model.k(), report_path.display());
    emit(out, &text)?;
    Ok(())
}

fn predict(model_path: &Path, input: &Path, dest: &Path, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let model = container::load_model(model_path)?;
    let records: Vec<RawRecord> = ingest::load_dataset(input)?.into_iter().map(|(r, _)| r).collect();
    let preds = ensemble::predict_batch(&model, &records)?;
    let mut csv = String::from("index,predicted");
    for c in ClassLabel::ALL {
        let _ = write!(csv, ",{}", c.name());
    }
    csv.push('\n');
    for (i, (c, scores)) in preds.iter().enumerate() {
        let _ = write!(csv, "{i},{}", c.name());
        for s in scores {
            let _ = write!(csv, ",{s}");
        }
        csv.push('\n');
    }
    fs::write(dest, csv).map_err(io_err(dest))?;
    emit(out, &format!("wrote {} predictions to {}\n", preds.len(), dest.display()))?;
    Ok(())
}

fn report(model_path: &Path, out: &mut dyn Write) -> std::result::Result<(), Failure> {
    let model = container::load_model(model_path)?;
    let mut text = format!(
        "format_version={}\nseed={}\nK={}\nbandwidth={}\nfit_subsample={}\n",
        model.format_version,
        model.seed,
        model.k(),
        model.meanshift.bandwidth(),
        model.meanshift.fit_subsample_size()
    );
    let _ = writeln!(text, "per_cluster_selection={}", selection_line(&model));
    let _ = writeln!(text, "final_net={:?}", model.final_net.layer_sizes());
    emit(out, &text)?;
    Ok(())
}
