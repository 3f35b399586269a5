//! Divide-and-conquer ensemble: partition the autoencoded training set by
//! mean-shift cluster, fit a deep network and a one-vs-rest SVM on every
//! cluster, keep whichever cross-validates better, and stack the
//! membership-weighted cluster scores into a final single-layer network.

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autoencoder::{AutoencoderConfig, AutoencoderModel};
use crate::error::{Error, Result, StageExt};
use crate::eval::{self, Predictor};
use crate::ingest::{argmax, ClassLabel, RawRecord, NUM_CLASSES};
use crate::meanshift::{self, MeanShiftConfig, MeanShiftModel};
use crate::nn::{self, Activation, LossKind, Network, TrainConfig};
use crate::preprocess::{self, Preprocessor};
use crate::seed;
use crate::svm::{self, SvmConfig, SvmModel};

pub const DEFAULT_CV_FOLDS: usize = 10;
/// Below this many records a cluster skips cross-validation.
pub const MIN_CV_RECORDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    Dnn,
    Svm,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Dnn => "DNN",
            ModelKind::Svm => "SVM",
        })
    }
}

/// The SVM wins only with a strictly higher accuracy.
pub fn select(dnn_accuracy: f64, svm_accuracy: f64) -> ModelKind {
    if svm_accuracy > dnn_accuracy {
        ModelKind::Svm
    } else {
        ModelKind::Dnn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DnnProfile {
    /// Six sigmoid hidden layers (25, 15, 15, 25, 15, 10), MSE.
    Deep,
    /// Two hidden layers (25, 15), relu hidden / sigmoid output, cross-entropy.
    Shallow,
}

impl std::str::FromStr for DnnProfile {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "deep" => Ok(DnnProfile::Deep),
            "shallow" => Ok(DnnProfile::Shallow),
            other => Err(format!("unknown DNN profile {other:?} (expected \"deep\" or \"shallow\")")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnnConfig {
    pub profile: DnnProfile,
    pub hidden: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub loss: LossKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl DnnConfig {
    pub fn profile(profile: DnnProfile) -> Self {
        match profile {
            DnnProfile::Deep => DnnConfig {
                profile,
                hidden: vec![25, 15, 15, 25, 15, 10],
                hidden_activation: Activation::Sigmoid,
                output_activation: Activation::Sigmoid,
                loss: LossKind::MeanSquare,
                learning_rate: 0.01,
                epochs: 30,
                batch_size: 64,
            },
            DnnProfile::Shallow => DnnConfig {
                profile,
                hidden: vec![25, 15],
                hidden_activation: Activation::Relu,
                output_activation: Activation::Sigmoid,
                loss: LossKind::CrossEntropy,
                learning_rate: 0.01,
                epochs: 40,
                batch_size: 128,
            },
        }
    }

    pub fn build(&self, input_dim: usize, seed: u64) -> Result<Network> {
        let mut sizes = Vec::with_capacity(self.hidden.len() + 2);
        sizes.push(input_dim);
        sizes.extend_from_slice(&self.hidden);
        sizes.push(NUM_CLASSES);
        let mut acts = vec![self.hidden_activation; self.hidden.len()];
        acts.push(self.output_activation);
        Network::new(&sizes, &acts, seed)
    }

    fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            loss: self.loss,
            seed,
        }
    }
}

impl Default for DnnConfig {
    fn default() -> Self {
        DnnConfig::profile(DnnProfile::Deep)
    }
}

/// Trains a fresh network on one-hot targets.
pub fn train_dnn(rows: &[(Vec<f64>, ClassLabel)], cfg: &DnnConfig, seed: u64) -> Result<Network> {
    let first = rows.first().ok_or(Error::EmptyDataset)?;
    let net = cfg.build(first.0.len(), seed::derive(seed, "dnn-init", 0))?;
    let xs: Vec<&[f64]> = rows.iter().map(|(x, _)| x.as_slice()).collect();
    let ys: Vec<[f64; NUM_CLASSES]> = rows.iter().map(|(_, c)| c.one_hot()).collect();
    let (net, _) = nn::train(net, &xs, &ys, &cfg.train_config(seed::derive(seed, "dnn-sgd", 0)))?;
    Ok(net)
}

pub fn train_svm(rows: &[(Vec<f64>, ClassLabel)], cfg: &SvmConfig, seed: u64) -> Result<SvmModel> {
    let xs: Vec<&[f64]> = rows.iter().map(|(x, _)| x.as_slice()).collect();
    let labels: Vec<ClassLabel> = rows.iter().map(|(_, c)| *c).collect();
    svm::train_ovr(&xs, &labels, &SvmConfig { seed, ..*cfg })
}

impl Predictor<Vec<f64>> for Network {
    fn predict(&self, x: &Vec<f64>) -> Result<ClassLabel> {
        Ok(ClassLabel::from_index(self.predict_class(x)?).expect("network has five outputs"))
    }
}

impl Predictor<Vec<f64>> for SvmModel {
    fn predict(&self, x: &Vec<f64>) -> Result<ClassLabel> {
        SvmModel::predict(self, x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ClusterLearner {
    Dnn(Network),
    Svm(SvmModel),
}

impl ClusterLearner {
    pub fn kind(&self) -> ModelKind {
        match self {
            ClusterLearner::Dnn(_) => ModelKind::Dnn,
            ClusterLearner::Svm(_) => ModelKind::Svm,
        }
    }

    /// Raw sigmoid outputs for a network, softmaxed decisions for an SVM.
    pub fn scores(&self, x: &[f64]) -> Result<[f64; NUM_CLASSES]> {
        match self {
            ClusterLearner::Dnn(net) => {
                let out = net.predict_proba(x)?;
                let mut s = [0.0; NUM_CLASSES];
                s.copy_from_slice(&out);
                Ok(s)
            }
            ClusterLearner::Svm(m) => m.predict_scores(x),
        }
    }
}

/// Why a cluster's accuracies are not cross-validated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fallback {
    /// Too few records or classes; both learners scored on their own
    /// training rows.
    TinyCluster,
    /// No training record fell in the cluster; the learner is untrained.
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub kind: ModelKind,
    pub dnn_accuracy: f64,
    pub svm_accuracy: f64,
    pub records: usize,
    pub fallback: Option<Fallback>,
}

impl std::fmt::Display for SelectionRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}(dnn={:.4},svm={:.4},n={}",
            self.kind, self.dnn_accuracy, self.svm_accuracy, self.records
        )?;
        match self.fallback {
            Some(Fallback::TinyCluster) => write!(f, ",tiny)"),
            Some(Fallback::Empty) => write!(f, ",empty)"),
            None => write!(f, ")"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub learner: ClusterLearner,
    pub selection: SelectionRecord,
}

impl ClusterModel {
    pub fn kind(&self) -> ModelKind {
        self.learner.kind()
    }

    pub fn scores(&self, x: &[f64]) -> Result<[f64; NUM_CLASSES]> {
        self.learner.scores(x)
    }
}

/// Splits records by nearest mode. Subsets are indexed like the modes and
/// may be empty.
pub fn partition(data: &[(Vec<f64>, ClassLabel)], ms: &MeanShiftModel) -> Vec<Vec<(Vec<f64>, ClassLabel)>> {
    let assignment: Vec<usize> = data.par_iter().map(|(x, _)| ms.assign(x).0).collect();
    let mut subsets = vec![Vec::new(); ms.k()];
    for (row, c) in data.iter().zip(assignment) {
        subsets[c].push(row.clone());
    }
    subsets
}

fn distinct_classes(rows: &[(Vec<f64>, ClassLabel)]) -> usize {
    let mut seen = [false; NUM_CLASSES];
    for (_, c) in rows {
        seen[c.index()] = true;
    }
    seen.iter().filter(|&&s| s).count()
}

fn accuracy<M: Predictor<Vec<f64>>>(model: &M, rows: &[(Vec<f64>, ClassLabel)]) -> Result<f64> {
    let mut correct = 0usize;
    for (x, c) in rows {
        correct += usize::from(model.predict(x)? == *c);
    }
    Ok(correct as f64 / rows.len() as f64)
}

/// Mean k-fold accuracies of both learners over the same fold plan.
pub fn cross_validated_accuracies(
    rows: &[(Vec<f64>, ClassLabel)],
    dnn: &DnnConfig,
    svm: &SvmConfig,
    folds: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let classes = distinct_classes(rows);
    if rows.len() < MIN_CV_RECORDS.max(folds) || classes < 2 {
        return Err(Error::TinyCluster {
            records: rows.len(),
            classes,
            folds,
        });
    }
    let plan_seed = seed::derive(seed, "cluster-cv", 0);
    let dnn_report = eval::cross_validate(rows, folds, plan_seed, |fold, train| {
        train_dnn(train, dnn, seed::derive(seed, "cluster-dnn", fold as u64 + 1))
    })?;
    let svm_report = eval::cross_validate(rows, folds, plan_seed, |fold, train| {
        train_svm(train, svm, seed::derive(seed, "cluster-svm", fold as u64 + 1))
    })?;
    Ok((dnn_report.mean_accuracy, svm_report.mean_accuracy))
}

/// Trains both candidates on one cluster and keeps the more accurate one,
/// refitted on the whole subset. `dim` sizes the untrained network that
/// stands in for an empty cluster.
pub fn train_cluster_pair(
    rows: &[(Vec<f64>, ClassLabel)],
    dim: usize,
    dnn: &DnnConfig,
    svm: &SvmConfig,
    folds: usize,
    seed: u64,
) -> Result<ClusterModel> {
    if rows.is_empty() {
        let net = dnn.build(dim, seed::derive(seed, "cluster-dnn", 0))?;
        return Ok(ClusterModel {
            learner: ClusterLearner::Dnn(net),
            selection: SelectionRecord {
                kind: ModelKind::Dnn,
                dnn_accuracy: 0.0,
                svm_accuracy: 0.0,
                records: 0,
                fallback: Some(Fallback::Empty),
            },
        });
    }
    let dnn_seed = seed::derive(seed, "cluster-dnn", 0);
    let svm_seed = seed::derive(seed, "cluster-svm", 0);
    match cross_validated_accuracies(rows, dnn, svm, folds, seed) {
        Ok((dnn_accuracy, svm_accuracy)) => {
            let kind = select(dnn_accuracy, svm_accuracy);
            let learner = match kind {
                ModelKind::Dnn => ClusterLearner::Dnn(train_dnn(rows, dnn, dnn_seed)?),
                ModelKind::Svm => ClusterLearner::Svm(train_svm(rows, svm, svm_seed)?),
            };
            Ok(ClusterModel {
                learner,
                selection: SelectionRecord {
                    kind,
                    dnn_accuracy,
                    svm_accuracy,
                    records: rows.len(),
                    fallback: None,
                },
            })
        }
        Err(Error::TinyCluster { records, classes, .. }) => {
            debug!("cluster with {records} records / {classes} classes: selecting on training accuracy");
            let net = train_dnn(rows, dnn, dnn_seed)?;
            let machine = train_svm(rows, svm, svm_seed)?;
            let dnn_accuracy = accuracy(&net, rows)?;
            let svm_accuracy = accuracy(&machine, rows)?;
            let kind = select(dnn_accuracy, svm_accuracy);
            let learner = match kind {
                ModelKind::Dnn => ClusterLearner::Dnn(net),
                ModelKind::Svm => ClusterLearner::Svm(machine),
            };
            Ok(ClusterModel {
                learner,
                selection: SelectionRecord {
                    kind,
                    dnn_accuracy,
                    svm_accuracy,
                    records,
                    fallback: Some(Fallback::TinyCluster),
                },
            })
        }
        Err(e) => Err(e),
    }
}

/// Rows of K concatenated 5-wide blocks; block i of a row holds cluster
/// i's scores times the row's membership in cluster i.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedMatrix {
    k: usize,
    data: Vec<f64>,
}

impl AugmentedMatrix {
    pub fn from_rows(k: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let width = k * NUM_CLASSES;
        let mut data = Vec::with_capacity(rows.len() * width);
        for r in rows {
            if r.len() != width {
                return Err(Error::arity(width, r.len()));
            }
            data.extend_from_slice(r);
        }
        Ok(AugmentedMatrix { k, data })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn width(&self) -> usize {
        self.k * NUM_CLASSES
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.width()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let w = self.width();
        &self.data[r * w..(r + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.width())
    }

    pub fn block(&self, r: usize, cluster: usize) -> &[f64] {
        &self.row(r)[cluster * NUM_CLASSES..(cluster + 1) * NUM_CLASSES]
    }
}

/// One augmented row: the assigned cluster's scores in its block, zeros
/// everywhere else.
pub fn augmented_row(models: &[ClusterModel], ms: &MeanShiftModel, x: &[f64]) -> Result<Vec<f64>> {
    if models.len() != ms.k() {
        return Err(Error::arity(ms.k(), models.len()));
    }
    let (c, u) = ms.assign(x);
    let scores = models[c].scores(x)?;
    let mut row = vec![0.0; models.len() * NUM_CLASSES];
    for (dst, s) in row[c * NUM_CLASSES..(c + 1) * NUM_CLASSES].iter_mut().zip(scores) {
        *dst = s * u;
    }
    Ok(row)
}

pub fn aggregate<V: AsRef<[f64]> + Sync>(
    models: &[ClusterModel],
    ms: &MeanShiftModel,
    data: &[V],
) -> Result<AugmentedMatrix> {
    if models.len() != ms.k() {
        return Err(Error::arity(ms.k(), models.len()));
    }
    let rows = data
        .par_iter()
        .map(|x| augmented_row(models, ms, x.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    AugmentedMatrix::from_rows(models.len(), &rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for FinalConfig {
    fn default() -> Self {
        FinalConfig {
            learning_rate: 0.5,
            epochs: 30,
            batch_size: 512,
        }
    }
}

/// Single tanh layer from K·5 inputs to the five classes, MSE on one-hot
/// targets. Returns the network and its per-epoch loss.
pub fn train_final(
    aug: &AugmentedMatrix,
    labels: &[ClassLabel],
    cfg: &FinalConfig,
    seed: u64,
) -> Result<(Network, Vec<f64>)> {
    if labels.len() != aug.len() {
        return Err(Error::arity(aug.len(), labels.len()));
    }
    let net = Network::new(&[aug.width(), NUM_CLASSES], &[Activation::Tanh], seed::derive(seed, "final-init", 0))?;
    let xs: Vec<&[f64]> = aug.rows().collect();
    let ys: Vec<[f64; NUM_CLASSES]> = labels.iter().map(|c| c.one_hot()).collect();
    let tc = TrainConfig {
        learning_rate: cfg.learning_rate,
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        loss: LossKind::MeanSquare,
        seed: seed::derive(seed, "final-sgd", 0),
    };
    nn::train(net, &xs, &ys, &tc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub oversample: bool,
    pub autoencoder: AutoencoderConfig,
    pub meanshift: MeanShiftConfig,
    /// Network settings for every cluster without an entry in `cluster_dnn`.
    pub dnn: DnnConfig,
    /// Per-cluster overrides, indexed by cluster.
    pub cluster_dnn: Vec<DnnConfig>,
    pub svm: SvmConfig,
    pub cv_folds: usize,
    pub final_net: FinalConfig,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            oversample: true,
            autoencoder: AutoencoderConfig::default(),
            meanshift: MeanShiftConfig::default(),
            dnn: DnnConfig::default(),
            cluster_dnn: Vec::new(),
            svm: SvmConfig::default(),
            cv_folds: DEFAULT_CV_FOLDS,
            final_net: FinalConfig::default(),
        }
    }
}

impl EnsembleConfig {
    pub fn dnn_for(&self, cluster: usize) -> &DnnConfig {
        self.cluster_dnn.get(cluster).unwrap_or(&self.dnn)
    }

    /// Copy with every stage seed replaced by one derived from `master`.
    pub fn with_derived_seeds(&self, master: u64) -> Self {
        let mut c = self.clone();
        c.autoencoder.seed = seed::derive(master, "autoencoder", 0);
        c.meanshift.seed = seed::derive(master, "meanshift", 0);
        c.svm.seed = seed::derive(master, "svm", 0);
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub format_version: u32,
    pub seed: u64,
    pub config: EnsembleConfig,
    pub preprocessor: Preprocessor,
    pub autoencoder: AutoencoderModel,
    pub meanshift: MeanShiftModel,
    pub clusters: Vec<ClusterModel>,
    pub final_net: Network,
}

impl EnsembleModel {
    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    pub fn selections(&self) -> Vec<SelectionRecord> {
        self.clusters.iter().map(|c| c.selection).collect()
    }

    /// Preprocessed and autoencoded representation of a raw record.
    pub fn code(&self, record: &RawRecord) -> Result<Vec<f64>> {
        self.autoencoder.encode(&self.preprocessor.transform(record))
    }

    pub fn augmented_row(&self, record: &RawRecord) -> Result<Vec<f64>> {
        augmented_row(&self.clusters, &self.meanshift, &self.code(record)?)
    }
}

/// Side information from a training run that is not part of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub input_records: usize,
    pub class_counts_after_oversample: [usize; NUM_CLASSES],
    pub autoencoder_loss: Vec<f64>,
    /// Records of the (possibly oversampled) training set per cluster.
    pub cluster_sizes: Vec<usize>,
    pub final_loss: Vec<f64>,
}

pub fn train_pipeline(train: &[(RawRecord, ClassLabel)], config: &EnsembleConfig, seed: u64) -> Result<EnsembleModel> {
    train_pipeline_with_report(train, config, seed).map(|(m, _)| m)
}

pub fn train_pipeline_with_report(
    train: &[(RawRecord, ClassLabel)],
    config: &EnsembleConfig,
    seed: u64,
) -> Result<(EnsembleModel, TrainingReport)> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let config = config.with_derived_seeds(seed);

    let preprocessor = Preprocessor::fit(train.iter().map(|(r, _)| r)).stage("preprocess")?;
    let mut rows: Vec<(Vec<f64>, ClassLabel)> = train
        .par_iter()
        .map(|(r, c)| (preprocessor.transform(r), *c))
        .collect();
    if config.oversample {
        rows = preprocess::oversample(&rows, seed::derive(seed, "oversample", 0)).stage("oversample")?;
    }
    let class_counts_after_oversample = crate::ingest::class_counts(rows.iter());
    info!("preprocessed {} records ({} after oversampling)", train.len(), rows.len());

    let xs: Vec<&[f64]> = rows.iter().map(|(x, _)| x.as_slice()).collect();
    let autoencoder = AutoencoderModel::train(&xs, &config.autoencoder).stage("autoencoder")?;
    let codes: Vec<(Vec<f64>, ClassLabel)> = rows
        .par_iter()
        .map(|(x, c)| Ok((autoencoder.encode(x)?, *c)))
        .collect::<Result<_>>()
        .stage("autoencoder")?;
    drop(rows);

    let code_vecs: Vec<&[f64]> = codes.iter().map(|(x, _)| x.as_slice()).collect();
    let ms = meanshift::fit_with(&code_vecs, &config.meanshift).stage("meanshift")?;
    info!("mean-shift: bandwidth {:.4}, K = {}", ms.bandwidth(), ms.k());

    let subsets = partition(&codes, &ms);
    let cluster_sizes: Vec<usize> = subsets.iter().map(Vec::len).collect();
    let dim = autoencoder.code_dim();
    let clusters = subsets
        .par_iter()
        .enumerate()
        .map(|(i, subset)| {
            train_cluster_pair(
                subset,
                dim,
                config.dnn_for(i),
                &config.svm,
                config.cv_folds,
                seed::derive(seed, "cluster", i as u64),
            )
        })
        .collect::<Result<Vec<_>>>()
        .stage("cluster")?;
    for (i, c) in clusters.iter().enumerate() {
        info!("cluster {i}: {}", c.selection);
    }

    let aug = aggregate(&clusters, &ms, &code_vecs).stage("aggregate")?;
    let labels: Vec<ClassLabel> = codes.iter().map(|(_, c)| *c).collect();
    let (final_net, final_loss) =
        train_final(&aug, &labels, &config.final_net, seed::derive(seed, "final", 0)).stage("final")?;

    let model = EnsembleModel {
        format_version: crate::container::FORMAT_VERSION,
        seed,
        config,
        preprocessor,
        autoencoder: autoencoder.clone(),
        meanshift: ms,
        clusters,
        final_net,
    };
    let report = TrainingReport {
        input_records: train.len(),
        class_counts_after_oversample,
        autoencoder_loss: autoencoder.loss_history().to_vec(),
        cluster_sizes,
        final_loss,
    };
    Ok((model, report))
}

/// Class and final-network scores for one raw record.
pub fn predict(model: &EnsembleModel, record: &RawRecord) -> Result<(ClassLabel, [f64; NUM_CLASSES])> {
    let row = model.augmented_row(record)?;
    let out = model.final_net.predict_proba(&row)?;
    let mut scores = [0.0; NUM_CLASSES];
    scores.copy_from_slice(&out);
    let class = ClassLabel::from_index(argmax(&scores)).expect("five scores");
    Ok((class, scores))
}

pub fn predict_batch(model: &EnsembleModel, records: &[RawRecord]) -> Result<Vec<(ClassLabel, [f64; NUM_CLASSES])>> {
    records.par_iter().map(|r| predict(model, r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{self, BlobSpec};

    #[test]
    fn selection_rule() {
        assert_eq!(select(0.73, 0.60), ModelKind::Dnn);
        assert_eq!(select(0.40, 0.51), ModelKind::Svm);
        assert_eq!(select(0.5, 0.5), ModelKind::Dnn);
    }

    #[test]
    fn profiles() {
        let deep = DnnConfig::profile(DnnProfile::Deep).build(25, 0).unwrap();
        assert_eq!(deep.layer_sizes(), [25, 25, 15, 15, 25, 15, 10, 5]);
        assert!(deep.layers().iter().all(|l| l.activation() == Activation::Sigmoid));
        let shallow = DnnConfig::profile(DnnProfile::Shallow).build(25, 0).unwrap();
        assert_eq!(shallow.layer_sizes(), [25, 25, 15, 5]);
        let acts: Vec<_> = shallow.layers().iter().map(|l| l.activation()).collect();
        assert_eq!(acts, [Activation::Relu, Activation::Relu, Activation::Sigmoid]);
        assert_eq!("shallow".parse::<DnnProfile>(), Ok(DnnProfile::Shallow));
        assert!("wide".parse::<DnnProfile>().is_err());
    }

    fn two_mode_model() -> MeanShiftModel {
        MeanShiftModel::from_modes(0.5, vec![vec![0.0, 0.0], vec![5.0, 5.0]]).unwrap()
    }

    #[test]
    fn partition_matches_brute_force() {
        let ms = two_mode_model();
        let data: Vec<(Vec<f64>, ClassLabel)> = (0..40)
            .map(|i| {
                let t = i as f64 / 8.0;
                (vec![t, 5.0 - t], ClassLabel::ALL[i % 5])
            })
            .collect();
        let parts = partition(&data, &ms);
        assert_eq!(parts.iter().map(Vec::len).sum::<usize>(), data.len());
        for (c, part) in parts.iter().enumerate() {
            for (x, _) in part {
                let d: Vec<f64> = ms
                    .modes()
                    .iter()
                    .map(|m| m.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum())
                    .collect();
                let nearest = if d[1] < d[0] { 1 } else { 0 };
                assert_eq!(nearest, c);
            }
        }
        let single = MeanShiftModel::from_modes(0.5, vec![vec![1.0, 1.0]]).unwrap();
        assert_eq!(partition(&data, &single), vec![data.clone()]);
    }

    fn labeled_gaussians(n: usize, seed: u64) -> Vec<(Vec<f64>, ClassLabel)> {
        use rand::Rng;
        let mut rng = seed::rng(seed);
        (0..n)
            .map(|i| {
                let c = ClassLabel::ALL[i % 5];
                let mut x = vec![0.1; 6];
                x[c.index()] = 0.9;
                for v in &mut x {
                    *v += rng.gen_range(-0.05..0.05);
                }
                (x, c)
            })
            .collect()
    }

    #[test]
    fn cluster_pair_records_both_accuracies() {
        let rows = labeled_gaussians(100, 3);
        let cfg = DnnConfig {
            epochs: 5,
            ..DnnConfig::profile(DnnProfile::Shallow)
        };
        let m = train_cluster_pair(&rows, 6, &cfg, &SvmConfig::default(), 10, 1).unwrap();
        let s = m.selection;
        assert_eq!(s.fallback, None);
        assert_eq!(s.records, 100);
        assert_eq!(s.kind, select(s.dnn_accuracy, s.svm_accuracy));
        assert_eq!(m.kind(), s.kind);
        assert!((0.0..=1.0).contains(&s.dnn_accuracy) && (0.0..=1.0).contains(&s.svm_accuracy));
        // one-vs-rest on one-hot-like inputs is easy
        assert!(s.svm_accuracy > 0.9, "{s}");
    }

    #[test]
    fn tiny_and_empty_clusters_fall_back() {
        let rows = labeled_gaussians(6, 4);
        let m = train_cluster_pair(&rows, 6, &DnnConfig::default(), &SvmConfig::default(), 10, 0).unwrap();
        assert_eq!(m.selection.fallback, Some(Fallback::TinyCluster));

        let one_class: Vec<_> = labeled_gaussians(50, 5).into_iter().filter(|(_, c)| *c == ClassLabel::DoS).collect();
        let m = train_cluster_pair(&one_class, 6, &DnnConfig::default(), &SvmConfig::default(), 10, 0).unwrap();
        assert_eq!(m.selection.fallback, Some(Fallback::TinyCluster));

        let m = train_cluster_pair(&[], 6, &DnnConfig::default(), &SvmConfig::default(), 10, 0).unwrap();
        assert_eq!(m.selection.fallback, Some(Fallback::Empty));
        assert_eq!(m.kind(), ModelKind::Dnn);
        assert_eq!(m.scores(&[0.0; 6]).unwrap().len(), 5);
    }

    #[test]
    fn augmented_rows_are_hard_blocks() {
        let ms = two_mode_model();
        let models: Vec<ClusterModel> = (0..2)
            .map(|i| train_cluster_pair(&[], 2, &DnnConfig::default(), &SvmConfig::default(), 10, i).unwrap())
            .collect();
        let data = vec![vec![0.1, 0.2], vec![4.0, 5.5], vec![2.4, 2.4]];
        let aug = aggregate(&models, &ms, &data).unwrap();
        assert_eq!(aug.width(), 10);
        assert_eq!(aug.len(), 3);
        assert_eq!(aug.block(0, 1), [0.0; 5]);
        assert_eq!(aug.block(1, 0), [0.0; 5]);
        // hand recomposition of row 1
        let expect = models[1].scores(&data[1]).unwrap();
        assert_eq!(aug.block(1, 1), expect);
        assert!(matches!(aggregate(&models[..1], &ms, &data), Err(Error::ArityMismatch { .. })));
    }

    #[test]
    fn final_net_learns_perfect_blocks() {
        // K = 3, each row carries an exact one-hot of its class in one block
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..600 {
            let c = ClassLabel::ALL[i % 5];
            let k = i % 3;
            let mut r = vec![0.0; 15];
            r[k * 5 + c.index()] = 1.0;
            rows.push(r);
            labels.push(c);
        }
        let aug = AugmentedMatrix::from_rows(3, &rows).unwrap();
        let (net, loss) = train_final(&aug, &labels, &FinalConfig::default(), 7).unwrap();
        assert_eq!(net.layer_sizes(), [15, 5]);
        assert_eq!(loss.len(), 30);
        let correct = rows
            .iter()
            .zip(&labels)
            .filter(|(r, c)| net.predict_class(r).unwrap() == c.index())
            .count();
        assert!(correct as f64 / rows.len() as f64 >= 0.99, "{correct}");
        assert!(matches!(train_final(&aug, &labels[1..], &FinalConfig::default(), 0), Err(Error::ArityMismatch { .. })));
    }

    fn toy_config() -> EnsembleConfig {
        EnsembleConfig {
            autoencoder: AutoencoderConfig {
                epochs: 10,
                batch_size: 32,
                ..AutoencoderConfig::default()
            },
            dnn: DnnConfig {
                epochs: 10,
                ..DnnConfig::default()
            },
            cv_folds: 3,
            ..EnsembleConfig::default()
        }
    }

    #[test]
    fn pipeline_predicts_consistently() {
        let spec = BlobSpec {
            class_counts: [30, 24, 18, 12, 9],
            noise: 0.05,
        };
        let data = synthetic::blobs(&spec, 11);
        let model = train_pipeline(&data, &toy_config(), 5).unwrap();
        assert_eq!(model.final_net.input_size(), model.k() * 5);
        assert_eq!(model.k(), model.meanshift.k());
        for (r, _) in data.iter().take(20) {
            let (c, s) = predict(&model, r).unwrap();
            assert_eq!(c.index(), argmax(&s));
            assert_eq!(predict(&model, r).unwrap(), (c, s));
        }
    }

    #[test]
    fn pipeline_errors_carry_stage() {
        let spec = BlobSpec {
            class_counts: [10, 10, 10, 10, 0],
            noise: 0.05,
        };
        let data = synthetic::blobs(&spec, 1);
        let err = train_pipeline(&data, &toy_config(), 0).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: "oversample", .. }), "{err}");
        assert!(matches!(train_pipeline(&[], &toy_config(), 0), Err(Error::EmptyDataset)));
    }
}
