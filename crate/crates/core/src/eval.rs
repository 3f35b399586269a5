//! Confusion matrices, the detection metric suite, and k-fold
//! cross-validation.
//!
//! With one-vs-rest counts TP, TN, FP, FN:
//!
//! ```text
//! accuracy  = (TP + TN) / (TP + TN + FP + FN)
//! precision = TP / (TP + FP)
//! recall    = TP / (TP + FN)          (= TPR)
//! f_score   = 2 P R / (P + R)
//! FPR       = FP / (TN + FP)
//! ```
//!
//! Zero denominators produce 0 and set [`Metrics::degenerate`].

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{ClassLabel, NUM_CLASSES};
use crate::seed;

/// Square count matrix; rows are ground truth, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let n = counts.len();
        if n == 0 {
            return Err(Error::Empty);
        }
        if let Some(row) = counts.iter().find(|r| r.len() != n) {
            return Err(Error::arity(n, row.len()));
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth][pred]
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn tp(&self, class: usize) -> u64 {
        self.counts[class][class]
    }

    pub fn fp(&self, class: usize) -> u64 {
        (0..self.num_classes())
            .filter(|&t| t != class)
            .map(|t| self.counts[t][class])
            .sum()
    }

    pub fn fn_(&self, class: usize) -> u64 {
        self.support(class) - self.tp(class)
    }

    pub fn tn(&self, class: usize) -> u64 {
        self.total() - self.tp(class) - self.fp(class) - self.fn_(class)
    }

    /// Collapses to {Normal, Attack}: index 0 = Normal, 1 = any attack class.
    pub fn binary_attack(&self) -> ConfusionMatrix {
        let n = self.num_classes();
        let mut b = vec![vec![0u64; 2]; 2];
        for t in 0..n {
            for p in 0..n {
                b[usize::from(t != 0)][usize::from(p != 0)] += self.counts[t][p];
            }
        }
        ConfusionMatrix { counts: b }
    }
}

/// 5x5 confusion matrix over the class labels.
pub fn confusion(preds: &[ClassLabel], truths: &[ClassLabel]) -> Result<ConfusionMatrix> {
    if preds.len() != truths.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: truths.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::Empty);
    }
    let mut counts = vec![vec![0u64; NUM_CLASSES]; NUM_CLASSES];
    for (p, t) in preds.iter().zip(truths) {
        counts[t.index()][p.index()] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Averaging {
    /// Normal vs. attack, attack as the positive class.
    BinaryAttack,
    /// One-vs-rest per class, averaged with weights proportional to support.
    WeightedPerClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FScoreForm {
    /// 2PR / (P + R).
    Harmonic,
    /// PR / (P + R), without the factor 2. Kept for audits only.
    Unscaled,
}

pub fn f_score(precision: f64, recall: f64, form: FScoreForm) -> f64 {
    let den = precision + recall;
    if den == 0.0 {
        return 0.0;
    }
    let f = precision * recall / den;
    match form {
        FScoreForm::Harmonic => 2.0 * f,
        FScoreForm::Unscaled => f,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub tpr: f64,
    pub fpr: f64,
    /// Some ratio had a zero denominator and was reported as 0.
    pub degenerate: bool,
}

fn ratio(num: u64, den: u64, degenerate: &mut bool) -> f64 {
    if den == 0 {
        *degenerate = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn metrics(cm: &ConfusionMatrix, averaging: Averaging) -> Result<Metrics> {
    metrics_with(cm, averaging, FScoreForm::Harmonic)
}

/// In weighted mode `accuracy` is the overall multi-class accuracy
/// (trace / total), which also equals the support-weighted recall; the
/// F-score is formed from the averaged precision and recall.
pub fn metrics_with(cm: &ConfusionMatrix, averaging: Averaging, form: FScoreForm) -> Result<Metrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Empty);
    }
    let mut degenerate = false;
    let (accuracy, precision, recall, fpr) = match averaging {
        Averaging::BinaryAttack => {
            let b = if cm.num_classes() == 2 {
                cm.clone()
            } else {
                cm.binary_attack()
            };
            let (tp, tn, fp, fn_) = (b.tp(1), b.tn(1), b.fp(1), b.fn_(1));
            (
                ratio(tp + tn, tp + tn + fp + fn_, &mut degenerate),
                ratio(tp, tp + fp, &mut degenerate),
                ratio(tp, tp + fn_, &mut degenerate),
                ratio(fp, tn + fp, &mut degenerate),
            )
        }
        Averaging::WeightedPerClass => {
            let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
            for c in 0..cm.num_classes() {
                let support = cm.support(c);
                if support == 0 {
                    continue;
                }
                let w = support as f64 / total as f64;
                let (tp, tn, fp, fn_) = (cm.tp(c), cm.tn(c), cm.fp(c), cm.fn_(c));
                p += w * ratio(tp, tp + fp, &mut degenerate);
                r += w * ratio(tp, tp + fn_, &mut degenerate);
                f += w * ratio(fp, tn + fp, &mut degenerate);
            }
            (cm.trace() as f64 / total as f64, p, r, f)
        }
    };
    Ok(Metrics {
        accuracy,
        precision,
        recall,
        f_score: f_score(precision, recall, form),
        tpr: recall,
        fpr,
        degenerate,
    })
}

/// Disjoint index folds covering `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    pub fn folds(&self) -> &[Vec<usize>] {
        &self.folds
    }

    pub fn validation(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    /// Every index outside `fold`, in fold order.
    pub fn training(&self, fold: usize) -> Vec<usize> {
        self.folds
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != fold)
            .flat_map(|(_, f)| f.iter().copied())
            .collect()
    }
}

/// Seeded shuffle, then contiguous slices; the first `n % k` folds get
/// one extra index.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || n < k {
        return Err(Error::BadK { k, n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        folds.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(FoldPlan { folds })
}

/// Anything that maps an input to a class.
pub trait Predictor<X> {
    fn predict(&self, x: &X) -> Result<ClassLabel>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
}

/// k rounds of fitting from scratch on k-1 folds and scoring accuracy on
/// the held-out fold. `fit` receives the fold index so it can derive its
/// own seed.
pub fn cross_validate<X, M, F>(data: &[(X, ClassLabel)], k: usize, seed: u64, fit: F) -> Result<CvReport>
where
    X: Clone + Send + Sync,
    M: Predictor<X>,
    F: Fn(usize, &[(X, ClassLabel)]) -> Result<M> + Sync,
{
    let plan = kfold_split(data.len(), k, seed)?;
    let fold_accuracies = (0..plan.k())
        .into_par_iter()
        .map(|fold| {
            let train: Vec<(X, ClassLabel)> = plan.training(fold).into_iter().map(|i| data[i].clone()).collect();
            let model = fit(fold, &train).map_err(|e| Error::Fold {
                fold,
                source: Box::new(e),
            })?;
            let valid = plan.validation(fold);
            let mut correct = 0usize;
            for &i in valid {
                let (x, truth) = &data[i];
                let pred = model.predict(x).map_err(|e| Error::Fold {
                    fold,
                    source: Box::new(e),
                })?;
                correct += usize::from(pred == *truth);
            }
            Ok(correct as f64 / valid.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean_accuracy = fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64;
    Ok(CvReport {
        fold_accuracies,
        mean_accuracy,
    })
}
