//! Linear soft-margin SVM trained in the primal.
//!
//! Minimizes `1/2 |theta|^2 + C * sum_t max(0, 1 - y_t (theta . x_t + theta0))`
//! by shuffled per-sample subgradient steps with step size `alpha / sqrt(epoch)`.
//! The margin width is `2 / |theta|`. Five classes are handled one-vs-rest.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{argmax, ClassLabel, NUM_CLASSES};
use crate::seed;

/// Decision value of a machine whose class never appeared in training.
pub const DEGENERATE_DECISION: f64 = -1.0e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub c: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            epochs: 20,
            learning_rate: 0.1,
            seed: 0,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::BadConfig(format!("C must be positive, got {}", self.c)));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::BadConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Machine {
    Linear { theta: Vec<f64>, theta0: f64 },
    /// Class absent from training; always votes against.
    Degenerate { dim: usize },
    /// Only this class was present in training; always votes for.
    Constant { dim: usize },
}

/// One binary machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmBinary {
    machine: Machine,
}

impl SvmBinary {
    pub fn linear(theta: Vec<f64>, theta0: f64) -> Self {
        SvmBinary {
            machine: Machine::Linear { theta, theta0 },
        }
    }

    pub fn degenerate(dim: usize) -> Self {
        SvmBinary {
            machine: Machine::Degenerate { dim },
        }
    }

    fn constant(dim: usize) -> Self {
        SvmBinary {
            machine: Machine::Constant { dim },
        }
    }

    pub fn machine(&self) -> &Machine {
        &self.machine
    }

    pub fn is_degenerate(&self) -> bool {
        !matches!(self.machine, Machine::Linear { .. })
    }

    pub fn dim(&self) -> usize {
        match &self.machine {
            Machine::Linear { theta, .. } => theta.len(),
            Machine::Degenerate { dim } | Machine::Constant { dim } => *dim,
        }
    }

    pub fn theta(&self) -> Option<&[f64]> {
        match &self.machine {
            Machine::Linear { theta, .. } => Some(theta),
            _ => None,
        }
    }

    pub fn theta0(&self) -> Option<f64> {
        match &self.machine {
            Machine::Linear { theta0, .. } => Some(*theta0),
            _ => None,
        }
    }

    /// `theta . x + theta0`.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::arity(self.dim(), x.len()));
        }
        Ok(match &self.machine {
            Machine::Linear { theta, theta0 } => dot(theta, x) + theta0,
            Machine::Degenerate { .. } => DEGENERATE_DECISION,
            Machine::Constant { .. } => 1.0,
        })
    }

    /// Geometric margin `2 / |theta|`.
    pub fn margin_width(&self) -> Option<f64> {
        self.theta().map(|t| 2.0 / norm(t))
    }

    /// `|theta . x + theta0| / |theta|`.
    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        let d = self.decision(x)?;
        Ok(self.theta().map_or(f64::INFINITY, |t| d.abs() / norm(t)))
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Primal soft-margin objective.
pub fn hinge_objective<X: AsRef<[f64]>>(theta: &[f64], theta0: f64, xs: &[X], ys: &[f64], c: f64) -> f64 {
    let hinge: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| (1.0 - y * (dot(theta, x.as_ref()) + theta0)).max(0.0))
        .sum();
    0.5 * dot(theta, theta) + c * hinge
}

/// Trains one machine on labels in {+1, -1}. The per-sample step on
/// sample t is the subgradient of `|theta|^2 / (2n) + C * hinge_t`.
pub fn train_binary<X: AsRef<[f64]>>(xs: &[X], ys: &[f64], cfg: &SvmConfig) -> Result<SvmBinary> {
    train_binary_traced(xs, ys, cfg, |_, _, _| ())
}

/// As [`train_binary`], calling `on_epoch(epoch, theta, theta0)` after each epoch.
pub fn train_binary_traced<X: AsRef<[f64]>>(
    xs: &[X],
    ys: &[f64],
    cfg: &SvmConfig,
    mut on_epoch: impl FnMut(usize, &[f64], f64),
) -> Result<SvmBinary> {
    cfg.validate()?;
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if !(ys.iter().any(|&y| y > 0.0) && ys.iter().any(|&y| y < 0.0)) {
        return Err(Error::SingleClass);
    }
    let dim = xs[0].as_ref().len();
    if let Some(bad) = xs.iter().find(|x| x.as_ref().len() != dim) {
        return Err(Error::arity(dim, bad.as_ref().len()));
    }

    let n = xs.len() as f64;
    let mut theta = vec![0.0; dim];
    let mut theta0 = 0.0;
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut rng = seed::rng(cfg.seed);
    for epoch in 1..=cfg.epochs {
        let eta = cfg.learning_rate / (epoch as f64).sqrt();
        order.shuffle(&mut rng);
        for &t in &order {
            let x = xs[t].as_ref();
            let y = ys[t].signum();
            let violated = y * (dot(&theta, x) + theta0) < 1.0;
            let shrink = 1.0 - eta / n;
            for (w, &xi) in theta.iter_mut().zip(x) {
                *w *= shrink;
                if violated {
                    *w += eta * cfg.c * y * xi;
                }
            }
            if violated {
                theta0 += eta * cfg.c * y;
            }
        }
        on_epoch(epoch, &theta, theta0);
    }
    Ok(SvmBinary::linear(theta, theta0))
}

/// Five one-vs-rest machines, indexed by [`ClassLabel::index`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    machines: Vec<SvmBinary>,
}

impl SvmModel {
    /// Every machine degenerate: uniform scores everywhere.
    pub fn untrained(dim: usize) -> Self {
        SvmModel {
            machines: (0..NUM_CLASSES).map(|_| SvmBinary::degenerate(dim)).collect(),
        }
    }

    pub fn machines(&self) -> &[SvmBinary] {
        &self.machines
    }

    pub fn dim(&self) -> usize {
        self.machines[0].dim()
    }

    pub fn degenerate_classes(&self) -> Vec<ClassLabel> {
        ClassLabel::ALL
            .into_iter()
            .filter(|c| self.machines[c.index()].is_degenerate())
            .collect()
    }

    pub fn decisions(&self, x: &[f64]) -> Result<[f64; NUM_CLASSES]> {
        let mut d = [0.0; NUM_CLASSES];
        for (o, m) in d.iter_mut().zip(&self.machines) {
            *o = m.decision(x)?;
        }
        Ok(d)
    }

    /// Softmax over the five decision values.
    pub fn predict_scores(&self, x: &[f64]) -> Result<[f64; NUM_CLASSES]> {
        Ok(softmax(&self.decisions(x)?))
    }

    pub fn predict(&self, x: &[f64]) -> Result<ClassLabel> {
        let d = self.decisions(x)?;
        Ok(ClassLabel::ALL[argmax(&d)])
    }
}

pub fn softmax(z: &[f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; NUM_CLASSES];
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(z) {
        *o = (v - max).exp();
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
    out
}

/// One-vs-rest training. Classes without samples get a degenerate
/// always-negative machine; if only one class is present its machine
/// always votes positive.
pub fn train_ovr<X: AsRef<[f64]>>(xs: &[X], labels: &[ClassLabel], cfg: &SvmConfig) -> Result<SvmModel> {
    cfg.validate()?;
    if xs.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: labels.len(),
        });
    }
    let dim = xs.first().ok_or(Error::EmptyDataset)?.as_ref().len();
    let mut counts = [0usize; NUM_CLASSES];
    for l in labels {
        counts[l.index()] += 1;
    }
    let present = counts.iter().filter(|&&n| n > 0).count();

    let machines = ClassLabel::ALL
        .into_iter()
        .map(|class| {
            if counts[class.index()] == 0 {
                return Ok(SvmBinary::degenerate(dim));
            }
            if present == 1 {
                return Ok(SvmBinary::constant(dim));
            }
            let ys: Vec<f64> = labels.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
            let machine_cfg = SvmConfig {
                seed: seed::derive(cfg.seed, "svm-ovr", class.index() as u64),
                ..*cfg
            };
            train_binary(xs, &ys, &machine_cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SvmModel { machines })
}
