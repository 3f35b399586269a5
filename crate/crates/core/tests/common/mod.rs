//! Test-side oracles shared by the integration tests and the acceptance
//! harness. Nothing here calls into the library's own forward, loss or
//! counting code.
#![allow(dead_code)]

use std::io::Write;
use std::path::Path;

use ceids::ingest::{ClassLabel, RawRecord, NUM_NUMERIC};
use ceids::nn::{Activation, Layer, LossKind, Network};

pub const TRAIN_COUNTS: [usize; 5] = [67_343, 45_927, 11_656, 995, 52];
pub const TEST_COUNTS: [usize; 5] = [9_710, 7_458, 2_421, 2_754, 200];

fn act(a: Activation, z: f64) -> f64 {
    match a {
        Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        Activation::Relu => z.max(0.0),
        Activation::Tanh => z.tanh(),
        Activation::Identity => z,
    }
}

/// Plain nested-loop matrix-vector forward pass.
pub fn oracle_forward(layers: &[Layer], x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    for l in layers {
        let w = l.weights();
        let mut next = vec![0.0; l.fan_out()];
        for (j, out) in next.iter_mut().enumerate() {
            let mut z = l.bias()[j];
            for (i, ai) in a.iter().enumerate() {
                z += w[j * l.fan_in() + i] * ai;
            }
            *out = act(l.activation(), z);
        }
        a = next;
    }
    a
}

pub fn oracle_loss(pred: &[f64], target: &[f64], kind: LossKind) -> f64 {
    match kind {
        LossKind::MeanSquare => pred.iter().zip(target).map(|(a, t)| (t - a).powi(2)).sum(),
        LossKind::CrossEntropy => pred
            .iter()
            .zip(target)
            .map(|(a, t)| -t * a.clamp(1e-12, 1.0 - 1e-12).ln())
            .sum(),
    }
}

pub fn oracle_mean_loss(layers: &[Layer], xs: &[Vec<f64>], ys: &[Vec<f64>], kind: LossKind) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(x, y)| oracle_loss(&oracle_forward(layers, x), y, kind))
        .sum::<f64>()
        / xs.len() as f64
}

/// Central-difference gradient of the mean batch loss, flattened layer by
/// layer as (weights, bias).
pub fn numeric_gradient(net: &Network, xs: &[Vec<f64>], ys: &[Vec<f64>], kind: LossKind, h: f64) -> Vec<f64> {
    let layers = net.layers().to_vec();
    let mut out = Vec::new();
    for l in 0..layers.len() {
        let n_w = layers[l].weights().len();
        let n_b = layers[l].bias().len();
        for p in 0..n_w + n_b {
            let bumped = |delta: f64| {
                let mut ls = layers.clone();
                let mut w = ls[l].weights().to_vec();
                let mut b = ls[l].bias().to_vec();
                if p < n_w {
                    w[p] += delta;
                } else {
                    b[p - n_w] += delta;
                }
                ls[l] = Layer::new(ls[l].fan_in(), ls[l].fan_out(), w, b, ls[l].activation()).unwrap();
                oracle_mean_loss(&ls, xs, ys, kind)
            };
            out.push((bumped(h) - bumped(-h)) / (2.0 * h));
        }
    }
    out
}

pub fn flatten(grads: &ceids::nn::Gradients) -> Vec<f64> {
    grads
        .layers
        .iter()
        .flat_map(|g| g.weights.iter().chain(&g.bias).copied())
        .collect()
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Attack names whose per-name counts add up to `counts` per class.
pub fn names_for_counts(counts: [usize; 5]) -> Vec<(&'static str, usize)> {
    let pools: [&[&str]; 5] = [
        &["normal"],
        &["neptune", "smurf", "back", "teardrop", "pod", "land", "apache2", "mailbomb", "processtable", "udpstorm"],
        &["satan", "ipsweep", "nmap", "portsweep", "mscan", "saint"],
        &[
            "warezclient", "guess_passwd", "warezmaster", "imap", "ftp_write", "multihop", "phf", "spy",
            "snmpgetattack", "snmpguess", "named", "sendmail", "xlock", "xsnoop", "worm",
        ],
        &["buffer_overflow", "rootkit", "loadmodule", "perl", "httptunnel", "ps", "sqlattack", "xterm"],
    ];
    let mut out = Vec::new();
    for (pool, &n) in pools.iter().zip(&counts) {
        let k = pool.len().min(n.max(1));
        for (i, name) in pool.iter().take(k).enumerate() {
            let share = n / k + usize::from(i < n % k);
            out.push((*name, share));
        }
    }
    out
}

pub fn write_count_file(path: &Path, counts: [usize; 5]) {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).unwrap());
    let mut numeric = [0.0; NUM_NUMERIC];
    for (name, n) in names_for_counts(counts) {
        for i in 0..n {
            numeric[0] = i as f64;
            let r = RawRecord {
                numeric,
                nominal: ["tcp".into(), "http".into(), "SF".into()],
                attack_name: name.to_string(),
                difficulty: Some(20),
            };
            writeln!(f, "{}", r.to_line()).unwrap();
        }
    }
}

/// Independent tally of labels by class.
pub fn tally(labels: impl IntoIterator<Item = ClassLabel>) -> [usize; 5] {
    let mut c = [0; 5];
    for l in labels {
        let i = match l {
            ClassLabel::Normal => 0,
            ClassLabel::DoS => 1,
            ClassLabel::Probe => 2,
            ClassLabel::R2L => 3,
            ClassLabel::U2R => 4,
        };
        c[i] += 1;
    }
    c
}
