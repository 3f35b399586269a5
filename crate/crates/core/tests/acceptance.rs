//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if
//! any criterion fails. Criteria 2 and 10 need the NSL-KDD files
//! `KDDTrain+.txt` and `KDDTest+.txt` in `$NSL_KDD_DIR` (default: `data/`
//! at the workspace root).

mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use ceids::autoencoder::{AutoencoderConfig, AutoencoderModel};
use ceids::cli;
use ceids::container;
use ceids::ensemble::{self, EnsembleConfig, EnsembleModel};
use ceids::eval::{self, Averaging, FScoreForm};
use ceids::ingest::{self, ClassLabel, RawRecord};
use ceids::meanshift::{self, Bandwidth};
use ceids::nn::{Activation, LossKind, Network};
use ceids::preprocess;
use ceids::seed;
use ceids::svm::{self, SvmConfig};
use ceids::synthetic::{self, BlobSpec};
use common::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn data_dir() -> PathBuf {
    std::env::var_os("NSL_KDD_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

fn nsl_kdd_file(name: &str) -> Result<PathBuf, String> {
    let path = data_dir().join(name);
    if path.is_file() {
        Ok(path)
    } else {
        Err(format!(
            "{} not found; place the NSL-KDD files there or set NSL_KDD_DIR",
            path.display()
        ))
    }
}

fn ac1_f_score() -> Outcome {
    let f = eval::f_score(0.965, 0.954, FScoreForm::Harmonic);
    check((f - 0.959).abs() <= 0.0005, format!("f_score(0.965, 0.954) = {f:.5}, target 0.959 +- 0.0005"))
}

fn ac2_dataset_counts() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for (name, want) in [("KDDTrain+.txt", TRAIN_COUNTS), ("KDDTest+.txt", TEST_COUNTS)] {
        let data = ingest::load_dataset(nsl_kdd_file(name)?).map_err(|e| e.to_string())?;
        let got = tally(data.iter().map(|(_, c)| *c));
        ok &= got == want;
        details.push(format!("{name}: {got:?} (expected {want:?})"));
    }
    check(ok, details.join("; "))
}

fn ac3_gradients() -> Outcome {
    let mut rng = seed::rng(2024);
    let smooth = [Activation::Sigmoid, Activation::Tanh, Activation::Identity];
    let max = [10, 8, 6, 4];
    let mut worst: f64 = 0.0;
    let mut params = 0usize;
    for _ in 0..50 {
        let depth = rng.gen_range(2..=max.len());
        let sizes: Vec<usize> = max[..depth].iter().map(|&m| rng.gen_range(1..=m)).collect();
        let mut acts: Vec<Activation> = (0..depth - 2).map(|_| smooth[rng.gen_range(0..3)]).collect();
        // sigmoid output keeps cross-entropy inputs inside (0, 1)
        acts.push(Activation::Sigmoid);
        let net = Network::new(&sizes, &acts, rng.gen()).map_err(|e| e.to_string())?;
        let xs: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..net.input_size()).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let ys: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let mut t = vec![0.0; net.output_size()];
                t[rng.gen_range(0..net.output_size())] = 1.0;
                t
            })
            .collect();
        for kind in [LossKind::MeanSquare, LossKind::CrossEntropy] {
            let analytic = flatten(&net.backward(&xs, &ys, kind).map_err(|e| e.to_string())?);
            let numeric = numeric_gradient(&net, &xs, &ys, kind, 1e-5);
            for (a, n) in analytic.iter().zip(&numeric) {
                worst = worst.max(relative_error(*a, *n));
            }
            params += analytic.len();
        }
    }
    check(
        worst < 1e-4,
        format!("50 networks x 2 losses, {params} parameter checks, max relative error {worst:.2e}"),
    )
}

fn ac4_meanshift() -> Outcome {
    let (dim, per, sigma, h) = (25, 300, 0.05, 0.15);
    let mut worst_center: f64 = 0.0;
    let mut worst_assign: f64 = 1.0;
    for s in 0..10u64 {
        let mut rng = seed::rng(seed::derive(s, "ac4", 0));
        let mut centers: Vec<Vec<f64>> = Vec::new();
        while centers.len() < 3 {
            let c: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
            if centers.iter().all(|o| dist(o, &c) >= 0.5) {
                centers.push(c);
            }
        }
        let normal = Normal::new(0.0, sigma).unwrap();
        let mut points = Vec::new();
        let mut truth = Vec::new();
        for (i, c) in centers.iter().enumerate() {
            for _ in 0..per {
                points.push(c.iter().map(|v| v + normal.sample(&mut rng)).collect::<Vec<f64>>());
                truth.push(i);
            }
        }
        let model = meanshift::fit(&points, h, meanshift::DEFAULT_TOL, meanshift::DEFAULT_MAX_ITER)
            .map_err(|e| format!("seed {s}: {e}"))?;
        if model.k() != 3 {
            return Err(format!("seed {s}: {} modes", model.k()));
        }
        // each mode's nearest true center; must be a bijection
        let mut to_center = Vec::new();
        for m in model.modes() {
            let (best, d) = centers
                .iter()
                .enumerate()
                .map(|(i, c)| (i, dist(c, m)))
                .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
            worst_center = worst_center.max(d);
            to_center.push(best);
        }
        let mut sorted = to_center.clone();
        sorted.sort_unstable();
        if sorted != [0, 1, 2] {
            return Err(format!("seed {s}: modes map to centers {to_center:?}"));
        }
        let correct = points
            .iter()
            .zip(&truth)
            .filter(|(p, t)| to_center[model.assign(p).0] == **t)
            .count();
        worst_assign = worst_assign.min(correct as f64 / points.len() as f64);
    }
    check(
        worst_center <= 0.05 && worst_assign >= 0.99,
        format!(
            "10 seeds: 3 modes each, max mode-to-center distance {worst_center:.4}, min assignment accuracy {worst_assign:.4}"
        ),
    )
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn ac5_svm_square() -> Outcome {
    let xs = [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]];
    let ys = [1.0, 1.0, -1.0, -1.0];
    let m = svm::train_binary(&xs, &ys, &SvmConfig::default()).map_err(|e| e.to_string())?;
    let theta = m.theta().unwrap();
    let norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
    check(
        (norm - 1.0).abs() <= 0.1,
        format!(
            "|theta| = {norm:.4} (optimum 1), margin 2/|theta| = {:.4}, theta = {theta:.4?}, theta0 = {:.4}",
            2.0 / norm,
            m.theta0().unwrap()
        ),
    )
}

fn ac6_autoencoder() -> Outcome {
    let mut rng = seed::rng(7);
    let basis: Vec<Vec<f64>> = (0..10).map(|_| (0..41).map(|_| rng.gen::<f64>()).collect()).collect();
    // convex combinations concentrated near the basis points, so the set
    // spreads across the subspace and stays inside [0,1]^41
    let data: Vec<Vec<f64>> = (0..500)
        .map(|_| {
            let w: Vec<f64> = (0..10).map(|_| rng.gen::<f64>().powi(12)).collect();
            let total: f64 = w.iter().sum();
            (0..41)
                .map(|j| (0..10).map(|i| w[i] / total * basis[i][j]).sum())
                .collect()
        })
        .collect();
    let baseline: f64 = (0..41)
        .map(|j| {
            let mean = data.iter().map(|x| x[j]).sum::<f64>() / 500.0;
            data.iter().map(|x| (x[j] - mean).powi(2)).sum::<f64>() / 500.0
        })
        .sum::<f64>()
        / 41.0;
    if baseline <= 0.03 {
        return Err(format!("test set too easy: mean-predictor MSE {baseline:.4}"));
    }
    let cfg = AutoencoderConfig {
        learning_rate: 0.5,
        epochs: 500,
        batch_size: 16,
        seed: 1,
        ..AutoencoderConfig::default()
    };
    let model = AutoencoderModel::train(&data, &cfg).map_err(|e| e.to_string())?;
    let mse = model.reconstruction_mse(&data).map_err(|e| e.to_string())?;
    check(
        mse < 0.01,
        format!("reconstruction MSE {mse:.5} (mean-predictor baseline {baseline:.4}), lr 0.5, 500 epochs, batch 16"),
    )
}

fn toy_config() -> EnsembleConfig {
    let mut cfg = EnsembleConfig::default();
    cfg.meanshift.bandwidth = Bandwidth::Fixed(0.4);
    cfg
}

fn toy_model(seed: u64) -> Result<EnsembleModel, String> {
    let train = synthetic::blobs(&BlobSpec::default(), 1);
    ensemble::train_pipeline(&train, &toy_config(), seed).map_err(|e| e.to_string())
}

fn ac7_aggregation() -> Outcome {
    let model = toy_model(3)?;
    let sample = synthetic::blobs(
        &BlobSpec {
            class_counts: [200; 5],
            noise: 0.1,
        },
        30,
    );
    let codes = sample
        .iter()
        .map(|(r, _)| model.code(r))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let aug = ensemble::aggregate(&model.clusters, &model.meanshift, &codes).map_err(|e| e.to_string())?;
    let k = model.k();
    let mut bad = 0;
    for r in 0..aug.len() {
        let live = (0..k).filter(|&i| aug.block(r, i).iter().any(|&v| v != 0.0)).count();
        bad += usize::from(live > 1 || aug.row(r).len() != 5 * k);
    }
    check(
        aug.len() == 1000 && aug.width() == 5 * k && bad == 0,
        format!("K = {k}, width {}, {} rows, {bad} rows with more than one live block", aug.width(), aug.len()),
    )
}

fn ac8_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    for run in 0..2 {
        let model = toy_model(42)?;
        let path = dir.path().join(format!("run{run}.ceids"));
        container::save_model(&model, &path).map_err(|e| e.to_string())?;
        files.push((std::fs::read(&path).map_err(|e| e.to_string())?, model));
    }
    let probe: Vec<RawRecord> = synthetic::blobs(&BlobSpec::default(), 77).into_iter().map(|(r, _)| r).collect();
    let p0 = ensemble::predict_batch(&files[0].1, &probe).map_err(|e| e.to_string())?;
    let p1 = ensemble::predict_batch(&files[1].1, &probe).map_err(|e| e.to_string())?;
    let same_preds = p0.iter().zip(&p1).all(|(a, b)| a.0 == b.0 && a.1.map(f64::to_bits) == b.1.map(f64::to_bits));
    check(
        files[0].0 == files[1].0 && same_preds,
        format!(
            "model files {} bytes, identical: {}; {} predictions identical: {same_preds}",
            files[0].0.len(),
            files[0].0 == files[1].0,
            probe.len()
        ),
    )
}

fn accuracy(model: &EnsembleModel, data: &[(RawRecord, ClassLabel)]) -> Result<eval::ConfusionMatrix, String> {
    let records: Vec<RawRecord> = data.iter().map(|(r, _)| r.clone()).collect();
    let preds: Vec<ClassLabel> = ensemble::predict_batch(model, &records)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|(c, _)| c)
        .collect();
    let truths: Vec<ClassLabel> = data.iter().map(|(_, c)| *c).collect();
    eval::confusion(&preds, &truths).map_err(|e| e.to_string())
}

fn ac9_synthetic_end_to_end() -> Outcome {
    let model = toy_model(5)?;
    let test = synthetic::blobs(&BlobSpec::default(), 2);
    let cm = accuracy(&model, &test)?;
    let acc = cm.trace() as f64 / cm.total() as f64;
    let picks: Vec<String> = model.selections().iter().map(|s| s.to_string()).collect();
    check(
        acc >= 0.95,
        format!("test accuracy {acc:.4} on {} records, K = {}, clusters: {}", cm.total(), model.k(), picks.join(" ")),
    )
}

fn ac10_nsl_kdd() -> Outcome {
    let train = ingest::load_dataset(nsl_kdd_file("KDDTrain+.txt")?).map_err(|e| e.to_string())?;
    let test = ingest::load_dataset(nsl_kdd_file("KDDTest+.txt")?).map_err(|e| e.to_string())?;
    let seed = 42;
    let train = cli::subsample(&train, 20_000, seed);
    let model = ensemble::train_pipeline(&train, &EnsembleConfig::default(), seed).map_err(|e| e.to_string())?;
    let cm = accuracy(&model, &test)?;
    let report = cli::key_value_report(&model, &cm).map_err(|e| e.to_string())?;
    let m = eval::metrics(&cm, Averaging::WeightedPerClass).map_err(|e| e.to_string())?;
    check(m.accuracy >= 0.70, report.lines().collect::<Vec<_>>().join(" "))
}

fn ac11_kfold() -> Outcome {
    let mut rng = seed::rng(11);
    for trial in 0..100 {
        let n = rng.gen_range(10..5_000);
        let k = 10;
        let plan = eval::kfold_split(n, k, rng.gen()).map_err(|e| e.to_string())?;
        let mut seen = vec![false; n];
        for fold in plan.folds() {
            for &i in fold {
                if seen[i] {
                    return Err(format!("trial {trial}: index {i} in two folds"));
                }
                seen[i] = true;
            }
        }
        let sizes: Vec<usize> = plan.folds().iter().map(Vec::len).collect();
        let spread = sizes.iter().max().unwrap() - sizes.iter().min().unwrap();
        if plan.folds().len() != k || seen.contains(&false) || spread > 1 {
            return Err(format!("trial {trial}: n={n}, sizes {sizes:?}"));
        }
    }
    Ok("100 random n in [10, 5000) with k = 10: disjoint, covering, sizes within 1".into())
}

fn ac12_oversampling() -> Outcome {
    let labels: Vec<(u32, ClassLabel)> = ClassLabel::ALL
        .into_iter()
        .flat_map(|c| (0..TRAIN_COUNTS[c.index()] as u32).map(move |i| (i, c)))
        .collect();
    let out = preprocess::oversample(&labels, 12).map_err(|e| e.to_string())?;
    let counts = tally(out.iter().map(|(_, c)| *c));
    let balanced: Vec<(u32, ClassLabel)> = ClassLabel::ALL
        .into_iter()
        .flat_map(|c| (0..100u32).map(move |i| (i, c)))
        .collect();
    let identity = preprocess::oversample(&balanced, 12).map_err(|e| e.to_string())? == balanced;
    check(
        counts == [67_343; 5] && identity,
        format!("majority-scale counts -> {counts:?}; balanced input unchanged: {identity}"),
    )
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 12] = [
        ("AC1 metric-formula fidelity", Duration::from_secs(1), ac1_f_score),
        ("AC2 dataset fidelity", Duration::from_secs(30), ac2_dataset_counts),
        ("AC3 gradient correctness", Duration::from_secs(60), ac3_gradients),
        ("AC4 mean-shift recovery", Duration::from_secs(120), ac4_meanshift),
        ("AC5 SVM optimality", Duration::from_secs(5), ac5_svm_square),
        ("AC6 autoencoder capacity", Duration::from_secs(120), ac6_autoencoder),
        ("AC7 aggregation structure", Duration::from_secs(10), ac7_aggregation),
        ("AC8 pipeline determinism", Duration::from_secs(120), ac8_determinism),
        ("AC9 synthetic end-to-end", Duration::from_secs(300), ac9_synthetic_end_to_end),
        ("AC10 desk-scale NSL-KDD", Duration::from_secs(1800), ac10_nsl_kdd),
        ("AC11 k-fold properties", Duration::from_secs(10), ac11_kfold),
        ("AC12 oversampling balance", Duration::from_secs(30), ac12_oversampling),
    ];
    let mut failed = 0;
    for (name, limit, f) in criteria {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(d) if elapsed <= limit => (true, d),
            Ok(d) => (false, format!("{d}; exceeded {limit:?}")),
            Err(d) => (false, d),
        };
        failed += usize::from(!pass);
        println!(
            "{} {name}: {detail} ({:.2}s, limit {}s)",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
