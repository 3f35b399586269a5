//! Hard mean-shift clustering with a Gaussian kernel.
//!
//! Every seed point is moved to the kernel-weighted mean of the data in
//! its neighborhood,
//!
//! ```text
//! m(x) = sum_{x_i in N(x)} k(x_i - x) x_i / sum_{x_i in N(x)} k(x_i - x)
//! k(d) = exp(-|d|^2 / (2 h^2))
//! ```
//!
//! until it stops moving. Converged seeds closer than `h / 2` collapse into
//! one mode; modes are ordered by how many seeds ended up in them.
//!
//! The neighborhood `N(x)` is the ball of radius `neighborhood * h`
//! around `x` (default three bandwidths, where the kernel weight has
//! fallen to about 1%).

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const DEFAULT_TOL: f64 = 1e-4;
pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_SUBSAMPLE: usize = 5_000;
pub const DEFAULT_NEIGHBORHOOD: f64 = 3.0;
/// Upper bound on the points used for bandwidth estimation.
pub const BANDWIDTH_SAMPLE_CAP: usize = 2_000;
pub const HISTOGRAM_BINS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanShiftConfig {
    pub bandwidth: Bandwidth,
    pub tol: f64,
    pub max_iter: usize,
    /// Points used for fitting; the rest are only assigned afterwards.
    pub subsample: usize,
    /// Neighborhood radius in units of the bandwidth.
    pub neighborhood: f64,
    pub seed: u64,
}

impl Default for MeanShiftConfig {
    fn default() -> Self {
        MeanShiftConfig {
            bandwidth: Bandwidth::Auto,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            subsample: DEFAULT_SUBSAMPLE,
            neighborhood: DEFAULT_NEIGHBORHOOD,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanShiftModel {
    bandwidth: f64,
    neighborhood: f64,
    modes: Vec<Vec<f64>>,
    /// Seeds that converged into each mode.
    populations: Vec<usize>,
    fit_subsample_size: usize,
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Mode of the pairwise-distance histogram of a seeded one-third sample.
pub fn estimate_bandwidth<V: AsRef<[f64]> + Sync>(data: &[V], seed: u64) -> Result<f64> {
    if data.len() < 2 {
        return Err(Error::DegenerateData);
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut seed::rng(seed));
    let m = data.len().div_ceil(3).max(2).min(BANDWIDTH_SAMPLE_CAP).min(data.len());
    let sample = &idx[..m];

    let mut dists = Vec::with_capacity(m * (m - 1) / 2);
    for (a, &i) in sample.iter().enumerate() {
        for &j in &sample[a + 1..] {
            dists.push(sq_dist(data[i].as_ref(), data[j].as_ref()).sqrt());
        }
    }
    let max = dists.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        return Ok(histogram_mode(&dists, max));
    }

    // Sample is all duplicates: fall back to the smallest nonzero distance.
    let anchor = data[sample[0]].as_ref();
    data.iter()
        .map(|v| sq_dist(anchor, v.as_ref()).sqrt())
        .filter(|&d| d > 0.0)
        .min_by(f64::total_cmp)
        .ok_or(Error::DegenerateData)
}

fn histogram_mode(dists: &[f64], max: f64) -> f64 {
    let width = max / HISTOGRAM_BINS as f64;
    let mut counts = [0usize; HISTOGRAM_BINS];
    for &d in dists {
        let bin = ((d / width) as usize).min(HISTOGRAM_BINS - 1);
        counts[bin] += 1;
    }
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    (best as f64 + 0.5) * width
}

/// One mean-shift step with the default neighborhood radius.
pub fn shift<V: AsRef<[f64]>>(x: &[f64], data: &[V], h: f64) -> Result<Vec<f64>> {
    shift_within(x, data, h, DEFAULT_NEIGHBORHOOD * h)
}

/// One mean-shift step over the points within `radius` of `x`.
pub fn shift_within<V: AsRef<[f64]>>(x: &[f64], data: &[V], h: f64, radius: f64) -> Result<Vec<f64>> {
    let r2 = radius * radius;
    let inv = 1.0 / (2.0 * h * h);
    let mut num = vec![0.0; x.len()];
    let mut den = 0.0;
    for v in data {
        let v = v.as_ref();
        if v.len() != x.len() {
            return Err(Error::arity(x.len(), v.len()));
        }
        let d2 = sq_dist(v, x);
        if d2 <= r2 {
            let w = (-d2 * inv).exp();
            den += w;
            for (n, &c) in num.iter_mut().zip(v) {
                *n += w * c;
            }
        }
    }
    if den == 0.0 {
        return Err(Error::EmptyNeighborhood);
    }
    num.iter_mut().for_each(|n| *n /= den);
    Ok(num)
}

fn converge<V: AsRef<[f64]>>(start: &[f64], data: &[V], h: f64, radius: f64, tol: f64, max_iter: usize) -> Vec<f64> {
    let mut x = start.to_vec();
    for _ in 0..max_iter {
        let next = match shift_within(&x, data, h, radius) {
            Ok(next) => next,
            Err(_) => break,
        };
        let moved = sq_dist(&next, &x).sqrt();
        x = next;
        if moved < tol {
            break;
        }
    }
    x
}

fn centroid(points: &[&[f64]], weights: &[usize]) -> Vec<f64> {
    let total: usize = weights.iter().sum();
    let mut c = vec![0.0; points[0].len()];
    for (p, &w) in points.iter().zip(weights) {
        for (ci, &pi) in c.iter_mut().zip(*p) {
            *ci += w as f64 * pi;
        }
    }
    c.iter_mut().for_each(|ci| *ci /= total as f64);
    c
}

/// Mean-shift on all of `data` with bandwidth `h` and the default
/// neighborhood.
pub fn fit<V: AsRef<[f64]> + Sync>(data: &[V], h: f64, tol: f64, max_iter: usize) -> Result<MeanShiftModel> {
    fit_points(data, h, DEFAULT_NEIGHBORHOOD, tol, max_iter)
}

/// Fits on a seeded uniform subsample of at most `cfg.subsample` points.
pub fn fit_with<V: AsRef<[f64]> + Sync>(data: &[V], cfg: &MeanShiftConfig) -> Result<MeanShiftModel> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let sample: Vec<&[f64]> = if data.len() > cfg.subsample {
        let mut idx: Vec<usize> = (0..data.len()).collect();
        idx.shuffle(&mut seed::rng(seed::derive(cfg.seed, "meanshift-subsample", 0)));
        idx.truncate(cfg.subsample);
        idx.sort_unstable();
        idx.into_iter().map(|i| data[i].as_ref()).collect()
    } else {
        data.iter().map(AsRef::as_ref).collect()
    };
    let h = match cfg.bandwidth {
        Bandwidth::Fixed(h) => h,
        Bandwidth::Auto => estimate_bandwidth(&sample, seed::derive(cfg.seed, "meanshift-bandwidth", 0))?,
    };
    fit_points(&sample, h, cfg.neighborhood, cfg.tol, cfg.max_iter)
}

fn fit_points<V: AsRef<[f64]> + Sync>(
    data: &[V],
    h: f64,
    neighborhood: f64,
    tol: f64,
    max_iter: usize,
) -> Result<MeanShiftModel> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::BadConfig(format!("bandwidth must be positive, got {h}")));
    }
    if !(neighborhood.is_finite() && neighborhood > 0.0) {
        return Err(Error::BadConfig(format!("neighborhood must be positive, got {neighborhood}")));
    }
    let dim = data[0].as_ref().len();
    if let Some(bad) = data.iter().find(|v| v.as_ref().len() != dim) {
        return Err(Error::arity(dim, bad.as_ref().len()));
    }
    let radius = neighborhood * h;
    let merge2 = (h / 2.0) * (h / 2.0);

    let converged: Vec<Vec<f64>> = data
        .par_iter()
        .map(|p| converge(p.as_ref(), data, h, radius, tol, max_iter))
        .collect();

    // Greedy grouping in seed order against each group's first member.
    let mut anchors: Vec<usize> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (i, c) in converged.iter().enumerate() {
        match anchors.iter().position(|&a| sq_dist(&converged[a], c) <= merge2) {
            Some(g) => members[g].push(i),
            None => {
                anchors.push(i);
                members.push(vec![i]);
            }
        }
    }

    let refine = |p: &[f64]| converge(p, data, h, radius, tol, max_iter);
    let mut modes: Vec<Vec<f64>> = members
        .par_iter()
        .map(|group| {
            let pts: Vec<&[f64]> = group.iter().map(|&i| converged[i].as_slice()).collect();
            refine(&centroid(&pts, &vec![1; pts.len()]))
        })
        .collect();
    let mut populations: Vec<usize> = members.iter().map(Vec::len).collect();

    // Refinement can pull modes together; keep merging until separated.
    'merge: loop {
        for i in 0..modes.len() {
            for j in i + 1..modes.len() {
                if sq_dist(&modes[i], &modes[j]) <= merge2 {
                    let merged = centroid(&[&modes[i], &modes[j]], &[populations[i], populations[j]]);
                    modes[i] = refine(&merged);
                    populations[i] += populations[j];
                    modes.remove(j);
                    populations.remove(j);
                    continue 'merge;
                }
            }
        }
        break;
    }

    let mut order: Vec<usize> = (0..modes.len()).collect();
    order.sort_by(|&a, &b| populations[b].cmp(&populations[a]));
    Ok(MeanShiftModel {
        bandwidth: h,
        neighborhood,
        modes: order.iter().map(|&i| modes[i].clone()).collect(),
        populations: order.iter().map(|&i| populations[i]).collect(),
        fit_subsample_size: data.len(),
    })
}

impl MeanShiftModel {
    pub fn from_modes(bandwidth: f64, modes: Vec<Vec<f64>>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let populations = vec![0; modes.len()];
        Ok(MeanShiftModel {
            bandwidth,
            neighborhood: DEFAULT_NEIGHBORHOOD,
            modes,
            populations,
            fit_subsample_size: 0,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn neighborhood(&self) -> f64 {
        self.neighborhood
    }

    pub fn modes(&self) -> &[Vec<f64>] {
        &self.modes
    }

    pub fn populations(&self) -> &[usize] {
        &self.populations
    }

    pub fn fit_subsample_size(&self) -> usize {
        self.fit_subsample_size
    }

    /// Number of clusters.
    pub fn k(&self) -> usize {
        self.modes.len()
    }

    pub fn dim(&self) -> usize {
        self.modes[0].len()
    }

    /// Nearest mode and the (hard) membership degree, which is always 1.
    /// Ties go to the lowest index.
    pub fn assign(&self, x: &[f64]) -> (usize, f64) {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, m) in self.modes.iter().enumerate() {
            let d = sq_dist(m, x);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        (best, 1.0)
    }

    /// 0/1 membership over all K clusters.
    pub fn membership(&self, x: &[f64]) -> Vec<f64> {
        let (c, u) = self.assign(x);
        let mut m = vec![0.0; self.k()];
        m[c] = u;
        m
    }
}
