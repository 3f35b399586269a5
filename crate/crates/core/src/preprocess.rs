//! Nominal encoding, Min-Max scaling and minority-class oversampling.

use indexmap::IndexMap;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{ClassLabel, RawRecord, NOMINAL_POSITIONS, NUM_CLASSES, NUM_FEATURES, NUM_NOMINAL};
use crate::seed;

/// Fixed-length vector of finite reals: 41 entries after encoding, 25
/// after the autoencoder.
pub type FeatureVector = Vec<f64>;

/// Category -> integer code per nominal feature, in first-appearance order.
/// Categories never seen during fitting encode to the map size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NominalEncoder {
    maps: [IndexMap<String, u32>; NUM_NOMINAL],
}

impl NominalEncoder {
    pub fn fit<'a>(train: impl IntoIterator<Item = &'a RawRecord>) -> Result<Self> {
        let mut maps: [IndexMap<String, u32>; NUM_NOMINAL] = Default::default();
        let mut seen_any = false;
        for record in train {
            seen_any = true;
            for (map, value) in maps.iter_mut().zip(&record.nominal) {
                if !map.contains_key(value) {
                    let code = map.len() as u32;
                    map.insert(value.clone(), code);
                }
            }
        }
        if !seen_any {
            return Err(Error::EmptyDataset);
        }
        Ok(NominalEncoder { maps })
    }

    /// Code for `value` of nominal feature `feature` (0 = protocol,
    /// 1 = service, 2 = flag).
    pub fn code(&self, feature: usize, value: &str) -> u32 {
        let map = &self.maps[feature];
        map.get(value).copied().unwrap_or(map.len() as u32)
    }

    pub fn categories(&self, feature: usize) -> impl Iterator<Item = &str> {
        self.maps[feature].keys().map(String::as_str)
    }

    pub fn len(&self, feature: usize) -> usize {
        self.maps[feature].len()
    }

    /// 41-dim vector with each nominal slot replaced by its code.
    pub fn encode(&self, record: &RawRecord) -> FeatureVector {
        let mut out = Vec::with_capacity(NUM_FEATURES);
        let mut numeric = record.numeric.iter();
        for pos in 0..NUM_FEATURES {
            match NOMINAL_POSITIONS.iter().position(|&p| p == pos) {
                Some(k) => out.push(f64::from(self.code(k, &record.nominal[k]))),
                None => out.push(*numeric.next().expect("38 numeric slots")),
            }
        }
        out
    }
}

pub fn fit_nominal_encoder<'a>(train: impl IntoIterator<Item = &'a RawRecord>) -> Result<NominalEncoder> {
    NominalEncoder::fit(train)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit<V: AsRef<[f64]>>(train: &[V]) -> Result<Self> {
        let first = train.first().ok_or(Error::EmptyDataset)?.as_ref();
        let mut min = first.to_vec();
        let mut max = first.to_vec();
        for v in &train[1..] {
            let v = v.as_ref();
            if v.len() != min.len() {
                return Err(Error::arity(min.len(), v.len()));
            }
            for ((lo, hi), &x) in min.iter_mut().zip(max.iter_mut()).zip(v) {
                *lo = lo.min(x);
                *hi = hi.max(x);
            }
        }
        Ok(MinMaxScaler { min, max })
    }

    pub fn arity(&self) -> usize {
        self.min.len()
    }

    pub fn min(&self) -> &[f64] {
        &self.min
    }

    pub fn max(&self) -> &[f64] {
        &self.max
    }

    /// (x - Min) / (Max - Min), clamped to [0, 1]. Constant features map to 0.
    pub fn apply(&self, v: &[f64]) -> Result<FeatureVector> {
        if v.len() != self.arity() {
            return Err(Error::arity(self.arity(), v.len()));
        }
        Ok(v.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&x, (&lo, &hi))| {
                let range = hi - lo;
                if range > 0.0 {
                    ((x - lo) / range).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect())
    }
}

pub fn fit_minmax<V: AsRef<[f64]>>(train: &[V]) -> Result<MinMaxScaler> {
    MinMaxScaler::fit(train)
}

pub fn apply_minmax(v: &[f64], scaler: &MinMaxScaler) -> Result<FeatureVector> {
    scaler.apply(v)
}

/// Encoder and scaler fitted together on the same training records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub encoder: NominalEncoder,
    pub scaler: MinMaxScaler,
}

impl Preprocessor {
    pub fn fit<'a>(train: impl IntoIterator<Item = &'a RawRecord> + Clone) -> Result<Self> {
        let encoder = NominalEncoder::fit(train.clone())?;
        let encoded: Vec<FeatureVector> = train.into_iter().map(|r| encoder.encode(r)).collect();
        let scaler = MinMaxScaler::fit(&encoded)?;
        Ok(Preprocessor { encoder, scaler })
    }

    pub fn transform(&self, record: &RawRecord) -> FeatureVector {
        self.scaler
            .apply(&self.encoder.encode(record))
            .expect("encoder output always has scaler arity")
    }
}

/// Repeats records of every minority class (uniformly, with replacement)
/// until each class matches the majority count. Originals are kept in
/// order; copies are appended class by class.
pub fn oversample<T: Clone>(data: &[(T, ClassLabel)], seed: u64) -> Result<Vec<(T, ClassLabel)>> {
    let mut members: [Vec<usize>; NUM_CLASSES] = Default::default();
    for (i, (_, label)) in data.iter().enumerate() {
        members[label.index()].push(i);
    }
    if let Some(c) = ClassLabel::ALL.into_iter().find(|c| members[c.index()].is_empty()) {
        return Err(Error::MissingClass(c));
    }
    let target = members.iter().map(Vec::len).max().unwrap_or(0);

    let mut rng = seed::rng(seed);
    let mut out = data.to_vec();
    out.reserve(target * NUM_CLASSES - data.len());
    for idx in &members {
        for _ in idx.len()..target {
            let pick = idx[rng.gen_range(0..idx.len())];
            out.push(data[pick].clone());
        }
    }
    Ok(out)
}
