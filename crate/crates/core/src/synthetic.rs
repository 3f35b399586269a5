//! Synthetic NSL-KDD-shaped records for smoke tests and demos.
//!
//! Records fall into three blobs (one per protocol, each with its own
//! block of elevated numeric features) and five classes (each with its own
//! pair of elevated features inside a shared block). Every (blob, class)
//! combination is linearly separable from the others by construction.

use rand::Rng;

use crate::ingest::{ClassLabel, RawRecord, NUM_NUMERIC};
use crate::seed;

pub const NUM_BLOBS: usize = 3;
const BLOB_WIDTH: usize = 8;
const CLASS_OFFSET: usize = NUM_BLOBS * BLOB_WIDTH;
const CLASS_WIDTH: usize = 2;
const PROTOCOLS: [&str; NUM_BLOBS] = ["tcp", "udp", "icmp"];
const SERVICES: [&str; 4] = ["http", "private", "ftp_data", "domain_u"];
const FLAGS: [&str; 3] = ["SF", "S0", "REJ"];

/// One attack name per class, all present in the grouping table.
pub fn attack_name(class: ClassLabel) -> &'static str {
    match class {
        ClassLabel::Normal => "normal",
        ClassLabel::DoS => "neptune",
        ClassLabel::Probe => "satan",
        ClassLabel::R2L => "guess_passwd",
        ClassLabel::U2R => "buffer_overflow",
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BlobSpec {
    /// Records per class, indexed by [`ClassLabel::index`].
    pub class_counts: [usize; 5],
    /// Half-width of the uniform noise added to every numeric feature.
    pub noise: f64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        BlobSpec {
            class_counts: [200, 150, 80, 50, 20],
            noise: 0.05,
        }
    }
}

pub fn record(blob: usize, class: ClassLabel, noise: f64, rng: &mut impl Rng) -> RawRecord {
    let mut numeric = [0.0; NUM_NUMERIC];
    for (i, v) in numeric.iter_mut().enumerate() {
        let high = if i < CLASS_OFFSET {
            i / BLOB_WIDTH == blob
        } else {
            (i - CLASS_OFFSET) / CLASS_WIDTH == class.index()
        };
        let base = if high { 0.9 } else { 0.1 };
        *v = base + rng.gen_range(-noise..=noise);
    }
    RawRecord {
        numeric,
        nominal: [
            PROTOCOLS[blob].to_string(),
            SERVICES[rng.gen_range(0..SERVICES.len())].to_string(),
            FLAGS[rng.gen_range(0..FLAGS.len())].to_string(),
        ],
        attack_name: attack_name(class).to_string(),
        difficulty: Some(21),
    }
}

/// Labeled records, each class spread evenly over the three blobs and the
/// whole set shuffled under `seed`.
pub fn blobs(spec: &BlobSpec, seed: u64) -> Vec<(RawRecord, ClassLabel)> {
    use rand::seq::SliceRandom;
    let mut rng = seed::rng(seed);
    let mut out = Vec::new();
    for class in ClassLabel::ALL {
        for i in 0..spec.class_counts[class.index()] {
            out.push((record(i % NUM_BLOBS, class, spec.noise, &mut rng), class));
        }
    }
    out.shuffle(&mut rng);
    out
}

/// Renders records as NSL-KDD text, one per line.
pub fn to_nsl_kdd_text(records: &[(RawRecord, ClassLabel)]) -> String {
    let mut s = String::new();
    for (r, _) in records {
        s.push_str(&r.to_line());
        s.push('\n');
    }
    s
}
