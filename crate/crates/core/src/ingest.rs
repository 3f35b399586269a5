//! NSL-KDD record parsing and the attack-name to class grouping.
//!
//! A record line carries 41 positional features, the attack label and
//! (in the official distribution files) a trailing difficulty score:
//!
//! ```text
//! 0,tcp,ftp_data,SF,491,0,0,...,0.00,normal,20
//! ```
//!
//! Fields 1, 2 and 3 (0-based) are the nominal `protocol_type`, `service`
//! and `flag`; everything else before the label is numeric.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_FEATURES: usize = 41;
pub const NUM_NUMERIC: usize = 38;
pub const NUM_NOMINAL: usize = 3;
/// 0-based feature positions of protocol_type, service and flag.
pub const NOMINAL_POSITIONS: [usize; NUM_NOMINAL] = [1, 2, 3];
pub const NUM_CLASSES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassLabel {
    Normal,
    DoS,
    Probe,
    R2L,
    U2R,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; NUM_CLASSES] = [
        ClassLabel::Normal,
        ClassLabel::DoS,
        ClassLabel::Probe,
        ClassLabel::R2L,
        ClassLabel::U2R,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<ClassLabel> {
        Self::ALL.get(i).copied()
    }

    pub fn one_hot(self) -> [f64; NUM_CLASSES] {
        let mut v = [0.0; NUM_CLASSES];
        v[self.index()] = 1.0;
        v
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Normal => "Normal",
            ClassLabel::DoS => "DoS",
            ClassLabel::Probe => "Probe",
            ClassLabel::R2L => "R2L",
            ClassLabel::U2R => "U2R",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Standard NSL-KDD grouping of attack names into the four attack classes.
const ATTACK_TABLE: &[(&str, ClassLabel)] = &[
    // DoS
    ("apache2", ClassLabel::DoS),
    ("back", ClassLabel::DoS),
    ("land", ClassLabel::DoS),
    ("mailbomb", ClassLabel::DoS),
    ("neptune", ClassLabel::DoS),
    ("pod", ClassLabel::DoS),
    ("processtable", ClassLabel::DoS),
    ("smurf", ClassLabel::DoS),
    ("teardrop", ClassLabel::DoS),
    ("udpstorm", ClassLabel::DoS),
    // Probe
    ("ipsweep", ClassLabel::Probe),
    ("mscan", ClassLabel::Probe),
    ("nmap", ClassLabel::Probe),
    ("portsweep", ClassLabel::Probe),
    ("saint", ClassLabel::Probe),
    ("satan", ClassLabel::Probe),
    // R2L
    ("ftp_write", ClassLabel::R2L),
    ("guess_passwd", ClassLabel::R2L),
    ("imap", ClassLabel::R2L),
    ("multihop", ClassLabel::R2L),
    ("named", ClassLabel::R2L),
    ("phf", ClassLabel::R2L),
    ("sendmail", ClassLabel::R2L),
    ("snmpgetattack", ClassLabel::R2L),
    ("snmpguess", ClassLabel::R2L),
    ("spy", ClassLabel::R2L),
    ("warezclient", ClassLabel::R2L),
    ("warezmaster", ClassLabel::R2L),
    ("worm", ClassLabel::R2L),
    ("xlock", ClassLabel::R2L),
    ("xsnoop", ClassLabel::R2L),
    // U2R
    ("buffer_overflow", ClassLabel::U2R),
    ("httptunnel", ClassLabel::U2R),
    ("loadmodule", ClassLabel::U2R),
    ("perl", ClassLabel::U2R),
    ("ps", ClassLabel::U2R),
    ("rootkit", ClassLabel::U2R),
    ("sqlattack", ClassLabel::U2R),
    ("xterm", ClassLabel::U2R),
];

/// Every attack name the grouping table knows, "normal" excluded.
pub fn known_attack_names() -> impl Iterator<Item = (&'static str, ClassLabel)> {
    ATTACK_TABLE.iter().copied()
}

/// Maps a (lowercase, trimmed) label to its class. Names outside the table
/// are rejected; the error carries line 0, callers with a line number
/// should use [`map_attack_label_at`].
pub fn map_attack_label(attack_name: &str) -> Result<ClassLabel> {
    map_attack_label_at(attack_name, 0)
}

pub fn map_attack_label_at(attack_name: &str, line: usize) -> Result<ClassLabel> {
    if attack_name == "normal" {
        return Ok(ClassLabel::Normal);
    }
    ATTACK_TABLE
        .iter()
        .find(|(name, _)| *name == attack_name)
        .map(|&(_, class)| class)
        .ok_or_else(|| Error::UnknownAttack {
            line,
            name: attack_name.to_string(),
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    /// The 38 numeric features in file order with the nominal slots removed.
    pub numeric: [f64; NUM_NUMERIC],
    /// protocol_type, service, flag.
    pub nominal: [String; NUM_NOMINAL],
    pub attack_name: String,
    pub difficulty: Option<i64>,
}

impl RawRecord {
    pub fn protocol(&self) -> &str {
        &self.nominal[0]
    }

    pub fn service(&self) -> &str {
        &self.nominal[1]
    }

    pub fn flag(&self) -> &str {
        &self.nominal[2]
    }

    /// Serializes back to NSL-KDD line format (no trailing newline).
    pub fn to_line(&self) -> String {
        let mut fields: Vec<String> = Vec::with_capacity(NUM_FEATURES + 2);
        let mut numeric = self.numeric.iter();
        for pos in 0..NUM_FEATURES {
            match NOMINAL_POSITIONS.iter().position(|&p| p == pos) {
                Some(k) => fields.push(self.nominal[k].clone()),
                None => fields.push(numeric.next().expect("38 numeric slots").to_string()),
            }
        }
        fields.push(self.attack_name.clone());
        if let Some(d) = self.difficulty {
            fields.push(d.to_string());
        }
        fields.join(",")
    }
}

/// Parses one NSL-KDD line. `line_no` is 1-based and only used in errors.
pub fn parse_line(line: &str, line_no: usize) -> Result<RawRecord> {
    let fields: Vec<&str> = line.trim_end_matches(['\r', '\n']).split(',').collect();
    if fields.len() != NUM_FEATURES + 1 && fields.len() != NUM_FEATURES + 2 {
        return Err(Error::FieldCount {
            line: line_no,
            found: fields.len(),
        });
    }

    let mut numeric = [0.0; NUM_NUMERIC];
    let mut nominal: [String; NUM_NOMINAL] = Default::default();
    let mut n = 0;
    for (pos, raw) in fields[..NUM_FEATURES].iter().enumerate() {
        if let Some(k) = NOMINAL_POSITIONS.iter().position(|&p| p == pos) {
            nominal[k] = raw.trim().to_string();
            continue;
        }
        let value: f64 = raw
            .trim()
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Error::NumericParse {
                line: line_no,
                field: pos,
                value: raw.to_string(),
            })?;
        numeric[n] = value;
        n += 1;
    }

    let attack_name = fields[NUM_FEATURES].trim().to_ascii_lowercase();
    let difficulty = match fields.get(NUM_FEATURES + 1) {
        Some(raw) => Some(raw.trim().parse().map_err(|_| Error::NumericParse {
            line: line_no,
            field: NUM_FEATURES + 1,
            value: raw.to_string(),
        })?),
        None => None,
    };

    Ok(RawRecord {
        numeric,
        nominal,
        attack_name,
        difficulty,
    })
}

/// Loads a whole NSL-KDD file, preserving order. Blank lines are skipped.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<(RawRecord, ClassLabel)>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let record = parse_line(&line, line_no)?;
        let label = map_attack_label_at(&record.attack_name, line_no)?;
        out.push((record, label));
    }
    Ok(out)
}

/// Per-class record counts, indexed by [`ClassLabel::index`].
pub fn class_counts<'a, T: 'a>(
    data: impl IntoIterator<Item = &'a (T, ClassLabel)>,
) -> [usize; NUM_CLASSES] {
    let mut counts = [0; NUM_CLASSES];
    for (_, label) in data {
        counts[label.index()] += 1;
    }
    counts
}
