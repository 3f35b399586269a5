//! Flat TOML pipeline configuration.
//!
//! Every key is optional; missing keys take the defaults below. Unknown
//! keys are rejected. Example:
//!
//! ```toml
//! seed = 42
//! train_subsample = 20000
//! ms_bandwidth = "auto"      # or a positive number
//! dnn_profile = "deep"       # or "shallow"
//! cluster_profiles = ["deep", "deep", "shallow"]
//! final_batch_size = 512
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autoencoder::AutoencoderConfig;
use crate::ensemble::{DnnConfig, DnnProfile, EnsembleConfig, FinalConfig};
use crate::error::{Error, Result};
use crate::ingest::NUM_FEATURES;
use crate::meanshift::{Bandwidth, MeanShiftConfig};
use crate::svm::SvmConfig;

/// `"auto"` or a fixed positive bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BandwidthSetting {
    Fixed(f64),
    Named(String),
}

impl Default for BandwidthSetting {
    fn default() -> Self {
        BandwidthSetting::Named("auto".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub train_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    pub model_path: Option<PathBuf>,

    pub seed: u64,
    /// Seeded subsample of the training file; 0 keeps every record.
    pub train_subsample: usize,
    pub oversample: bool,

    pub ae_bottleneck: usize,
    pub ae_learning_rate: f64,
    pub ae_epochs: usize,
    pub ae_batch_size: usize,

    pub ms_bandwidth: BandwidthSetting,
    pub ms_subsample: usize,
    pub ms_tol: f64,
    pub ms_max_iter: usize,
    pub ms_neighborhood: f64,

    pub dnn_profile: String,
    /// Per-cluster profile overrides, indexed by cluster.
    pub cluster_profiles: Vec<String>,
    pub dnn_learning_rate: Option<f64>,
    pub dnn_epochs: Option<usize>,
    pub dnn_batch_size: Option<usize>,

    pub svm_c: f64,
    pub svm_epochs: usize,
    pub svm_learning_rate: f64,

    pub cv_folds: usize,

    pub final_learning_rate: f64,
    pub final_epochs: usize,
    pub final_batch_size: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let ens = EnsembleConfig::default();
        let ms = MeanShiftConfig::default();
        PipelineConfig {
            train_path: None,
            test_path: None,
            model_path: None,
            seed: 0,
            train_subsample: 0,
            oversample: ens.oversample,
            ae_bottleneck: ens.autoencoder.bottleneck,
            ae_learning_rate: ens.autoencoder.learning_rate,
            ae_epochs: ens.autoencoder.epochs,
            ae_batch_size: ens.autoencoder.batch_size,
            ms_bandwidth: BandwidthSetting::default(),
            ms_subsample: ms.subsample,
            ms_tol: ms.tol,
            ms_max_iter: ms.max_iter,
            ms_neighborhood: ms.neighborhood,
            dnn_profile: "deep".into(),
            cluster_profiles: Vec::new(),
            dnn_learning_rate: None,
            dnn_epochs: None,
            dnn_batch_size: None,
            svm_c: ens.svm.c,
            svm_epochs: ens.svm.epochs,
            svm_learning_rate: ens.svm.learning_rate,
            cv_folds: ens.cv_folds,
            final_learning_rate: ens.final_net.learning_rate,
            final_epochs: ens.final_net.epochs,
            final_batch_size: ens.final_net.batch_size,
        }
    }
}

const INTEGER_KEYS: &[&str] = &[
    "seed",
    "train_subsample",
    "ae_bottleneck",
    "ae_epochs",
    "ae_batch_size",
    "ms_subsample",
    "ms_max_iter",
    "dnn_epochs",
    "dnn_batch_size",
    "svm_epochs",
    "cv_folds",
    "final_epochs",
    "final_batch_size",
];

fn range(key: &str, value: impl ToString, reason: &str) -> Error {
    Error::Range {
        key: key.into(),
        value: value.to_string(),
        reason: reason.into(),
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(range(key, v, "must be a positive finite number"))
    }
}

fn at_least(key: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(range(key, v, &format!("must be at least {min}")))
    }
}

fn profile(key: &str, name: &str) -> Result<DnnProfile> {
    name.parse().map_err(|reason: String| range(key, format!("{name:?}"), &reason))
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::ConfigParse(e.message().to_string()))?;
        let known = PipelineConfig::default();
        let known = toml::Table::try_from(&known).expect("default config serializes");
        let optional = ["train_path", "test_path", "model_path", "dnn_learning_rate", "dnn_epochs", "dnn_batch_size"];
        for key in table.keys() {
            if !known.contains_key(key) && !optional.contains(&key.as_str()) {
                return Err(Error::UnknownKey(key.clone()));
            }
        }
        // negative counts would otherwise surface as type errors
        for key in INTEGER_KEYS {
            if let Some(toml::Value::Integer(i)) = table.get(*key) {
                if *i < 0 {
                    return Err(range(key, i, "must be non-negative"));
                }
            }
        }
        let cfg: PipelineConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::ConfigParse(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PipelineConfig::from_toml_str(&text)
    }

    /// Fully resolved config as TOML, for run logs.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn bandwidth(&self) -> Result<Bandwidth> {
        match &self.ms_bandwidth {
            BandwidthSetting::Fixed(h) => {
                positive("ms_bandwidth", *h)?;
                Ok(Bandwidth::Fixed(*h))
            }
            BandwidthSetting::Named(s) if s == "auto" => Ok(Bandwidth::Auto),
            BandwidthSetting::Named(s) => Err(range("ms_bandwidth", format!("{s:?}"), "must be \"auto\" or a positive number")),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ae_bottleneck == 0 || self.ae_bottleneck >= NUM_FEATURES {
            return Err(range(
                "ae_bottleneck",
                self.ae_bottleneck,
                &format!("must be in 1..{NUM_FEATURES}"),
            ));
        }
        positive("ae_learning_rate", self.ae_learning_rate)?;
        at_least("ae_epochs", self.ae_epochs, 1)?;
        at_least("ae_batch_size", self.ae_batch_size, 1)?;
        self.bandwidth()?;
        at_least("ms_subsample", self.ms_subsample, 1)?;
        positive("ms_tol", self.ms_tol)?;
        at_least("ms_max_iter", self.ms_max_iter, 1)?;
        positive("ms_neighborhood", self.ms_neighborhood)?;
        profile("dnn_profile", &self.dnn_profile)?;
        for p in &self.cluster_profiles {
            profile("cluster_profiles", p)?;
        }
        if let Some(lr) = self.dnn_learning_rate {
            positive("dnn_learning_rate", lr)?;
        }
        if let Some(e) = self.dnn_epochs {
            at_least("dnn_epochs", e, 1)?;
        }
        if let Some(b) = self.dnn_batch_size {
            at_least("dnn_batch_size", b, 1)?;
        }
        positive("svm_c", self.svm_c)?;
        at_least("svm_epochs", self.svm_epochs, 1)?;
        positive("svm_learning_rate", self.svm_learning_rate)?;
        at_least("cv_folds", self.cv_folds, 2)?;
        positive("final_learning_rate", self.final_learning_rate)?;
        at_least("final_epochs", self.final_epochs, 1)?;
        at_least("final_batch_size", self.final_batch_size, 1)?;
        Ok(())
    }

    fn dnn(&self, name: &str) -> DnnConfig {
        let mut d = DnnConfig::profile(name.parse().expect("validated profile"));
        if let Some(lr) = self.dnn_learning_rate {
            d.learning_rate = lr;
        }
        if let Some(e) = self.dnn_epochs {
            d.epochs = e;
        }
        if let Some(b) = self.dnn_batch_size {
            d.batch_size = b;
        }
        d
    }

    /// Module-level settings. Stage seeds are filled in from the master
    /// seed when training starts.
    pub fn ensemble(&self) -> Result<EnsembleConfig> {
        self.validate()?;
        Ok(EnsembleConfig {
            oversample: self.oversample,
            autoencoder: AutoencoderConfig {
                bottleneck: self.ae_bottleneck,
                learning_rate: self.ae_learning_rate,
                epochs: self.ae_epochs,
                batch_size: self.ae_batch_size,
                seed: 0,
            },
            meanshift: MeanShiftConfig {
                bandwidth: self.bandwidth()?,
                tol: self.ms_tol,
                max_iter: self.ms_max_iter,
                subsample: self.ms_subsample,
                neighborhood: self.ms_neighborhood,
                seed: 0,
            },
            dnn: self.dnn(&self.dnn_profile),
            cluster_dnn: self.cluster_profiles.iter().map(|p| self.dnn(p)).collect(),
            svm: SvmConfig {
                c: self.svm_c,
                epochs: self.svm_epochs,
                learning_rate: self.svm_learning_rate,
                seed: 0,
            },
            cv_folds: self.cv_folds,
            final_net: FinalConfig {
                learning_rate: self.final_learning_rate,
                epochs: self.final_epochs,
                batch_size: self.final_batch_size,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let cfg = PipelineConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        let ens = cfg.ensemble().unwrap();
        assert_eq!(ens.dnn, DnnConfig::profile(DnnProfile::Deep));
        assert_eq!(ens.cv_folds, 10);
        assert_eq!(ens.meanshift.bandwidth, Bandwidth::Auto);
        assert_eq!(ens.final_net.batch_size, 512);
        assert_eq!(ens.final_net.epochs, 30);
    }

    #[test]
    fn overrides_resolve() {
        let cfg = PipelineConfig::from_toml_str(
            r#"
            seed = 42
            ms_bandwidth = 0.4
            cluster_profiles = ["deep", "shallow"]
            dnn_epochs = 5
            final_batch_size = 256
            train_path = "data/KDDTrain+.txt"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 42);
        let ens = cfg.ensemble().unwrap();
        assert_eq!(ens.meanshift.bandwidth, Bandwidth::Fixed(0.4));
        assert_eq!(ens.dnn_for(1).profile, DnnProfile::Shallow);
        assert_eq!(ens.dnn_for(1).epochs, 5);
        assert_eq!(ens.dnn_for(7).profile, DnnProfile::Deep);
        assert_eq!(ens.final_net.batch_size, 256);
        let again = PipelineConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(
            PipelineConfig::from_toml_str("ms_bandwidth = 1").unwrap().bandwidth().unwrap(),
            Bandwidth::Fixed(1.0)
        );
    }

    #[test]
    fn errors_are_classified() {
        assert!(matches!(PipelineConfig::from_toml_str("epochz = 3"), Err(Error::UnknownKey(k)) if k == "epochz"));
        assert!(matches!(
            PipelineConfig::from_toml_str("final_epochs = -1"),
            Err(Error::Range { key, .. }) if key == "final_epochs"
        ));
        assert!(matches!(
            PipelineConfig::from_toml_str("dnn_epochs = -1"),
            Err(Error::Range { key, .. }) if key == "dnn_epochs"
        ));
        assert!(matches!(PipelineConfig::from_toml_str("ae_bottleneck = 41"), Err(Error::Range { .. })));
        assert!(matches!(PipelineConfig::from_toml_str("svm_c = 0.0"), Err(Error::Range { .. })));
        assert!(matches!(PipelineConfig::from_toml_str("cv_folds = 1"), Err(Error::Range { .. })));
        assert!(matches!(PipelineConfig::from_toml_str("ms_bandwidth = \"wide\""), Err(Error::Range { .. })));
        assert!(matches!(PipelineConfig::from_toml_str("dnn_profile = \"wide\""), Err(Error::Range { .. })));
        assert!(matches!(PipelineConfig::from_toml_str("seed = \"x\""), Err(Error::ConfigParse(_))));
        assert!(matches!(PipelineConfig::from_toml_str("seed = = 1"), Err(Error::ConfigParse(_))));
        assert!(PipelineConfig::from_toml_str("epochz = 3").unwrap_err().is_config_error());
    }
}
