//! Undercomplete autoencoder: 41 -> 25 -> 41, sigmoid throughout, trained
//! to reconstruct Min-Max scaled records. Only the encoder half is used
//! downstream.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{self, Activation, LossKind, Network, TrainConfig};

pub const DEFAULT_BOTTLENECK: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderConfig {
    pub bottleneck: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        AutoencoderConfig {
            bottleneck: DEFAULT_BOTTLENECK,
            learning_rate: 0.05,
            epochs: 20,
            batch_size: 128,
            seed: 0,
        }
    }
}

impl AutoencoderConfig {
    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            loss: LossKind::MeanSquare,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderModel {
    encoder: Network,
    decoder: Network,
    loss_history: Vec<f64>,
}

impl AutoencoderModel {
    /// Untrained model with the same initialization `train` would start from.
    pub fn init(input_dim: usize, cfg: &AutoencoderConfig) -> Result<Self> {
        let full = full_network(input_dim, cfg)?;
        let (encoder, decoder) = full.split(1)?;
        Ok(AutoencoderModel {
            encoder,
            decoder,
            loss_history: Vec::new(),
        })
    }

    pub fn train<V: AsRef<[f64]>>(data: &[V], cfg: &AutoencoderConfig) -> Result<Self> {
        let first = data.first().ok_or(Error::EmptyDataset)?;
        let full = full_network(first.as_ref().len(), cfg)?;
        let (full, loss_history) = nn::train(full, data, data, &cfg.train_config())?;
        let (encoder, decoder) = full.split(1)?;
        Ok(AutoencoderModel {
            encoder,
            decoder,
            loss_history,
        })
    }

    pub fn encoder(&self) -> &Network {
        &self.encoder
    }

    pub fn decoder(&self) -> &Network {
        &self.decoder
    }

    pub fn loss_history(&self) -> &[f64] {
        &self.loss_history
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_size()
    }

    pub fn code_dim(&self) -> usize {
        self.encoder.output_size()
    }

    pub fn encode(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.encoder.predict_proba(v)
    }

    pub fn reconstruct(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.decoder.predict_proba(&self.encode(v)?)
    }

    /// Squared reconstruction error averaged over samples and features.
    pub fn reconstruction_mse<V: AsRef<[f64]>>(&self, data: &[V]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut total = 0.0;
        for v in data {
            let v = v.as_ref();
            let r = self.reconstruct(v)?;
            total += r.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        Ok(total / (data.len() * self.input_dim()) as f64)
    }
}

fn full_network(input_dim: usize, cfg: &AutoencoderConfig) -> Result<Network> {
    if cfg.bottleneck == 0 || cfg.bottleneck >= input_dim {
        return Err(Error::BadTopology(format!(
            "bottleneck {} must be in 1..{input_dim} for an undercomplete autoencoder",
            cfg.bottleneck
        )));
    }
    Network::new(
        &[input_dim, cfg.bottleneck, input_dim],
        &[Activation::Sigmoid, Activation::Sigmoid],
        cfg.seed,
    )
}

pub fn train_autoencoder<V: AsRef<[f64]>>(train: &[V], cfg: &AutoencoderConfig) -> Result<AutoencoderModel> {
    AutoencoderModel::train(train, cfg)
}
