//! Model cards: a trained approximator with the settings that produced it.
//!
//! Weights are stored as little-endian `f64` bytes in base64 so a card
//! reloads bit for bit. The `sha256` field hashes the card serialized with
//! that field blank; loading recomputes it and refuses a mismatch.

use std::path::Path;

use base64::Engine;
use mspec_core::networks::{AmortizedApproximator, FlowConfig, Standardizer, SummaryConfig};
use mspec_core::rng::seeded;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ModelSpec, TrainSettings};
use crate::error::{CliError, CliResult};

pub const CARD_FORMAT: u32 = 1;
const WEIGHT_ENCODING: &str = "base64-f64-le";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightBlob {
    pub encoding: String,
    pub shapes: Vec<Vec<usize>>,
    pub data: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelCard {
    pub format: u32,
    pub mspec_version: String,
    pub model: ModelSpec,
    pub summary: SummaryConfig,
    pub flow: FlowConfig,
    pub standardizer: Standardizer,
    pub train: TrainSettings,
    pub seed: u64,
    /// Observations per dataset used in training.
    pub k: usize,
    pub steps_completed: usize,
    /// Coordinate permutation of each coupling layer.
    pub permutations: Vec<Vec<usize>>,
    pub weights: WeightBlob,
    pub sha256: String,
}

impl ModelCard {
    pub fn new(
        model: ModelSpec,
        nets: &AmortizedApproximator,
        train: TrainSettings,
        seed: u64,
        k: usize,
        steps_completed: usize,
    ) -> Self {
        let params = nets.parameters();
        let mut bytes = Vec::with_capacity(8 * nets.n_weights());
        for p in &params {
            for v in p.data() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut card = ModelCard {
            format: CARD_FORMAT,
            mspec_version: env!("CARGO_PKG_VERSION").into(),
            model,
            summary: nets.summary.config.clone(),
            flow: nets.flow.config.clone(),
            standardizer: nets.standardizer.clone(),
            train,
            seed,
            k,
            steps_completed,
            permutations: nets.flow.layers.iter().map(|l| l.permutation.clone()).collect(),
            weights: WeightBlob {
                encoding: WEIGHT_ENCODING.into(),
                shapes: params.iter().map(|p| p.shape().to_vec()).collect(),
                data: base64::engine::general_purpose::STANDARD.encode(bytes),
            },
            sha256: String::new(),
        };
        card.sha256 = card.content_hash();
        card
    }

    /// Hex SHA-256 of the card serialized with a blank `sha256` field.
    pub fn content_hash(&self) -> String {
        let mut blank = self.clone();
        blank.sha256.clear();
        let json = serde_json::to_vec(&blank).expect("cards always serialize");
        hex_digest(&json)
    }

    /// Rebuild the networks stored in the card.
    pub fn approximator(&self) -> Result<AmortizedApproximator, String> {
        if self.weights.encoding != WEIGHT_ENCODING {
            return Err(format!("unsupported weight encoding {:?}", self.weights.encoding));
        }
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(&self.weights.data)
            .map_err(|e| format!("weights are not valid base64: {}", e))?;
        if bytes.len() % 8 != 0 {
            return Err("weight byte count is not a multiple of 8".into());
        }
        let values: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let mut nets = AmortizedApproximator::init(
            self.summary.clone(),
            self.flow.clone(),
            self.standardizer.clone(),
            &mut seeded(0),
        )
        .map_err(|e| e.to_string())?;
        if self.permutations.len() != nets.flow.layers.len() {
            return Err(format!("card lists {} permutations for {} coupling layers", self.permutations.len(), nets.flow.layers.len()));
        }
        for (layer, perm) in nets.flow.layers.iter_mut().zip(&self.permutations) {
            let p = perm.len();
            let mut inverse = vec![usize::MAX; p];
            for (i, &j) in perm.iter().enumerate() {
                if j >= p || inverse[j] != usize::MAX {
                    return Err(format!("{:?} is not a permutation", perm));
                }
                inverse[j] = i;
            }
            if p != layer.permutation.len() {
                return Err(format!("permutation of length {} for {} parameters", p, layer.permutation.len()));
            }
            layer.permutation = perm.clone();
            layer.inverse_permutation = inverse;
        }
        let mut params = nets.parameters_mut();
        if params.len() != self.weights.shapes.len() {
            return Err(format!("card lists {} weight arrays, networks have {}", self.weights.shapes.len(), params.len()));
        }
        let mut offset = 0;
        for (p, shape) in params.iter_mut().zip(&self.weights.shapes) {
            if p.shape() != shape.as_slice() {
                return Err(format!("weight shape {:?} does not match network shape {:?}", shape, p.shape()));
            }
            let n = p.len();
            let chunk = values.get(offset..offset + n).ok_or("weight data is truncated")?;
            p.data_mut().copy_from_slice(chunk);
            offset += n;
        }
        if offset != values.len() {
            return Err(format!("{} trailing weight values", values.len() - offset));
        }
        Ok(nets)
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let json = serde_json::to_string_pretty(self).expect("cards always serialize");
        std::fs::write(path, json + "\n").map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> CliResult<(Self, AmortizedApproximator)> {
        let bad = |detail: String| CliError::Card { path: path.into(), detail };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let card: ModelCard = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        if card.format != CARD_FORMAT {
            return Err(bad(format!("format {} is not supported", card.format)));
        }
        let expected = card.content_hash();
        if card.sha256 != expected {
            return Err(bad(format!("content hash mismatch (stored {}, computed {})", card.sha256, expected)));
        }
        let nets = card.approximator().map_err(bad)?;
        Ok((card, nets))
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{:02x}", b)).collect()
}
