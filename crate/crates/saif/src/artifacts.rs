// SPDX-License-Identifier: MIT OR Apache-2.0

//! JSON and CSV artifacts written by the pipeline.

use saif_core::sae::SaeParams;
use saif_core::select::{FeatureSet, FeatureStats, ProbabilityBasis, MIN_SD};
use saif_core::steer::{CompositeSteeringVector, APPLY_POLICY};
use saif_core::tensor::{DenseMatrix, TensorBundle};
use saif_core::toy::{PlantConfig, SyntheticDataset};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

fn check_schema(found: u32, what: &str) -> Result<()> {
    if found == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(Error::Format(format!(
            "{what} has schema_version {found}, expected {SCHEMA_VERSION}"
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub latent: usize,
    pub c_score: f64,
    pub mu: f64,
    pub sd: f64,
    pub p_act: f64,
    pub stability: f64,
}

/// `features.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturesFile {
    pub schema_version: u32,
    pub k: usize,
    pub layer_index: usize,
    pub n_pairs: usize,
    pub p_basis: String,
    pub ranked: Vec<RankedFeature>,
}

fn basis_name(b: ProbabilityBasis) -> &'static str {
    match b {
        ProbabilityBasis::PositivePairs => "positive_pairs",
        ProbabilityBasis::AllSamples => "all_samples",
    }
}

impl FeaturesFile {
    pub fn from_set(set: &FeatureSet, n_pairs: usize, layer_index: usize, basis: ProbabilityBasis) -> Self {
        let ranked = set
            .ranked_latents
            .iter()
            .zip(&set.c_scores)
            .zip(&set.stats)
            .map(|((&latent, &c_score), s)| RankedFeature {
                latent,
                c_score,
                mu: s.mu,
                sd: s.sd,
                p_act: s.p_act,
                stability: s.stability,
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            k: set.k(),
            layer_index,
            n_pairs,
            p_basis: basis_name(basis).into(),
            ranked,
        }
    }

    /// Rebuild the feature set, taking decoder rows from `params`. The
    /// per-feature value lists are not stored, so they come back empty.
    pub fn to_feature_set(&self, params: &SaeParams) -> Result<FeatureSet> {
        check_schema(self.schema_version, "features file")?;
        if self.ranked.len() != self.k {
            return Err(Error::Format(format!(
                "features file lists {} entries but k = {}",
                self.ranked.len(),
                self.k
            )));
        }
        Ok(FeatureSet {
            ranked_latents: self.ranked.iter().map(|r| r.latent).collect(),
            c_scores: self.ranked.iter().map(|r| r.c_score).collect(),
            decoder_rows: self
                .ranked
                .iter()
                .map(|r| params.decoder_row(r.latent))
                .collect::<saif_core::Result<_>>()?,
            stats: self
                .ranked
                .iter()
                .map(|r| FeatureStats {
                    latent_index: r.latent,
                    nonzero_values: Vec::new(),
                    mu: r.mu,
                    sd: r.sd,
                    p_act: r.p_act,
                    stability: 1.0 / r.sd.max(MIN_SD),
                })
                .collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberStrength {
    pub latent: usize,
    pub alpha: f32,
}

/// `steer_config.json`, the sidecar of `composite.saif`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteerConfig {
    pub schema_version: u32,
    pub beta: f32,
    pub k: usize,
    pub layer_index: usize,
    pub members: Vec<MemberStrength>,
    pub apply_policy: String,
    pub source_task: String,
}

impl SteerConfig {
    pub fn describe(c: &CompositeSteeringVector, source_task: &str) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            beta: c.beta,
            k: c.k(),
            layer_index: c.layer_index,
            members: c
                .members
                .iter()
                .map(|&(latent, alpha)| MemberStrength { latent, alpha })
                .collect(),
            apply_policy: APPLY_POLICY.into(),
            source_task: source_task.into(),
        }
    }
}

pub fn composite_to_bundle(c: &CompositeSteeringVector) -> TensorBundle {
    let mut b = TensorBundle::new();
    b.insert("delta", c.delta.clone());
    b
}

pub fn composite_from_bundle(bundle: &TensorBundle, config: &SteerConfig) -> Result<CompositeSteeringVector> {
    check_schema(config.schema_version, "steer config")?;
    if config.members.len() != config.k {
        return Err(Error::Format(format!(
            "steer config lists {} members but k = {}",
            config.members.len(),
            config.k
        )));
    }
    Ok(CompositeSteeringVector {
        delta: bundle.require("delta")?.to_vector()?,
        members: config.members.iter().map(|m| (m.latent, m.alpha)).collect(),
        beta: config.beta,
        layer_index: config.layer_index,
    })
}

/// `ground_truth.json` written next to synthetic data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFile {
    pub schema_version: u32,
    pub config: PlantConfig,
    pub n_pairs: usize,
    pub dormant_latents: Vec<usize>,
    /// Planted latents by descending flip count.
    pub planted_by_flips: Vec<usize>,
    pub flip_counts: Vec<u32>,
}

impl GroundTruthFile {
    pub fn from_dataset(ds: &SyntheticDataset) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            config: ds.ground_truth.clone(),
            n_pairs: ds.pairs.len(),
            dormant_latents: ds.dormant_latents.clone(),
            planted_by_flips: ds.planted_by_flips(),
            flip_counts: ds.flip_counts.clone(),
        }
    }
}

/// Square matrix as CSV with latent ids labelling rows and columns.
pub fn correlation_csv(labels: &[usize], matrix: &DenseMatrix) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["latent".to_string()];
    header.extend(labels.iter().map(usize::to_string));
    w.write_record(&header)?;
    for (r, label) in labels.iter().enumerate() {
        let mut row = vec![label.to_string()];
        row.extend((0..matrix.cols()).map(|c| matrix.get(r, c).to_string()));
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::Format(e.to_string()))
}

/// Rows of serializable records as CSV.
pub fn rows_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Format(e.to_string()))
}
