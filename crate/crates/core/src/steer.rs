// SPDX-License-Identifier: MIT OR Apache-2.0

//! Steering vectors.
//!
//! Single-latent steering adds `alpha · W_dec[j]` to a residual vector. The
//! multi-feature form adds `Σ alpha_i · v_i` over the selected decoder rows,
//! with `alpha_i = mu_i + beta · s_i` taken from the feature statistics.
//! The sum is precomputed once into a [`CompositeSteeringVector`] so applying
//! it is a single vector add.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ensure_dim, Error, Result};
use crate::sae::SaeParams;
use crate::select::{FeatureSet, FeatureStats};
use crate::tensor::{DenseVector, TensorBundle};

pub const DEFAULT_K: usize = 15;
pub const DEFAULT_BETA: f32 = 0.0;

/// How the secondary generator applies a composite during decoding.
pub const APPLY_POLICY: &str = "every_step_last_token";

/// `beta ∈ [-1, 1]` in steps of 0.25.
pub fn beta_preset_wide() -> Vec<f32> {
    (-4..=4).map(|i| i as f32 * 0.25).collect()
}

/// `beta ∈ [-0.1, 0.1]` in steps of 0.025.
pub fn beta_preset_narrow() -> Vec<f32> {
    (-4..=4).map(|i| i as f32 * 0.025).collect()
}

/// `alpha_i = mu_i + beta · s_i`.
pub fn steering_strength(stats: &FeatureStats, beta: f32) -> f32 {
    (stats.mu + beta as f64 * stats.sd) as f32
}

pub fn steering_strengths(stats: &[FeatureStats], beta: f32) -> Vec<f32> {
    stats.iter().map(|s| steering_strength(s, beta)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteeringMember {
    pub latent_index: usize,
    pub direction: DenseVector,
    pub alpha: f32,
}

/// Selected directions with their strengths, in selection rank order.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVectorSet {
    pub members: Vec<SteeringMember>,
    pub beta: f32,
    pub source_task: String,
    pub layer_index: usize,
}

impl SteeringVectorSet {
    /// Sum the scaled members into a single vector.
    pub fn composite(&self) -> Result<CompositeSteeringVector> {
        let first = self.members.first().ok_or(Error::Empty("steering members"))?;
        let d = first.direction.dim();
        let mut acc = vec![0.0f64; d];
        for m in &self.members {
            ensure_dim("steering direction", d, m.direction.dim())?;
            if !m.alpha.is_finite() {
                return Err(Error::NonFinite {
                    what: "steering strength",
                    index: m.latent_index,
                });
            }
            for (a, &v) in acc.iter_mut().zip(m.direction.as_slice()) {
                *a += m.alpha as f64 * v as f64;
            }
        }
        Ok(CompositeSteeringVector {
            delta: DenseVector::new(acc.into_iter().map(|x| x as f32).collect())?,
            members: self.members.iter().map(|m| (m.latent_index, m.alpha)).collect(),
            beta: self.beta,
            layer_index: self.layer_index,
        })
    }
}

/// Precomputed `Σ alpha_i · v_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeSteeringVector {
    pub delta: DenseVector,
    /// `(latent, alpha)` in rank order.
    pub members: Vec<(usize, f32)>,
    pub beta: f32,
    pub layer_index: usize,
}

impl CompositeSteeringVector {
    pub fn d(&self) -> usize {
        self.delta.dim()
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    /// The composite that undoes this one.
    pub fn negate(&self) -> Self {
        Self {
            delta: self.delta.scale(-1.0).expect("negation stays finite"),
            members: self.members.iter().map(|&(j, a)| (j, -a)).collect(),
            beta: self.beta,
            layer_index: self.layer_index,
        }
    }
}

/// Build the steering set for `features` (which must carry statistics).
pub fn make_steering_set(
    features: &FeatureSet,
    beta: f32,
    source_task: &str,
    layer_index: usize,
) -> Result<(SteeringVectorSet, CompositeSteeringVector)> {
    if features.k() == 0 {
        return Err(Error::Empty("feature set"));
    }
    ensure_dim("feature statistics", features.k(), features.stats.len())?;
    ensure_dim("feature decoder rows", features.k(), features.decoder_rows.len())?;
    let members = features
        .ranked_latents
        .iter()
        .zip(&features.decoder_rows)
        .zip(&features.stats)
        .map(|((&latent_index, v), s)| SteeringMember {
            latent_index,
            direction: v.clone(),
            alpha: steering_strength(s, beta),
        })
        .collect();
    let set = SteeringVectorSet {
        members,
        beta,
        source_task: source_task.into(),
        layer_index,
    };
    let composite = set.composite()?;
    Ok((set, composite))
}

/// `z + delta`; `z` is left untouched.
pub fn apply_steering(z: &DenseVector, composite: &CompositeSteeringVector) -> Result<DenseVector> {
    ensure_dim("steering input", composite.d(), z.dim())?;
    z.add(&composite.delta)
}

/// `z + alpha · W_dec[j]`.
pub fn classic_steer(z: &DenseVector, params: &SaeParams, j: usize, alpha: f32) -> Result<DenseVector> {
    let row = params.decoder_row(j)?;
    ensure_dim("steering input", row.dim(), z.dim())?;
    let data = z
        .as_slice()
        .iter()
        .zip(row.as_slice())
        .map(|(&x, &v)| x + (alpha as f64 * v as f64) as f32)
        .collect();
    DenseVector::new(data)
}

/// Steer every vector in a bundle, keeping names.
pub fn steer_bundle(activations: &TensorBundle, composite: &CompositeSteeringVector) -> Result<TensorBundle> {
    let mut out = TensorBundle::new();
    for (name, t) in activations.iter() {
        let wrong = |got| Error::TensorDim {
            name: name.into(),
            expected: composite.d(),
            got,
        };
        if t.shape().len() != 1 {
            return Err(wrong(t.numel()));
        }
        let z = t.to_vector()?;
        if z.dim() != composite.d() {
            return Err(wrong(z.dim()));
        }
        out.insert(name, apply_steering(&z, composite)?);
    }
    Ok(out)
}

/// One composite per `beta`, all over the same features.
pub fn sweep_beta(
    features: &FeatureSet,
    betas: &[f32],
    source_task: &str,
    layer_index: usize,
) -> Result<Vec<CompositeSteeringVector>> {
    betas
        .iter()
        .map(|&b| make_steering_set(features, b, source_task, layer_index).map(|(_, c)| c))
        .collect()
}
