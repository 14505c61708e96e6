// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic pair data with planted instruction latents.
//!
//! Latent patterns are sampled directly: in a positive sample each planted
//! latent fires with probability `p_on`, every other latent with
//! `p_spurious`; in a negative sample every latent fires with `p_spurious`.
//! Active values are `max(strength_mean + strength_sd · N(0, 1), 0.01)`.
//!
//! The residual vectors are `z = a · W_dec` for a constructed SAE whose
//! encoder inverts the decoder exactly on every sampled pattern:
//!
//! * `d` "live" latents map to distinct residual coordinates through a
//!   random signed permutation scaled by powers of two, so both directions
//!   are exact in `f32`;
//! * the remaining `m − d` "dormant" latents get random dense decoder rows
//!   and an encoder bias of `−1`, and are never sampled active.
//!
//! Randomness is a ChaCha8 stream keyed by `(seed, pair_id, side)` and read
//! in latent order, so any pair can be generated independently of the rest.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::pairset::PairRecord;
use crate::sae::{LatentVector, Nonlinearity, SaeParams};
use crate::tensor::{DenseMatrix, DenseVector};

/// Floor applied to sampled activation values.
pub const MIN_ACTIVATION: f32 = 0.01;

const SETUP_STREAM: u64 = u64::MAX;

/// Ground-truth parameters of a synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlantConfig {
    pub seed: u64,
    pub d: usize,
    pub m: usize,
    pub planted_latents: Vec<usize>,
    pub p_on: f64,
    pub p_spurious: f64,
    pub strength_mean: f32,
    pub strength_sd: f32,
}

impl PlantConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidConfig(msg));
        if self.m < self.planted_latents.len() {
            return bad(format!(
                "m ({}) is smaller than the number of planted latents ({})",
                self.m,
                self.planted_latents.len()
            ));
        }
        for (i, &j) in self.planted_latents.iter().enumerate() {
            if j >= self.m {
                return bad(format!("planted latent {j} is not below m ({})", self.m));
            }
            if self.planted_latents[..i].contains(&j) {
                return bad(format!("planted latent {j} listed twice"));
            }
        }
        if self.d >= self.m {
            return bad(format!("d ({}) must be below m ({})", self.d, self.m));
        }
        if self.d < self.planted_latents.len() {
            return bad(format!(
                "d ({}) leaves no room for {} planted latents",
                self.d,
                self.planted_latents.len()
            ));
        }
        if !(0.0 <= self.p_spurious && self.p_spurious < self.p_on && self.p_on <= 1.0) {
            return bad(format!(
                "need 0 <= p_spurious < p_on <= 1, got p_spurious={} p_on={}",
                self.p_spurious, self.p_on
            ));
        }
        if !(self.strength_mean > 0.0 && self.strength_mean.is_finite()) {
            return bad(format!("strength_mean must be positive, got {}", self.strength_mean));
        }
        if !(self.strength_sd >= 0.0 && self.strength_sd.is_finite()) {
            return bad(format!("strength_sd must be non-negative, got {}", self.strength_sd));
        }
        Ok(())
    }

    /// `count` planted latents spread evenly over `m` from a seed-dependent
    /// offset.
    pub fn spread_planted(seed: u64, m: usize, count: usize) -> Vec<usize> {
        if count == 0 || m == 0 {
            return Vec::new();
        }
        let stride = (m / count).max(1);
        let offset = (seed as usize).wrapping_mul(7919) % stride;
        (0..count).map(|i| (offset + i * stride) % m).collect()
    }
}

/// Synthetic pairs plus the SAE that produced their latents.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub params: SaeParams,
    pub pairs: Vec<PairRecord>,
    pub ground_truth: PlantConfig,
    /// Latents that never activate; always disjoint from the planted set.
    pub dormant_latents: Vec<usize>,
    /// Per latent, the number of pairs where it is on in the positive sample
    /// and off in the negative one, counted on the sampled patterns.
    pub flip_counts: Vec<u32>,
}

impl SyntheticDataset {
    /// Planted latents sorted by descending flip count, ties by index.
    pub fn planted_by_flips(&self) -> Vec<usize> {
        let mut p = self.ground_truth.planted_latents.clone();
        p.sort_by(|&a, &b| self.flip_counts[b].cmp(&self.flip_counts[a]).then(a.cmp(&b)));
        p
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Planted,
    Spurious,
    Dormant,
}

struct Layout {
    roles: Vec<Role>,
    dormant: Vec<usize>,
    params: SaeParams,
}

fn build_layout(cfg: &PlantConfig) -> Result<Layout> {
    let (d, m) = (cfg.d, cfg.m);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(SETUP_STREAM);

    let mut roles = vec![Role::Spurious; m];
    for &j in &cfg.planted_latents {
        roles[j] = Role::Planted;
    }
    let mut candidates: Vec<usize> = (0..m).filter(|&j| roles[j] != Role::Planted).collect();
    candidates.shuffle(&mut rng);
    let mut dormant: Vec<usize> = candidates[..m - d].to_vec();
    dormant.sort_unstable();
    for &j in &dormant {
        roles[j] = Role::Dormant;
    }

    let mut coords: Vec<usize> = (0..d).collect();
    coords.shuffle(&mut rng);
    let mut coords = coords.into_iter();

    let mut w_enc = vec![0.0f32; d * m];
    let mut w_dec = vec![0.0f32; m * d];
    let mut b_enc = vec![0.0f32; m];
    let dense_scale = 1.0 / libm::sqrtf(d as f32);
    for j in 0..m {
        if roles[j] == Role::Dormant {
            for c in 0..d {
                let g: f32 = rng.sample(StandardNormal);
                w_dec[j * d + c] = g * dense_scale;
            }
            b_enc[j] = -1.0;
        } else {
            let c = coords.next().expect("d live latents for d coordinates");
            let sign = if rng.random::<bool>() { 1.0f32 } else { -1.0 };
            let exp = rng.random_range(-1i32..=1);
            let scale = libm::ldexpf(1.0, exp);
            w_dec[j * d + c] = sign * scale;
            w_enc[c * m + j] = sign / scale;
        }
    }
    let params = SaeParams::new(
        DenseMatrix::new(d, m, w_enc)?,
        DenseVector::new(b_enc)?,
        DenseMatrix::new(m, d, w_dec)?,
        DenseVector::zeros(d),
        Nonlinearity::Relu,
        0,
        "synthetic",
    )?;
    Ok(Layout {
        roles,
        dormant,
        params,
    })
}

fn sample_pattern(cfg: &PlantConfig, roles: &[Role], pair_id: usize, positive: bool) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(((pair_id as u64) << 1) | u64::from(positive));
    roles
        .iter()
        .map(|role| {
            let p = match (role, positive) {
                (Role::Dormant, _) => return 0.0,
                (Role::Planted, true) => cfg.p_on,
                _ => cfg.p_spurious,
            };
            if rng.random::<f64>() < p {
                let g: f32 = rng.sample(StandardNormal);
                (cfg.strength_mean + cfg.strength_sd * g).max(MIN_ACTIVATION)
            } else {
                0.0
            }
        })
        .collect()
}

/// Generate `n_pairs` synthetic pairs. Deterministic in `(config, n_pairs)`.
pub fn generate(config: &PlantConfig, n_pairs: usize) -> Result<SyntheticDataset> {
    config.validate()?;
    if n_pairs == 0 {
        return Err(Error::Empty("n_pairs"));
    }
    let layout = build_layout(config)?;
    let params = &layout.params;
    let mut flip_counts = vec![0u32; config.m];
    let mut pairs = Vec::with_capacity(n_pairs);
    for pair_id in 0..n_pairs {
        let pos = sample_pattern(config, &layout.roles, pair_id, true);
        let neg = sample_pattern(config, &layout.roles, pair_id, false);
        for (j, (p, n)) in pos.iter().zip(&neg).enumerate() {
            if *p > 0.0 && *n <= 0.0 {
                flip_counts[j] += 1;
            }
        }
        let h_pos = LatentVector::new(pos)?;
        let h_neg = LatentVector::new(neg)?;
        let z_pos = params.decode(&h_pos)?;
        let z_neg = params.decode(&h_neg)?;
        for (z, h) in [(&z_pos, &h_pos), (&z_neg, &h_neg)] {
            if params.encode(z)? != *h {
                return Err(Error::InvalidConfig(format!(
                    "synthetic encoder failed to invert pair {pair_id}"
                )));
            }
        }
        let mut rec = PairRecord::new(pair_id, params.layer_index, h_pos, h_neg)?;
        rec.z_pos = Some(z_pos);
        rec.z_neg = Some(z_neg);
        pairs.push(rec);
    }
    Ok(SyntheticDataset {
        params: layout.params,
        pairs,
        ground_truth: config.clone(),
        dormant_latents: layout.dormant,
        flip_counts,
    })
}
