// SPDX-License-Identifier: MIT OR Apache-2.0

//! Instruction-relevant latent selection.
//!
//! For pair `i` and latent `j` the activation state change is
//! `Δh = 1(h_pos > 0) − 1(h_neg > 0)`, and the sensitivity score
//! `C_j = #{i : Δh_ij > 0} / N` is the share of pairs in which the latent
//! switches on because the instruction is present. The top-`k` latents by
//! `C_j` (ties to the lower index) form the feature set whose decoder rows
//! become steering directions.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ensure_dim, Error, Result};
use crate::pairset::PairRecord;
use crate::sae::SaeParams;
use crate::tensor::{dot_f64, DenseMatrix, DenseVector};

/// Lower clamp on the standard deviation when computing stability.
pub const MIN_SD: f64 = 1e-8;

/// `1(h_pos > 0) − 1(h_neg > 0)`.
pub fn activation_state_change(h_pos: f32, h_neg: f32) -> i8 {
    i8::from(h_pos > 0.0) - i8::from(h_neg > 0.0)
}

/// Per-latent sensitivity scores over `N` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityTable {
    flip_counts: Vec<u32>,
    n_pairs: usize,
}

impl SensitivityTable {
    pub fn from_counts(flip_counts: Vec<u32>, n_pairs: usize) -> Result<Self> {
        if n_pairs == 0 {
            return Err(Error::Empty("pairs"));
        }
        if let Some(j) = flip_counts.iter().position(|&c| c as usize > n_pairs) {
            return Err(Error::InvalidConfig(alloc::format!(
                "latent {j} flips in more pairs than exist"
            )));
        }
        Ok(Self {
            flip_counts,
            n_pairs,
        })
    }

    pub fn m(&self) -> usize {
        self.flip_counts.len()
    }

    pub fn n_pairs(&self) -> usize {
        self.n_pairs
    }

    /// Number of pairs where each latent switched on.
    pub fn flip_counts(&self) -> &[u32] {
        &self.flip_counts
    }

    pub fn c_score(&self, j: usize) -> f64 {
        self.flip_counts[j] as f64 / self.n_pairs as f64
    }

    pub fn c_scores(&self) -> Vec<f64> {
        (0..self.m()).map(|j| self.c_score(j)).collect()
    }

    /// All latents ordered by descending score, ties by ascending index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.m()).collect();
        order.sort_by(|&a, &b| {
            self.flip_counts[b]
                .cmp(&self.flip_counts[a])
                .then(a.cmp(&b))
        });
        order
    }
}

/// Count switch-on events for every latent.
pub fn sensitivity_scores(pairs: &[PairRecord]) -> Result<SensitivityTable> {
    let first = pairs.first().ok_or(Error::Empty("pairs"))?;
    let m = first.m();
    let mut counts = vec![0u32; m];
    for p in pairs {
        ensure_dim("pair latent width", m, p.h_pos.dim())?;
        ensure_dim("pair latent width", m, p.h_neg.dim())?;
        // only active positive latents can flip on
        for j in p.h_pos.active_indices() {
            if !p.h_neg.is_active(j) {
                counts[j] += 1;
            }
        }
    }
    SensitivityTable::from_counts(counts, pairs.len())
}

/// Denominator used for the activation probability.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ProbabilityBasis {
    /// `|A_i| / N` over positive samples of instruction-caused activations.
    #[default]
    PositivePairs,
    /// Share of all `2N` samples (positive and negative) where the latent is
    /// active.
    AllSamples,
}

/// Activation statistics of one latent.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub latent_index: usize,
    /// Positive-sample values from pairs where the latent is off in the
    /// negative sample.
    pub nonzero_values: Vec<f32>,
    /// Mean of `nonzero_values` (activation strength).
    pub mu: f64,
    /// Population standard deviation of `nonzero_values`.
    pub sd: f64,
    /// Activation probability.
    pub p_act: f64,
    /// `1 / max(sd, 1e-8)`.
    pub stability: f64,
}

impl FeatureStats {
    /// Statistics of a value multiset over `n_pairs` pairs. An empty set has
    /// `mu = sd = p_act = 0` and clamped stability.
    pub fn from_values(latent_index: usize, values: Vec<f32>, n_pairs: usize) -> Self {
        let (mu, sd) = if values.is_empty() {
            (0.0, 0.0)
        } else {
            let n = values.len() as f64;
            let mu = values.iter().map(|&x| x as f64).sum::<f64>() / n;
            let var = values
                .iter()
                .map(|&x| {
                    let dx = x as f64 - mu;
                    dx * dx
                })
                .sum::<f64>()
                / n;
            (mu, libm::sqrt(var))
        };
        let p_act = if n_pairs == 0 {
            0.0
        } else {
            values.len() as f64 / n_pairs as f64
        };
        Self {
            latent_index,
            nonzero_values: values,
            mu,
            sd,
            p_act,
            stability: 1.0 / sd.max(MIN_SD),
        }
    }
}

/// Statistics of latent `latent_index` over the pairs.
pub fn feature_stats(pairs: &[PairRecord], latent_index: usize) -> Result<FeatureStats> {
    feature_stats_with(pairs, latent_index, ProbabilityBasis::PositivePairs)
}

pub fn feature_stats_with(
    pairs: &[PairRecord],
    latent_index: usize,
    basis: ProbabilityBasis,
) -> Result<FeatureStats> {
    let mut values = Vec::new();
    let mut any_active = 0usize;
    for p in pairs {
        if latent_index >= p.m() {
            return Err(Error::IndexOutOfRange {
                what: "latent",
                index: latent_index,
                bound: p.m(),
            });
        }
        let pos = p.h_pos.get(latent_index);
        let neg = p.h_neg.get(latent_index);
        if pos > 0.0 && neg <= 0.0 {
            values.push(pos);
        }
        any_active += usize::from(pos > 0.0) + usize::from(neg > 0.0);
    }
    let mut stats = FeatureStats::from_values(latent_index, values, pairs.len());
    if basis == ProbabilityBasis::AllSamples && !pairs.is_empty() {
        stats.p_act = any_active as f64 / (2 * pairs.len()) as f64;
    }
    Ok(stats)
}

/// The top-`k` instruction-relevant latents.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    /// Latent indices by descending score, ties by ascending index.
    pub ranked_latents: Vec<usize>,
    /// `C_j` of each member, in rank order.
    pub c_scores: Vec<f64>,
    /// Decoder row of each member, in rank order.
    pub decoder_rows: Vec<DenseVector>,
    /// Per-member statistics; empty until [`FeatureSet::attach_stats`].
    pub stats: Vec<FeatureStats>,
}

impl FeatureSet {
    pub fn k(&self) -> usize {
        self.ranked_latents.len()
    }

    pub fn attach_stats(&mut self, pairs: &[PairRecord], basis: ProbabilityBasis) -> Result<()> {
        self.stats = self
            .ranked_latents
            .iter()
            .map(|&j| feature_stats_with(pairs, j, basis))
            .collect::<Result<_>>()?;
        Ok(())
    }
}

/// Take the `k` highest-scoring latents and their decoder rows.
pub fn select_top_k(table: &SensitivityTable, params: &SaeParams, k: usize) -> Result<FeatureSet> {
    ensure_dim("sensitivity table width", params.m(), table.m())?;
    if k == 0 || k > table.m() {
        return Err(Error::InvalidConfig(alloc::format!(
            "k must be in 1..={}, got {k}",
            table.m()
        )));
    }
    let mut ranked = table.ranking();
    ranked.truncate(k);
    let decoder_rows = ranked
        .iter()
        .map(|&j| params.decoder_row(j))
        .collect::<Result<_>>()?;
    Ok(FeatureSet {
        c_scores: ranked.iter().map(|&j| table.c_score(j)).collect(),
        ranked_latents: ranked,
        decoder_rows,
        stats: Vec::new(),
    })
}

/// Scores, top-`k` and statistics in one go.
pub fn select_features(
    pairs: &[PairRecord],
    params: &SaeParams,
    k: usize,
    basis: ProbabilityBasis,
) -> Result<FeatureSet> {
    let table = sensitivity_scores(pairs)?;
    let mut set = select_top_k(&table, params, k)?;
    set.attach_stats(pairs, basis)?;
    Ok(set)
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    (sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0)
}

fn correlation_of(columns: &[Vec<f64>]) -> DenseMatrix {
    let k = columns.len();
    let mut data = vec![0.0f32; k * k];
    for a in 0..k {
        data[a * k + a] = 1.0;
        for b in a + 1..k {
            let r = pearson(&columns[a], &columns[b]) as f32;
            data[a * k + b] = r;
            data[b * k + a] = r;
        }
    }
    DenseMatrix::new(k, k, data).expect("correlations are finite")
}

/// Pearson correlations between selected latents across the positive
/// samples: first of the activation indicators, then of the activation
/// values. Both matrices are in rank order with unit diagonal; a latent with
/// zero variance correlates 0 with everything else.
pub fn correlation_matrices(pairs: &[PairRecord], features: &FeatureSet) -> Result<(DenseMatrix, DenseMatrix)> {
    if features.k() < 2 {
        return Err(Error::InvalidConfig("correlations need at least 2 features".into()));
    }
    if pairs.len() < 2 {
        return Err(Error::InvalidConfig("correlations need at least 2 pairs".into()));
    }
    let mut indicators = Vec::with_capacity(features.k());
    let mut strengths = Vec::with_capacity(features.k());
    for &j in &features.ranked_latents {
        let mut ind = Vec::with_capacity(pairs.len());
        let mut val = Vec::with_capacity(pairs.len());
        for p in pairs {
            if j >= p.m() {
                return Err(Error::IndexOutOfRange {
                    what: "latent",
                    index: j,
                    bound: p.m(),
                });
            }
            let h = p.h_pos.get(j);
            ind.push(if h > 0.0 { 1.0 } else { 0.0 });
            val.push(h as f64);
        }
        indicators.push(ind);
        strengths.push(val);
    }
    Ok((correlation_of(&indicators), correlation_of(&strengths)))
}

/// Top `top_n` tokens of `unembedding · direction`, descending, ties by
/// ascending token id.
pub fn top_logits(direction: &DenseVector, unembedding: &DenseMatrix, top_n: usize) -> Result<Vec<(usize, f32)>> {
    ensure_dim("unembedding width", unembedding.cols(), direction.dim())?;
    let mut logits: Vec<(usize, f32)> = (0..unembedding.rows())
        .map(|t| {
            let row = unembedding.row(t).expect("row in range");
            (t, dot_f64(row, direction.as_slice()) as f32)
        })
        .collect();
    logits.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    logits.truncate(top_n);
    Ok(logits)
}

/// Per selected feature, the tokens whose logits its decoder row raises most.
pub fn logit_attribution(
    features: &FeatureSet,
    unembedding: &DenseMatrix,
    top_n: usize,
) -> Result<Vec<Vec<(usize, f32)>>> {
    features
        .decoder_rows
        .iter()
        .map(|v| top_logits(v, unembedding, top_n))
        .collect()
}
