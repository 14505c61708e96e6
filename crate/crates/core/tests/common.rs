// SPDX-License-Identifier: MIT OR Apache-2.0

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saif_core::sae::{LatentVector, Nonlinearity, SaeParams};
use saif_core::tensor::{DenseMatrix, DenseVector};
use saif_core::PairRecord;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f32) -> Vec<f32> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn random_sae(rng: &mut ChaCha8Rng, d: usize, m: usize, nl: Nonlinearity) -> SaeParams {
    SaeParams::new(
        DenseMatrix::new(d, m, random_vec(rng, d * m, 1.0)).unwrap(),
        DenseVector::new(random_vec(rng, m, 0.5)).unwrap(),
        DenseMatrix::new(m, d, random_vec(rng, m * d, 1.0)).unwrap(),
        DenseVector::new(random_vec(rng, d, 0.5)).unwrap(),
        nl,
        0,
        "random",
    )
    .unwrap()
}

/// Sparse non-negative latent with roughly `density` active entries.
pub fn random_latent(rng: &mut ChaCha8Rng, m: usize, density: f64) -> LatentVector {
    let data = (0..m)
        .map(|_| {
            if rng.random_bool(density) {
                rng.random_range(0.01f32..5.0)
            } else {
                0.0
            }
        })
        .collect();
    LatentVector::new(data).unwrap()
}

pub fn random_pairs(rng: &mut ChaCha8Rng, n: usize, m: usize, density: f64) -> Vec<PairRecord> {
    (0..n)
        .map(|i| {
            PairRecord::new(
                i,
                0,
                random_latent(rng, m, density),
                random_latent(rng, m, density),
            )
            .unwrap()
        })
        .collect()
}
