// SPDX-License-Identifier: MIT OR Apache-2.0
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saif::saif_core::sae::{Nonlinearity, SaeParams};
use saif::saif_core::tensor::{DenseMatrix, DenseVector, Tensor, TensorBundle};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn floats(rng: &mut impl Rng, n: usize, lo: f32, hi: f32) -> Vec<f32> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn random_vector(rng: &mut impl Rng, n: usize) -> DenseVector {
    DenseVector::new(floats(rng, n, -1.0, 1.0)).unwrap()
}

pub fn random_sae(rng: &mut impl Rng, d: usize, m: usize, nl: Nonlinearity) -> SaeParams {
    SaeParams::new(
        DenseMatrix::new(d, m, floats(rng, d * m, -1.0, 1.0)).unwrap(),
        DenseVector::new(floats(rng, m, -0.5, 0.5)).unwrap(),
        DenseMatrix::new(m, d, floats(rng, m * d, -1.0, 1.0)).unwrap(),
        DenseVector::new(floats(rng, d, -0.1, 0.1)).unwrap(),
        nl,
        0,
        "random",
    )
    .unwrap()
}

/// A bundle with up to 8 tensors of rank 0 to 3; values include negative
/// zero, subnormals and extremes.
pub fn random_bundle(rng: &mut impl Rng) -> TensorBundle {
    let mut b = TensorBundle::new();
    for i in 0..rng.random_range(0..8) {
        let rank = rng.random_range(0..4);
        let shape: Vec<usize> = (0..rank).map(|_| rng.random_range(0..5)).collect();
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| match rng.random_range(0..10) {
                0 => -0.0,
                1 => f32::MIN_POSITIVE / 4.0,
                2 => f32::MAX,
                _ => rng.random_range(-1e3..1e3),
            })
            .collect();
        let name = format!("t{i}/{}", rng.random_range(0..1000));
        b.insert(name, Tensor::new(shape, data).unwrap());
    }
    b
}
