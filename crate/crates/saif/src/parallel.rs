// SPDX-License-Identifier: MIT OR Apache-2.0

//! Data-parallel variants of the per-pair and per-tensor loops. Results are
//! identical to the sequential versions and keep their order.

use rayon::prelude::*;
use saif_core::pairset::{encode_pair, PairManifestEntry, PairRecord};
use saif_core::sae::SaeParams;
use saif_core::steer::{apply_steering, CompositeSteeringVector};
use saif_core::tensor::TensorBundle;

use crate::error::{Error, Result};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "SAIF_THREADS";

pub fn thread_count() -> usize {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        Some(n) if n > 0 => n.min(available.max(1)),
        _ => available,
    }
}

fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| Error::Format(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn encode_pairs_par(
    manifest: &[PairManifestEntry],
    activations: &TensorBundle,
    params: &SaeParams,
) -> Result<Vec<PairRecord>> {
    let out = with_pool(|| {
        manifest
            .par_iter()
            .map(|e| encode_pair(e, activations, params))
            .collect::<saif_core::Result<Vec<_>>>()
    })??;
    Ok(out)
}

pub fn steer_bundle_par(activations: &TensorBundle, composite: &CompositeSteeringVector) -> Result<TensorBundle> {
    let items: Vec<_> = activations.iter().collect();
    let steered = with_pool(|| {
        items
            .par_iter()
            .map(|(name, t)| {
                let wrong = |got| saif_core::Error::TensorDim {
                    name: (*name).into(),
                    expected: composite.d(),
                    got,
                };
                if t.shape().len() != 1 || t.numel() != composite.d() {
                    return Err(wrong(t.numel()));
                }
                apply_steering(&t.to_vector()?, composite).map(|v| (*name, v))
            })
            .collect::<saif_core::Result<Vec<_>>>()
    })??;
    let mut out = TensorBundle::new();
    for (name, v) in steered {
        out.insert(name, v);
    }
    Ok(out)
}
