// SPDX-License-Identifier: MIT OR Apache-2.0

mod common;

use common::*;
use proptest::prelude::*;
use saif_core::sae::{LatentVector, Nonlinearity, SaeParams};
use saif_core::tensor::{DenseMatrix, DenseVector};

fn arb_nonlinearity(m: usize) -> impl Strategy<Value = Nonlinearity> {
    prop_oneof![
        Just(Nonlinearity::Relu),
        (1..=m).prop_map(|k| Nonlinearity::TopKRelu { k }),
        proptest::collection::vec(0.0f32..1.0, m)
            .prop_map(|t| Nonlinearity::JumpRelu { theta: DenseVector::new(t).unwrap() }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn encode_output_respects_nonlinearity(
        seed in any::<u64>(),
        nl in arb_nonlinearity(24),
        z in proptest::collection::vec(-3.0f32..3.0, 8),
    ) {
        let mut r = rng(seed);
        let sae = random_sae(&mut r, 8, 24, nl.clone());
        let z = DenseVector::new(z).unwrap();
        let a = sae.encode(&z).unwrap();
        prop_assert!(a.as_slice().iter().all(|x| *x >= 0.0));
        prop_assert_eq!(a.nonzero_count(), a.as_slice().iter().filter(|x| **x != 0.0).count());
        match &nl {
            Nonlinearity::TopKRelu { k } => prop_assert!(a.nonzero_count() <= *k),
            Nonlinearity::JumpRelu { theta } => {
                for (x, t) in a.as_slice().iter().zip(theta.as_slice()) {
                    prop_assert!(!(*x > 0.0 && *x <= *t));
                }
            }
            Nonlinearity::Relu => {}
        }
        let again = sae.encode(&z).unwrap();
        prop_assert!(a.as_slice().iter().zip(again.as_slice()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn reconstruction_error_recomposes(
        seed in any::<u64>(),
        z in proptest::collection::vec(-3.0f32..3.0, 6),
    ) {
        let mut r = rng(seed);
        let sae = random_sae(&mut r, 6, 20, Nonlinearity::Relu);
        let z = DenseVector::new(z).unwrap();
        let s = sae.reconstruct(&z).unwrap();
        let eps = sae.reconstruction_error(&z).unwrap();
        for ((&zi, &si), &ei) in z.as_slice().iter().zip(s.as_slice()).zip(eps.as_slice()) {
            let back = si + ei;
            let exact_region = si != 0.0 && zi / si >= 0.5 && zi / si <= 2.0;
            if exact_region {
                prop_assert_eq!(back.to_bits(), zi.to_bits());
            } else {
                let ulp = f32::EPSILON * zi.abs().max(si.abs());
                prop_assert!((back - zi).abs() <= ulp, "{} vs {}", back, zi);
            }
        }
    }

    #[test]
    fn decoder_row_rescaling_is_invisible(
        seed in any::<u64>(),
        j in 0usize..12,
        c in prop_oneof![0.25f32..0.9, 1.1f32..4.0],
    ) {
        let mut r = rng(seed);
        let sae = random_sae(&mut r, 4, 12, Nonlinearity::Relu);
        let a = random_latent(&mut r, 12, 0.5);
        let mut w_dec = sae.w_dec().as_slice().to_vec();
        for x in &mut w_dec[j * 4..(j + 1) * 4] {
            *x *= c;
        }
        let scaled_sae = SaeParams::new(
            sae.w_enc().clone(), sae.b_enc().clone(),
            DenseMatrix::new(12, 4, w_dec).unwrap(), sae.b_dec().clone(),
            Nonlinearity::Relu, 0, "",
        ).unwrap();
        let mut a2 = a.as_slice().to_vec();
        a2[j] /= c;
        let lhs = sae.decode(&a).unwrap();
        let rhs = scaled_sae.decode(&LatentVector::new(a2).unwrap()).unwrap();
        for (x, y) in lhs.as_slice().iter().zip(rhs.as_slice()) {
            prop_assert!((x - y).abs() <= 1e-5 * (1.0 + x.abs()));
        }
    }
}
