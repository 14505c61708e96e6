// SPDX-License-Identifier: MIT OR Apache-2.0

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod support;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use saif::bundle::{self, BundleError, MAGIC, VERSION};
use saif::saif_core::eval::{accuracies, aggregate_ballot, Ballot, Grade};
use saif::saif_core::pairset::{z_neg_name, z_pos_name, PairManifestEntry, PairRecord, PositionMode};
use saif::saif_core::sae::{LatentVector, Nonlinearity};
use saif::saif_core::select::{feature_stats, select_top_k, sensitivity_scores, FeatureSet, FeatureStats, MIN_SD};
use saif::saif_core::steer::{apply_steering, classic_steer, make_steering_set, steering_strength};
use saif::saif_core::tensor::{DenseVector, TensorBundle};
use saif::saif_core::toy::{generate, PlantConfig, SyntheticDataset};
use saif::parallel::encode_pairs_par;
use support::{random_bundle, random_sae, random_vector, rng};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);
type CorruptCase = (&'static str, Vec<u8>, fn(&BundleError) -> bool);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn toy(seed: u64, d: usize, m: usize, n_planted: usize, n_pairs: usize) -> SyntheticDataset {
    let config = PlantConfig {
        seed,
        d,
        m,
        planted_latents: PlantConfig::spread_planted(seed, m, n_planted),
        p_on: 0.9,
        p_spurious: 0.05,
        strength_mean: 3.0,
        strength_sd: 1.0,
    };
    generate(&config, n_pairs).expect("valid toy config")
}

/// Round-trip the toy pairs through a manifest, an activation bundle and the
/// SAE encoder, as the CLI does.
fn reencode(ds: &SyntheticDataset) -> Vec<PairRecord> {
    let mut acts = TensorBundle::new();
    let mut manifest = Vec::new();
    for p in &ds.pairs {
        acts.insert(z_pos_name(p.pair_id), p.z_pos.clone().unwrap());
        acts.insert(z_neg_name(p.pair_id), p.z_neg.clone().unwrap());
        manifest.push(PairManifestEntry {
            pair_id: p.pair_id,
            content_text: String::new(),
            variant_index: 0,
            position_mode: PositionMode::PostInstruction,
            positive_prompt: String::new(),
            negative_prompt: String::new(),
        });
    }
    encode_pairs_par(&manifest, &acts, &ds.params).unwrap()
}

fn sensitivity_oracle() -> Outcome {
    let start = Instant::now();
    let mut compared = 0usize;
    for seed in 0..10 {
        let ds = toy(1000 + seed, 500, 512, 8, 200);
        let pairs = reencode(&ds);
        let table = sensitivity_scores(&pairs).map_err(|e| e.to_string())?;
        for j in 0..512 {
            let mut naive = 0u32;
            for p in &ds.pairs {
                if p.h_pos.as_slice()[j] > 0.0 && p.h_neg.as_slice()[j] == 0.0 {
                    naive += 1;
                }
            }
            check(table.flip_counts()[j] == naive, || {
                format!("seed {seed} latent {j}: {} vs oracle {naive}", table.flip_counts()[j])
            })?;
            check(ds.flip_counts[j] == naive, || format!("seed {seed} latent {j}: sampled count differs"))?;
            check(table.c_score(j) == naive as f64 / 200.0, || format!("seed {seed} latent {j}: C differs"))?;
            compared += 1;
        }
    }
    let took = start.elapsed();
    check(took < Duration::from_secs(5), || format!("took {took:?}"))?;
    Ok(format!("{compared} counts equal, {took:.2?}"))
}

fn planted_recovery() -> Outcome {
    let start = Instant::now();
    let mut full = 0;
    let mut detail = Vec::new();
    for seed in 0..10 {
        let ds = toy(seed, 1000, 1024, 8, 800);
        let table = sensitivity_scores(&ds.pairs).map_err(|e| e.to_string())?;
        let set = select_top_k(&table, &ds.params, 8).map_err(|e| e.to_string())?;
        let planted: BTreeSet<_> = ds.ground_truth.planted_latents.iter().copied().collect();
        let hit = set.ranked_latents.iter().filter(|j| planted.contains(j)).count();
        if hit == 8 {
            full += 1;
        }
        detail.push(hit.to_string());
    }
    let took = start.elapsed();
    check(full >= 9, || format!("{full}/10 seeds fully recovered (hits {})", detail.join(",")))?;
    check(took < Duration::from_secs(10), || format!("took {took:?}"))?;
    Ok(format!("{full}/10 seeds recover all 8, {took:.2?}"))
}

fn k_behavior() -> Outcome {
    let mut scores = Vec::new();
    let mut extra = Vec::new();
    for seed in 0..10 {
        let ds = toy(500 + seed, 1000, 1024, 15, 800);
        let planted: BTreeSet<_> = ds.ground_truth.planted_latents.iter().copied().collect();
        let table = sensitivity_scores(&ds.pairs).map_err(|e| e.to_string())?;
        let ranking = table.ranking();
        let hits = |k: usize| ranking[..k].iter().filter(|j| planted.contains(j)).count();
        let score15 = hits(15) as f64 / 15.0;
        let non_planted_16_30 = ranking[15..30].iter().filter(|j| !planted.contains(j)).count();
        let precision15 = hits(15) as f64 / 15.0;
        let precision30 = hits(30) as f64 / 30.0;
        check(score15 >= 0.93, || format!("seed {seed}: score at k=15 is {score15:.3}"))?;
        check(non_planted_16_30 >= 5, || {
            format!("seed {seed}: only {non_planted_16_30} non-planted latents in ranks 16-30")
        })?;
        check(precision30 < precision15, || {
            format!("seed {seed}: precision {precision30:.3} at k=30 vs {precision15:.3} at k=15")
        })?;
        scores.push(score15);
        extra.push(non_planted_16_30);
    }
    let min = scores.iter().copied().fold(1.0, f64::min);
    Ok(format!(
        "min score@15 {min:.3}, non-planted in ranks 16-30 >= {}",
        extra.iter().min().unwrap()
    ))
}

fn sparsity() -> Outcome {
    let mut r = rng(7);
    let (d, m, k_sae) = (16, 64, 5);
    let theta: Vec<f32> = (0..m).map(|_| r.random_range(0.0..0.8)).collect();
    let jump = Nonlinearity::JumpRelu {
        theta: DenseVector::new(theta.clone()).unwrap(),
    };
    let cases = [Nonlinearity::Relu, Nonlinearity::TopKRelu { k: k_sae }, jump];
    let mut counts = Vec::new();
    for nl in cases {
        let sae = random_sae(&mut r, d, m, nl.clone());
        let mut active = 0usize;
        for i in 0..1000 {
            let z = random_vector(&mut r, d);
            let a = sae.encode(&z).map_err(|e| e.to_string())?;
            let v = a.as_slice();
            check(v.iter().all(|&x| x >= 0.0 && x.is_finite()), || {
                format!("{}: negative output on input {i}", nl.name())
            })?;
            match &nl {
                Nonlinearity::TopKRelu { k } => {
                    check(a.nonzero_count() <= *k, || {
                        format!("topk_relu: {} nonzeros on input {i}", a.nonzero_count())
                    })?;
                }
                Nonlinearity::JumpRelu { .. } => {
                    for (j, &x) in v.iter().enumerate() {
                        check(x == 0.0 || x > theta[j], || {
                            format!("jump_relu: latent {j} = {x} inside (0, {}]", theta[j])
                        })?;
                    }
                }
                Nonlinearity::Relu => {}
            }
            active += a.nonzero_count();
        }
        counts.push(format!("{} {:.1} active/encode", nl.name(), active as f64 / 1000.0));
    }
    Ok(counts.join(", "))
}

fn steering_algebra() -> Outcome {
    let mut r = rng(11);
    let (d, m) = (32, 64);
    let sae = random_sae(&mut r, d, m, Nonlinearity::Relu);
    let mut worst = 0.0f32;
    for i in 0..1000 {
        let j = r.random_range(0..m);
        let mu: f64 = r.random_range(0.0..4.0);
        let sd: f64 = r.random_range(0.0..2.0);
        let beta: f32 = r.random_range(-1.0..1.0);
        let stats = FeatureStats {
            latent_index: j,
            nonzero_values: Vec::new(),
            mu,
            sd,
            p_act: 0.5,
            stability: 1.0 / sd.max(MIN_SD),
        };
        check(steering_strength(&stats, 0.0) == mu as f32, || format!("case {i}: beta=0 alpha != mu"))?;
        let set = FeatureSet {
            ranked_latents: vec![j],
            c_scores: vec![1.0],
            decoder_rows: vec![sae.decoder_row(j).unwrap()],
            stats: vec![stats.clone()],
        };
        let (_, composite) = make_steering_set(&set, beta, "t", 0).map_err(|e| e.to_string())?;
        let z = random_vector(&mut r, d);
        let composite_out = apply_steering(&z, &composite).unwrap();
        let classic = classic_steer(&z, &sae, j, steering_strength(&stats, beta)).unwrap();
        let same_bits = composite_out
            .as_slice()
            .iter()
            .zip(classic.as_slice())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        check(same_bits, || format!("case {i}: composite and classic steering differ"))?;
        let back = apply_steering(&composite_out, &composite.negate()).unwrap();
        for (a, b) in back.as_slice().iter().zip(z.as_slice()) {
            worst = worst.max((a - b).abs());
        }
    }
    check(worst <= 1e-5, || format!("inverse error {worst:e}"))?;
    Ok(format!("1000 bit-equal, beta=0 exact, max inverse error {worst:e}"))
}

/// Independent aggregation: tally, then scan grades from lowest to highest
/// and take the first that reaches the maximum tally.
fn ballot_oracle(votes: &[Grade; 5]) -> Grade {
    let tally = |g: Grade| votes.iter().filter(|&&v| v == g).count();
    let max = [Grade::A, Grade::B, Grade::C].into_iter().map(tally).max().unwrap();
    *[Grade::C, Grade::B, Grade::A].iter().find(|&&g| tally(g) == max).unwrap()
}

fn ballot_truth_table() -> Outcome {
    let grades = [Grade::A, Grade::B, Grade::C];
    let mut n = 0;
    for code in 0..243usize {
        let mut votes = [Grade::A; 5];
        let mut c = code;
        for v in votes.iter_mut() {
            *v = grades[c % 3];
            c /= 3;
        }
        let got = aggregate_ballot(&Ballot::new(&votes).unwrap());
        let want = ballot_oracle(&votes);
        check(got == want, || format!("{votes:?}: {got} vs oracle {want}"))?;
        n += 1;
    }
    use Grade::*;
    let split = aggregate_ballot(&Ballot::new(&[A, A, B, B, C]).unwrap());
    check(split == B, || format!("[A,A,B,B,C] gave {split}"))?;
    Ok(format!("{n} ballots match, [A,A,B,B,C] -> B"))
}

fn accuracy_ordering() -> Outcome {
    let mut r = rng(13);
    for i in 0..1000 {
        let n = r.random_range(1..60);
        let grades: Vec<Grade> = (0..n).map(|_| [Grade::A, Grade::B, Grade::C][r.random_range(0..3)]).collect();
        let rep = accuracies(&grades, "x").map_err(|e| e.to_string())?;
        check(rep.strict_acc <= rep.loose_acc, || format!("case {i}: strict > loose"))?;
        check(rep.grade_counts.total() == n && rep.n_items == n, || format!("case {i}: counts do not sum to n"))?;
        let a = grades.iter().filter(|&&g| g == Grade::A).count();
        let b = grades.iter().filter(|&&g| g == Grade::B).count();
        check(rep.strict_acc == a as f64 / n as f64 && rep.loose_acc == (a + b) as f64 / n as f64, || {
            format!("case {i}: accuracy values differ from counts")
        })?;
    }
    Ok("1000 grade lists ordered, counts sum to n".into())
}

fn raw_bundle(header: &str, payload: &[u8]) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(payload);
    out
}

fn format_round_trip() -> Outcome {
    let mut r = rng(17);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for i in 0..100 {
        let b = random_bundle(&mut r);
        let bytes = bundle::to_bytes(&b);
        let back = bundle::from_bytes(&bytes).map_err(|e| format!("bundle {i}: {e}"))?;
        check(bundle::to_bytes(&back) == bytes, || format!("bundle {i}: bytes differ after round trip"))?;
        let path = dir.path().join(format!("b{i}.saif"));
        bundle::save_bundle(&b, &path).map_err(|e| e.to_string())?;
        check(std::fs::read(&path).unwrap() == bytes, || format!("bundle {i}: file bytes differ"))?;
        let loaded = bundle::load_bundle(&path).map_err(|e| e.to_string())?;
        check(bundle::to_bytes(&loaded) == bytes, || format!("bundle {i}: reload differs"))?;
    }

    let mut good = TensorBundle::new();
    good.insert("a", DenseVector::new(vec![1.0, 2.0]).unwrap());
    good.insert("b", DenseVector::new(vec![3.0]).unwrap());
    let ok = bundle::to_bytes(&good);
    let mut bad_version = ok.clone();
    bad_version[4] = 9;
    let mut trailing = ok.clone();
    trailing.push(0);
    let e = |dtype: &str, length: u64, offset: u64| {
        format!(r#"{{"a":{{"dtype":"{dtype}","length":{length},"offset":{offset},"shape":[2]}}}}"#)
    };
    let overlap = r#"{"a":{"dtype":"f32","length":8,"offset":0,"shape":[2]},"b":{"dtype":"f32","length":4,"offset":4,"shape":[1]}}"#;
    let cases: Vec<CorruptCase> = vec![
        ("bad magic", b"SAIX".iter().chain(&ok[4..]).copied().collect(), |e| matches!(e, BundleError::BadMagic)),
        ("empty file", Vec::new(), |e| matches!(e, BundleError::BadMagic)),
        ("bad version", bad_version, |e| matches!(e, BundleError::UnsupportedVersion(9))),
        ("truncated header", ok[..20].to_vec(), |e| matches!(e, BundleError::TruncatedHeader)),
        ("truncated payload", ok[..ok.len() - 1].to_vec(), |e| matches!(e, BundleError::TruncatedPayload)),
        ("trailing bytes", trailing, |e| matches!(e, BundleError::TrailingBytes(1))),
        ("invalid json", raw_bundle("{not json", &[]), |e| matches!(e, BundleError::BadHeader(_))),
        ("unknown dtype", raw_bundle(&e("f16", 8, 0), &[0; 8]), |e| matches!(e, BundleError::UnknownDtype { .. })),
        ("length mismatch", raw_bundle(&e("f32", 12, 0), &[0; 12]), |e| matches!(e, BundleError::LengthMismatch { .. })),
        ("overlapping offsets", raw_bundle(overlap, &[0; 12]), |e| matches!(e, BundleError::OverlappingOffsets { .. })),
        ("non-finite value", raw_bundle(&e("f32", 8, 0), &[0, 0, 0xc0, 0x7f, 0, 0, 0, 0]), |e| {
            matches!(e, BundleError::Tensor { .. })
        }),
    ];
    for (what, bytes, expected) in &cases {
        match bundle::from_bytes(bytes) {
            Ok(_) => return Err(format!("{what}: accepted")),
            Err(err) => check(expected(&err), || format!("{what}: wrong error `{err}`"))?,
        }
        let path = dir.path().join(format!("{}.saif", what.replace(' ', "_")));
        std::fs::write(&path, bytes).unwrap();
        let err = saif::files::load_bundle(&path).expect_err("corrupt bundle loads");
        check(err.category() == "format" && err.exit_code() == 4, || {
            format!("{what}: categorized as {}", err.category())
        })?;
    }
    let missing = saif::files::load_bundle(&dir.path().join("absent.saif")).expect_err("missing file loads");
    check(missing.category() == "missing-input", || "missing file not categorized".into())?;
    Ok(format!("100 bundles byte-identical, {} corrupt cases categorized", cases.len() + 1))
}

fn direct_stats(values: &[f32], n: usize) -> (f64, f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let k = values.len() as f64;
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / k;
    let var = values.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / k;
    (mean, var.sqrt(), k / n as f64)
}

fn metrics() -> Outcome {
    let mut r = rng(19);
    for i in 0..500 {
        let n = r.random_range(1..50);
        let mut pairs = Vec::new();
        let mut a_set = Vec::new();
        for p in 0..n {
            let pos = if r.random_bool(0.7) { r.random_range(0.01f32..5.0) } else { 0.0 };
            let neg = if r.random_bool(0.3) { r.random_range(0.01f32..5.0) } else { 0.0 };
            if pos > 0.0 && neg == 0.0 {
                a_set.push(pos);
            }
            let h_pos = LatentVector::new(vec![pos, 1.0]).unwrap();
            let h_neg = LatentVector::new(vec![neg, 0.0]).unwrap();
            pairs.push(PairRecord::new(p, 0, h_pos, h_neg).unwrap());
        }
        let s = feature_stats(&pairs, 0).map_err(|e| e.to_string())?;
        let (mu, sd, p) = direct_stats(&a_set, n);
        let omega = 1.0 / sd.max(1e-8);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * b.abs().max(1.0);
        check(close(s.mu, mu) && close(s.sd, sd) && close(s.p_act, p), || {
            format!("multiset {i}: ({}, {}, {}) vs ({mu}, {sd}, {p})", s.mu, s.sd, s.p_act)
        })?;
        check(close(s.stability, omega), || format!("multiset {i}: stability {} vs {omega}", s.stability))?;
    }
    let empty = FeatureStats::from_values(3, Vec::new(), 10);
    check(
        empty.mu == 0.0 && empty.sd == 0.0 && empty.p_act == 0.0 && empty.stability == 1e8,
        || format!("empty set gave {empty:?}"),
    )?;
    let single = FeatureStats::from_values(3, vec![2.5], 10);
    check(
        single.mu == 2.5 && single.sd == 0.0 && single.p_act == 0.1 && single.stability == 1e8,
        || format!("singleton gave {single:?}"),
    )?;
    Ok("500 multisets within 1e-6, empty and singleton exact".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("sensitivity oracle equivalence", sensitivity_oracle),
        ("planted-feature recovery", planted_recovery),
        ("k-behavior", k_behavior),
        ("sparsity invariants", sparsity),
        ("steering algebra", steering_algebra),
        ("ballot truth table", ballot_truth_table),
        ("accuracy ordering", accuracy_ordering),
        ("format round-trip", format_round_trip),
        ("metrics formulas", metrics),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
