//! Brute-force ground truth for small instances and synthetic data.
//!
//! Everything in this module is deliberately written as directly as
//! possible — exhaustive enumeration, per-sequence gap-run counting,
//! term-by-term density sums — so it can serve as an independent check on
//! the production implementations in [`crate::gapmodel`], [`crate::model`]
//! and [`crate::sampler`]. It ships in the library (not just in test code)
//! because the CLI exposes fixture runs and normalizer cross-checks.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::domain::{Configuration, GapParams, Matching, TransformState};
use crate::error::{Error, Result};
use crate::pam::SubstitutionChain;

/// Hard cap on the number of matchings [`enumerate_matchings`] will produce.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Number of monotone matchings of an `m`-point and an `n`-point
/// configuration: Σ_L C(m, L)·C(n, L). Each choice of equal-size ordered
/// index subsets pairs up in exactly one monotone way.
pub fn matching_count(m: usize, n: usize) -> u128 {
    (0..=m.min(n) as u64)
        .map(|l| binomial(m as u64, l) * binomial(n as u64, l))
        .sum()
}

/// Every monotone matching exactly once, including the empty one, in
/// lexicographic order of the pair list (shorter prefixes first).
pub fn enumerate_matchings(m: usize, n: usize) -> Result<Vec<Matching>> {
    let count = matching_count(m, n);
    if count > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge {
            m,
            n,
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut stack: Vec<(u32, u32)> = Vec::new();
    fn recurse(
        m: usize,
        n: usize,
        next_j: u32,
        next_k: u32,
        stack: &mut Vec<(u32, u32)>,
        out: &mut Vec<Matching>,
    ) {
        out.push(Matching::new(stack.clone(), m, n).expect("construction is monotone"));
        for j in next_j..=m as u32 {
            for k in next_k..=n as u32 {
                stack.push((j, k));
                recurse(m, n, j + 1, k + 1, stack, out);
                stack.pop();
            }
        }
    }
    recurse(m, n, 1, 1, &mut stack, &mut out);
    debug_assert_eq!(out.len() as u128, count);
    Ok(out)
}

/// Gap penalty by direct run counting: scan each sequence for maximal runs
/// of unmatched positions (terminal runs included). Independent of the
/// sentinel/f(r) arithmetic used by the production code.
pub fn penalty_by_run_counting(mt: &Matching, gp: &GapParams) -> f64 {
    let mut openings = 0u64;
    let mut extensions = 0u64;
    let mut count_side = |len: usize, matched_idx: Vec<bool>| {
        let mut run = 0usize;
        for flag in matched_idx
            .iter()
            .copied()
            .map(Some)
            .chain(std::iter::once(None))
        {
            if flag == Some(false) {
                run += 1;
            } else if run > 0 {
                openings += 1;
                extensions += (run - 1) as u64;
                run = 0;
            }
        }
        let _ = len;
    };
    let mut x_matched = vec![false; mt.m()];
    let mut y_matched = vec![false; mt.n()];
    for &(j, k) in mt.pairs() {
        x_matched[j as usize - 1] = true;
        y_matched[k as usize - 1] = true;
    }
    count_side(mt.m(), x_matched);
    count_side(mt.n(), y_matched);
    gp.g * openings as f64 + gp.h * extensions as f64
}

/// Posterior over matchings with the registration parameters held fixed,
/// by direct summation of the unnormalized density over the enumeration.
pub struct ExactPosterior {
    entries: Vec<(Matching, f64)>,
}

impl ExactPosterior {
    pub fn entries(&self) -> &[(Matching, f64)] {
        &self.entries
    }

    /// Marginal probability of each (j, k) pair.
    pub fn pair_marginals(&self) -> std::collections::HashMap<(u32, u32), f64> {
        let mut probs = std::collections::HashMap::new();
        for (mt, p) in &self.entries {
            for &pair in mt.pairs() {
                *probs.entry(pair).or_insert(0.0) += p;
            }
        }
        probs
    }

    /// Distribution of the number of matches L.
    pub fn l_distribution(&self) -> Vec<f64> {
        let max_l = self
            .entries
            .iter()
            .map(|(mt, _)| mt.len())
            .max()
            .unwrap_or(0);
        let mut dist = vec![0.0; max_l + 1];
        for (mt, p) in &self.entries {
            dist[mt.len()] += p;
        }
        dist
    }
}

/// Enumerates all matchings and normalizes `exp{-u(M)}·v^L·Π φ(·)` directly.
pub fn exact_posterior_over_m(
    x: &Configuration,
    y: &Configuration,
    t: &TransformState,
    gp: &GapParams,
    v: f64,
) -> Result<ExactPosterior> {
    let matchings = enumerate_matchings(x.len(), y.len())?;
    let sigma = t.sigma();
    let scale2 = 2.0 * sigma * sigma; // (σ√2)²
    let log_norm = -1.5 * (std::f64::consts::TAU * scale2).ln();
    let mut logw = Vec::with_capacity(matchings.len());
    for mt in &matchings {
        let mut lw = -penalty_by_run_counting(mt, gp) + mt.len() as f64 * v.ln();
        for &(j, k) in mt.pairs() {
            let delta = x.point(j) - t.apply(y.point(k));
            lw += log_norm - delta.norm_squared() / (2.0 * scale2);
        }
        logw.push(lw);
    }
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = logw.iter().map(|lw| (lw - max).exp()).sum();
    let entries = matchings
        .into_iter()
        .zip(logw)
        .map(|(mt, lw)| (mt, (lw - max).exp() / total))
        .collect();
    Ok(ExactPosterior { entries })
}

// ---------------------------------------------------------------------------
// Synthetic instances
// ---------------------------------------------------------------------------

/// A generated alignment problem with known truth.
#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub x: Configuration,
    pub y: Configuration,
    pub truth: Matching,
    pub truth_transform: TransformState,
    pub sigma_true: f64,
    pub box_side: f64,
}

fn sorted_index_subset(rng: &mut ChaCha20Rng, total: usize, take: usize) -> Vec<u32> {
    let mut idx: Vec<u32> = (1..=total as u32).collect();
    for i in 0..take {
        let j = rng.random_range(i..total);
        idx.swap(i, j);
    }
    let mut chosen = idx[..take].to_vec();
    chosen.sort_unstable();
    chosen
}

fn random_rotation(rng: &mut ChaCha20Rng) -> Matrix3<f64> {
    // Normalized Gaussian quaternion gives a uniform rotation.
    let q = Quaternion::new(
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
    );
    UnitQuaternion::from_quaternion(q)
        .to_rotation_matrix()
        .into_inner()
}

/// Generates a reproducible instance: `l_true` hidden points uniform in a
/// cube of the given side, observed on both configurations with
/// independent N(0, σ_true² I) noise (so matched differences have variance
/// 2σ_true², matching the likelihood's σ√2 scaling), plus unmatched decoys
/// uniform in the same cube. The truth matching is monotone by construction.
pub fn make_synthetic(
    m: usize,
    n: usize,
    l_true: usize,
    sigma_true: f64,
    box_side: f64,
    seed: u64,
) -> SyntheticInstance {
    assert!(l_true <= m.min(n), "l_true must be <= min(m, n)");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);

    let rot = random_rotation(&mut rng);
    let tau = Vector3::from_fn(|_, _| rng.random_range(-0.5 * box_side..0.5 * box_side));
    let truth_transform = TransformState::from_rotation(rot, tau, sigma_true.max(1e-6))
        .expect("random quaternion rotation is proper");

    let x_idx = sorted_index_subset(&mut rng, m, l_true);
    let y_idx = sorted_index_subset(&mut rng, n, l_true);

    let uniform_point =
        |rng: &mut ChaCha20Rng| Vector3::from_fn(|_, _| rng.random_range(0.0..box_side));
    let noise = |rng: &mut ChaCha20Rng| {
        Vector3::from_fn(|_, _| {
            let z: f64 = StandardNormal.sample(rng);
            z * sigma_true
        })
    };

    // y-space is the pre-image of μ-space under the truth transform:
    // A y + τ = μ + ε.
    let inv_rot = rot.transpose();
    let mut x_points = vec![Vector3::zeros(); m];
    let mut y_points = vec![Vector3::zeros(); n];
    let mut x_filled = vec![false; m];
    let mut y_filled = vec![false; n];
    for i in 0..l_true {
        let hidden = uniform_point(&mut rng);
        let ex = noise(&mut rng);
        let ey = noise(&mut rng);
        x_points[x_idx[i] as usize - 1] = hidden + ex;
        y_points[y_idx[i] as usize - 1] = inv_rot * (hidden + ey - tau);
        x_filled[x_idx[i] as usize - 1] = true;
        y_filled[y_idx[i] as usize - 1] = true;
    }
    for (p, filled) in x_points.iter_mut().zip(&x_filled) {
        if !filled {
            *p = uniform_point(&mut rng);
        }
    }
    for (p, filled) in y_points.iter_mut().zip(&y_filled) {
        if !filled {
            *p = inv_rot * (uniform_point(&mut rng) - tau);
        }
    }

    let pairs: Vec<(u32, u32)> = x_idx.into_iter().zip(y_idx).collect();
    let truth = Matching::new(pairs, m, n).expect("sorted subsets are monotone");
    let x = Configuration::new(x_points, None, format!("synthetic-x-{seed}")).unwrap();
    let y = Configuration::new(y_points, None, format!("synthetic-y-{seed}")).unwrap();
    SyntheticInstance {
        x,
        y,
        truth,
        truth_transform,
        sigma_true,
        box_side,
    }
}

/// Residue sequences consistent with a matching: matched pairs drawn from
/// the substitution chain at distance `l`, unmatched positions from the
/// abundance vector. Returns 1-based amino-acid codes.
pub fn synthetic_sequences(
    mt: &Matching,
    chain: &SubstitutionChain,
    l: u32,
    seed: u64,
) -> (Vec<u8>, Vec<u8>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let pl = crate::pam::chain_power(chain, l);
    let q = chain.abundances();
    let draw = |weights: &mut dyn Iterator<Item = f64>, u: f64| -> u8 {
        let mut acc = 0.0;
        for (i, w) in weights.enumerate() {
            acc += w;
            if u < acc {
                return i as u8 + 1;
            }
        }
        20
    };
    let mut sx = vec![0u8; mt.m()];
    let mut sy = vec![0u8; mt.n()];
    for &(j, k) in mt.pairs() {
        let a = draw(&mut (0..20).map(|i| q[i]), rng.random::<f64>());
        let b = draw(
            &mut (0..20).map(|i| pl[(a as usize - 1, i)]),
            rng.random::<f64>(),
        );
        sx[j as usize - 1] = a;
        sy[k as usize - 1] = b;
    }
    for s in sx.iter_mut().chain(sy.iter_mut()) {
        if *s == 0 {
            *s = draw(&mut (0..20).map(|i| q[i]), rng.random::<f64>());
        }
    }
    (sx, sy)
}

/// Bundled 4x4 fixture used by the sampler-vs-enumeration tests and the
/// CLI's `--oracle-fixture small4`.
pub fn fixture_small4() -> SyntheticInstance {
    make_synthetic(4, 4, 2, 0.8, 6.0, 0x5EED_0011)
}

/// Bundled recovery fixture: 30 true pairs among 40x50 points in a 30 Å box.
pub fn fixture_recovery() -> SyntheticInstance {
    make_synthetic(40, 50, 30, 0.3, 30.0, 0x5EED_0040)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
