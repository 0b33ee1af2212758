//! Browser demo bindings: three interactive views onto the alignment
//! machinery, each a pure function from parameters to a JSON payload the
//! page renders. Build with
//! `wasm-pack build crates/wasm --target web --out-dir www/pkg`.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use bayalign::domain::{GapMode, GapParams, Matching, ModelConfig};
use bayalign::gapmodel;
use bayalign::model::ModelTables;
use bayalign::oracle;
use bayalign::pam::{self, SubstitutionChain};
use bayalign::sampler::{self, InitState};
use bayalign::summary;

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).unwrap_or_else(|e| format!("{{\"error\":\"{e}\"}}"))
}

fn err_json(message: &str) -> String {
    to_json(&serde_json::json!({ "error": message }))
}

// ---------------------------------------------------------------------------
// 1. Posterior alignment of a synthetic instance
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct AlignDemo {
    m: usize,
    n: usize,
    truth: Vec<(u32, u32)>,
    /// Sparse marginal match probabilities (j, k, p).
    probs: Vec<(u32, u32, f64)>,
    /// Thinned traces.
    l_trace: Vec<u32>,
    rmsd_trace: Vec<f64>,
    median_l: f64,
    median_rmsd: Option<f64>,
    recovered: usize,
    acceptance_match: f64,
}

/// Generates a synthetic pair with known truth and samples the posterior
/// over matchings and the rigid transformation. All arguments are plain
/// numbers so sliders can drive them.
#[allow(clippy::too_many_arguments)]
pub fn run_synthetic_align(
    m: usize,
    n: usize,
    l_true: usize,
    sigma_true: f64,
    v: f64,
    g: f64,
    h: f64,
    sweeps: u32,
    seed: u64,
) -> String {
    if m == 0 || n == 0 || m > 60 || n > 60 {
        return err_json("m and n must lie in 1..=60");
    }
    if l_true > m.min(n) {
        return err_json("l_true must be at most min(m, n)");
    }
    if !(sigma_true > 0.0 && v > 0.0) || g < 0.0 || h < 0.0 {
        return err_json("sigma_true and v must be positive, penalties non-negative");
    }
    let sweeps = sweeps.clamp(200, 200_000) as u64;
    let inst = oracle::make_synthetic(m, n, l_true, sigma_true, 25.0, seed);
    let mut cfg = ModelConfig::defaults(seed ^ 0xD5);
    cfg.v = v;
    cfg.gap_mode = match GapParams::new(g, h) {
        Ok(gp) => GapMode::Fixed(gp),
        Err(e) => return err_json(&e.to_string()),
    };
    cfg.sweeps = sweeps;
    cfg.burn_in = sweeps / 4;
    cfg.thin = ((sweeps - cfg.burn_in) / 400).max(1);
    cfg.sigma_tau = 40.0;
    cfg.mu_tau = inst.x.centroid() - inst.y.centroid();
    cfg.temperatures = Some(ModelConfig::default_ladder());
    let tables = match ModelTables::build(&cfg, m, n, None) {
        Ok(t) => t,
        Err(e) => return err_json(&e.to_string()),
    };
    let out = match sampler::run_tempered(&inst.x, &inst.y, &cfg, &tables, &InitState::empty(m, n))
    {
        Ok(o) => o,
        Err(e) => return err_json(&e.to_string()),
    };
    let probs = match summary::marginal_probs(&out.samples) {
        Ok(p) => p,
        Err(e) => return err_json(&e.to_string()),
    };
    let run = match summary::summarize(&out.samples) {
        Ok(s) => s,
        Err(e) => return err_json(&e.to_string()),
    };
    let recovered = inst
        .truth
        .pairs()
        .iter()
        .filter(|&&(j, k)| probs.probability(j, k) > 0.5)
        .count();
    let demo = AlignDemo {
        m,
        n,
        truth: inst.truth.pairs().to_vec(),
        probs: probs
            .entries()
            .iter()
            .map(|&((j, k), p)| (j, k, p))
            .collect(),
        l_trace: out.samples.iter().map(|s| s.l).collect(),
        rmsd_trace: out.samples.iter().filter_map(|s| s.rmsd).collect(),
        median_l: run.l.median,
        median_rmsd: run.rmsd.map(|r| r.median),
        recovered,
        acceptance_match: out.acceptance.match_accepted as f64
            / out.acceptance.match_proposed.max(1) as f64,
    };
    to_json(&demo)
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn synthetic_align(
    m: usize,
    n: usize,
    l_true: usize,
    sigma_true: f64,
    v: f64,
    g: f64,
    h: f64,
    sweeps: u32,
    seed: u64,
) -> String {
    run_synthetic_align(m, n, l_true, sigma_true, v, g, h, sweeps, seed)
}

// ---------------------------------------------------------------------------
// 2. Exact gap-prior heatmap
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct GapPriorDemo {
    m: usize,
    n: usize,
    log_z: f64,
    expected_l: f64,
    matchings: usize,
    /// Dense m×n table of prior pair marginals, row-major.
    marginals: Vec<f64>,
    /// Prior distribution of L.
    l_dist: Vec<f64>,
}

/// Exact prior over monotone matchings by enumeration: per-pair marginal
/// probabilities and the distribution of the match count, as (g, h) move.
pub fn run_gap_prior_heatmap(m: usize, n: usize, g: f64, h: f64) -> String {
    if m == 0 || n == 0 || m > 8 || n > 8 {
        return err_json("exact enumeration is limited to m, n in 1..=8");
    }
    let gp = match GapParams::new(g, h) {
        Ok(gp) => gp,
        Err(e) => return err_json(&e.to_string()),
    };
    let matchings = match oracle::enumerate_matchings(m, n) {
        Ok(all) => all,
        Err(e) => return err_json(&e.to_string()),
    };
    let weights: Vec<f64> = matchings
        .iter()
        .map(|mt| (-gapmodel::total_penalty(mt, &gp).u).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let mut marginals = vec![0.0f64; m * n];
    let mut l_dist = vec![0.0f64; m.min(n) + 1];
    let mut expected_l = 0.0;
    for (mt, w) in matchings.iter().zip(&weights) {
        let p = w / total;
        l_dist[mt.len()] += p;
        expected_l += p * mt.len() as f64;
        for &(j, k) in mt.pairs() {
            marginals[(j as usize - 1) * n + (k as usize - 1)] += p;
        }
    }
    to_json(&GapPriorDemo {
        m,
        n,
        log_z: gapmodel::log_normalizer(m, n, &gp),
        expected_l,
        matchings: matchings.len(),
        marginals,
        l_dist,
    })
}

#[wasm_bindgen]
pub fn gap_prior_heatmap(m: usize, n: usize, g: f64, h: f64) -> String {
    run_gap_prior_heatmap(m, n, g, h)
}

// ---------------------------------------------------------------------------
// 3. PAM-distance posterior
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct PamDemo {
    distances: Vec<u32>,
    prior: Vec<f64>,
    posterior: Vec<f64>,
    true_l: u32,
    map_l: u32,
    n_matched: usize,
}

/// Simulates matched residue pairs at a chosen evolutionary distance and
/// shows the exact posterior over the PAM grid against the discretized
/// normal prior.
pub fn run_pam_posterior(
    true_l: u32,
    mu_l: f64,
    sigma_l: f64,
    n_matched: usize,
    seed: u64,
) -> String {
    let distances = ModelConfig::standard_pam_distances();
    if !distances.contains(&true_l) {
        return err_json("true_l must lie on the grid {40, 50, ..., 400}");
    }
    if sigma_l.is_nan() || sigma_l <= 0.0 || n_matched == 0 || n_matched > 500 {
        return err_json("sigma_l must be positive and n_matched in 1..=500");
    }
    let chain = SubstitutionChain::synthetic_test_chain();
    let mt = Matching::new(
        (1..=n_matched as u32).map(|i| (i, i)).collect(),
        n_matched,
        n_matched,
    )
    .expect("diagonal matching");
    let (sx, sy) = oracle::synthetic_sequences(&mt, &chain, true_l, seed);
    let weights = pam::pam_prior_weights(&distances, mu_l, sigma_l);
    let prior_total: f64 = weights.iter().sum();

    // Posterior over the grid is exactly computable: p_l · Π ψ^l.
    let mut log_post = Vec::with_capacity(distances.len());
    for (idx, &l) in distances.iter().enumerate() {
        let table = match pam::build_pam(&chain, l) {
            Ok(t) => t,
            Err(e) => return err_json(&e.to_string()),
        };
        let mut lp = weights[idx].ln();
        for &(j, k) in mt.pairs() {
            lp += table.log_psi(sx[j as usize - 1], sy[k as usize - 1]);
        }
        log_post.push(lp);
    }
    let max = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let post_total: f64 = log_post.iter().map(|lp| (lp - max).exp()).sum();
    let posterior: Vec<f64> = log_post
        .iter()
        .map(|lp| (lp - max).exp() / post_total)
        .collect();
    let map_idx = posterior
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    to_json(&PamDemo {
        prior: weights.iter().map(|w| w / prior_total).collect(),
        posterior,
        true_l,
        map_l: distances[map_idx],
        n_matched,
        distances,
    })
}

#[wasm_bindgen]
pub fn pam_posterior(true_l: u32, mu_l: f64, sigma_l: f64, n_matched: usize, seed: u64) -> String {
    run_pam_posterior(true_l, mu_l, sigma_l, n_matched, seed)
}

// ---------------------------------------------------------------------------
// Tests (host target)
// ---------------------------------------------------------------------------
