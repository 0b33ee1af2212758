//! Posterior post-processing: marginal match probabilities, ranking,
//! point estimation via linear assignment, interval summaries, and the
//! multi-run convergence report.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::PosteriorSample;

// ---------------------------------------------------------------------------
// Marginal match probabilities
// ---------------------------------------------------------------------------

/// Sparse table of empirical posterior match probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchProbTable {
    /// Sorted by (j, k); probabilities in (0, 1].
    entries: Vec<((u32, u32), f64)>,
    m: usize,
    n: usize,
}

impl MatchProbTable {
    pub fn new(mut entries: Vec<((u32, u32), f64)>, m: usize, n: usize) -> Result<Self> {
        entries.sort_unstable_by_key(|e| e.0);
        entries.retain(|e| e.1 > 0.0);
        let mut row_sums = vec![0.0f64; m + 1];
        let mut col_sums = vec![0.0f64; n + 1];
        for &((j, k), p) in &entries {
            if j < 1 || j as usize > m || k < 1 || k as usize > n {
                return Err(Error::InvalidConfiguration(format!(
                    "match probability index ({j}, {k}) outside ({m}, {n})"
                )));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfiguration(format!(
                    "probability {p} for pair ({j}, {k}) outside [0, 1]"
                )));
            }
            row_sums[j as usize] += p;
            col_sums[k as usize] += p;
        }
        // One match per residue per sample, so empirical sums cannot
        // exceed one beyond accumulated rounding.
        let tol = 1e-9;
        if row_sums
            .iter()
            .chain(col_sums.iter())
            .any(|&s| s > 1.0 + tol)
        {
            return Err(Error::InvalidConfiguration(
                "match probabilities violate the one-match-per-residue identity".into(),
            ));
        }
        Ok(Self { entries, m, n })
    }

    pub fn entries(&self) -> &[((u32, u32), f64)] {
        &self.entries
    }

    pub fn probability(&self, j: u32, k: u32) -> f64 {
        self.entries
            .binary_search_by_key(&(j, k), |e| e.0)
            .map(|idx| self.entries[idx].1)
            .unwrap_or(0.0)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Empirical frequency of each matched pair across the sample stream.
pub fn marginal_probs(samples: &[PosteriorSample]) -> Result<MatchProbTable> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let m = samples[0].matching.m();
    let n = samples[0].matching.n();
    let mut counts: std::collections::HashMap<(u32, u32), u64> = std::collections::HashMap::new();
    for s in samples {
        for &pair in s.matching.pairs() {
            *counts.entry(pair).or_insert(0) += 1;
        }
    }
    let total = samples.len() as f64;
    let entries = counts
        .into_iter()
        .map(|(pair, c)| (pair, c as f64 / total))
        .collect();
    MatchProbTable::new(entries, m, n)
}

// ---------------------------------------------------------------------------
// Ranking
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedMatch {
    pub j: u32,
    pub k: u32,
    pub p: f64,
}

/// Table entries sorted by descending probability (ties broken by (j, k)),
/// plus the 1-based rank of the first duplicated match — the first entry
/// whose j or k already appeared at a better rank.
pub fn rank_matches(table: &MatchProbTable) -> (Vec<RankedMatch>, Option<usize>) {
    let mut ranked: Vec<RankedMatch> = table
        .entries()
        .iter()
        .map(|&((j, k), p)| RankedMatch { j, k, p })
        .collect();
    ranked.sort_by(|a, b| {
        b.p.total_cmp(&a.p)
            .then_with(|| (a.j, a.k).cmp(&(b.j, b.k)))
    });
    let mut seen_j = std::collections::HashSet::new();
    let mut seen_k = std::collections::HashSet::new();
    let mut first_dup = None;
    for (idx, rm) in ranked.iter().enumerate() {
        if !seen_j.insert(rm.j) || !seen_k.insert(rm.k) {
            first_dup = Some(idx + 1);
            break;
        }
    }
    (ranked, first_dup)
}

// ---------------------------------------------------------------------------
// Linear assignment point estimate
// ---------------------------------------------------------------------------

/// Exact dense solver for the rectangular assignment problem
/// (shortest-augmenting-path with dual potentials, O(n³)). Returns, for
/// each row, the assigned column. Requires nr ≤ nc and finite costs.
fn solve_assignment(cost: &[f64], nr: usize, nc: usize) -> Vec<usize> {
    assert!(nr <= nc);
    const NONE: usize = usize::MAX;
    let mut u = vec![0.0f64; nr];
    let mut v = vec![0.0f64; nc];
    let mut row4col = vec![NONE; nc];
    let mut col4row = vec![NONE; nr];

    for cur_row in 0..nr {
        let mut shortest = vec![f64::INFINITY; nc];
        let mut path = vec![NONE; nc];
        let mut sr = vec![false; nr];
        let mut sc = vec![false; nc];
        let mut min_val = 0.0f64;
        let mut i = cur_row;
        let sink = loop {
            sr[i] = true;
            let mut lowest = f64::INFINITY;
            let mut index = NONE;
            for j in 0..nc {
                if sc[j] {
                    continue;
                }
                let r = min_val + cost[i * nc + j] - u[i] - v[j];
                if r < shortest[j] {
                    shortest[j] = r;
                    path[j] = i;
                }
                if shortest[j] < lowest
                    || (shortest[j] == lowest
                        && row4col[j] == NONE
                        && index != NONE
                        && row4col[index] != NONE)
                {
                    lowest = shortest[j];
                    index = j;
                }
            }
            min_val = lowest;
            assert!(min_val.is_finite(), "assignment problem is infeasible");
            if row4col[index] == NONE {
                break index;
            }
            i = row4col[index];
            sc[index] = true;
        };
        u[cur_row] += min_val;
        for r in 0..nr {
            if sr[r] && r != cur_row {
                u[r] += min_val - shortest[col4row[r]];
            }
        }
        for j in 0..nc {
            if sc[j] {
                v[j] -= min_val - shortest[j];
            }
        }
        let mut j = sink;
        loop {
            let r = path[j];
            row4col[j] = r;
            std::mem::swap(&mut col4row[r], &mut j);
            if r == cur_row {
                break;
            }
        }
    }
    col4row
}

/// Decision-theoretic point estimate with cost ratio K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate {
    /// Selected pairs, sorted by j. One-to-one but not necessarily
    /// sequence-order preserving.
    pub pairs: Vec<(u32, u32)>,
    /// Whether the selection happens to satisfy the order constraint.
    pub monotone: bool,
    /// Σ (p_jk - K) over the selected pairs.
    pub objective: f64,
}

/// Minimizes the expected loss by maximizing `Σ (p_jk - K)` over
/// one-to-one assignments; pairs with p ≤ K are never selected. Larger K
/// gives fewer matches. The optimum need not be monotone even though the
/// posterior support is; violations are reported, not repaired.
pub fn point_estimate(table: &MatchProbTable, k_cost: f64) -> Result<PointEstimate> {
    if !(k_cost > 0.0 && k_cost < 1.0) {
        return Err(Error::InvalidConfiguration(format!(
            "K must lie in (0, 1), got {k_cost}"
        )));
    }
    let (m, n) = (table.m(), table.n());
    // Pad to (m+n) x (m+n): dummy columns let any row go unassigned at
    // zero cost, dummy rows absorb unused real columns.
    let dim = m + n;
    let mut cost = vec![0.0f64; dim * dim];
    for &((j, k), p) in table.entries() {
        let reward = p - k_cost;
        if reward > 0.0 {
            cost[(j as usize - 1) * dim + (k as usize - 1)] = -reward;
        }
    }
    let col4row = solve_assignment(&cost, dim, dim);
    let mut pairs = Vec::new();
    let mut objective = 0.0;
    for (row, &col) in col4row.iter().enumerate().take(m) {
        if col < n {
            let (j, k) = (row as u32 + 1, col as u32 + 1);
            let reward = table.probability(j, k) - k_cost;
            if reward > 0.0 {
                pairs.push((j, k));
                objective += reward;
            }
        }
    }
    pairs.sort_unstable();
    let monotone = pairs.windows(2).all(|w| w[0].1 < w[1].1);
    Ok(PointEstimate {
        pairs,
        monotone,
        objective,
    })
}

// ---------------------------------------------------------------------------
// Run summaries
// ---------------------------------------------------------------------------

/// Median, mean and central 95% interval of one scalar trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarSummary {
    pub median: f64,
    pub mean: f64,
    pub lo95: f64,
    pub hi95: f64,
}

/// Empirical quantile with linear interpolation between order statistics.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

fn summarize_scalar(values: &[f64]) -> Option<ScalarSummary> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(ScalarSummary {
        median: quantile(&sorted, 0.5),
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        lo95: quantile(&sorted, 0.025),
        hi95: quantile(&sorted, 0.975),
    })
}

/// Posterior summaries of one run's thinned sample stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n_samples: usize,
    pub l: ScalarSummary,
    /// Absent when every sample had an empty matching.
    pub rmsd: Option<ScalarSummary>,
    pub log_post: ScalarSummary,
    pub log_post_min: f64,
    pub s: ScalarSummary,
    pub ext: ScalarSummary,
    pub g: Option<ScalarSummary>,
    pub h: Option<ScalarSummary>,
    pub pam_l: Option<ScalarSummary>,
}

pub fn summarize(samples: &[PosteriorSample]) -> Result<RunSummary> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let collect = |f: &dyn Fn(&PosteriorSample) -> Option<f64>| -> Vec<f64> {
        samples.iter().filter_map(f).collect()
    };
    let l = summarize_scalar(&collect(&|s| Some(s.l as f64))).expect("non-empty");
    let rmsd = summarize_scalar(&collect(&|s| s.rmsd));
    let log_posts = collect(&|s| Some(s.log_post));
    let log_post = summarize_scalar(&log_posts).expect("non-empty");
    let log_post_min = log_posts.iter().copied().fold(f64::INFINITY, f64::min);
    let s_sum = summarize_scalar(&collect(&|s| Some(s.s as f64))).expect("non-empty");
    let ext = summarize_scalar(&collect(&|s| Some(s.ext as f64))).expect("non-empty");
    let g = summarize_scalar(&collect(&|s| s.g));
    let h = summarize_scalar(&collect(&|s| s.h));
    let pam_l = summarize_scalar(&collect(&|s| s.pam_l.map(|l| l as f64)));
    Ok(RunSummary {
        n_samples: samples.len(),
        l,
        rmsd,
        log_post,
        log_post_min,
        s: s_sum,
        ext,
        g,
        h,
        pam_l,
    })
}

/// Multi-run comparison: a run whose median log-posterior falls more than
/// `threshold` below the best is flagged as stuck in a subsidiary mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub best_median: f64,
    pub threshold: f64,
    pub medians: Vec<f64>,
    pub converged: Vec<bool>,
}

pub fn compare_runs(summaries: &[RunSummary], threshold: f64) -> Result<ConvergenceReport> {
    if summaries.is_empty() {
        return Err(Error::EmptySamples);
    }
    let medians: Vec<f64> = summaries.iter().map(|s| s.log_post.median).collect();
    let best = medians.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let converged = medians.iter().map(|&m| best - m <= threshold).collect();
    Ok(ConvergenceReport {
        best_median: best,
        threshold,
        medians,
        converged,
    })
}

// ---------------------------------------------------------------------------
// Heatmap export
// ---------------------------------------------------------------------------

/// Writes (j, k, probability) triples to `sparse_path` and the dense m×n
/// probability matrix to `dense_path`; both plain CSV for external
/// plotting tools.
pub fn export_heatmap(
    table: &MatchProbTable,
    sparse_path: &std::path::Path,
    dense_path: &std::path::Path,
) -> Result<()> {
    use std::io::Write;
    let mut sparse = std::io::BufWriter::new(std::fs::File::create(sparse_path)?);
    writeln!(sparse, "j,k,p")?;
    for &((j, k), p) in table.entries() {
        writeln!(sparse, "{j},{k},{p}")?;
    }
    sparse.flush()?;

    let mut dense = std::io::BufWriter::new(std::fs::File::create(dense_path)?);
    for j in 1..=table.m() as u32 {
        let row: Vec<String> = (1..=table.n() as u32)
            .map(|k| table.probability(j, k).to_string())
            .collect();
        writeln!(dense, "{}", row.join(","))?;
    }
    dense.flush()?;
    Ok(())
}

/// Re-reads a sparse heatmap CSV written by [`export_heatmap`].
pub fn parse_heatmap_sparse(path: &std::path::Path, m: usize, n: usize) -> Result<MatchProbTable> {
    let text = std::fs::read_to_string(path)?;
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.trim().is_empty() {
            continue;
        }
        let mut it = line.split(',');
        let parse_err = |msg: &str| Error::Parse {
            path: path.display().to_string(),
            line: lineno + 1,
            message: msg.into(),
        };
        let j: u32 = it
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_err("bad j index"))?;
        let k: u32 = it
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_err("bad k index"))?;
        let p: f64 = it
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| parse_err("bad probability"))?;
        entries.push(((j, k), p));
    }
    MatchProbTable::new(entries, m, n)
}

/// Re-reads a dense heatmap CSV written by [`export_heatmap`]; the shape
/// is implicit in the file.
pub fn parse_heatmap_dense(path: &std::path::Path) -> Result<MatchProbTable> {
    let text = std::fs::read_to_string(path)?;
    let mut entries = Vec::new();
    let mut n = 0usize;
    let mut m = 0usize;
    for (row, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        m = row + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if n == 0 {
            n = fields.len();
        } else if fields.len() != n {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: row + 1,
                message: format!("expected {n} columns, found {}", fields.len()),
            });
        }
        for (col, field) in fields.iter().enumerate() {
            let p: f64 = field.trim().parse().map_err(|_| Error::Parse {
                path: path.display().to_string(),
                line: row + 1,
                message: format!("bad probability {field:?}"),
            })?;
            if p > 0.0 {
                entries.push(((row as u32 + 1, col as u32 + 1), p));
            }
        }
    }
    MatchProbTable::new(entries, m, n)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Matching, TransformState};

    fn sample_with(pairs: Vec<(u32, u32)>, m: usize, n: usize) -> PosteriorSample {
        PosteriorSample {
            sweep: 0,
            log_post: 0.0,
            l: pairs.len() as u32,
            rmsd: None,
            s: 0,
            ext: 0,
            g: None,
            h: None,
            pam_l: None,
            matching: Matching::new(pairs, m, n).unwrap(),
            transform: TransformState::identity(),
        }
    }

    fn table(entries: Vec<((u32, u32), f64)>, m: usize, n: usize) -> MatchProbTable {
        MatchProbTable::new(entries, m, n).unwrap()
    }

    #[test]
    fn marginals_degenerate_chain_gives_zero_one() {
        let samples = vec![sample_with(vec![(1, 1), (2, 2)], 3, 3); 5];
        let t = marginal_probs(&samples).unwrap();
        assert_eq!(t.probability(1, 1), 1.0);
        assert_eq!(t.probability(2, 2), 1.0);
        assert_eq!(t.probability(3, 3), 0.0);
    }

    #[test]
    fn marginals_two_sample_disagreement_is_half() {
        let samples = vec![
            sample_with(vec![(1, 1)], 2, 2),
            sample_with(vec![(1, 2)], 2, 2),
        ];
        let t = marginal_probs(&samples).unwrap();
        assert_eq!(t.probability(1, 1), 0.5);
        assert_eq!(t.probability(1, 2), 0.5);
    }

    #[test]
    fn marginals_reject_empty_stream() {
        assert!(matches!(marginal_probs(&[]), Err(Error::EmptySamples)));
    }

    #[test]
    fn rank_matches_finds_first_duplicate() {
        // Third-ranked entry reuses j = 1.
        let t = table(vec![((1, 1), 0.55), ((2, 2), 0.5), ((1, 3), 0.42)], 3, 3);
        let (ranked, dup) = rank_matches(&t);
        assert_eq!(ranked.len(), 3);
        assert_eq!(dup, Some(3));
    }

    #[test]
    fn rank_matches_disjoint_support_has_no_duplicate() {
        let t = table(vec![((1, 1), 0.9), ((2, 2), 0.8), ((3, 3), 0.7)], 3, 3);
        let (_, dup) = rank_matches(&t);
        assert_eq!(dup, None);
    }

    #[test]
    fn rank_matches_breaks_ties_lexicographically() {
        let t = table(vec![((2, 1), 0.5), ((1, 2), 0.5), ((1, 1), 0.5)], 2, 2);
        let (ranked, _) = rank_matches(&t);
        assert_eq!(
            ranked.iter().map(|r| (r.j, r.k)).collect::<Vec<_>>(),
            vec![(1, 1), (1, 2), (2, 1)]
        );
    }

    #[test]
    fn point_estimate_two_by_two_diagonal() {
        let t = table(
            vec![((1, 1), 0.8), ((1, 2), 0.1), ((2, 1), 0.1), ((2, 2), 0.7)],
            2,
            2,
        );
        let est = point_estimate(&t, 0.5).unwrap();
        assert_eq!(est.pairs, vec![(1, 1), (2, 2)]);
        assert!(est.monotone);
        assert!((est.objective - (0.8 + 0.7 - 2.0 * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn point_estimate_never_selects_below_k() {
        let t = table(vec![((1, 1), 0.45), ((2, 2), 0.9)], 2, 2);
        let est = point_estimate(&t, 0.5).unwrap();
        assert_eq!(est.pairs, vec![(2, 2)]);
        assert!(est.pairs.iter().all(|&(j, k)| t.probability(j, k) > 0.5));
    }

    #[test]
    fn point_estimate_count_non_increasing_in_k() {
        let t = table(
            vec![
                ((1, 1), 0.95),
                ((2, 2), 0.7),
                ((3, 3), 0.5),
                ((4, 4), 0.3),
                ((4, 5), 0.25),
                ((5, 5), 0.15),
            ],
            5,
            6,
        );
        let mut last = usize::MAX;
        for k in [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9] {
            let est = point_estimate(&t, k).unwrap();
            assert!(est.pairs.len() <= last, "K = {k}");
            last = est.pairs.len();
        }
    }

    #[test]
    fn point_estimate_matches_exhaustive_search() {
        // 3x3 with competition: brute-force over all one-to-one subsets.
        let entries = vec![
            ((1, 1), 0.45),
            ((1, 2), 0.35),
            ((2, 1), 0.3),
            ((2, 2), 0.4),
            ((3, 3), 0.4),
            ((2, 3), 0.25),
        ];
        let t = table(entries.clone(), 3, 3);
        for k in [0.2, 0.3, 0.38] {
            let est = point_estimate(&t, k).unwrap();
            // Enumerate subsets of entries that are one-to-one.
            let mut best = 0.0f64;
            let n = entries.len();
            for mask in 0..(1u32 << n) {
                let chosen: Vec<_> = (0..n)
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| entries[i])
                    .collect();
                let mut js = std::collections::HashSet::new();
                let mut ks = std::collections::HashSet::new();
                if !chosen
                    .iter()
                    .all(|((j, k), _)| js.insert(*j) && ks.insert(*k))
                {
                    continue;
                }
                let obj: f64 = chosen.iter().map(|(_, p)| p - k).sum();
                best = best.max(obj);
            }
            assert!(
                (est.objective - best).abs() < 1e-12,
                "K = {k}: {} vs brute {best}",
                est.objective
            );
        }
    }

    #[test]
    fn point_estimate_rejects_bad_k() {
        let t = table(vec![((1, 1), 0.9)], 1, 1);
        assert!(point_estimate(&t, 0.0).is_err());
        assert!(point_estimate(&t, 1.0).is_err());
    }

    #[test]
    fn assignment_solver_vs_brute_force() {
        // Random 4x4 and 3x5 instances against exhaustive permutations.
        let mut state = 0x9E3779B97F4A7C15u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..50 {
            let (nr, nc) = (3, 4);
            let cost: Vec<f64> = (0..nr * nc).map(|_| next()).collect();
            let got = solve_assignment(&cost, nr, nc);
            let got_cost: f64 = got.iter().enumerate().map(|(r, &c)| cost[r * nc + c]).sum();
            let mut best = f64::INFINITY;
            for c0 in 0..nc {
                for c1 in 0..nc {
                    for c2 in 0..nc {
                        if c0 == c1 || c0 == c2 || c1 == c2 {
                            continue;
                        }
                        best = best.min(cost[c0] + cost[nc + c1] + cost[2 * nc + c2]);
                    }
                }
            }
            assert!((got_cost - best).abs() < 1e-12, "{got_cost} vs {best}");
        }
    }

    #[test]
    fn summarize_constant_stream_collapses() {
        let mut s = sample_with(vec![(1, 1)], 2, 2);
        s.log_post = -3.5;
        s.rmsd = Some(1.25);
        let summary = summarize(&vec![s; 10]).unwrap();
        assert_eq!(summary.l.median, 1.0);
        assert_eq!(summary.l.lo95, 1.0);
        assert_eq!(summary.l.hi95, 1.0);
        let r = summary.rmsd.unwrap();
        assert_eq!((r.median, r.lo95, r.hi95), (1.25, 1.25, 1.25));
        assert_eq!(summary.log_post_min, -3.5);
    }

    #[test]
    fn summarize_quantiles_match_sort_oracle() {
        let mut samples = Vec::new();
        for i in 0..200u32 {
            let mut s = sample_with(vec![(1, 1)], 2, 2);
            s.log_post = (i as f64 * 37.0) % 101.0;
            samples.push(s);
        }
        let summary = summarize(&samples).unwrap();
        let mut vals: Vec<f64> = samples.iter().map(|s| s.log_post).collect();
        vals.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = (vals.len() - 1) as f64 * p;
            let lo = h.floor() as usize;
            vals[lo] + (h - lo as f64) * (vals[(lo + 1).min(vals.len() - 1)] - vals[lo])
        };
        assert_eq!(summary.log_post.median, q(0.5));
        assert_eq!(summary.log_post.lo95, q(0.025));
        assert_eq!(summary.log_post.hi95, q(0.975));
        assert!(summary.log_post.lo95 <= summary.log_post.median);
        assert!(summary.log_post.median <= summary.log_post.hi95);
    }

    #[test]
    fn compare_runs_flags_subsidiary_mode() {
        let mk = |median: f64| {
            let mut s = sample_with(vec![(1, 1)], 2, 2);
            s.log_post = median;
            summarize(&[s]).unwrap()
        };
        let report = compare_runs(&[mk(377.9), mk(378.2), mk(100.7)], 5.0).unwrap();
        assert_eq!(report.converged, vec![true, true, false]);
        assert_eq!(report.best_median, 378.2);
    }

    #[test]
    fn heatmap_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let sparse = dir.path().join("probs.csv");
        let dense = dir.path().join("probs_dense.csv");
        let t = table(vec![((1, 1), 0.25), ((2, 3), 0.5), ((4, 2), 0.125)], 4, 3);
        export_heatmap(&t, &sparse, &dense).unwrap();
        assert_eq!(parse_heatmap_sparse(&sparse, 4, 3).unwrap(), t);
        assert_eq!(parse_heatmap_dense(&dense).unwrap(), t);
    }

    #[test]
    fn heatmap_empty_table_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let sparse = dir.path().join("probs.csv");
        let dense = dir.path().join("probs_dense.csv");
        let t = table(vec![], 2, 2);
        export_heatmap(&t, &sparse, &dense).unwrap();
        assert_eq!(std::fs::read_to_string(&sparse).unwrap(), "j,k,p\n");
        let back = parse_heatmap_sparse(&sparse, 2, 2).unwrap();
        assert!(back.entries().is_empty());
    }
}
