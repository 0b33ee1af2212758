//! Gap-penalty arithmetic, the matching prior, its normalizing constant,
//! and the marginalized prior over the penalty parameters.
//!
//! The prior on a matching M is `p(M; g, h) = Z(g, h)·exp{-u(M; g, h)}`
//! with `u(M) = g·S(M) + h·L(M)`, where S counts gap openings and L counts
//! gap extensions. A gap of index difference `r` between consecutive
//! matched indices costs `f(r)`: 0 for r = 1, g for r = 2, g + (r-2)h
//! beyond. Sentinels `j_0 = k_0 = 0`, `j_{L+1} = m+1`, `k_{L+1} = n+1`
//! make terminal gaps count like interior ones; with them a final match at
//! index m contributes f(1) = 0, the only self-consistent reading.

use std::collections::HashMap;
use std::sync::Mutex;

use crate::domain::{GapHyper, GapParams, GridSpec, Matching};
use crate::error::{Error, Result};

/// Gap-opening count S(M), extension count L(M), and the total penalty u.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyBreakdown {
    pub s: u32,
    pub ext: u32,
    pub u: f64,
}

/// Penalty of a single gap with index difference `r >= 1`.
///
/// Panics on `r == 0`; that is a caller bug, not a data condition.
pub fn f_penalty(r: u32, gp: &GapParams) -> f64 {
    assert!(r >= 1, "f_penalty requires r >= 1, got {r}");
    match r {
        1 => 0.0,
        2 => gp.g,
        _ => gp.g + (r - 2) as f64 * gp.h,
    }
}

/// (S(M), L(M)) under the sentinel convention. Penalty-parameter free.
pub fn gap_counts(mt: &Matching) -> (u32, u32) {
    let mut s = 0u32;
    let mut ext = 0u32;
    let mut side = |indices: &mut dyn Iterator<Item = u32>, end: u32| {
        let mut prev = 0u32;
        for idx in indices.chain(std::iter::once(end)) {
            let d = idx - prev;
            if d >= 2 {
                s += 1;
                ext += d - 2;
            }
            prev = idx;
        }
    };
    side(&mut mt.pairs().iter().map(|p| p.0), mt.m() as u32 + 1);
    side(&mut mt.pairs().iter().map(|p| p.1), mt.n() as u32 + 1);
    (s, ext)
}

/// Total penalty `u(M; g, h) = Σ f(j_{i+1} - j_i) + Σ f(k_{i+1} - k_i)`
/// over both index sequences, sentinels included.
pub fn total_penalty(mt: &Matching, gp: &GapParams) -> PenaltyBreakdown {
    let (s, ext) = gap_counts(mt);
    PenaltyBreakdown {
        s,
        ext,
        u: gp.g * s as f64 + gp.h * ext as f64,
    }
}

/// Reduction in gap penalty from adding a match at `idx_star` strictly
/// inside the interval `(idx_lo, idx_hi)` of an index sequence:
/// `f(hi - lo) - f(star - lo) - f(hi - star)`. May be negative.
///
/// Panics unless `idx_lo < idx_star < idx_hi` and `idx_hi - idx_lo >= 2`.
pub fn reduction(idx_star: u32, idx_lo: u32, idx_hi: u32, gp: &GapParams) -> f64 {
    assert!(
        idx_lo < idx_star && idx_star < idx_hi,
        "idx_star {idx_star} out of range ({idx_lo}, {idx_hi})"
    );
    let d = idx_hi - idx_lo;
    if d == 2 {
        gp.g
    } else if idx_star == idx_lo + 1 || idx_star == idx_hi - 1 {
        gp.h
    } else {
        2.0 * gp.h - gp.g
    }
}

/// Change in (S, L) from adding a match at `idx_star` in `(idx_lo, idx_hi)`
/// on one index sequence. Mirrors [`reduction`]: Δu = g·Δs + h·Δext = -r.
pub fn side_counts_delta(idx_star: u32, idx_lo: u32, idx_hi: u32) -> (i32, i32) {
    debug_assert!(idx_lo < idx_star && idx_star < idx_hi);
    let d = idx_hi - idx_lo;
    if d == 2 {
        (-1, 0)
    } else if idx_star == idx_lo + 1 || idx_star == idx_hi - 1 {
        (0, -1)
    } else {
        (1, -2)
    }
}

// ---------------------------------------------------------------------------
// Normalizing constant
// ---------------------------------------------------------------------------

/// `log Z(g, h)` where `Z(g, h)⁻¹ = Σ_M exp{-u(M; g, h)}`, the sum running
/// over all monotone matchings including the empty one.
///
/// Three-state affine-gap dynamic program over the (m+1)×(n+1) lattice. A
/// path consumes x-points (state A, a gap run in x), y-points (state B) or
/// a matched pair (state D); requiring all A steps to precede all B steps
/// between matches makes paths and matchings correspond one to one, and
/// each maximal A- or B-run of length t contributes g + (t-1)h — exactly
/// the sentinel-convention penalty.
///
/// Accumulation is log-sum-exp blocked by row: each row is held in linear
/// space rescaled so its maximum is 1, with the extracted log factors
/// summed separately. Path weights are non-increasing (all transition
/// weights are ≤ 1), so nothing further than e^-(g+h)(m+n) below a row
/// maximum can matter, and that stays far inside f64 range for any
/// penalties this crate evaluates.
pub fn log_normalizer(m: usize, n: usize, gp: &GapParams) -> f64 {
    let wg = (-gp.g).exp();
    let wh = (-gp.h).exp();
    // Rows over k = 0..=n; each cell is [D, A, B] relative to `scale`.
    let mut prev = vec![[0.0f64; 3]; n + 1];
    let mut cur = vec![[0.0f64; 3]; n + 1];
    let mut scale = 0.0f64;
    prev[0] = [1.0, 0.0, 0.0];
    for k in 1..=n {
        let p = prev[k - 1];
        prev[k] = [0.0, 0.0, wg * (p[0] + p[1]) + wh * p[2]];
    }
    for _j in 1..=m {
        for k in 0..=n {
            let up = prev[k];
            let d = if k >= 1 {
                let diag = prev[k - 1];
                diag[0] + diag[1] + diag[2]
            } else {
                0.0
            };
            let a = wg * up[0] + wh * up[1];
            let b = if k >= 1 {
                let left = cur[k - 1];
                wg * (left[0] + left[1]) + wh * left[2]
            } else {
                0.0
            };
            cur[k] = [d, a, b];
        }
        let row_max = cur
            .iter()
            .flat_map(|c| c.iter().copied())
            .fold(0.0f64, f64::max);
        debug_assert!(row_max > 0.0);
        let inv = 1.0 / row_max;
        for c in cur.iter_mut() {
            c[0] *= inv;
            c[1] *= inv;
            c[2] *= inv;
        }
        scale += row_max.ln();
        std::mem::swap(&mut prev, &mut cur);
    }
    let end = prev[n];
    -((end[0] + end[1] + end[2]).ln() + scale)
}

// ---------------------------------------------------------------------------
// Marginal prior over (g, h)
// ---------------------------------------------------------------------------

/// Precomputed midpoint grid of `log Z(g_i, h_j)` for one (m, n).
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    m: usize,
    n: usize,
    spec: GridSpec,
    /// Row-major `spec.n × spec.n`, g varying over rows.
    log_z: Vec<f64>,
}

impl QuadratureGrid {
    /// Evaluates `log Z` at every grid midpoint. O(N²·m·n), parallelized
    /// over grid points when the `parallel` feature is on.
    pub fn build(m: usize, n: usize, spec: GridSpec) -> Result<Self> {
        if !(spec.g_max > 0.0 && spec.h_max > 0.0) || spec.n < 2 {
            return Err(Error::InvalidModelConfig(
                "quadrature grid needs positive ranges and n >= 2".into(),
            ));
        }
        let dg = spec.g_max / spec.n as f64;
        let dh = spec.h_max / spec.n as f64;
        let eval = |idx: usize| {
            let g = ((idx / spec.n) as f64 + 0.5) * dg;
            let h = ((idx % spec.n) as f64 + 0.5) * dh;
            log_normalizer(m, n, &GapParams { g, h })
        };
        #[cfg(feature = "parallel")]
        let log_z = {
            use rayon::prelude::*;
            (0..spec.n * spec.n).into_par_iter().map(eval).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let log_z = (0..spec.n * spec.n).map(eval).collect();
        Ok(Self { m, n, spec, log_z })
    }

    pub fn check_shape(&self, m: usize, n: usize) -> Result<()> {
        if self.m != m || self.n != n {
            return Err(Error::GridShapeMismatch {
                expected_m: self.m,
                expected_n: self.n,
                got_m: m,
                got_n: n,
            });
        }
        Ok(())
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }
}

/// Log of the quadrature estimate of the marginal prior mass of a matching
/// with gap counts (s, ext), including the gamma-prior normalizing
/// constant `log{b_g^a_g · b_h^a_h / (Γ(a_g)Γ(a_h))}`.
pub fn marginal_log_prior(s: u32, ext: u32, grid: &QuadratureGrid, hyper: &GapHyper) -> f64 {
    let nn = grid.spec.n;
    let dg = grid.spec.g_max / nn as f64;
    let dh = grid.spec.h_max / nn as f64;
    let mut max_psi = f64::NEG_INFINITY;
    let mut psis = Vec::with_capacity(nn * nn);
    for i in 0..nn {
        let g = (i as f64 + 0.5) * dg;
        for j in 0..nn {
            let h = (j as f64 + 0.5) * dh;
            let psi =
                grid.log_z[i * nn + j] - g * (s as f64 + hyper.b_g) - h * (ext as f64 + hyper.b_h)
                    + (hyper.a_g - 1.0) * g.ln()
                    + (hyper.a_h - 1.0) * h.ln();
            max_psi = max_psi.max(psi);
            psis.push(psi);
        }
    }
    let sum: f64 = psis.iter().map(|p| (p - max_psi).exp()).sum();
    let log_quad = max_psi + sum.ln() + dg.ln() + dh.ln();
    log_quad + hyper.a_g * hyper.b_g.ln() + hyper.a_h * hyper.b_h.ln()
        - libm::lgamma(hyper.a_g)
        - libm::lgamma(hyper.a_h)
}

/// Cached marginal prior: the quadrature only depends on a matching
/// through (S(M), L(M)), so each pair is evaluated once per run and the
/// table is shared read-mostly across chains.
#[derive(Debug)]
pub struct MarginalPrior {
    grid: QuadratureGrid,
    hyper: GapHyper,
    cache: Mutex<HashMap<(u32, u32), f64>>,
}

impl MarginalPrior {
    pub fn new(grid: QuadratureGrid, hyper: GapHyper) -> Self {
        Self {
            grid,
            hyper,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn log_prior(&self, s: u32, ext: u32) -> f64 {
        let mut cache = self.cache.lock().expect("marginal prior cache poisoned");
        *cache
            .entry((s, ext))
            .or_insert_with(|| marginal_log_prior(s, ext, &self.grid, &self.hyper))
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
