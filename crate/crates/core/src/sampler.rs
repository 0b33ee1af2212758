//! The MCMC engine: matching moves, registration-parameter updates,
//! gap-parameter updates, PAM-distance updates, sweep scheduling, and
//! parallel tempering.
//!
//! # Matching moves
//!
//! One move selects a point uniformly from the m + n points. An unmatched
//! point proposes a new match into the free interval between its matched
//! neighbours; a matched point proposes deletion with probability p* and
//! otherwise proposes switching its partner within the partner's free
//! interval. Each selected point defines its own reversible
//! Metropolis-Hastings kernel (the reverse of an addition is a deletion
//! *of the same selected point*), so the uniform mixture over points
//! leaves the posterior invariant with exactly the displayed ratios.
//!
//! # Proposals and ratios
//!
//! Every proposal kernel returns a [`Proposal`] carrying the log target
//! ratio and the log Hastings correction separately. The engine accepts
//! with probability `min(1, exp(β·log_target_ratio + log_hastings))`,
//! where β is the replica's inverse temperature; the target ratio must
//! equal the joint log-density difference of the two states, which is
//! pinned by tests for every kernel.
//!
//! # Schedule
//!
//! A sweep applies `moves_per_sweep` matching moves (default m + n), then
//! one rotation update, a translation draw, a precision draw, then the
//! gap-parameter updates (sampled mode) and the PAM-distance update
//! (sampled-PAM mode). Tempered replicas each run the same schedule and
//! attempt adjacent-rung state swaps at the end of every sweep.

use nalgebra::Vector3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{
    Configuration, GapMode, GapParams, Matching, ModelConfig, SeqMode, TransformState,
};
use crate::error::{Error, Result};
use crate::gapmodel::{self, reduction, side_counts_delta};
use crate::model::{self, AlignmentState, ModelTables};
use crate::pam::PamMatrix;

// ---------------------------------------------------------------------------
// Context and state
// ---------------------------------------------------------------------------

/// Borrowed per-run data shared by all kernels and replicas.
pub struct SamplerCtx<'a> {
    pub x: &'a Configuration,
    pub y: &'a Configuration,
    pub cfg: &'a ModelConfig,
    pub tables: &'a ModelTables,
    sx: Option<&'a [u8]>,
    sy: Option<&'a [u8]>,
}

impl<'a> SamplerCtx<'a> {
    pub fn new(
        x: &'a Configuration,
        y: &'a Configuration,
        cfg: &'a ModelConfig,
        tables: &'a ModelTables,
    ) -> Result<Self> {
        cfg.validate()?;
        let (tm, tn) = tables.sizes();
        if tm != x.len() || tn != y.len() {
            return Err(Error::GridShapeMismatch {
                expected_m: tm,
                expected_n: tn,
                got_m: x.len(),
                got_n: y.len(),
            });
        }
        let (sx, sy) = if matches!(cfg.seq_mode, SeqMode::Off) {
            (None, None)
        } else {
            let sx = x.residues().ok_or_else(|| {
                Error::MissingSequence(format!("configuration {} has no residues", x.id()))
            })?;
            let sy = y.residues().ok_or_else(|| {
                Error::MissingSequence(format!("configuration {} has no residues", y.id()))
            })?;
            (Some(sx), Some(sy))
        };
        Ok(Self {
            x,
            y,
            cfg,
            tables,
            sx,
            sy,
        })
    }

    fn m(&self) -> usize {
        self.x.len()
    }

    fn n(&self) -> usize {
        self.y.len()
    }

    /// ψ table for the state's current PAM distance, if amino-acid
    /// information participates in the matching moves.
    fn current_pam(&self, state: &AlignmentState) -> Option<&PamMatrix> {
        if self.cfg.matching_prior_only {
            return None;
        }
        let seq = self.tables.seq.as_ref()?;
        let l = match &self.cfg.seq_mode {
            SeqMode::Off => return None,
            SeqMode::FixedPam(l) => *l,
            SeqMode::SampledPam { .. } => state.pam_l.expect("sampled-PAM state carries l"),
        };
        seq.cache.by_distance(l)
    }
}

/// Chain state plus the running gap-count caches the kernels rely on.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub state: AlignmentState,
    s: u32,
    ext: u32,
}

impl ChainState {
    pub fn new(state: AlignmentState) -> Self {
        let (s, ext) = gapmodel::gap_counts(&state.mt);
        Self { state, s, ext }
    }

    pub fn gap_counts(&self) -> (u32, u32) {
        (self.s, self.ext)
    }

    /// Verifies the cached gap counts against a fresh recomputation.
    pub fn audit(&self) -> bool {
        gapmodel::gap_counts(&self.state.mt) == (self.s, self.ext)
    }
}

// ---------------------------------------------------------------------------
// Proposals
// ---------------------------------------------------------------------------

/// A proposed move with its log target ratio (joint log-density difference
/// between proposed and current state) and the log Hastings correction
/// `log q(reverse)/q(forward)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proposal<M> {
    pub mv: M,
    pub log_target_ratio: f64,
    pub log_hastings: f64,
}

impl<M> Proposal<M> {
    fn noop(mv: M) -> Self {
        Self {
            mv,
            log_target_ratio: 0.0,
            log_hastings: f64::NEG_INFINITY,
        }
    }
}

/// Matching perturbation. `slot` indexes the ordered pair list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchMove {
    /// Nothing to propose (no free interval); counted as a rejection.
    None,
    Add {
        slot: usize,
        j: u32,
        k: u32,
    },
    Delete {
        slot: usize,
    },
    /// x_j keeps its match, the y partner moves.
    SwitchY {
        slot: usize,
        k_new: u32,
    },
    /// y_k keeps its match, the x partner moves.
    SwitchX {
        slot: usize,
        j_new: u32,
    },
}

/// Sentinel-extended matched neighbours around insertion position `slot`.
fn interval_around_gap(mt: &Matching, slot: usize) -> ((u32, u32), (u32, u32)) {
    let pairs = mt.pairs();
    let lo = if slot == 0 { (0, 0) } else { pairs[slot - 1] };
    let hi = if slot == pairs.len() {
        (mt.m() as u32 + 1, mt.n() as u32 + 1)
    } else {
        pairs[slot]
    };
    (lo, hi)
}

/// Sentinel-extended matched neighbours of the pair at `slot`, excluding
/// that pair itself.
fn interval_around_pair(mt: &Matching, slot: usize) -> ((u32, u32), (u32, u32)) {
    let pairs = mt.pairs();
    let lo = if slot == 0 { (0, 0) } else { pairs[slot - 1] };
    let hi = if slot + 1 == pairs.len() {
        (mt.m() as u32 + 1, mt.n() as u32 + 1)
    } else {
        pairs[slot + 1]
    };
    (lo, hi)
}

/// Gap-prior part of the log target ratio for a move changing the gap
/// counts by `(ds, dext)`, with penalty reduction `red` in the fixed and
/// sampled modes; integrated mode goes through the cached quadrature prior.
fn gap_prior_ratio(ctx: &SamplerCtx, cs: &ChainState, red: f64, ds: i32, dext: i32) -> f64 {
    match &ctx.cfg.gap_mode {
        GapMode::Fixed(_) | GapMode::Sampled(_) => red,
        GapMode::Integrated { .. } => {
            let marginal = ctx.tables.marginal.as_ref().expect("integrated tables");
            let s2 = (cs.s as i64 + ds as i64) as u32;
            let e2 = (cs.ext as i64 + dext as i64) as u32;
            marginal.log_prior(s2, e2) - marginal.log_prior(cs.s, cs.ext)
        }
    }
}

/// Likelihood factor of adding the match (j, k):
/// `log v + log φ(δ/(σ√2)) - 3 log(σ√2)`, plus `log ψ` when amino-acid
/// information is on. Zero under the prior-only diagnostic hook.
fn add_likelihood_ratio(ctx: &SamplerCtx, state: &AlignmentState, j: u32, k: u32) -> f64 {
    if ctx.cfg.matching_prior_only {
        return 0.0;
    }
    let delta = ctx.x.point(j) - state.t.apply(ctx.y.point(k));
    let mut lr = ctx.cfg.v.ln() + model::pair_log_phi(&delta, state.t.sigma());
    if let Some(pam) = ctx.current_pam(state) {
        let (sx, sy) = (ctx.sx.unwrap(), ctx.sy.unwrap());
        lr += pam.log_psi(sx[j as usize - 1], sy[k as usize - 1]);
    }
    lr
}

/// One matching move: selects a point uniformly at random and builds the
/// corresponding add / delete / switch proposal.
pub fn propose_match_move(
    ctx: &SamplerCtx,
    cs: &ChainState,
    rng: &mut ChaCha20Rng,
) -> Proposal<MatchMove> {
    let (m, n) = (ctx.m(), ctx.n());
    let point = rng.random_range(0..m + n);
    let gp = effective_gap(ctx, cs);
    if point < m {
        let j = point as u32 + 1;
        match cs.state.mt.pairs().binary_search_by_key(&j, |p| p.0) {
            Err(slot) => propose_add_for_x(ctx, cs, &gp, slot, j, rng),
            Ok(slot) => {
                if rng.random::<f64>() < ctx.cfg.p_star {
                    propose_delete(ctx, cs, &gp, slot, Side::X)
                } else {
                    propose_switch_y(ctx, cs, &gp, slot, rng)
                }
            }
        }
    } else {
        let k = (point - m) as u32 + 1;
        match cs.state.mt.pairs().binary_search_by_key(&k, |p| p.1) {
            Err(slot) => propose_add_for_y(ctx, cs, &gp, slot, k, rng),
            Ok(slot) => {
                if rng.random::<f64>() < ctx.cfg.p_star {
                    propose_delete(ctx, cs, &gp, slot, Side::Y)
                } else {
                    propose_switch_x(ctx, cs, &gp, slot, rng)
                }
            }
        }
    }
}

/// Which configuration the selected point belongs to. A deletion's
/// reverse move re-adds from the same selected point, so the Hastings
/// width is the opposite side's free interval.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    X,
    Y,
}

fn effective_gap(ctx: &SamplerCtx, cs: &ChainState) -> GapParams {
    match &ctx.cfg.gap_mode {
        GapMode::Fixed(gp) => *gp,
        _ => cs.state.gap,
    }
}

fn propose_add_for_x(
    ctx: &SamplerCtx,
    cs: &ChainState,
    gp: &GapParams,
    slot: usize,
    j: u32,
    rng: &mut ChaCha20Rng,
) -> Proposal<MatchMove> {
    let ((j_lo, k_lo), (j_hi, k_hi)) = interval_around_gap(&cs.state.mt, slot);
    let width_k = k_hi - k_lo - 1;
    if width_k == 0 {
        return Proposal::noop(MatchMove::None);
    }
    let k = k_lo + 1 + rng.random_range(0..width_k);
    let red = reduction(j, j_lo, j_hi, gp) + reduction(k, k_lo, k_hi, gp);
    let (dsj, dej) = side_counts_delta(j, j_lo, j_hi);
    let (dsk, dek) = side_counts_delta(k, k_lo, k_hi);
    let ltr = gap_prior_ratio(ctx, cs, red, dsj + dsk, dej + dek)
        + add_likelihood_ratio(ctx, &cs.state, j, k);
    Proposal {
        mv: MatchMove::Add { slot, j, k },
        log_target_ratio: ltr,
        log_hastings: (ctx.cfg.p_star * width_k as f64).ln(),
    }
}

fn propose_add_for_y(
    ctx: &SamplerCtx,
    cs: &ChainState,
    gp: &GapParams,
    slot: usize,
    k: u32,
    rng: &mut ChaCha20Rng,
) -> Proposal<MatchMove> {
    let ((j_lo, k_lo), (j_hi, k_hi)) = interval_around_gap(&cs.state.mt, slot);
    let width_j = j_hi - j_lo - 1;
    if width_j == 0 {
        return Proposal::noop(MatchMove::None);
    }
    let j = j_lo + 1 + rng.random_range(0..width_j);
    let red = reduction(j, j_lo, j_hi, gp) + reduction(k, k_lo, k_hi, gp);
    let (dsj, dej) = side_counts_delta(j, j_lo, j_hi);
    let (dsk, dek) = side_counts_delta(k, k_lo, k_hi);
    let ltr = gap_prior_ratio(ctx, cs, red, dsj + dsk, dej + dek)
        + add_likelihood_ratio(ctx, &cs.state, j, k);
    Proposal {
        mv: MatchMove::Add { slot, j, k },
        log_target_ratio: ltr,
        log_hastings: (ctx.cfg.p_star * width_j as f64).ln(),
    }
}

fn propose_delete(
    ctx: &SamplerCtx,
    cs: &ChainState,
    gp: &GapParams,
    slot: usize,
    side: Side,
) -> Proposal<MatchMove> {
    let (j, k) = cs.state.mt.pairs()[slot];
    let ((j_lo, k_lo), (j_hi, k_hi)) = interval_around_pair(&cs.state.mt, slot);
    // Reduction the reverse addition would achieve; the deletion's ratio
    // is its negative.
    let red = reduction(j, j_lo, j_hi, gp) + reduction(k, k_lo, k_hi, gp);
    let (dsj, dej) = side_counts_delta(j, j_lo, j_hi);
    let (dsk, dek) = side_counts_delta(k, k_lo, k_hi);
    let ltr = gap_prior_ratio(ctx, cs, -red, -(dsj + dsk), -(dej + dek))
        - add_likelihood_ratio(ctx, &cs.state, j, k);
    let width = match side {
        Side::X => k_hi - k_lo - 1,
        Side::Y => j_hi - j_lo - 1,
    };
    Proposal {
        mv: MatchMove::Delete { slot },
        log_target_ratio: ltr,
        log_hastings: -(ctx.cfg.p_star * width as f64).ln(),
    }
}

fn propose_switch_y(
    ctx: &SamplerCtx,
    cs: &ChainState,
    gp: &GapParams,
    slot: usize,
    rng: &mut ChaCha20Rng,
) -> Proposal<MatchMove> {
    let (j, k) = cs.state.mt.pairs()[slot];
    let ((_, k_lo), (_, k_hi)) = interval_around_pair(&cs.state.mt, slot);
    let width = k_hi - k_lo - 1;
    if width == 1 {
        // Only the current partner lies in the interval.
        return Proposal::noop(MatchMove::None);
    }
    let k_new = k_lo + 1 + rng.random_range(0..width);
    if k_new == k {
        // Identity proposal; accepting it changes nothing.
        return Proposal {
            mv: MatchMove::None,
            log_target_ratio: 0.0,
            log_hastings: 0.0,
        };
    }
    let red = reduction(k_new, k_lo, k_hi, gp) - reduction(k, k_lo, k_hi, gp);
    let (ds_new, de_new) = side_counts_delta(k_new, k_lo, k_hi);
    let (ds_old, de_old) = side_counts_delta(k, k_lo, k_hi);
    let mut ltr = gap_prior_ratio(ctx, cs, red, ds_new - ds_old, de_new - de_old);
    if !ctx.cfg.matching_prior_only {
        let t = &cs.state.t;
        let d_new = ctx.x.point(j) - t.apply(ctx.y.point(k_new));
        let d_old = ctx.x.point(j) - t.apply(ctx.y.point(k));
        ltr += model::pair_log_phi(&d_new, t.sigma()) - model::pair_log_phi(&d_old, t.sigma());
        if let Some(pam) = ctx.current_pam(&cs.state) {
            let (sx, sy) = (ctx.sx.unwrap(), ctx.sy.unwrap());
            let a = sx[j as usize - 1];
            ltr += pam.log_psi(a, sy[k_new as usize - 1]) - pam.log_psi(a, sy[k as usize - 1]);
        }
    }
    Proposal {
        mv: MatchMove::SwitchY { slot, k_new },
        log_target_ratio: ltr,
        log_hastings: 0.0,
    }
}

fn propose_switch_x(
    ctx: &SamplerCtx,
    cs: &ChainState,
    gp: &GapParams,
    slot: usize,
    rng: &mut ChaCha20Rng,
) -> Proposal<MatchMove> {
    let (j, k) = cs.state.mt.pairs()[slot];
    let ((j_lo, _), (j_hi, _)) = interval_around_pair(&cs.state.mt, slot);
    let width = j_hi - j_lo - 1;
    if width == 1 {
        return Proposal::noop(MatchMove::None);
    }
    let j_new = j_lo + 1 + rng.random_range(0..width);
    if j_new == j {
        return Proposal {
            mv: MatchMove::None,
            log_target_ratio: 0.0,
            log_hastings: 0.0,
        };
    }
    let red = reduction(j_new, j_lo, j_hi, gp) - reduction(j, j_lo, j_hi, gp);
    let (ds_new, de_new) = side_counts_delta(j_new, j_lo, j_hi);
    let (ds_old, de_old) = side_counts_delta(j, j_lo, j_hi);
    let mut ltr = gap_prior_ratio(ctx, cs, red, ds_new - ds_old, de_new - de_old);
    if !ctx.cfg.matching_prior_only {
        let t = &cs.state.t;
        let d_new = ctx.x.point(j_new) - t.apply(ctx.y.point(k));
        let d_old = ctx.x.point(j) - t.apply(ctx.y.point(k));
        ltr += model::pair_log_phi(&d_new, t.sigma()) - model::pair_log_phi(&d_old, t.sigma());
        if let Some(pam) = ctx.current_pam(&cs.state) {
            let (sx, sy) = (ctx.sx.unwrap(), ctx.sy.unwrap());
            let b = sy[k as usize - 1];
            ltr += pam.log_psi(sx[j_new as usize - 1], b) - pam.log_psi(sx[j as usize - 1], b);
        }
    }
    Proposal {
        mv: MatchMove::SwitchX { slot, j_new },
        log_target_ratio: ltr,
        log_hastings: 0.0,
    }
}

/// Commits an accepted matching move, keeping the gap-count caches in step.
pub fn apply_match_move(cs: &mut ChainState, mv: &MatchMove) {
    fn bump(cs: &mut ChainState, ds: i32, dext: i32) {
        cs.s = (cs.s as i64 + ds as i64) as u32;
        cs.ext = (cs.ext as i64 + dext as i64) as u32;
    }
    match *mv {
        MatchMove::None => {}
        MatchMove::Add { slot, j, k } => {
            let ((j_lo, k_lo), (j_hi, k_hi)) = interval_around_gap(&cs.state.mt, slot);
            let (dsj, dej) = side_counts_delta(j, j_lo, j_hi);
            let (dsk, dek) = side_counts_delta(k, k_lo, k_hi);
            bump(cs, dsj + dsk, dej + dek);
            cs.state.mt.pairs_mut().insert(slot, (j, k));
        }
        MatchMove::Delete { slot } => {
            let (j, k) = cs.state.mt.pairs()[slot];
            let ((j_lo, k_lo), (j_hi, k_hi)) = interval_around_pair(&cs.state.mt, slot);
            let (dsj, dej) = side_counts_delta(j, j_lo, j_hi);
            let (dsk, dek) = side_counts_delta(k, k_lo, k_hi);
            bump(cs, -(dsj + dsk), -(dej + dek));
            cs.state.mt.pairs_mut().remove(slot);
        }
        MatchMove::SwitchY { slot, k_new } => {
            let (_, k) = cs.state.mt.pairs()[slot];
            let ((_, k_lo), (_, k_hi)) = interval_around_pair(&cs.state.mt, slot);
            let (ds_new, de_new) = side_counts_delta(k_new, k_lo, k_hi);
            let (ds_old, de_old) = side_counts_delta(k, k_lo, k_hi);
            bump(cs, ds_new - ds_old, de_new - de_old);
            cs.state.mt.pairs_mut()[slot].1 = k_new;
        }
        MatchMove::SwitchX { slot, j_new } => {
            let (j, _) = cs.state.mt.pairs()[slot];
            let ((j_lo, _), (j_hi, _)) = interval_around_pair(&cs.state.mt, slot);
            let (ds_new, de_new) = side_counts_delta(j_new, j_lo, j_hi);
            let (ds_old, de_old) = side_counts_delta(j, j_lo, j_hi);
            bump(cs, ds_new - ds_old, de_new - de_old);
            cs.state.mt.pairs_mut()[slot].0 = j_new;
        }
    }
    debug_assert!(cs.state.mt.validate().is_ok());
}

// ---------------------------------------------------------------------------
// Registration-parameter updates
// ---------------------------------------------------------------------------

fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    a - two_pi * ((a + std::f64::consts::PI) / two_pi).floor()
}

fn matched_log_phi_sum(ctx: &SamplerCtx, mt: &Matching, t: &TransformState) -> f64 {
    mt.pairs()
        .iter()
        .map(|&(j, k)| {
            let delta = ctx.x.point(j) - t.apply(ctx.y.point(k));
            model::pair_log_phi(&delta, t.sigma())
        })
        .sum()
}

/// Random-walk proposal on the Euler angles: independent uniform
/// perturbations of half-width `rot_step`, wrapped into [-π, π).
pub fn propose_rotation(
    ctx: &SamplerCtx,
    cs: &ChainState,
    rng: &mut ChaCha20Rng,
) -> Proposal<[f64; 3]> {
    let cur = cs.state.t.euler();
    let w = ctx.cfg.rot_step;
    let mut next = [0.0; 3];
    for (i, angle) in next.iter_mut().enumerate() {
        *angle = wrap_angle(cur[i] + rng.random_range(-w..=w));
    }
    let mut cand = cs.state.t.clone();
    cand.set_euler(next);
    let mut ltr = matched_log_phi_sum(ctx, &cs.state.mt, &cand)
        - matched_log_phi_sum(ctx, &cs.state.mt, &cs.state.t)
        + model::log_prior_rotation(&cand, &ctx.cfg.prior_f0)
        - model::log_prior_rotation(&cs.state.t, &ctx.cfg.prior_f0);
    if ctx.cfg.haar_correction {
        ltr += model::log_haar_density(&next) - model::log_haar_density(&cur);
    }
    Proposal {
        mv: next,
        log_target_ratio: ltr,
        log_hastings: 0.0,
    }
}

pub fn apply_rotation(cs: &mut ChainState, euler: [f64; 3]) {
    cs.state.t.set_euler(euler);
}

/// Exact draw from the full conditional of τ: with matched residuals
/// e = x_j - A·y_k, the tempered conditional is isotropic normal with
/// precision β·(L/(2σ²) + 1/σ_τ²) and mean
/// (Σe/(2σ²) + μ_τ/σ_τ²) / (L/(2σ²) + 1/σ_τ²).
pub fn gibbs_translation(
    ctx: &SamplerCtx,
    cs: &mut ChainState,
    inv_temp: f64,
    rng: &mut ChaCha20Rng,
) -> Vector3<f64> {
    let t = &cs.state.t;
    let sigma2 = t.sigma() * t.sigma();
    let tau_var = ctx.cfg.sigma_tau * ctx.cfg.sigma_tau;
    let l = cs.state.mt.len() as f64;
    let mut resid_sum = Vector3::zeros();
    for &(j, k) in cs.state.mt.pairs() {
        resid_sum += ctx.x.point(j) - t.rotation() * ctx.y.point(k);
    }
    let precision = l / (2.0 * sigma2) + 1.0 / tau_var;
    let mean = (resid_sum / (2.0 * sigma2) + ctx.cfg.mu_tau / tau_var) / precision;
    let sd = (1.0 / (inv_temp * precision)).sqrt();
    let draw = Vector3::from_fn(|_, _| {
        let z: f64 = StandardNormal.sample(rng);
        z * sd
    }) + mean;
    cs.state.t.set_tau(draw);
    draw
}

/// Exact draw of σ⁻² from its tempered conditional
/// Γ(β·(α - 1 + 3L/2) + 1, β·(β_rate + SSD/4)), where SSD is the matched
/// residual sum of squares; stores and returns the new σ.
pub fn gibbs_precision(
    ctx: &SamplerCtx,
    cs: &mut ChainState,
    inv_temp: f64,
    rng: &mut ChaCha20Rng,
) -> f64 {
    let t = &cs.state.t;
    let l = cs.state.mt.len() as f64;
    let mut ssd = 0.0;
    for &(j, k) in cs.state.mt.pairs() {
        ssd += (ctx.x.point(j) - t.apply(ctx.y.point(k))).norm_squared();
    }
    let shape = inv_temp * (ctx.cfg.alpha - 1.0 + 1.5 * l) + 1.0;
    let rate = inv_temp * (ctx.cfg.beta + ssd / 4.0);
    let gamma = Gamma::new(shape, 1.0 / rate).expect("valid gamma parameters");
    let lambda: f64 = gamma.sample(rng);
    let sigma = lambda.sqrt().recip();
    cs.state.t.set_sigma(sigma);
    sigma
}

// ---------------------------------------------------------------------------
// Gap-parameter and PAM-distance updates
// ---------------------------------------------------------------------------

/// Which of the two gap penalties a proposal perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapCoord {
    G,
    H,
}

/// Geometric random walk on one penalty: v' = v·exp(U[-a, a]). The target
/// ratio combines log Z, the penalty term through the cached (S, L), and
/// the gamma prior; the Hastings correction for the multiplicative walk
/// is log(v'/v).
pub fn propose_gap(
    ctx: &SamplerCtx,
    cs: &ChainState,
    coord: GapCoord,
    rng: &mut ChaCha20Rng,
) -> Proposal<f64> {
    let hyper = match &ctx.cfg.gap_mode {
        GapMode::Sampled(hy) => hy,
        _ => panic!("gap updates require sampled-gap mode"),
    };
    let a = ctx.cfg.gap_step;
    let grow = rng.random_range(-a..=a).exp();
    let cur = cs.state.gap;
    let (old, shape, rate) = match coord {
        GapCoord::G => (cur.g, hyper.a_g, hyper.b_g),
        GapCoord::H => (cur.h, hyper.a_h, hyper.b_h),
    };
    let new = old * grow;
    let cand = match coord {
        GapCoord::G => GapParams { g: new, h: cur.h },
        GapCoord::H => GapParams { g: cur.g, h: new },
    };
    let count = match coord {
        GapCoord::G => cs.s as f64,
        GapCoord::H => cs.ext as f64,
    };
    let ltr = ctx.tables.log_z(&cand) - ctx.tables.log_z(&cur) - (new - old) * count
        + (shape - 1.0) * (new.ln() - old.ln())
        - rate * (new - old);
    Proposal {
        mv: new,
        log_target_ratio: ltr,
        log_hastings: new.ln() - old.ln(),
    }
}

pub fn apply_gap(cs: &mut ChainState, coord: GapCoord, value: f64) {
    match coord {
        GapCoord::G => cs.state.gap.g = value,
        GapCoord::H => cs.state.gap.h = value,
    }
}

/// Independence proposal on the PAM distance, uniform over the configured
/// set: α = min[1, (p_l'/p_l)·Π ψ^l'/ψ^l] over the matched pairs.
pub fn propose_pam(ctx: &SamplerCtx, cs: &ChainState, rng: &mut ChaCha20Rng) -> Proposal<u32> {
    let seq = ctx.tables.seq.as_ref().expect("sampled-PAM tables");
    let prior = seq.prior.as_ref().expect("sampled-PAM prior");
    let cur = cs.state.pam_l.expect("sampled-PAM state carries l");
    let idx_new = rng.random_range(0..prior.distances().len());
    let new = prior.distances()[idx_new];
    let idx_cur = prior.index_of(cur).expect("current distance is in the set");
    let mut ltr = prior.weights()[idx_new].ln() - prior.weights()[idx_cur].ln();
    let pam_new = seq.cache.by_distance(new).expect("cached");
    let pam_cur = seq.cache.by_distance(cur).expect("cached");
    let (sx, sy) = (ctx.sx.unwrap(), ctx.sy.unwrap());
    for &(j, k) in cs.state.mt.pairs() {
        let (a, b) = (sx[j as usize - 1], sy[k as usize - 1]);
        ltr += pam_new.log_psi(a, b) - pam_cur.log_psi(a, b);
    }
    Proposal {
        mv: new,
        log_target_ratio: ltr,
        log_hastings: 0.0,
    }
}

pub fn apply_pam(cs: &mut ChainState, l: u32) {
    cs.state.pam_l = Some(l);
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

/// Per-kernel proposal/acceptance tallies (cold chain, plus swaps).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptanceStats {
    pub match_proposed: u64,
    pub match_accepted: u64,
    pub rot_proposed: u64,
    pub rot_accepted: u64,
    pub gap_proposed: u64,
    pub gap_accepted: u64,
    pub pam_proposed: u64,
    pub pam_accepted: u64,
    pub swap_proposed: u64,
    pub swap_accepted: u64,
}

/// One recorded posterior draw plus its derived statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSample {
    pub sweep: u64,
    pub log_post: f64,
    pub l: u32,
    pub rmsd: Option<f64>,
    pub s: u32,
    pub ext: u32,
    pub g: Option<f64>,
    pub h: Option<f64>,
    pub pam_l: Option<u32>,
    pub matching: Matching,
    pub transform: TransformState,
}

/// Everything a finished run returns.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub samples: Vec<PosteriorSample>,
    pub acceptance: AcceptanceStats,
}

/// Starting point of a run. Missing pieces get deterministic defaults:
/// identity rotation, τ = μ_τ, σ = sqrt(β/α) (the prior-mean precision).
#[derive(Debug, Clone)]
pub struct InitState {
    pub matching: Matching,
    pub transform: Option<TransformState>,
}

impl InitState {
    pub fn empty(m: usize, n: usize) -> Self {
        Self {
            matching: Matching::empty(m, n),
            transform: None,
        }
    }

    pub fn from_matching(matching: Matching) -> Self {
        Self {
            matching,
            transform: None,
        }
    }

    /// Seeds the registration from the matching itself: the least-squares
    /// rigid superposition of the matched pairs (an external alignment
    /// usually implies one), with σ estimated from the fit residuals.
    /// Falls back to the plain defaults when the matching has fewer than
    /// three pairs.
    pub fn fitted(x: &Configuration, y: &Configuration, matching: Matching) -> Result<Self> {
        matching.validate().map_err(Error::InvalidMatching)?;
        if matching.len() < 3 {
            return Ok(Self::from_matching(matching));
        }
        let l = matching.len() as f64;
        let mut xbar = Vector3::zeros();
        let mut ybar = Vector3::zeros();
        for &(j, k) in matching.pairs() {
            xbar += x.point(j);
            ybar += y.point(k);
        }
        xbar /= l;
        ybar /= l;
        let mut cross = nalgebra::Matrix3::<f64>::zeros();
        for &(j, k) in matching.pairs() {
            cross += (x.point(j) - xbar) * (y.point(k) - ybar).transpose();
        }
        let svd = cross.svd(true, true);
        let u = svd.u.expect("svd of 3x3");
        let vt = svd.v_t.expect("svd of 3x3");
        let det = (u * vt).determinant();
        let fix = nalgebra::Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, det.signum()));
        let rotation = u * fix * vt;
        let tau = xbar - rotation * ybar;
        // Matched differences carry variance 2σ² per coordinate.
        let mut ssd = 0.0;
        for &(j, k) in matching.pairs() {
            ssd += (x.point(j) - rotation * y.point(k) - tau).norm_squared();
        }
        let sigma = (ssd / (6.0 * l)).sqrt().max(1e-3);
        let transform = TransformState::from_rotation(rotation, tau, sigma)?;
        Ok(Self {
            matching,
            transform: Some(transform),
        })
    }
}

const AUDIT_INTERVAL: u64 = 4096;

fn initial_chain_state(ctx: &SamplerCtx, init: &InitState) -> Result<ChainState> {
    init.matching.validate().map_err(Error::InvalidMatching)?;
    if init.matching.m() != ctx.m() || init.matching.n() != ctx.n() {
        return Err(Error::InvalidModelConfig(format!(
            "initial matching sized ({}, {}) for data ({}, {})",
            init.matching.m(),
            init.matching.n(),
            ctx.m(),
            ctx.n()
        )));
    }
    let t = match &init.transform {
        Some(t) => t.clone(),
        None => TransformState::new(
            [0.0; 3],
            ctx.cfg.mu_tau,
            (ctx.cfg.beta / ctx.cfg.alpha).sqrt(),
        )?,
    };
    let gap = match &ctx.cfg.gap_mode {
        GapMode::Fixed(gp) => *gp,
        GapMode::Sampled(hy) => GapParams {
            g: hy.a_g / hy.b_g,
            h: hy.a_h / hy.b_h,
        },
        GapMode::Integrated { .. } => GapParams { g: 0.0, h: 0.0 },
    };
    let pam_l = match &ctx.cfg.seq_mode {
        SeqMode::SampledPam {
            distances, mu_l, ..
        } => {
            // Start at the distance nearest the prior mean.
            Some(
                *distances
                    .iter()
                    .min_by(|a, b| {
                        (**a as f64 - mu_l)
                            .abs()
                            .total_cmp(&(**b as f64 - mu_l).abs())
                    })
                    .expect("non-empty distance set"),
            )
        }
        _ => None,
    };
    Ok(ChainState::new(AlignmentState {
        mt: init.matching.clone(),
        t,
        gap,
        pam_l,
    }))
}

fn accept(inv_temp: f64, log_target: f64, log_hastings: f64, rng: &mut ChaCha20Rng) -> bool {
    let log_alpha = inv_temp * log_target + log_hastings;
    log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha
}

/// One sweep of the fixed cyclic schedule on one replica: M-moves, then
/// A, τ, σ, then (g, h), then l.
fn sweep_replica(
    ctx: &SamplerCtx,
    cs: &mut ChainState,
    inv_temp: f64,
    rng: &mut ChaCha20Rng,
    mut stats: Option<&mut AcceptanceStats>,
) {
    let moves = ctx
        .cfg
        .moves_per_sweep
        .unwrap_or((ctx.m() + ctx.n()) as u32);
    for _ in 0..moves {
        let prop = propose_match_move(ctx, cs, rng);
        let ok = !matches!(prop.mv, MatchMove::None)
            && accept(inv_temp, prop.log_target_ratio, prop.log_hastings, rng);
        if ok {
            apply_match_move(cs, &prop.mv);
        }
        if let Some(stats) = stats.as_deref_mut() {
            stats.match_proposed += 1;
            stats.match_accepted += ok as u64;
        }
    }
    if !ctx.cfg.matching_prior_only {
        let rot = propose_rotation(ctx, cs, rng);
        let ok = accept(inv_temp, rot.log_target_ratio, rot.log_hastings, rng);
        if ok {
            apply_rotation(cs, rot.mv);
        }
        if let Some(stats) = stats.as_deref_mut() {
            stats.rot_proposed += 1;
            stats.rot_accepted += ok as u64;
        }
        gibbs_translation(ctx, cs, inv_temp, rng);
        gibbs_precision(ctx, cs, inv_temp, rng);
    }
    if matches!(ctx.cfg.gap_mode, GapMode::Sampled(_)) {
        for coord in [GapCoord::G, GapCoord::H] {
            let prop = propose_gap(ctx, cs, coord, rng);
            let ok = accept(inv_temp, prop.log_target_ratio, prop.log_hastings, rng);
            if ok {
                apply_gap(cs, coord, prop.mv);
            }
            if let Some(stats) = stats.as_deref_mut() {
                stats.gap_proposed += 1;
                stats.gap_accepted += ok as u64;
            }
        }
    }
    if matches!(ctx.cfg.seq_mode, SeqMode::SampledPam { .. }) && !ctx.cfg.matching_prior_only {
        let prop = propose_pam(ctx, cs, rng);
        let ok = accept(inv_temp, prop.log_target_ratio, prop.log_hastings, rng);
        if ok {
            apply_pam(cs, prop.mv);
        }
        if let Some(stats) = stats {
            stats.pam_proposed += 1;
            stats.pam_accepted += ok as u64;
        }
    }
}

fn record_sample(ctx: &SamplerCtx, cs: &ChainState, sweep: u64) -> Result<PosteriorSample> {
    let report = model::log_joint(ctx.x, ctx.y, &cs.state, ctx.cfg, ctx.tables)?;
    let rmsd = if cs.state.mt.is_empty() {
        None
    } else {
        Some(model::rmsd(ctx.x, ctx.y, &cs.state.mt, &cs.state.t)?)
    };
    let (g, h) = match &ctx.cfg.gap_mode {
        GapMode::Sampled(_) => (Some(cs.state.gap.g), Some(cs.state.gap.h)),
        _ => (None, None),
    };
    Ok(PosteriorSample {
        sweep,
        log_post: report.total,
        l: cs.state.mt.len() as u32,
        rmsd,
        s: cs.s,
        ext: cs.ext,
        g,
        h,
        pam_l: cs.state.pam_l,
        matching: cs.state.mt.clone(),
        transform: cs.state.t.clone(),
    })
}

/// Core loop shared by [`run_chain`] and [`run_tempered`]. Replica r
/// draws from ChaCha20 stream r of the master seed; stream R (one past
/// the last replica) drives the swap decisions, so a one-rung ladder
/// consumes exactly the plain chain's randomness.
fn run_ladder(
    ctx: &SamplerCtx,
    init: &InitState,
    ladder: &[f64],
    mut raw_observer: Option<&mut dyn FnMut(&PosteriorSample)>,
) -> Result<RunOutput> {
    let cfg = ctx.cfg;
    let mut replicas: Vec<ChainState> = Vec::with_capacity(ladder.len());
    let mut rngs: Vec<ChaCha20Rng> = Vec::with_capacity(ladder.len());
    for r in 0..ladder.len() {
        replicas.push(initial_chain_state(ctx, init)?);
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
        rng.set_stream(r as u64);
        rngs.push(rng);
    }
    let mut swap_rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    swap_rng.set_stream(ladder.len() as u64);

    let mut stats = AcceptanceStats::default();
    let mut samples = Vec::with_capacity(((cfg.sweeps - cfg.burn_in) / cfg.thin) as usize);

    for sweep in 1..=cfg.sweeps {
        for (r, beta) in ladder.iter().enumerate() {
            let stats_slot = if r == 0 { Some(&mut stats) } else { None };
            sweep_replica(ctx, &mut replicas[r], *beta, &mut rngs[r], stats_slot);
        }
        if ladder.len() > 1 {
            let mut log_posts: Vec<f64> = Vec::with_capacity(ladder.len());
            for cs in &replicas {
                log_posts.push(model::log_joint(ctx.x, ctx.y, &cs.state, cfg, ctx.tables)?.total);
            }
            for i in 0..ladder.len() - 1 {
                stats.swap_proposed += 1;
                let log_alpha = (ladder[i] - ladder[i + 1]) * (log_posts[i + 1] - log_posts[i]);
                if log_alpha >= 0.0 || swap_rng.random::<f64>().ln() < log_alpha {
                    replicas.swap(i, i + 1);
                    log_posts.swap(i, i + 1);
                    stats.swap_accepted += 1;
                }
            }
        }
        if sweep % AUDIT_INTERVAL == 0 {
            for cs in &replicas {
                assert!(cs.audit(), "gap-count cache diverged at sweep {sweep}");
            }
        }
        let thinned = sweep > cfg.burn_in && (sweep - cfg.burn_in).is_multiple_of(cfg.thin);
        if raw_observer.is_some() || thinned {
            let sample = record_sample(ctx, &replicas[0], sweep)?;
            if let Some(obs) = raw_observer.as_deref_mut() {
                obs(&sample);
            }
            if thinned {
                samples.push(sample);
            }
        }
    }
    Ok(RunOutput {
        samples,
        acceptance: stats,
    })
}

/// Runs a single chain. Deterministic given the config seed; emits the
/// thinned post-burn-in stream.
pub fn run_chain(
    x: &Configuration,
    y: &Configuration,
    cfg: &ModelConfig,
    tables: &ModelTables,
    init: &InitState,
) -> Result<RunOutput> {
    let ctx = SamplerCtx::new(x, y, cfg, tables)?;
    run_ladder(&ctx, init, &[1.0], None)
}

/// Like [`run_chain`] but also hands every sweep's cold-chain record to
/// `observer` before burn-in and thinning, for diagnostics.
pub fn run_chain_observed(
    x: &Configuration,
    y: &Configuration,
    cfg: &ModelConfig,
    tables: &ModelTables,
    init: &InitState,
    observer: &mut dyn FnMut(&PosteriorSample),
) -> Result<RunOutput> {
    let ctx = SamplerCtx::new(x, y, cfg, tables)?;
    run_ladder(&ctx, init, &[1.0], Some(observer))
}

/// Parallel tempering: replicas at the configured inverse temperatures
/// (default geometric ladder, 4 rungs, ratio 0.7) with adjacent-rung
/// swaps each sweep. Only the cold chain is recorded. A one-rung ladder
/// reduces to [`run_chain`] exactly, stream for stream.
pub fn run_tempered(
    x: &Configuration,
    y: &Configuration,
    cfg: &ModelConfig,
    tables: &ModelTables,
    init: &InitState,
) -> Result<RunOutput> {
    let ctx = SamplerCtx::new(x, y, cfg, tables)?;
    let ladder = cfg
        .temperatures
        .clone()
        .unwrap_or_else(ModelConfig::default_ladder);
    run_ladder(&ctx, init, &ladder, None)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
