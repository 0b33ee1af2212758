//! Log-density evaluation: structural likelihood, parameter priors, and
//! the joint posterior in all mode combinations.
//!
//! Everything is computed in log space. Normalizing constants that cancel
//! in every Metropolis-Hastings ratio are dropped, one convention per
//! factor: the matching prior carries log Z only when (g, h) are sampled;
//! the gamma priors on g, h and σ⁻² are unnormalized; the translation
//! prior and the matched-pair densities keep their full constants because
//! σ varies during sampling.

use std::collections::HashMap;
use std::sync::Mutex;

use nalgebra::{Matrix3, Vector3};

use crate::domain::{
    Configuration, GapMode, GapParams, Matching, ModelConfig, SeqMode, TransformState,
};
use crate::error::{Error, Result};
use crate::gapmodel::{self, MarginalPrior, QuadratureGrid};
use crate::pam::{PamCache, PamPrior, SubstitutionChain};

/// One-pair contribution to the structural likelihood:
/// `log φ(δ/(σ√2)) - 3·log(σ√2)` with φ the standard 3-D normal density.
pub(crate) fn pair_log_phi(delta: &Vector3<f64>, sigma: f64) -> f64 {
    let scale2 = 2.0 * sigma * sigma;
    -1.5 * (std::f64::consts::TAU * scale2).ln() - delta.norm_squared() / (2.0 * scale2)
}

/// Structural log-likelihood of Eq.-(1) form:
/// `-(m+n-L)·log v + n·log|A| + Σ_matched [log φ(δ/(σ√2)) - 3 log(σ√2)]`.
/// `|A| = 1` for proper rotations, so that term vanishes but is kept explicit.
pub fn log_structural_likelihood(
    x: &Configuration,
    y: &Configuration,
    mt: &Matching,
    t: &TransformState,
    v: f64,
) -> f64 {
    let (m, n, l) = (x.len(), y.len(), mt.len());
    let mut total = -((m + n - l) as f64) * v.ln();
    total += n as f64 * t.rotation().determinant().ln();
    for &(j, k) in mt.pairs() {
        let delta = x.point(j) - t.apply(y.point(k));
        total += pair_log_phi(&delta, t.sigma());
    }
    total
}

/// Matrix-Fisher log prior `tr(F₀ᵀ·A)`, unnormalized. Zero when F₀ = 0.
pub fn log_prior_rotation(t: &TransformState, f0: &Matrix3<f64>) -> f64 {
    (f0.transpose() * t.rotation()).trace()
}

/// Invariant-measure density of the Euler parameterization: the pushforward
/// of Haar measure onto the angles is proportional to |cos θ13|.
pub fn log_haar_density(euler: &[f64; 3]) -> f64 {
    euler[1].cos().abs().ln()
}

/// Isotropic 3-D normal log-density of τ, constants included.
pub fn log_prior_translation(tau: &Vector3<f64>, mu_tau: &Vector3<f64>, sigma_tau: f64) -> f64 {
    let var = sigma_tau * sigma_tau;
    -1.5 * (std::f64::consts::TAU * var).ln() - (tau - mu_tau).norm_squared() / (2.0 * var)
}

/// Gamma log prior evaluated in the σ⁻² variable, unnormalized:
/// `(α-1)·log σ⁻² - β·σ⁻²`. Out-of-support values map to -inf.
pub fn log_prior_precision(sigma: f64, alpha: f64, beta: f64) -> f64 {
    if sigma.is_nan() || sigma <= 0.0 || !sigma.is_finite() {
        return f64::NEG_INFINITY;
    }
    let lambda = 1.0 / (sigma * sigma);
    (alpha - 1.0) * lambda.ln() - beta * lambda
}

/// Root mean squared deviation over matched pairs after transformation.
pub fn rmsd(
    x: &Configuration,
    y: &Configuration,
    mt: &Matching,
    t: &TransformState,
) -> Result<f64> {
    if mt.is_empty() {
        return Err(Error::EmptyMatching);
    }
    let mut ss = 0.0;
    for &(j, k) in mt.pairs() {
        ss += (x.point(j) - t.apply(y.point(k))).norm_squared();
    }
    Ok((ss / mt.len() as f64).sqrt())
}

// ---------------------------------------------------------------------------
// Joint density
// ---------------------------------------------------------------------------

/// Everything the sampler varies.
#[derive(Debug, Clone)]
pub struct AlignmentState {
    pub mt: Matching,
    pub t: TransformState,
    /// Current gap penalties. In integrated mode these are unused.
    pub gap: GapParams,
    /// Current PAM distance when the sequence mode samples it.
    pub pam_l: Option<u32>,
}

/// Precomputed per-run tables shared read-only across chains.
pub struct ModelTables {
    /// Integrated-gap mode: cached quadrature prior.
    pub marginal: Option<MarginalPrior>,
    /// Sequence modes: the chain, one ψ table per distance, and the
    /// distance prior when sampled.
    pub seq: Option<SeqTables>,
    /// Sampled-gap mode: memo of log Z(g, h), keyed by the pair rounded
    /// to 1e-12.
    z_memo: Option<Mutex<HashMap<(i64, i64), f64>>>,
    m: usize,
    n: usize,
}

pub struct SeqTables {
    pub chain: SubstitutionChain,
    pub cache: PamCache,
    pub prior: Option<PamPrior>,
}

impl ModelTables {
    /// Builds the tables a configuration requires. `chain` must be given
    /// exactly when the sequence mode is enabled.
    pub fn build(
        cfg: &ModelConfig,
        m: usize,
        n: usize,
        chain: Option<SubstitutionChain>,
    ) -> Result<Self> {
        cfg.validate()?;
        let marginal = match &cfg.gap_mode {
            GapMode::Integrated { hyper, grid } => Some(MarginalPrior::new(
                QuadratureGrid::build(m, n, *grid)?,
                *hyper,
            )),
            _ => None,
        };
        let z_memo = match &cfg.gap_mode {
            GapMode::Sampled(_) => Some(Mutex::new(HashMap::new())),
            _ => None,
        };
        let seq = match &cfg.seq_mode {
            SeqMode::Off => None,
            SeqMode::FixedPam(l) => {
                let chain = chain.ok_or_else(|| {
                    Error::MissingSequence("substitution chain required for sequence mode".into())
                })?;
                let cache = PamCache::build(&chain, &[*l])?;
                Some(SeqTables {
                    chain,
                    cache,
                    prior: None,
                })
            }
            SeqMode::SampledPam {
                distances,
                mu_l,
                sigma_l,
            } => {
                let chain = chain.ok_or_else(|| {
                    Error::MissingSequence("substitution chain required for sequence mode".into())
                })?;
                let cache = PamCache::build(&chain, distances)?;
                let prior = PamPrior::new(distances.clone(), *mu_l, *sigma_l)?;
                Some(SeqTables {
                    chain,
                    cache,
                    prior: Some(prior),
                })
            }
        };
        Ok(Self {
            marginal,
            seq,
            z_memo,
            m,
            n,
        })
    }

    /// `log Z(g, h)` for the sampled-gap acceptance ratio, memoized.
    pub fn log_z(&self, gp: &GapParams) -> f64 {
        let memo = self
            .z_memo
            .as_ref()
            .expect("log_z requires sampled-gap mode");
        let key = ((gp.g * 1e12).round() as i64, (gp.h * 1e12).round() as i64);
        let mut memo = memo.lock().expect("z memo poisoned");
        *memo
            .entry(key)
            .or_insert_with(|| gapmodel::log_normalizer(self.m, self.n, gp))
    }

    pub fn sizes(&self) -> (usize, usize) {
        (self.m, self.n)
    }
}

/// Additive decomposition of the joint log density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDensityReport {
    pub log_lik_struct: f64,
    pub log_prior_m: f64,
    pub log_prior_params: f64,
    pub log_lik_seq: Option<f64>,
    pub total: f64,
}

/// Evaluates the joint log density of the current state under the
/// configured mode, up to mode-constant terms.
pub fn log_joint(
    x: &Configuration,
    y: &Configuration,
    state: &AlignmentState,
    cfg: &ModelConfig,
    tables: &ModelTables,
) -> Result<LogDensityReport> {
    if tables.m != x.len() || tables.n != y.len() {
        return Err(Error::GridShapeMismatch {
            expected_m: tables.m,
            expected_n: tables.n,
            got_m: x.len(),
            got_n: y.len(),
        });
    }
    let log_lik_struct = log_structural_likelihood(x, y, &state.mt, &state.t, cfg.v);

    let (s, ext) = gapmodel::gap_counts(&state.mt);
    let log_prior_m = match &cfg.gap_mode {
        GapMode::Fixed(gp) => -(gp.g * s as f64 + gp.h * ext as f64),
        GapMode::Sampled(_) => {
            tables.log_z(&state.gap) - (state.gap.g * s as f64 + state.gap.h * ext as f64)
        }
        GapMode::Integrated { .. } => tables
            .marginal
            .as_ref()
            .expect("tables built for integrated mode")
            .log_prior(s, ext),
    };

    let mut log_prior_params = log_prior_rotation(&state.t, &cfg.prior_f0)
        + log_prior_translation(state.t.tau(), &cfg.mu_tau, cfg.sigma_tau)
        + log_prior_precision(state.t.sigma(), cfg.alpha, cfg.beta);
    if cfg.haar_correction {
        log_prior_params += log_haar_density(&state.t.euler());
    }
    if let GapMode::Sampled(hy) = &cfg.gap_mode {
        log_prior_params += (hy.a_g - 1.0) * state.gap.g.ln() - hy.b_g * state.gap.g;
        log_prior_params += (hy.a_h - 1.0) * state.gap.h.ln() - hy.b_h * state.gap.h;
    }

    let mut log_lik_seq = None;
    match &cfg.seq_mode {
        SeqMode::Off => {
            if state.pam_l.is_some() {
                return Err(Error::InvalidModelConfig(
                    "state carries a PAM distance but the sequence mode is off".into(),
                ));
            }
        }
        mode => {
            let seq = tables.seq.as_ref().expect("tables built for sequence mode");
            let l = match mode {
                SeqMode::FixedPam(l) => *l,
                SeqMode::SampledPam { .. } => state.pam_l.ok_or_else(|| {
                    Error::InvalidModelConfig("sampled-PAM mode requires a current distance".into())
                })?,
                SeqMode::Off => unreachable!(),
            };
            let pam = seq.cache.by_distance(l).ok_or_else(|| {
                Error::InvalidModelConfig(format!("PAM distance {l} not in the configured set"))
            })?;
            let sx = x.residues().ok_or_else(|| {
                Error::MissingSequence(format!("configuration {} has no residues", x.id()))
            })?;
            let sy = y.residues().ok_or_else(|| {
                Error::MissingSequence(format!("configuration {} has no residues", y.id()))
            })?;
            log_lik_seq = Some(crate::pam::log_seq_likelihood(
                sx, sy, &state.mt, pam, &seq.chain,
            )?);
            if let Some(prior) = &seq.prior {
                let idx = prior.index_of(l).expect("distance checked against cache");
                log_prior_params += prior.weights()[idx].ln();
            }
        }
    }

    let total = log_lik_struct + log_prior_m + log_prior_params + log_lik_seq.unwrap_or(0.0);
    Ok(LogDensityReport {
        log_lik_struct,
        log_prior_m,
        log_prior_params,
        log_lik_seq,
        total,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::euler_to_rotation;
    use nalgebra::Vector3;

    fn config(points: Vec<Vector3<f64>>) -> Configuration {
        Configuration::new(points, None, "t").unwrap()
    }

    fn v3(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z)
    }

    #[test]
    fn structural_likelihood_empty_matching() {
        let x = config(vec![v3(0.0, 0.0, 0.0), v3(1.0, 0.0, 0.0)]);
        let y = config(vec![v3(5.0, 0.0, 0.0)]);
        let mt = Matching::empty(2, 1);
        let got = log_structural_likelihood(&x, &y, &mt, &TransformState::identity(), 5000.0);
        assert_eq!(got, -3.0 * 5000.0f64.ln());
    }

    #[test]
    fn structural_likelihood_perfect_superposition() {
        let t = TransformState::new([0.4, -0.2, 1.0], v3(1.0, 2.0, 3.0), 0.7).unwrap();
        let y = config(vec![v3(0.0, 1.0, 2.0), v3(3.0, -1.0, 0.5)]);
        let x = config(y.points().iter().map(|p| t.apply(p)).collect());
        let mt = Matching::new(vec![(1, 1), (2, 2)], 2, 2).unwrap();
        let got = log_structural_likelihood(&x, &y, &mt, &t, 100.0);
        let sigma2 = 0.7f64 * 0.7;
        let expect =
            -2.0 * 100.0f64.ln() + 2.0 * (-1.5 * (4.0 * std::f64::consts::PI * sigma2).ln());
        assert!((got - expect).abs() < 1e-10);
    }

    #[test]
    fn structural_likelihood_matches_term_by_term_oracle() {
        let t = TransformState::new([0.3, 0.9, -0.5], v3(-2.0, 0.5, 4.0), 1.3).unwrap();
        let x = config(vec![
            v3(1.0, 2.0, 3.0),
            v3(4.0, 5.0, 6.0),
            v3(-1.0, 0.0, 2.0),
        ]);
        let y = config(vec![v3(0.0, 1.0, -1.0), v3(2.0, 2.0, 2.0)]);
        let mt = Matching::new(vec![(1, 1), (3, 2)], 3, 2).unwrap();
        let v = 777.0;
        let got = log_structural_likelihood(&x, &y, &mt, &t, v);

        // Independent evaluation, writing out the density by hand.
        let sigma = 1.3f64;
        let mut expect = -((3 + 2 - 2) as f64) * v.ln();
        for &(j, k) in mt.pairs() {
            let d = x.point(j) - (t.rotation() * y.point(k) + t.tau());
            let z2 = d.norm_squared() / (2.0 * sigma * sigma);
            let phi = (2.0 * std::f64::consts::PI).powf(-1.5) * (-z2 / 2.0).exp();
            expect += (phi / (sigma * 2.0f64.sqrt()).powi(3)).ln();
        }
        assert!((got - expect).abs() < 1e-10, "{got} vs {expect}");
    }

    #[test]
    fn rotation_prior_cases() {
        let t = TransformState::identity();
        assert_eq!(log_prior_rotation(&t, &Matrix3::zeros()), 0.0);
        assert_eq!(log_prior_rotation(&t, &Matrix3::identity()), 3.0);
        let half_turn = TransformState::from_rotation(
            euler_to_rotation(std::f64::consts::PI, 0.0, 0.0),
            Vector3::zeros(),
            1.0,
        )
        .unwrap();
        assert!((log_prior_rotation(&half_turn, &Matrix3::identity()) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn translation_prior_mode_and_shell() {
        let mu = v3(1.0, -2.0, 0.5);
        let sigma_tau = 3.0;
        let at_mode = log_prior_translation(&mu, &mu, sigma_tau);
        let expect = -1.5 * (std::f64::consts::TAU * sigma_tau * sigma_tau).ln();
        assert!((at_mode - expect).abs() < 1e-12);
        let on_shell = log_prior_translation(&(mu + v3(sigma_tau, 0.0, 0.0)), &mu, sigma_tau);
        assert!((on_shell - (at_mode - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn precision_prior_cases() {
        // α = 1 is the exponential case: density ∝ exp(-β/σ²).
        let val = log_prior_precision(2.0, 1.0, 8.0);
        assert!((val + 8.0 / 4.0).abs() < 1e-12);
        assert!((log_prior_precision(1.0, 2.0, 8.0) + 8.0).abs() < 1e-12);
        assert_eq!(
            log_prior_precision(f64::INFINITY, 2.0, 8.0),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn rmsd_cases() {
        let y = config(vec![v3(0.0, 0.0, 0.0), v3(1.0, 1.0, 1.0)]);
        let x = config(vec![v3(0.0, 0.0, 0.0), v3(1.0, 1.0, 1.0)]);
        let t = TransformState::identity();
        let full = Matching::new(vec![(1, 1), (2, 2)], 2, 2).unwrap();
        assert_eq!(rmsd(&x, &y, &full, &t).unwrap(), 0.0);

        let x2 = config(vec![v3(2.0, 0.0, 0.0), v3(1.0, 1.0, 1.0)]);
        let single = Matching::new(vec![(1, 1)], 2, 2).unwrap();
        assert!((rmsd(&x2, &y, &single, &t).unwrap() - 2.0).abs() < 1e-12);

        assert!(matches!(
            rmsd(&x, &y, &Matching::empty(2, 2), &t),
            Err(Error::EmptyMatching)
        ));
    }

    #[test]
    fn rmsd_invariant_under_common_rigid_motion() {
        let inst = crate::oracle::make_synthetic(6, 7, 4, 0.2, 15.0, 5);
        let t = inst.truth_transform.clone();
        let base = rmsd(&inst.x, &inst.y, &inst.truth, &t).unwrap();

        let r0 = euler_to_rotation(0.8, -0.3, 1.7);
        let shift = v3(4.0, -6.0, 2.5);
        let move_pts =
            |c: &Configuration| config(c.points().iter().map(|p| r0 * p + shift).collect());
        let x2 = move_pts(&inst.x);
        let y2 = move_pts(&inst.y);
        let a2 = r0 * t.rotation() * r0.transpose();
        let tau2 = r0 * t.tau() + shift - a2 * shift;
        let t2 = TransformState::from_rotation(a2, tau2, t.sigma()).unwrap();
        let moved = rmsd(&x2, &y2, &inst.truth, &t2).unwrap();
        assert!((base - moved).abs() < 1e-9, "{base} vs {moved}");
    }

    #[test]
    fn log_joint_fixed_gap_empty_matching_assembly() {
        let x = config(vec![v3(0.0, 0.0, 0.0), v3(1.0, 0.0, 0.0)]);
        let y = config(vec![v3(5.0, 0.0, 0.0)]);
        let mut cfg = ModelConfig::defaults(1);
        cfg.haar_correction = false;
        let tables = ModelTables::build(&cfg, 2, 1, None).unwrap();
        let state = AlignmentState {
            mt: Matching::empty(2, 1),
            t: TransformState::identity(),
            gap: GapParams { g: 4.0, h: 0.1 },
            pam_l: None,
        };
        let rep = log_joint(&x, &y, &state, &cfg, &tables).unwrap();
        let u_empty = crate::gapmodel::total_penalty(&state.mt, &GapParams { g: 4.0, h: 0.1 }).u;
        let priors = log_prior_translation(state.t.tau(), &cfg.mu_tau, cfg.sigma_tau)
            + log_prior_precision(1.0, cfg.alpha, cfg.beta);
        let expect = -3.0 * cfg.v.ln() - u_empty + priors;
        assert!((rep.total - expect).abs() < 1e-10);
    }

    #[test]
    fn log_joint_total_is_component_sum() {
        let inst = crate::oracle::fixture_small4();
        let mut cfg = ModelConfig::defaults(3);
        cfg.gap_mode = GapMode::Sampled(crate::domain::GapHyper {
            a_g: 2.0,
            b_g: 0.5,
            a_h: 2.0,
            b_h: 20.0,
        });
        let tables = ModelTables::build(&cfg, 4, 4, None).unwrap();
        let state = AlignmentState {
            mt: inst.truth.clone(),
            t: inst.truth_transform.clone(),
            gap: GapParams { g: 3.0, h: 0.2 },
            pam_l: None,
        };
        let rep = log_joint(&inst.x, &inst.y, &state, &cfg, &tables).unwrap();
        let sum = rep.log_lik_struct
            + rep.log_prior_m
            + rep.log_prior_params
            + rep.log_lik_seq.unwrap_or(0.0);
        assert!((rep.total - sum).abs() < 1e-12);
    }

    #[test]
    fn log_joint_rejects_inconsistent_mode_state() {
        let inst = crate::oracle::fixture_small4();
        let cfg = ModelConfig::defaults(3);
        let tables = ModelTables::build(&cfg, 4, 4, None).unwrap();
        let state = AlignmentState {
            mt: inst.truth.clone(),
            t: inst.truth_transform.clone(),
            gap: GapParams { g: 4.0, h: 0.1 },
            pam_l: Some(250),
        };
        assert!(log_joint(&inst.x, &inst.y, &state, &cfg, &tables).is_err());
    }

    #[test]
    fn log_joint_gap_factor_isolation() {
        // In sampled-gap mode the only (g, h)-dependent parts are
        // -u + log Z and the gamma prior terms.
        let inst = crate::oracle::fixture_small4();
        let hyper = crate::domain::GapHyper {
            a_g: 2.0,
            b_g: 0.5,
            a_h: 2.0,
            b_h: 20.0,
        };
        let mut cfg = ModelConfig::defaults(3);
        cfg.gap_mode = GapMode::Sampled(hyper);
        let tables = ModelTables::build(&cfg, 4, 4, None).unwrap();
        let mk_state = |g: f64, h: f64| AlignmentState {
            mt: inst.truth.clone(),
            t: inst.truth_transform.clone(),
            gap: GapParams { g, h },
            pam_l: None,
        };
        let (s, ext) = crate::gapmodel::gap_counts(&inst.truth);
        let a = log_joint(&inst.x, &inst.y, &mk_state(4.0, 0.1), &cfg, &tables).unwrap();
        let b = log_joint(&inst.x, &inst.y, &mk_state(1.5, 0.6), &cfg, &tables).unwrap();
        let factor = |g: f64, h: f64| {
            tables.log_z(&GapParams { g, h }) - g * s as f64 - h * ext as f64
                + (hyper.a_g - 1.0) * g.ln()
                - hyper.b_g * g
                + (hyper.a_h - 1.0) * h.ln()
                - hyper.b_h * h
        };
        let expect_diff = factor(4.0, 0.1) - factor(1.5, 0.6);
        assert!((a.total - b.total - expect_diff).abs() < 1e-10);
    }
}
