//! Core value types shared by all modules.
//!
//! Everything here is an immutable value: cheap to clone and safe to send
//! between concurrent chains. Indices in [`Matching`] are 1-based to match
//! the conventions of the file formats; internal loops convert as needed.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orthonormality / determinant tolerance for rotation matrices.
pub const ROTATION_TOL: f64 = 1e-10;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// An ordered 3-D point set (Cα coordinates, Ångström) with optional
/// residue labels (amino-acid codes 1-20).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    points: Vec<Vector3<f64>>,
    residues: Option<Vec<u8>>,
    id: String,
}

impl Configuration {
    /// Validates: non-empty, finite coordinates, residue labels (if any)
    /// matching the point count and lying in 1..=20.
    pub fn new(
        points: Vec<Vector3<f64>>,
        residues: Option<Vec<u8>>,
        id: impl Into<String>,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidConfiguration("no points".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidConfiguration(format!(
                    "non-finite coordinate at point {}",
                    i + 1
                )));
            }
        }
        if let Some(res) = &residues {
            if res.len() != points.len() {
                return Err(Error::InvalidConfiguration(format!(
                    "{} residues for {} points",
                    res.len(),
                    points.len()
                )));
            }
            for (i, &code) in res.iter().enumerate() {
                if !(1..=20).contains(&code) {
                    return Err(Error::InvalidResidue {
                        code: code as i64,
                        position: i + 1,
                    });
                }
            }
        }
        Ok(Self {
            points,
            residues,
            id: id.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    /// 1-based access, matching the index convention of [`Matching`].
    pub fn point(&self, idx: u32) -> &Vector3<f64> {
        &self.points[idx as usize - 1]
    }

    pub fn residues(&self) -> Option<&[u8]> {
        self.residues.as_deref()
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn centroid(&self) -> Vector3<f64> {
        self.points.iter().sum::<Vector3<f64>>() / self.points.len() as f64
    }
}

// ---------------------------------------------------------------------------
// Matching
// ---------------------------------------------------------------------------

/// First violated invariant of a candidate matching.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MatchingViolation {
    #[error("duplicate j index at position {position}")]
    DuplicateJ { position: usize },
    #[error("duplicate k index at position {position}")]
    DuplicateK { position: usize },
    #[error("non-monotone at position {position}")]
    NonMonotone { position: usize },
    #[error("index out of range at position {position}: ({j}, {k}) with m={m}, n={n}")]
    OutOfRange {
        position: usize,
        j: u32,
        k: u32,
        m: usize,
        n: usize,
    },
}

/// A sequence-order-preserving matching between an `m`-point and an
/// `n`-point configuration, stored sparsely as an ordered list of 1-based
/// `(j, k)` pairs with `j` and `k` both strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    pairs: Vec<(u32, u32)>,
    m: usize,
    n: usize,
}

/// Checks the [`Matching`] invariants, reporting the first violation.
///
/// The report is a value, not a failure of this function: use it to
/// surface *which* invariant a candidate pair list breaks.
pub fn validate_matching(
    pairs: &[(u32, u32)],
    m: usize,
    n: usize,
) -> std::result::Result<(), MatchingViolation> {
    for (i, &(j, k)) in pairs.iter().enumerate() {
        if j < 1 || j as usize > m || k < 1 || k as usize > n {
            return Err(MatchingViolation::OutOfRange {
                position: i + 1,
                j,
                k,
                m,
                n,
            });
        }
        if i > 0 {
            let (pj, pk) = pairs[i - 1];
            if j == pj {
                return Err(MatchingViolation::DuplicateJ { position: i + 1 });
            }
            if k == pk {
                return Err(MatchingViolation::DuplicateK { position: i + 1 });
            }
            if j < pj || k < pk {
                return Err(MatchingViolation::NonMonotone { position: i + 1 });
            }
        }
    }
    Ok(())
}

impl Matching {
    pub fn new(pairs: Vec<(u32, u32)>, m: usize, n: usize) -> Result<Self> {
        validate_matching(&pairs, m, n)?;
        Ok(Self { pairs, m, n })
    }

    pub fn empty(m: usize, n: usize) -> Self {
        Self {
            pairs: Vec::new(),
            m,
            n,
        }
    }

    /// Number of matched pairs, `L`.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The same matching viewed with the configurations swapped.
    pub fn transposed(&self) -> Matching {
        Matching {
            pairs: self.pairs.iter().map(|&(j, k)| (k, j)).collect(),
            m: self.n,
            n: self.m,
        }
    }

    pub(crate) fn pairs_mut(&mut self) -> &mut Vec<(u32, u32)> {
        &mut self.pairs
    }

    pub fn validate(&self) -> std::result::Result<(), MatchingViolation> {
        validate_matching(&self.pairs, self.m, self.n)
    }
}

// ---------------------------------------------------------------------------
// TransformState
// ---------------------------------------------------------------------------

/// Plane rotation acting in coordinates `(a, b)` of 3-space.
fn plane_rotation(a: usize, b: usize, theta: f64) -> Matrix3<f64> {
    let (s, c) = theta.sin_cos();
    let mut r = Matrix3::identity();
    r[(a, a)] = c;
    r[(a, b)] = -s;
    r[(b, a)] = s;
    r[(b, b)] = c;
    r
}

/// Composes the fixed convention `R = R12(θ12) · R13(θ13) · R23(θ23)`,
/// where `Rab` rotates in the `(a, b)` coordinate plane.
pub fn euler_to_rotation(theta12: f64, theta13: f64, theta23: f64) -> Matrix3<f64> {
    plane_rotation(0, 1, theta12) * plane_rotation(0, 2, theta13) * plane_rotation(1, 2, theta23)
}

/// Inverse of [`euler_to_rotation`]. Returns angles with
/// `θ13 ∈ [-π/2, π/2]`; near the gimbal-locked poles `θ23` is set to 0.
pub fn rotation_to_euler(r: &Matrix3<f64>) -> [f64; 3] {
    // R[(2,0)] = sin θ13, R[(0,0)] = cos θ12 cos θ13, R[(1,0)] = sin θ12 cos θ13,
    // R[(2,1)] = cos θ13 sin θ23, R[(2,2)] = cos θ13 cos θ23.
    let s13 = r[(2, 0)].clamp(-1.0, 1.0);
    let theta13 = s13.asin();
    let c13 = theta13.cos();
    if c13.abs() < 1e-12 {
        // Gimbal lock: only θ12 ± θ23 is determined; put it all in θ12.
        let theta12 = f64::atan2(-r[(0, 1)], r[(1, 1)]);
        return [theta12, theta13, 0.0];
    }
    let theta12 = f64::atan2(r[(1, 0)], r[(0, 0)]);
    let theta23 = f64::atan2(r[(2, 1)], r[(2, 2)]);
    [theta12, theta13, theta23]
}

/// Rigid-body transform plus noise scale: rotation (Euler-angle
/// parameterized, matrix cached), translation τ, and σ > 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformState {
    euler: [f64; 3],
    rotation: Matrix3<f64>,
    tau: Vector3<f64>,
    sigma: f64,
}

impl TransformState {
    pub fn new(euler: [f64; 3], tau: Vector3<f64>, sigma: f64) -> Result<Self> {
        if !euler.iter().all(|a| a.is_finite()) {
            return Err(Error::InvalidTransform("non-finite Euler angle".into()));
        }
        if sigma.is_nan() || sigma <= 0.0 || !sigma.is_finite() {
            return Err(Error::InvalidTransform(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        if !tau.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidTransform("non-finite translation".into()));
        }
        let rotation = euler_to_rotation(euler[0], euler[1], euler[2]);
        Ok(Self {
            euler,
            rotation,
            tau,
            sigma,
        })
    }

    /// Builds from an explicit rotation matrix, extracting the Euler
    /// angles. Rejects matrices that are not proper rotations.
    pub fn from_rotation(rotation: Matrix3<f64>, tau: Vector3<f64>, sigma: f64) -> Result<Self> {
        let defect = (rotation.transpose() * rotation - Matrix3::identity())
            .abs()
            .max();
        if defect > ROTATION_TOL {
            return Err(Error::InvalidTransform(format!(
                "matrix is not orthonormal (defect {defect:.2e})"
            )));
        }
        if (rotation.determinant() - 1.0).abs() > ROTATION_TOL {
            return Err(Error::InvalidTransform(
                "matrix has determinant != +1".into(),
            ));
        }
        let euler = rotation_to_euler(&rotation);
        // Re-derive the cached matrix from the angles so the pair stays consistent.
        Self::new(euler, tau, sigma)
    }

    pub fn identity() -> Self {
        Self::new([0.0; 3], Vector3::zeros(), 1.0).unwrap()
    }

    pub fn euler(&self) -> [f64; 3] {
        self.euler
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn tau(&self) -> &Vector3<f64> {
        &self.tau
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub(crate) fn set_sigma(&mut self, sigma: f64) {
        debug_assert!(sigma > 0.0);
        self.sigma = sigma;
    }

    pub(crate) fn set_tau(&mut self, tau: Vector3<f64>) {
        self.tau = tau;
    }

    pub(crate) fn set_euler(&mut self, euler: [f64; 3]) {
        self.euler = euler;
        self.rotation = euler_to_rotation(euler[0], euler[1], euler[2]);
    }

    /// `rotation · y + τ`.
    pub fn apply(&self, y: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * y + self.tau
    }
}

/// Applies the rigid-body transform to a point: `A·y + τ`.
pub fn apply_transform(t: &TransformState, y: &Vector3<f64>) -> Vector3<f64> {
    t.apply(y)
}

// ---------------------------------------------------------------------------
// GapParams
// ---------------------------------------------------------------------------

/// Gap opening (`g`) and extension (`h`) penalties, both non-negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapParams {
    pub g: f64,
    pub h: f64,
}

impl GapParams {
    pub fn new(g: f64, h: f64) -> Result<Self> {
        if g.is_nan() || h.is_nan() || g < 0.0 || h < 0.0 || !g.is_finite() || !h.is_finite() {
            return Err(Error::InvalidModelConfig(format!(
                "gap penalties must be non-negative, got g={g}, h={h}"
            )));
        }
        Ok(Self { g, h })
    }
}

// ---------------------------------------------------------------------------
// ModelConfig
// ---------------------------------------------------------------------------

/// Gamma hyperpriors on the gap penalties: `g ~ Γ(a_g, b_g)`, `h ~ Γ(a_h, b_h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapHyper {
    pub a_g: f64,
    pub b_g: f64,
    pub a_h: f64,
    pub b_h: f64,
}

/// Midpoint-quadrature grid over `[0, g_max] × [0, h_max]` with `n × n` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub g_max: f64,
    pub h_max: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GapMode {
    /// Penalties fixed by the user.
    Fixed(GapParams),
    /// Penalties sampled under gamma priors.
    Sampled(GapHyper),
    /// Penalties integrated out by midpoint quadrature.
    Integrated { hyper: GapHyper, grid: GridSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SeqMode {
    /// Structure only.
    Off,
    /// Sequence likelihood at a fixed PAM distance.
    FixedPam(u32),
    /// PAM distance sampled over a discrete set under a discretized normal prior.
    SampledPam {
        distances: Vec<u32>,
        mu_l: f64,
        sigma_l: f64,
    },
}

/// Full run configuration: model constants, priors, mode selections and
/// sampler schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Hidden-point volume. Larger values favour more matches.
    pub v: f64,
    /// Matrix-Fisher prior parameter on the rotation; zero means uniform.
    pub prior_f0: Matrix3<f64>,
    pub mu_tau: Vector3<f64>,
    pub sigma_tau: f64,
    /// Gamma prior on σ⁻²: shape α, rate β.
    pub alpha: f64,
    pub beta: f64,
    pub gap_mode: GapMode,
    pub seq_mode: SeqMode,
    pub sweeps: u64,
    pub burn_in: u64,
    /// Keep every `thin`-th post-burn-in sweep.
    pub thin: u64,
    /// Matching proposals per sweep; `None` means `m + n`.
    pub moves_per_sweep: Option<u32>,
    /// Probability of proposing deletion of a matched point.
    pub p_star: f64,
    /// Inverse-temperature ladder for parallel tempering. `None` or a
    /// single entry runs a plain chain.
    pub temperatures: Option<Vec<f64>>,
    pub seed: u64,
    /// Include the invariant-measure density (|cos θ13|) so the uniform
    /// matrix-Fisher case targets Haar measure rather than flat angles.
    pub haar_correction: bool,
    /// Half-width of the uniform random-walk proposal on each Euler angle.
    pub rot_step: f64,
    /// Half-width `a` of the geometric random walk g' = g·exp(U[-a, a]).
    pub gap_step: f64,
    /// Diagnostic hook: drop the structural-likelihood factor from the
    /// matching moves so the M-chain samples its prior.
    pub matching_prior_only: bool,
}

impl ModelConfig {
    /// Reference settings with the given seed (v = 5000, fixed penalties
    /// (4, 0.1), σ_τ = 500, α = 1, β = 8, 4.8M sweeps thinned to 2000
    /// draws). `mu_tau` should normally be reset to the centroid
    /// difference of the data.
    pub fn defaults(seed: u64) -> Self {
        Self {
            v: 5000.0,
            prior_f0: Matrix3::zeros(),
            mu_tau: Vector3::zeros(),
            sigma_tau: 500.0,
            alpha: 1.0,
            beta: 8.0,
            gap_mode: GapMode::Fixed(GapParams { g: 4.0, h: 0.1 }),
            seq_mode: SeqMode::Off,
            sweeps: 4_800_000,
            burn_in: 800_000,
            thin: 2_000,
            moves_per_sweep: None,
            p_star: 0.5,
            temperatures: None,
            seed,
            haar_correction: true,
            rot_step: 0.05,
            gap_step: 0.3,
            matching_prior_only: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModelConfig(msg));
        if self.v.is_nan() || self.v <= 0.0 {
            return bad(format!("v must be positive, got {}", self.v));
        }
        if self.sigma_tau.is_nan() || self.sigma_tau <= 0.0 {
            return bad(format!(
                "sigma_tau must be positive, got {}",
                self.sigma_tau
            ));
        }
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return bad(format!(
                "alpha, beta must be positive, got {}, {}",
                self.alpha, self.beta
            ));
        }
        if self.sweeps == 0 || self.thin == 0 {
            return bad("sweeps and thin must be positive".into());
        }
        if self.burn_in >= self.sweeps {
            return bad(format!(
                "burn_in {} must be < sweeps {}",
                self.burn_in, self.sweeps
            ));
        }
        if !(self.p_star > 0.0 && self.p_star < 1.0) {
            return bad(format!("p_star must lie in (0, 1), got {}", self.p_star));
        }
        if !(self.rot_step >= 0.0 && self.gap_step > 0.0) {
            return bad("rot_step must be >= 0 and gap_step > 0".into());
        }
        match &self.gap_mode {
            GapMode::Fixed(gp) => {
                GapParams::new(gp.g, gp.h)?;
            }
            GapMode::Sampled(hy) => validate_hyper(hy)?,
            GapMode::Integrated { hyper, grid } => {
                validate_hyper(hyper)?;
                // The integrand contains log g and log h; midpoint quadrature
                // over [0, max] is only proper for shape >= 1.
                if hyper.a_g < 1.0 || hyper.a_h < 1.0 {
                    return bad(format!(
                        "integrated gap mode requires a_g >= 1 and a_h >= 1, got {}, {}",
                        hyper.a_g, hyper.a_h
                    ));
                }
                if !(grid.g_max > 0.0 && grid.h_max > 0.0) || grid.n < 2 {
                    return bad("quadrature grid must have positive ranges and n >= 2".into());
                }
            }
        }
        match &self.seq_mode {
            SeqMode::Off => {}
            SeqMode::FixedPam(l) => {
                if *l == 0 {
                    return bad("PAM distance must be >= 1".into());
                }
            }
            SeqMode::SampledPam {
                distances,
                mu_l: _,
                sigma_l,
            } => {
                if distances.is_empty() {
                    return bad("PAM distance set must be non-empty".into());
                }
                if !distances.windows(2).all(|w| w[0] < w[1]) {
                    return bad("PAM distance set must be strictly ascending".into());
                }
                if distances[0] == 0 {
                    return bad("PAM distances must be >= 1".into());
                }
                if sigma_l.is_nan() || *sigma_l <= 0.0 {
                    return bad(format!("sigma_l must be positive, got {sigma_l}"));
                }
            }
        }
        if let Some(ladder) = &self.temperatures {
            if ladder.is_empty() {
                return bad("temperature ladder must be non-empty".into());
            }
            if (ladder[0] - 1.0).abs() > 1e-12 {
                return bad("temperature ladder must start at 1.0 (the cold chain)".into());
            }
            if !ladder.iter().all(|b| *b > 0.0) || !ladder.windows(2).all(|w| w[1] < w[0]) {
                return bad("temperature ladder must be positive and strictly decreasing".into());
            }
        }
        Ok(())
    }

    /// The standard 37-value PAM distance set {40, 50, ..., 400}.
    pub fn standard_pam_distances() -> Vec<u32> {
        (4..=40).map(|i| i * 10).collect()
    }

    /// Default geometric tempering ladder: 4 rungs, ratio 0.7 on the
    /// inverse temperature.
    pub fn default_ladder() -> Vec<f64> {
        (0..4).map(|r| 0.7f64.powi(r)).collect()
    }
}

fn validate_hyper(hy: &GapHyper) -> Result<()> {
    if !(hy.a_g > 0.0 && hy.b_g > 0.0 && hy.a_h > 0.0 && hy.b_h > 0.0) {
        return Err(Error::InvalidModelConfig(format!(
            "gap hyperparameters must be positive, got a_g={}, b_g={}, a_h={}, b_h={}",
            hy.a_g, hy.b_g, hy.a_h, hy.b_h
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z)
    }

    #[test]
    fn validate_matching_ok() {
        assert!(validate_matching(&[(1, 1), (2, 3)], 3, 3).is_ok());
        assert!(validate_matching(&[], 3, 3).is_ok());
    }

    #[test]
    fn validate_matching_non_monotone() {
        let err = validate_matching(&[(2, 3), (1, 1)], 3, 3).unwrap_err();
        assert_eq!(err, MatchingViolation::NonMonotone { position: 2 });
    }

    #[test]
    fn validate_matching_duplicate_j() {
        let err = validate_matching(&[(1, 1), (1, 2)], 3, 3).unwrap_err();
        assert_eq!(err, MatchingViolation::DuplicateJ { position: 2 });
    }

    #[test]
    fn validate_matching_out_of_range() {
        let err = validate_matching(&[(1, 4)], 3, 3).unwrap_err();
        assert!(matches!(
            err,
            MatchingViolation::OutOfRange { position: 1, .. }
        ));
    }

    #[test]
    fn apply_transform_identity() {
        let t = TransformState::identity();
        let y = v(1.0, 2.0, 3.0);
        assert_eq!(apply_transform(&t, &y), y);
    }

    #[test]
    fn apply_transform_quarter_turn() {
        // R12(π/2) is a rotation by π/2 about the third axis.
        let t = TransformState::new(
            [std::f64::consts::FRAC_PI_2, 0.0, 0.0],
            Vector3::zeros(),
            1.0,
        )
        .unwrap();
        let out = apply_transform(&t, &v(1.0, 0.0, 0.0));
        assert!((out - v(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn apply_transform_matches_dense_product() {
        // Brute-force 3x3 matrix-vector product, written out by hand.
        let t = TransformState::new([0.3, -1.1, 2.4], v(0.5, -2.0, 7.0), 2.0).unwrap();
        let y = v(-1.5, 0.25, 3.75);
        let r = t.rotation();
        let mut expect = [0.0; 3];
        for (row, e) in expect.iter_mut().enumerate() {
            for col in 0..3 {
                *e += r[(row, col)] * y[col];
            }
            *e += t.tau()[row];
        }
        let got = apply_transform(&t, &y);
        for (row, e) in expect.iter().enumerate() {
            assert!((got[row] - e).abs() < 1e-14);
        }
    }

    #[test]
    fn euler_zero_is_identity() {
        let r = euler_to_rotation(0.0, 0.0, 0.0);
        assert!((r - Matrix3::identity()).abs().max() < 1e-15);
    }

    #[test]
    fn euler_half_turn_in_plane_12() {
        let r = euler_to_rotation(std::f64::consts::PI, 0.0, 0.0);
        let expect = Matrix3::new(-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0);
        assert!((r - expect).abs().max() < 1e-12);
    }

    #[test]
    fn euler_random_angles_are_orthonormal() {
        let mut state = 0x243F6A8885A308D3u64;
        let mut next = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 6.0
        };
        for _ in 0..100 {
            let r = euler_to_rotation(next(), next(), next());
            let defect = (r.transpose() * r - Matrix3::identity()).abs().max();
            assert!(defect < 1e-12, "orthonormality defect {defect}");
            assert!((r.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn euler_round_trips_through_rotation() {
        let angles = [
            [0.3, 0.7, -1.2],
            [-2.9, 1.4, 0.0],
            [3.0, -1.5, 2.8],
            [0.0, 0.0, 0.0],
        ];
        for a in angles {
            let r = euler_to_rotation(a[0], a[1], a[2]);
            let back = rotation_to_euler(&r);
            let r2 = euler_to_rotation(back[0], back[1], back[2]);
            assert!((r - r2).abs().max() < 1e-12, "angles {a:?} -> {back:?}");
        }
    }

    #[test]
    fn transform_from_rotation_rejects_non_rotation() {
        let m = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0);
        assert!(TransformState::from_rotation(m, Vector3::zeros(), 1.0).is_err());
        // Reflection: orthonormal but determinant -1.
        let refl = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(TransformState::from_rotation(refl, Vector3::zeros(), 1.0).is_err());
    }

    #[test]
    fn transform_rejects_bad_sigma() {
        assert!(TransformState::new([0.0; 3], Vector3::zeros(), 0.0).is_err());
        assert!(TransformState::new([0.0; 3], Vector3::zeros(), -1.0).is_err());
        assert!(TransformState::new([0.0; 3], Vector3::zeros(), f64::NAN).is_err());
    }

    #[test]
    fn configuration_validation() {
        assert!(Configuration::new(vec![], None, "x").is_err());
        assert!(Configuration::new(vec![v(f64::NAN, 0.0, 0.0)], None, "x").is_err());
        assert!(Configuration::new(vec![v(0.0, 0.0, 0.0)], Some(vec![1, 2]), "x").is_err());
        assert!(Configuration::new(vec![v(0.0, 0.0, 0.0)], Some(vec![21]), "x").is_err());
        let c = Configuration::new(vec![v(1.0, 0.0, 0.0), v(3.0, 0.0, 0.0)], None, "x").unwrap();
        assert_eq!(c.centroid(), v(2.0, 0.0, 0.0));
    }

    #[test]
    fn model_config_validation() {
        let mut cfg = ModelConfig::defaults(1);
        assert!(cfg.validate().is_ok());
        cfg.burn_in = cfg.sweeps;
        assert!(cfg.validate().is_err());

        let mut cfg = ModelConfig::defaults(1);
        cfg.gap_mode = GapMode::Integrated {
            hyper: GapHyper {
                a_g: 0.5,
                b_g: 0.5,
                a_h: 2.0,
                b_h: 20.0,
            },
            grid: GridSpec {
                g_max: 20.0,
                h_max: 2.0,
                n: 100,
            },
        };
        // a_g < 1 makes the quadrature integrand divergent at zero.
        assert!(cfg.validate().is_err());

        let mut cfg = ModelConfig::defaults(1);
        cfg.temperatures = Some(vec![0.7, 1.0]);
        assert!(cfg.validate().is_err());
        cfg.temperatures = Some(ModelConfig::default_ladder());
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn standard_pam_set_has_37_values() {
        let d = ModelConfig::standard_pam_distances();
        assert_eq!(d.len(), 37);
        assert_eq!(d[0], 40);
        assert_eq!(*d.last().unwrap(), 400);
    }
}
