//! PAM substitution matrices, sequence likelihood, and the prior over
//! evolutionary distance.
//!
//! A one-step Markov model (the PAM-1 transition matrix plus amino-acid
//! abundances) is raised to the l-th power to describe substitutions over
//! l units of evolutionary time. The likelihood-ratio table consumed by
//! the sequence likelihood is `ψ^l_ab = p^(l)_ab / q_b`, i.e. the joint
//! observation probability `q_a·p^(l)_ab` over the chance-pairing
//! probability `q_a·q_b`; for a reversible chain this table is symmetric.
//! Scores are used as exact ratios throughout — the integer log-odds
//! rounding of published PAM tables is never applied.

use nalgebra::{SMatrix, SVector};

use crate::domain::Matching;
use crate::error::{Error, Result};

pub type Matrix20 = SMatrix<f64, 20, 20>;
pub type Vector20 = SVector<f64, 20>;

/// Canonical residue order: one-letter codes sorted alphabetically.
/// Codes used throughout the crate are 1-based indices into this table.
pub const AMINO_ACIDS: [char; 20] = [
    'A', 'C', 'D', 'E', 'F', 'G', 'H', 'I', 'K', 'L', 'M', 'N', 'P', 'Q', 'R', 'S', 'T', 'V', 'W',
    'Y',
];

/// 1-based residue code for a one-letter amino-acid symbol.
pub fn code_from_one_letter(c: char) -> Option<u8> {
    AMINO_ACIDS
        .iter()
        .position(|&a| a == c.to_ascii_uppercase())
        .map(|i| i as u8 + 1)
}

/// 1-based residue code for a PDB three-letter residue name.
pub fn code_from_three_letter(name: &str) -> Option<u8> {
    let one = match name.to_ascii_uppercase().as_str() {
        "ALA" => 'A',
        "ARG" => 'R',
        "ASN" => 'N',
        "ASP" => 'D',
        "CYS" => 'C',
        "GLN" => 'Q',
        "GLU" => 'E',
        "GLY" => 'G',
        "HIS" => 'H',
        "ILE" => 'I',
        "LEU" => 'L',
        "LYS" => 'K',
        "MET" => 'M',
        "PHE" => 'F',
        "PRO" => 'P',
        "SER" => 'S',
        "THR" => 'T',
        "TRP" => 'W',
        "TYR" => 'Y',
        "VAL" => 'V',
        _ => return None,
    };
    code_from_one_letter(one)
}

// ---------------------------------------------------------------------------
// SubstitutionChain
// ---------------------------------------------------------------------------

/// One evolutionary time unit: a 20×20 row-stochastic transition matrix
/// plus the amino-acid abundance vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SubstitutionChain {
    p1: Matrix20,
    q: Vector20,
}

impl SubstitutionChain {
    pub fn new(p1: Matrix20, q: Vector20) -> Result<Self> {
        for a in 0..20 {
            let row: f64 = p1.row(a).iter().sum();
            if (row - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidChain(format!("row {} sums to {row}", a + 1)));
            }
        }
        if p1.iter().any(|&p| p < 0.0) || q.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidChain("negative entry".into()));
        }
        let qsum: f64 = q.iter().sum();
        if (qsum - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidChain(format!("abundances sum to {qsum}")));
        }
        Ok(Self { p1, q })
    }

    pub fn transition(&self) -> &Matrix20 {
        &self.p1
    }

    pub fn abundances(&self) -> &Vector20 {
        &self.q
    }

    /// Deterministic reversible test chain. Built from a symmetric
    /// positive weight matrix W: q_a ∝ Σ_b W_ab and p_ab = W_ab / Σ_b W_ab
    /// satisfy detailed balance exactly; blending with the identity keeps
    /// that while scaling one step to 1% expected substitutions, the
    /// PAM-1 time unit.
    pub fn synthetic_test_chain() -> Self {
        let mut w = Matrix20::zeros();
        for a in 0..20 {
            for b in 0..20 {
                w[(a, b)] = 1.0 + 1.0 / (1.0 + (a as f64 - b as f64).abs());
            }
        }
        let row_sums: Vec<f64> = (0..20).map(|a| w.row(a).iter().sum()).collect();
        let total: f64 = row_sums.iter().sum();
        let mut q = Vector20::zeros();
        let mut base = Matrix20::zeros();
        for a in 0..20 {
            q[a] = row_sums[a] / total;
            for b in 0..20 {
                base[(a, b)] = w[(a, b)] / row_sums[a];
            }
        }
        // θ chosen so Σ_a q_a (1 - p_aa) = 0.01 exactly.
        let off_diag_rate: f64 = (0..20).map(|a| q[a] * (1.0 - base[(a, a)])).sum();
        let theta = 0.01 / off_diag_rate;
        let mut p1 = Matrix20::zeros();
        for a in 0..20 {
            for b in 0..20 {
                p1[(a, b)] = theta * base[(a, b)] + if a == b { 1.0 - theta } else { 0.0 };
            }
        }
        Self::new(p1, q).expect("synthetic chain is valid by construction")
    }
}

/// The l-th matrix power of the one-step transition matrix, by
/// exponentiation by squaring.
pub fn chain_power(chain: &SubstitutionChain, l: u32) -> Matrix20 {
    assert!(l >= 1, "chain_power requires l >= 1");
    let mut base = chain.p1;
    let mut exp = l;
    let mut acc = Matrix20::identity();
    while exp > 0 {
        if exp & 1 == 1 {
            acc *= base;
        }
        base = base * base;
        exp >>= 1;
    }
    acc
}

// ---------------------------------------------------------------------------
// PamMatrix
// ---------------------------------------------------------------------------

/// Likelihood-ratio table at one PAM distance.
#[derive(Debug, Clone)]
pub struct PamMatrix {
    l: u32,
    psi: Matrix20,
    log_psi: Matrix20,
}

impl PamMatrix {
    pub fn l(&self) -> u32 {
        self.l
    }

    pub fn psi(&self) -> &Matrix20 {
        &self.psi
    }

    /// `log ψ^l` for 1-based residue codes. `-inf` where the chain gives a
    /// pair zero probability; proposals hitting those are rejected.
    pub fn log_psi(&self, code_a: u8, code_b: u8) -> f64 {
        self.log_psi[(code_a as usize - 1, code_b as usize - 1)]
    }
}

/// Builds `ψ^l_ab = p^(l)_ab / q_b`. Rejects zero abundances.
pub fn build_pam(chain: &SubstitutionChain, l: u32) -> Result<PamMatrix> {
    if chain.q.iter().any(|&q| q <= 0.0) {
        return Err(Error::InvalidChain("zero abundance entry".into()));
    }
    let pl = chain_power(chain, l);
    let mut psi = Matrix20::zeros();
    let mut log_psi = Matrix20::zeros();
    for a in 0..20 {
        for b in 0..20 {
            psi[(a, b)] = pl[(a, b)] / chain.q[b];
            log_psi[(a, b)] = psi[(a, b)].ln();
        }
    }
    Ok(PamMatrix { l, psi, log_psi })
}

/// Log-likelihood of the observed sequences given the matching:
/// `Σ_matched log ψ^l + Σ_j log q_{s^x_j} + Σ_k log q_{s^y_k}`.
/// The abundance sums are matching-independent but included so the value
/// is a true log-likelihood.
pub fn log_seq_likelihood(
    sx: &[u8],
    sy: &[u8],
    mt: &Matching,
    pam: &PamMatrix,
    chain: &SubstitutionChain,
) -> Result<f64> {
    if sx.len() != mt.m() || sy.len() != mt.n() {
        return Err(Error::MissingSequence(format!(
            "sequence lengths ({}, {}) do not match configuration sizes ({}, {})",
            sx.len(),
            sy.len(),
            mt.m(),
            mt.n()
        )));
    }
    for (pos, &code) in sx.iter().chain(sy.iter()).enumerate() {
        if !(1..=20).contains(&code) {
            return Err(Error::InvalidResidue {
                code: code as i64,
                position: pos + 1,
            });
        }
    }
    let mut total = 0.0;
    for &(j, k) in mt.pairs() {
        total += pam.log_psi(sx[j as usize - 1], sy[k as usize - 1]);
    }
    for &a in sx {
        total += chain.q[a as usize - 1].ln();
    }
    for &b in sy {
        total += chain.q[b as usize - 1].ln();
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Prior over PAM distance
// ---------------------------------------------------------------------------

/// `Φ(hi) - Φ(lo)` computed as an erfc difference, mirrored into the
/// right tail where erfc keeps relative accuracy instead of saturating.
fn normal_interval_mass(lo: f64, hi: f64) -> f64 {
    debug_assert!(lo <= hi);
    if hi <= 0.0 {
        return normal_interval_mass(-hi, -lo);
    }
    0.5 * (libm::erfc(lo / std::f64::consts::SQRT_2) - libm::erfc(hi / std::f64::consts::SQRT_2))
}

/// Unnormalized prior weights over a distance set: each distance gets the
/// normal mass of its cell, `Φ((l + w⁺ - μ)/σ) - Φ((l - w⁻ - μ)/σ)`. On
/// the standard grid {40, 50, ..., 400} the half-widths are all 5; for a
/// non-uniform set they are half the local spacing.
pub fn pam_prior_weights(distances: &[u32], mu_l: f64, sigma_l: f64) -> Vec<f64> {
    assert!(
        sigma_l > 0.0 && sigma_l.is_finite(),
        "sigma_l must be positive"
    );
    assert!(!distances.is_empty());
    let half = |i: usize, upper: bool| -> f64 {
        let n = distances.len();
        if n == 1 {
            return 5.0;
        }
        let spacing = if upper {
            if i + 1 < n {
                distances[i + 1] - distances[i]
            } else {
                distances[i] - distances[i - 1]
            }
        } else if i > 0 {
            distances[i] - distances[i - 1]
        } else {
            distances[1] - distances[0]
        };
        spacing as f64 / 2.0
    };
    distances
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let hi = (l as f64 + half(i, true) - mu_l) / sigma_l;
            let lo = (l as f64 - half(i, false) - mu_l) / sigma_l;
            normal_interval_mass(lo, hi)
        })
        .collect()
}

/// Discretized-normal prior over a PAM distance set.
#[derive(Debug, Clone)]
pub struct PamPrior {
    distances: Vec<u32>,
    weights: Vec<f64>,
    pub mu_l: f64,
    pub sigma_l: f64,
}

impl PamPrior {
    pub fn new(distances: Vec<u32>, mu_l: f64, sigma_l: f64) -> Result<Self> {
        if distances.is_empty() || !distances.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidModelConfig(
                "PAM distance set must be non-empty and strictly ascending".into(),
            ));
        }
        if sigma_l.is_nan() || sigma_l <= 0.0 {
            return Err(Error::InvalidModelConfig(format!(
                "sigma_l must be positive: {sigma_l}"
            )));
        }
        let weights = pam_prior_weights(&distances, mu_l, sigma_l);
        if weights
            .iter()
            .any(|&w| w.is_nan() || w <= 0.0 || !w.is_finite())
        {
            return Err(Error::InvalidModelConfig(
                "PAM prior weights must be positive and finite".into(),
            ));
        }
        Ok(Self {
            distances,
            weights,
            mu_l,
            sigma_l,
        })
    }

    pub fn distances(&self) -> &[u32] {
        &self.distances
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn index_of(&self, l: u32) -> Option<usize> {
        self.distances.binary_search(&l).ok()
    }
}

/// Per-run table of PAM matrices, one per admissible distance, shared
/// read-only across chains.
#[derive(Debug, Clone)]
pub struct PamCache {
    matrices: Vec<PamMatrix>,
}

impl PamCache {
    pub fn build(chain: &SubstitutionChain, distances: &[u32]) -> Result<Self> {
        let matrices = distances
            .iter()
            .map(|&l| build_pam(chain, l))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { matrices })
    }

    pub fn by_distance(&self, l: u32) -> Option<&PamMatrix> {
        self.matrices.iter().find(|p| p.l == l)
    }

    pub fn matrices(&self) -> &[PamMatrix] {
        &self.matrices
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
