//! Bayesian pairwise alignment of protein structures and sequences.
//!
//! Two proteins are represented as ordered 3-D point configurations (Cα
//! coordinates, optionally with amino-acid labels). The unknowns are a
//! rigid-body transformation (rotation, translation), a noise scale, and a
//! sequence-order-preserving matching between the two point sets. Gaps in
//! the matching are penalised through an affine gap prior; the gap
//! penalties themselves can be fixed, sampled, or integrated out. Amino
//! acid information enters through PAM substitution matrices, with the PAM
//! distance optionally sampled to give a posterior over evolutionary
//! distance.
//!
//! The crate is organised around the sampling pipeline:
//!
//! - [`domain`] — core value types (configurations, matchings, transforms)
//! - [`gapmodel`] — gap penalties, the matching prior and its normalizer
//! - [`pam`] — substitution chains, PAM matrices, sequence likelihood
//! - [`model`] — log-density evaluation of the joint posterior
//! - [`sampler`] — the MCMC engine (matching moves, parameter updates,
//!   parallel tempering)
//! - [`oracle`] — brute-force enumeration and synthetic data, used as
//!   ground truth by the test suite and exposed for diagnostics
//! - [`summary`] — posterior post-processing (marginal match
//!   probabilities, point estimates, run summaries)
//! - [`io`] — PDB/FASTA/PAM-1 parsing, run configuration, result files

pub mod domain;
pub mod error;
pub mod gapmodel;
pub mod io;
pub mod model;
pub mod oracle;
pub mod pam;
pub mod sampler;
pub mod summary;

pub use domain::{Configuration, GapParams, Matching, ModelConfig, TransformState};
pub use error::{Error, Result};
