//! Data ingestion (PDB, FASTA, PAM-1, matchings, run configuration) and
//! result serialization (samples.csv, match-probability tables,
//! summary.json).

mod config;
mod formats;
mod output;
mod pdb;

pub use config::RunConfigFile;
pub use formats::{load_pam1, parse_fasta, parse_initial_matching, write_matching, write_pam1};
pub use output::{
    read_samples_csv, read_summary_json, summary_json_string, write_samples_csv, write_summary_json,
};
pub use pdb::{parse_pdb, PdbParse, SkippedResidue};
