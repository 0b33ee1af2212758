//! Fixed-column PDB parsing: one Cα per residue of one chain.
//!
//! Only ATOM records are considered (HETATM ignored); columns follow the
//! PDB 3.3 specification. Multi-model files are resolved by `model_index`
//! (0 = first); alternate locations keep the record whose altLoc
//! identifier sorts first. Residues without a standard three-letter code
//! are skipped and reported, not errors: chain breaks are simply absent
//! points, consistent with a model that penalises matching gaps rather
//! than coordinate gaps.

use nalgebra::Vector3;

use crate::domain::Configuration;
use crate::error::{Error, Result};
use crate::pam::code_from_three_letter;

/// A residue dropped during parsing, for the caller's log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedResidue {
    pub res_name: String,
    pub res_seq: String,
    pub line: usize,
}

/// Parse result: the configuration plus any skipped residues.
#[derive(Debug, Clone)]
pub struct PdbParse {
    pub configuration: Configuration,
    pub skipped: Vec<SkippedResidue>,
}

fn field(line: &str, lo: usize, hi: usize) -> &str {
    let bytes = line.as_bytes();
    let hi = hi.min(bytes.len());
    if lo >= hi {
        return "";
    }
    std::str::from_utf8(&bytes[lo..hi]).unwrap_or("")
}

/// Extracts the Cα trace of `chain` from a PDB file.
pub fn parse_pdb(path: &std::path::Path, chain: char, model_index: usize) -> Result<PdbParse> {
    let text = std::fs::read_to_string(path)?;
    let display = path.display().to_string();

    let mut current_model = 0usize;
    let mut seen_model_record = false;
    let mut chain_seen = false;
    // Keyed by (resSeq, iCode) in file order; value holds the winning
    // altLoc and its parsed data.
    let mut order: Vec<(String, char, u8, Vector3<f64>, usize)> = Vec::new();
    let mut skipped: Vec<SkippedResidue> = Vec::new();

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let record = field(line, 0, 6);
        if record.starts_with("MODEL") {
            if seen_model_record {
                current_model += 1;
            }
            seen_model_record = true;
            continue;
        }
        if !record.starts_with("ATOM") {
            continue;
        }
        if seen_model_record && current_model != model_index {
            continue;
        }
        let chain_id = field(line, 21, 22).chars().next().unwrap_or(' ');
        if chain_id != chain {
            continue;
        }
        chain_seen = true;
        let atom_name = field(line, 12, 16).trim();
        if atom_name != "CA" {
            continue;
        }
        let alt_loc = field(line, 16, 17).chars().next().unwrap_or(' ');
        let res_name = field(line, 17, 20).trim().to_string();
        let res_key = format!(
            "{}{}",
            field(line, 22, 26).trim(),
            field(line, 26, 27).trim()
        );
        let parse_coord = |lo: usize, hi: usize, what: &str| -> Result<f64> {
            field(line, lo, hi)
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse {
                    path: display.clone(),
                    line: lineno,
                    message: format!("malformed {what} coordinate {:?}", field(line, lo, hi)),
                })
        };
        let pos = Vector3::new(
            parse_coord(30, 38, "x")?,
            parse_coord(38, 46, "y")?,
            parse_coord(46, 54, "z")?,
        );
        match code_from_three_letter(&res_name) {
            None => {
                if !skipped.iter().any(|s| s.res_seq == res_key) {
                    skipped.push(SkippedResidue {
                        res_name,
                        res_seq: res_key,
                        line: lineno,
                    });
                }
            }
            Some(code) => {
                if let Some(existing) = order.iter_mut().find(|r| r.0 == res_key) {
                    // Alternate location: keep the identifier that sorts first.
                    if alt_loc < existing.1 {
                        *existing = (res_key, alt_loc, code, pos, lineno);
                    }
                } else {
                    order.push((res_key, alt_loc, code, pos, lineno));
                }
            }
        }
    }

    if !chain_seen {
        return Err(Error::Pdb(format!(
            "chain {chain:?} not found in {display}"
        )));
    }
    if order.is_empty() {
        return Err(Error::Pdb(format!(
            "no CA atoms for chain {chain:?} in {display}"
        )));
    }
    let points: Vec<Vector3<f64>> = order.iter().map(|r| r.3).collect();
    let residues: Vec<u8> = order.iter().map(|r| r.2).collect();
    let id = format!(
        "{}:{}",
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        chain
    );
    let configuration = Configuration::new(points, Some(residues), id)?;
    Ok(PdbParse {
        configuration,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[allow(clippy::too_many_arguments)]
    fn atom_line(
        serial: u32,
        name: &str,
        alt: char,
        res: &str,
        chain: char,
        seq: u32,
        x: f64,
        y: f64,
        z: f64,
    ) -> String {
        format!(
            "ATOM  {serial:>5} {name:<4}{alt}{res:<3} {chain}{seq:>4}    {x:>8.3}{y:>8.3}{z:>8.3}  1.00  0.00           C"
        )
    }

    fn write_pdb(lines: &[String]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn minimal_three_residue_fixture() {
        let f = write_pdb(&[
            atom_line(1, " N", ' ', "GLY", 'A', 1, 0.0, 0.0, 0.0),
            atom_line(2, " CA", ' ', "GLY", 'A', 1, 1.0, 2.0, 3.0),
            atom_line(3, " CA", ' ', "ALA", 'A', 2, 4.0, 5.0, 6.0),
            atom_line(4, " CA", ' ', "TRP", 'A', 3, 7.0, 8.0, 9.0),
            atom_line(5, " CA", ' ', "GLY", 'B', 1, -1.0, -1.0, -1.0),
        ]);
        let parsed = parse_pdb(f.path(), 'A', 0).unwrap();
        let cfg = &parsed.configuration;
        assert_eq!(cfg.len(), 3);
        assert_eq!(cfg.points()[0], Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(cfg.points()[2], Vector3::new(7.0, 8.0, 9.0));
        assert_eq!(
            cfg.residues().unwrap(),
            &[
                crate::pam::code_from_one_letter('G').unwrap(),
                crate::pam::code_from_one_letter('A').unwrap(),
                crate::pam::code_from_one_letter('W').unwrap()
            ]
        );
        assert!(parsed.skipped.is_empty());
    }

    #[test]
    fn altloc_keeps_first_identifier() {
        let f = write_pdb(&[
            atom_line(1, " CA", 'B', "GLY", 'A', 1, 9.0, 9.0, 9.0),
            atom_line(2, " CA", 'A', "GLY", 'A', 1, 1.0, 1.0, 1.0),
        ]);
        let parsed = parse_pdb(f.path(), 'A', 0).unwrap();
        assert_eq!(
            parsed.configuration.points()[0],
            Vector3::new(1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn multi_model_selects_requested_model() {
        let f = write_pdb(&[
            "MODEL        1".to_string(),
            atom_line(1, " CA", ' ', "GLY", 'A', 1, 1.0, 0.0, 0.0),
            "ENDMDL".to_string(),
            "MODEL        2".to_string(),
            atom_line(1, " CA", ' ', "GLY", 'A', 1, 2.0, 0.0, 0.0),
            "ENDMDL".to_string(),
        ]);
        let first = parse_pdb(f.path(), 'A', 0).unwrap();
        assert_eq!(first.configuration.points()[0][0], 1.0);
        let second = parse_pdb(f.path(), 'A', 1).unwrap();
        assert_eq!(second.configuration.points()[0][0], 2.0);
    }

    #[test]
    fn nonstandard_residue_skipped_with_note() {
        let f = write_pdb(&[
            atom_line(1, " CA", ' ', "GLY", 'A', 1, 1.0, 0.0, 0.0),
            atom_line(2, " CA", ' ', "MSE", 'A', 2, 2.0, 0.0, 0.0),
            atom_line(3, " CA", ' ', "ALA", 'A', 3, 3.0, 0.0, 0.0),
        ]);
        let parsed = parse_pdb(f.path(), 'A', 0).unwrap();
        assert_eq!(parsed.configuration.len(), 2);
        assert_eq!(parsed.skipped.len(), 1);
        assert_eq!(parsed.skipped[0].res_name, "MSE");
    }

    #[test]
    fn missing_chain_is_distinct_error() {
        let f = write_pdb(&[atom_line(1, " CA", ' ', "GLY", 'A', 1, 1.0, 0.0, 0.0)]);
        let err = parse_pdb(f.path(), 'Z', 0).unwrap_err();
        assert!(
            matches!(err, Error::Pdb(ref m) if m.contains("chain")),
            "{err}"
        );
    }

    #[test]
    fn no_ca_atoms_is_distinct_error() {
        let f = write_pdb(&[atom_line(1, " N", ' ', "GLY", 'A', 1, 1.0, 0.0, 0.0)]);
        let err = parse_pdb(f.path(), 'A', 0).unwrap_err();
        assert!(
            matches!(err, Error::Pdb(ref m) if m.contains("no CA atoms")),
            "{err}"
        );
    }

    #[test]
    fn malformed_coordinates_report_line() {
        let mut bad = atom_line(1, " CA", ' ', "GLY", 'A', 1, 1.0, 0.0, 0.0);
        bad.replace_range(30..38, "  xx.yyy");
        let f = write_pdb(&[bad]);
        let err = parse_pdb(f.path(), 'A', 0).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }
}
