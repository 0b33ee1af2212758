//! Small text formats: initial matchings, PAM-1 tables, FASTA sequences.

use crate::domain::Matching;
use crate::error::{Error, Result};
use crate::pam::{code_from_one_letter, Matrix20, SubstitutionChain, Vector20};

/// Reads a matching from a text file of 1-based `j k` pairs, one per
/// line (comma or whitespace separated; `#` starts a comment). An empty
/// file is the empty matching — a legal starting value.
pub fn parse_initial_matching(path: &std::path::Path, m: usize, n: usize) -> Result<Matching> {
    let text = std::fs::read_to_string(path)?;
    let display = path.display().to_string();
    let mut pairs: Vec<(u32, u32)> = Vec::new();
    let mut lines: Vec<usize> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        let err = |msg: String| Error::Parse {
            path: display.clone(),
            line: idx + 1,
            message: msg,
        };
        if fields.len() != 2 {
            return Err(err(format!("expected two indices, found {}", fields.len())));
        }
        let j: u32 = fields[0]
            .parse()
            .map_err(|_| err(format!("bad index {:?}", fields[0])))?;
        let k: u32 = fields[1]
            .parse()
            .map_err(|_| err(format!("bad index {:?}", fields[1])))?;
        pairs.push((j, k));
        lines.push(idx + 1);
    }
    Matching::new(pairs, m, n).map_err(|e| match e {
        Error::InvalidMatching(v) => {
            let pos = match &v {
                crate::domain::MatchingViolation::DuplicateJ { position }
                | crate::domain::MatchingViolation::DuplicateK { position }
                | crate::domain::MatchingViolation::NonMonotone { position }
                | crate::domain::MatchingViolation::OutOfRange { position, .. } => *position,
            };
            Error::Parse {
                path: display.clone(),
                line: lines.get(pos - 1).copied().unwrap_or(0),
                message: v.to_string(),
            }
        }
        other => other,
    })
}

/// Writes a matching in the format [`parse_initial_matching`] reads.
pub fn write_matching(path: &std::path::Path, mt: &Matching) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for &(j, k) in mt.pairs() {
        writeln!(f, "{j} {k}")?;
    }
    f.flush()?;
    Ok(())
}

/// Loads a PAM-1 chain: 20 rows × 20 columns of transition probabilities
/// followed by 20 abundances, whitespace separated, rows and columns in
/// the canonical alphabetical one-letter residue order (A, C, D, ..., Y).
pub fn load_pam1(path: &std::path::Path) -> Result<SubstitutionChain> {
    let text = std::fs::read_to_string(path)?;
    let display = path.display().to_string();
    let values: Vec<f64> = text
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|_| Error::Parse {
                path: display.clone(),
                line: 0,
                message: format!("bad number {tok:?}"),
            })
        })
        .collect::<Result<_>>()?;
    if values.len() != 420 {
        return Err(Error::Parse {
            path: display,
            line: 0,
            message: format!(
                "expected 420 values (20x20 matrix + 20 abundances), found {}",
                values.len()
            ),
        });
    }
    let p1 = Matrix20::from_fn(|a, b| values[a * 20 + b]);
    let q = Vector20::from_fn(|a, _| values[400 + a]);
    SubstitutionChain::new(p1, q)
}

/// Writes a chain in the format [`load_pam1`] reads, with full precision.
pub fn write_pam1(path: &std::path::Path, chain: &SubstitutionChain) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for a in 0..20 {
        let row: Vec<String> = (0..20)
            .map(|b| chain.transition()[(a, b)].to_string())
            .collect();
        writeln!(f, "{}", row.join(" "))?;
    }
    let q: Vec<String> = (0..20).map(|a| chain.abundances()[a].to_string()).collect();
    writeln!(f, "{}", q.join(" "))?;
    f.flush()?;
    Ok(())
}

/// FASTA records as (id, residue codes). Rejects symbols outside the
/// 20-letter alphabet.
pub fn parse_fasta(path: &std::path::Path) -> Result<Vec<(String, Vec<u8>)>> {
    let text = std::fs::read_to_string(path)?;
    let display = path.display().to_string();
    let mut records: Vec<(String, Vec<u8>)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('>') {
            records.push((
                header.split_whitespace().next().unwrap_or("").to_string(),
                Vec::new(),
            ));
            continue;
        }
        let current = records.last_mut().ok_or_else(|| Error::Parse {
            path: display.clone(),
            line: idx + 1,
            message: "sequence data before any FASTA header".into(),
        })?;
        for c in line.chars() {
            let code = code_from_one_letter(c).ok_or_else(|| Error::Parse {
                path: display.clone(),
                line: idx + 1,
                message: format!("unknown residue symbol {c:?}"),
            })?;
            current.1.push(code);
        }
    }
    Ok(records)
}
