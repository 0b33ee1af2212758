//! Result files: the thinned sample stream as CSV, run summaries as JSON.
//!
//! samples.csv columns: `sweep,logpost,L,rmsd,S,ext,g,h,l` — uppercase L
//! is the match count, lowercase l the PAM distance. Optional columns are
//! empty when the mode leaves them undefined. Floats are written with
//! Rust's shortest round-trip formatting, so re-reading reproduces them
//! bit for bit; a matching itself is not part of the schema (match
//! probabilities live in their own table), so re-read samples carry an
//! empty matching and an identity transform.

use crate::domain::{Matching, TransformState};
use crate::error::{Error, Result};
use crate::sampler::PosteriorSample;
use crate::summary::RunSummary;

pub fn write_samples_csv(path: &std::path::Path, samples: &[PosteriorSample]) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "sweep,logpost,L,rmsd,S,ext,g,h,l")?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for s in samples {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{}",
            s.sweep,
            s.log_post,
            s.l,
            opt(s.rmsd.map(|v| v.to_string())),
            s.s,
            s.ext,
            opt(s.g.map(|v| v.to_string())),
            opt(s.h.map(|v| v.to_string())),
            opt(s.pam_l.map(|v| v.to_string())),
        )?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_samples_csv(path: &std::path::Path) -> Result<Vec<PosteriorSample>> {
    let text = std::fs::read_to_string(path)?;
    let display = path.display().to_string();
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 || line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: display.clone(),
            line: idx + 1,
            message: msg,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(err(format!("expected 9 columns, found {}", fields.len())));
        }
        fn req<T: std::str::FromStr>(s: &str) -> Option<T> {
            s.trim().parse().ok()
        }
        fn opt<T: std::str::FromStr>(s: &str) -> std::result::Result<Option<T>, ()> {
            let t = s.trim();
            if t.is_empty() {
                Ok(None)
            } else {
                t.parse().map(Some).map_err(|_| ())
            }
        }
        out.push(PosteriorSample {
            sweep: req(fields[0]).ok_or_else(|| err("bad sweep".into()))?,
            log_post: req(fields[1]).ok_or_else(|| err("bad logpost".into()))?,
            l: req(fields[2]).ok_or_else(|| err("bad L".into()))?,
            rmsd: opt(fields[3]).map_err(|_| err("bad rmsd".into()))?,
            s: req(fields[4]).ok_or_else(|| err("bad S".into()))?,
            ext: req(fields[5]).ok_or_else(|| err("bad ext".into()))?,
            g: opt(fields[6]).map_err(|_| err("bad g".into()))?,
            h: opt(fields[7]).map_err(|_| err("bad h".into()))?,
            pam_l: opt(fields[8]).map_err(|_| err("bad l".into()))?,
            matching: Matching::empty(0, 0),
            transform: TransformState::identity(),
        });
    }
    Ok(out)
}

pub fn write_summary_json(path: &std::path::Path, summary: &RunSummary) -> Result<()> {
    let json = serde_json::to_string_pretty(summary)
        .map_err(|e| Error::InvalidConfiguration(format!("summary serialization: {e}")))?;
    std::fs::write(path, json)?;
    Ok(())
}

/// Pretty-printed JSON form of a summary, as written to summary.json.
pub fn summary_json_string(summary: &RunSummary) -> Result<String> {
    serde_json::to_string_pretty(summary)
        .map_err(|e| Error::InvalidConfiguration(format!("summary serialization: {e}")))
}

pub fn read_summary_json(path: &std::path::Path) -> Result<RunSummary> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })
}
