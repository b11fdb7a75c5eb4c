//! JSON-lines candidate sets, one record per question.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Candidate count used when none is configured.
pub const DEFAULT_CANDIDATES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub question_id: u64,
    /// Row of the question in the question feature file.
    pub question_row: usize,
    /// Rows of the candidate answers in the answer feature file.
    pub candidate_rows: Vec<usize>,
    /// 0-based position of the ground-truth answer in `candidate_rows`.
    pub gt_index: usize,
    /// Optional graded relevance in `[0, 1]`, one per candidate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relevance: Option<Vec<f64>>,
}

impl CandidateRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        let n = self.candidate_rows.len();
        if n == 0 {
            return Err("candidate_rows is empty".into());
        }
        if self.gt_index >= n {
            return Err(format!(
                "gt_index {} out of range for {n} candidates",
                self.gt_index
            ));
        }
        if let Some(rel) = &self.relevance {
            if rel.len() != n {
                return Err(format!(
                    "relevance has {} entries for {n} candidates",
                    rel.len()
                ));
            }
            if let Some(bad) = rel.iter().find(|r| !(0.0..=1.0).contains(*r)) {
                return Err(format!("relevance value {bad} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Parses and validates records; every record must carry the same number
/// of candidates as the first one.
pub fn parse_candidates(reader: impl BufRead) -> Result<Vec<CandidateRecord>> {
    let mut out = Vec::new();
    let mut count: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CandidateRecord = serde_json::from_str(&line)
            .map_err(|e| Error::format(format!("line {lineno}: {e}")))?;
        rec.validate()
            .map_err(|e| Error::format(format!("line {lineno}: {e}")))?;
        let n = rec.candidate_rows.len();
        match count {
            Some(c) if c != n => {
                return Err(Error::format(format!(
                    "line {lineno}: {n} candidates, earlier records have {c}"
                )))
            }
            _ => count = Some(n),
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_candidates(path: impl AsRef<Path>) -> Result<Vec<CandidateRecord>> {
    parse_candidates(BufReader::new(File::open(path)?))
}

pub fn write_candidates(path: impl AsRef<Path>, records: &[CandidateRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::format(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
