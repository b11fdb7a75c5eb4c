//! Token embedding tables and mean-pooled sentence features.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

/// Default cap on the number of tokens pooled per sentence.
pub const MAX_TOKENS: usize = 16;

/// Lowercases and splits on every run of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Token → vector map with a shared dimension.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    vectors: HashMap<String, Vec<f64>>,
    dim: Option<usize>,
    duplicates: usize,
}

impl EmbeddingTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// `None` until the first vector is inserted.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// How many inserts replaced an existing token.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Inserts or replaces a token. The first insert fixes the dimension.
    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        match self.dim {
            Some(d) if d != vector.len() => {
                return Err(Error::dims(format!(
                    "table dimension is {d}, vector has {}",
                    vector.len()
                )))
            }
            None if vector.is_empty() => return Err(Error::dims("empty embedding vector")),
            _ => {}
        }
        self.dim = Some(vector.len());
        if self.vectors.insert(token.into(), vector).is_some() {
            self.duplicates += 1;
        }
        Ok(())
    }

    /// Parses `token v1 v2 ... vd` lines. Blank lines are skipped; a repeated
    /// token keeps its last vector.
    pub fn from_reader(reader: impl BufRead) -> Result<Self> {
        let mut table = Self::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let mut parts = line.split_whitespace();
            let Some(token) = parts.next() else {
                continue;
            };
            let vector = parts
                .map(|s| {
                    s.parse::<f64>().map_err(|_| {
                        Error::format(format!("line {lineno}: cannot parse `{s}` as a number"))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if vector.is_empty() {
                return Err(Error::format(format!(
                    "line {lineno}: token `{token}` has no values"
                )));
            }
            table.insert(token, vector).map_err(|e| match e {
                Error::DimensionMismatch(msg) => Error::format(format!("line {lineno}: {msg}")),
                other => other,
            })?;
        }
        Ok(table)
    }
}

pub fn load_embedding_table(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    EmbeddingTable::from_reader(BufReader::new(File::open(path)?))
}

/// How token vectors are combined into a sentence vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pooling {
    /// Mean over the tokens that survive truncation and vocabulary lookup.
    #[default]
    PresentMean,
    /// Zero-pad to the token cap and divide by it.
    FixedLength,
}

/// Averages the vectors of the first `max_len` tokens that are in the table.
/// Returns the zero vector when none are.
pub fn sentence_embedding(
    tokens: &[impl AsRef<str>],
    table: &EmbeddingTable,
    max_len: usize,
    pooling: Pooling,
) -> Result<Vec<f64>> {
    let dim = table.dim().ok_or(Error::EmptyTable)?;
    let mut sum = vec![0.0; dim];
    let mut present = 0usize;
    for tok in tokens.iter().take(max_len) {
        if let Some(v) = table.get(tok.as_ref()) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            present += 1;
        }
    }
    let denom = match pooling {
        Pooling::PresentMean => present,
        Pooling::FixedLength => max_len,
    };
    if present == 0 || denom == 0 {
        return Ok(vec![0.0; dim]);
    }
    let d = denom as f64;
    Ok(sum.into_iter().map(|s| s / d).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(text: &str) -> EmbeddingTable {
        EmbeddingTable::from_reader(text.as_bytes()).unwrap()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(
            tokenize("How old is the baby?"),
            ["how", "old", "is", "the", "baby"]
        );
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("it's short"), ["it", "s", "short"]);
        assert_eq!(tokenize("  --Two  WORDS!! "), ["two", "words"]);
    }

    #[test]
    fn parse_two_lines() {
        let t = table("a 1 0\nb 0 1\n");
        assert_eq!(t.dim(), Some(2));
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("b"), Some(&[0.0, 1.0][..]));
    }

    #[test]
    fn inconsistent_dimension_is_format_error() {
        let r = EmbeddingTable::from_reader("a 1 0\nb 0 1 2\n".as_bytes());
        assert!(matches!(r, Err(Error::Format(_))));
        let r = EmbeddingTable::from_reader("a 1 x\n".as_bytes());
        assert!(matches!(r, Err(Error::Format(_))));
    }

    #[test]
    fn empty_table_has_no_dimension() {
        let t = table("");
        assert!(t.is_empty());
        assert_eq!(t.dim(), None);
        assert!(matches!(
            sentence_embedding(&["a"], &t, MAX_TOKENS, Pooling::PresentMean),
            Err(Error::EmptyTable)
        ));
    }

    #[test]
    fn duplicates_keep_last() {
        let t = table("a 1 0\na 2 2\n");
        assert_eq!(t.len(), 1);
        assert_eq!(t.duplicates(), 1);
        assert_eq!(t.get("a"), Some(&[2.0, 2.0][..]));
    }

    #[test]
    fn single_token_is_its_vector() {
        let t = table("a 0.25 -3\nb 0 1\n");
        let e = sentence_embedding(&["a"], &t, MAX_TOKENS, Pooling::PresentMean).unwrap();
        assert_eq!(e, vec![0.25, -3.0]);
    }

    #[test]
    fn all_oov_is_zero() {
        let t = table("a 1 2\n");
        let e = sentence_embedding(&["x", "y"], &t, MAX_TOKENS, Pooling::PresentMean).unwrap();
        assert_eq!(e, vec![0.0, 0.0]);
    }

    #[test]
    fn truncates_to_window() {
        // u = (1, 0, 2), v = (0, 4, -2); 20 alternating tokens, first 16 used
        let t = table("u 1 0 2\nv 0 4 -2\nw 100 100 100\n");
        let mut toks: Vec<&str> = (0..16)
            .map(|i| if i % 2 == 0 { "u" } else { "v" })
            .collect();
        toks.extend(["w", "w", "w", "w"]);
        let e = sentence_embedding(&toks, &t, MAX_TOKENS, Pooling::PresentMean).unwrap();
        assert_eq!(e, vec![0.5, 2.0, 0.0]);
    }

    #[test]
    fn fixed_length_pooling_divides_by_cap() {
        let t = table("a 16 8\n");
        let e = sentence_embedding(&["a", "zz"], &t, 16, Pooling::FixedLength).unwrap();
        assert_eq!(e, vec![1.0, 0.5]);
    }
}
