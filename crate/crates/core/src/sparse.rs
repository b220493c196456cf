//! Word lists and sparse non-negative embeddings.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use ndarray::Array2;

use crate::cooc::MatrixError;
use crate::corpus::Vocabulary;

/// Ordered word list with a reverse index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WordIndex {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl WordIndex {
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let words: Vec<String> = words.into_iter().map(Into::into).collect();
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        WordIndex { words, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

impl From<&Vocabulary> for WordIndex {
    fn from(v: &Vocabulary) -> Self {
        WordIndex::from_words(v.words())
    }
}

/// One row per word, nonzero `(dimension, weight)` pairs sorted by dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseEmbeddings {
    pub words: WordIndex,
    pub dim: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseEmbeddings {
    /// Keeps entries strictly above `threshold`.
    pub fn from_dense(words: WordIndex, matrix: &Array2<f64>, threshold: f64) -> Self {
        assert_eq!(words.len(), matrix.nrows());
        let rows = matrix
            .rows()
            .into_iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, &v)| v > threshold)
                    .map(|(i, &v)| (i, v))
                    .collect()
            })
            .collect();
        SparseEmbeddings {
            words,
            dim: matrix.ncols(),
            rows,
        }
    }

    pub fn from_rows(words: WordIndex, dim: usize, mut rows: Vec<Vec<(usize, f64)>>) -> Self {
        assert_eq!(words.len(), rows.len());
        for r in &mut rows {
            r.retain(|&(_, v)| v != 0.0);
            r.sort_by_key(|&(i, _)| i);
            assert!(r.iter().all(|&(i, _)| i < dim));
        }
        SparseEmbeddings { words, dim, rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, id: usize) -> &[(usize, f64)] {
        &self.rows[id]
    }

    pub fn lookup(&self, word: &str) -> Option<&[(usize, f64)]> {
        self.words.id(word).map(|i| self.row(i))
    }

    pub fn rows(&self) -> impl Iterator<Item = &[(usize, f64)]> {
        self.rows.iter().map(Vec::as_slice)
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Writes `word<TAB>idx:val idx:val ...` rows, indices ascending.
    pub fn write<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "# dim={}", self.dim)?;
        for (id, row) in self.rows.iter().enumerate() {
            write!(out, "{}\t", self.words.word(id))?;
            for (k, (i, v)) in row.iter().enumerate() {
                if k > 0 {
                    out.write_all(b" ")?;
                }
                write!(out, "{i}:{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Reads a sparse dump. The `# dim=` header is optional; without it the
    /// dimension is one past the largest index seen.
    pub fn read<R: BufRead>(reader: R) -> Result<Self, MatrixError> {
        let mut words = Vec::new();
        let mut rows = Vec::new();
        let mut dim = None;
        for line in reader.lines() {
            let line = line?;
            if let Some(rest) = line.strip_prefix("# dim=") {
                dim = Some(
                    rest.trim()
                        .parse()
                        .map_err(|_| MatrixError::Format(format!("bad header {line:?}")))?,
                );
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, rest) = line
                .split_once('\t')
                .ok_or_else(|| MatrixError::Format(format!("missing tab in {line:?}")))?;
            let mut row = Vec::new();
            for item in rest.split(' ').filter(|s| !s.is_empty()) {
                let parsed = item
                    .split_once(':')
                    .and_then(|(i, v)| Some((i.parse().ok()?, v.parse().ok()?)));
                row.push(parsed.ok_or_else(|| MatrixError::Format(format!("bad entry {item:?}")))?);
            }
            words.push(word.to_string());
            rows.push(row);
        }
        let max_seen = rows.iter().flatten().map(|&(i, _)| i + 1).max().unwrap_or(0);
        let dim = dim.unwrap_or(max_seen);
        if max_seen > dim {
            return Err(MatrixError::Format(format!(
                "index {} exceeds declared dimension {dim}",
                max_seen - 1
            )));
        }
        Ok(SparseEmbeddings::from_rows(WordIndex::from_words(words), dim, rows))
    }
}
