//! Sparse word × context count matrices and PPMI re-weighting.

use std::collections::HashMap;
use std::io::{self, BufRead, Read, Write};

use thiserror::Error;

use crate::contexts::ContextEvent;
use crate::corpus::Vocabulary;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("matrix has zero total mass")]
    EmptyMatrix,
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed matrix dump: {0}")]
    Format(String),
}

/// Context strings with dense ids, ordered by descending frequency.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ContextVocab {
    strings: Vec<String>,
    index: HashMap<String, usize>,
}

impl ContextVocab {
    pub fn from_strings(strings: Vec<String>) -> Self {
        let index = strings
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        ContextVocab { strings, index }
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    pub fn id(&self, context: &str) -> Option<usize> {
        self.index.get(context).copied()
    }

    pub fn get(&self, id: usize) -> &str {
        &self.strings[id]
    }
}

/// Row-compressed sparse matrix. Each row holds `(col, value)` pairs sorted
/// by column with no stored zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct CoocMatrix {
    pub rows: Vocabulary,
    pub cols: ContextVocab,
    cells: Vec<Vec<(usize, f64)>>,
    total: f64,
}

impl CoocMatrix {
    /// Builds a matrix from per-row cells. Zero cells are dropped.
    pub fn from_rows(rows: Vocabulary, cols: ContextVocab, mut cells: Vec<Vec<(usize, f64)>>) -> Self {
        assert_eq!(cells.len(), rows.len(), "one cell row per vocabulary word");
        for row in &mut cells {
            row.retain(|&(_, v)| v != 0.0);
            row.sort_by_key(|&(c, _)| c);
            assert!(row.iter().all(|&(c, v)| c < cols.len() && v > 0.0));
        }
        let total = cells.iter().flatten().map(|&(_, v)| v).sum();
        CoocMatrix {
            rows,
            cols,
            cells,
            total,
        }
    }

    /// Builds an unnamed matrix from a dense array (rows `w0..`, cols `c0..`).
    pub fn from_dense(values: &[Vec<f64>]) -> Self {
        use crate::corpus::{PosClass, VocabEntry};
        let n_rows = values.len();
        let n_cols = values.first().map_or(0, |r| r.len());
        let rows = Vocabulary::from_entries(
            (0..n_rows)
                .map(|i| VocabEntry {
                    word: format!("w{i:06}"),
                    pos: PosClass::Noun,
                    freq: (n_rows - i) as u64,
                })
                .collect(),
        );
        let cols = ContextVocab::from_strings((0..n_cols).map(|j| format!("c{j}")).collect());
        let cells = values
            .iter()
            .map(|r| r.iter().copied().enumerate().collect())
            .collect();
        Self::from_rows(rows, cols, cells)
    }

    pub fn n_rows(&self) -> usize {
        self.cells.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn nnz(&self) -> usize {
        self.cells.iter().map(Vec::len).sum()
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn row(&self, r: usize) -> &[(usize, f64)] {
        &self.cells[r]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let row = &self.cells[r];
        row.binary_search_by_key(&c, |&(col, _)| col)
            .map_or(0.0, |i| row[i].1)
    }

    /// Iterates stored cells in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().map(move |&(c, v)| (r, c, v)))
    }

    /// Number of columns holding at least one stored cell.
    pub fn nonempty_cols(&self) -> usize {
        let mut seen = vec![false; self.n_cols()];
        for (_, c, _) in self.iter() {
            seen[c] = true;
        }
        seen.into_iter().filter(|&b| b).count()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n_cols()]; self.n_rows()];
        for (r, c, v) in self.iter() {
            out[r][c] = v;
        }
        out
    }

    /// Text dump: header `rows cols nnz`, then one `row col value` triple per line.
    pub fn write_text<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "{} {} {}", self.n_rows(), self.n_cols(), self.nnz())?;
        for (r, c, v) in self.iter() {
            writeln!(out, "{r} {c} {v}")?;
        }
        Ok(())
    }

    /// Binary dump: little-endian u64 `rows cols nnz`, then `(u64, u64, f64)` triples.
    pub fn write_binary<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for n in [self.n_rows(), self.n_cols(), self.nnz()] {
            out.write_all(&(n as u64).to_le_bytes())?;
        }
        for (r, c, v) in self.iter() {
            out.write_all(&(r as u64).to_le_bytes())?;
            out.write_all(&(c as u64).to_le_bytes())?;
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
}

/// `(shape, triples)` recovered from a matrix dump.
#[derive(Debug, Clone, PartialEq)]
pub struct Triples {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

pub fn read_text_triples<R: BufRead>(reader: R) -> Result<Triples, MatrixError> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| MatrixError::Format("missing header".into()))??;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|s| s.parse())
        .collect::<Result<_, _>>()
        .map_err(|_| MatrixError::Format(format!("bad header {header:?}")))?;
    let [rows, cols, nnz] = dims[..] else {
        return Err(MatrixError::Format(format!("bad header {header:?}")));
    };
    let mut entries = Vec::with_capacity(nnz);
    for line in lines {
        let line = line?;
        let mut it = line.split_whitespace();
        let parsed = (|| {
            let r = it.next()?.parse().ok()?;
            let c = it.next()?.parse().ok()?;
            let v = it.next()?.parse().ok()?;
            Some((r, c, v))
        })();
        let (r, c, v) = parsed.ok_or_else(|| MatrixError::Format(format!("bad triple {line:?}")))?;
        if r >= rows || c >= cols {
            return Err(MatrixError::Format(format!("triple out of bounds {line:?}")));
        }
        entries.push((r, c, v));
    }
    if entries.len() != nnz {
        return Err(MatrixError::Format(format!(
            "header declares {nnz} entries, found {}",
            entries.len()
        )));
    }
    Ok(Triples { rows, cols, entries })
}

pub fn read_binary_triples<R: Read>(mut reader: R) -> Result<Triples, MatrixError> {
    let mut word = [0u8; 8];
    let mut next = |r: &mut R| -> Result<[u8; 8], MatrixError> {
        r.read_exact(&mut word)?;
        Ok(word)
    };
    let rows = u64::from_le_bytes(next(&mut reader)?) as usize;
    let cols = u64::from_le_bytes(next(&mut reader)?) as usize;
    let nnz = u64::from_le_bytes(next(&mut reader)?) as usize;
    let mut entries = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        let r = u64::from_le_bytes(next(&mut reader)?) as usize;
        let c = u64::from_le_bytes(next(&mut reader)?) as usize;
        let v = f64::from_le_bytes(next(&mut reader)?);
        entries.push((r, c, v));
    }
    Ok(Triples { rows, cols, entries })
}

/// Counts `(target, context)` events into a matrix over `vocab`.
///
/// Only the `context_limit` most frequent contexts survive (ties broken by
/// ascending string). Events whose target is out of vocabulary are ignored.
pub fn count_cooccurrences<I>(events: I, vocab: &Vocabulary, context_limit: usize) -> CoocMatrix
where
    I: IntoIterator<Item = ContextEvent>,
{
    let mut counter = CoocCounter::new(vocab.len());
    for e in events {
        if let Some(row) = vocab.id(&e.target) {
            counter.add(row, &e.context);
        }
    }
    counter.finish(vocab.clone(), context_limit)
}

/// Mergeable count accumulator keyed by vocabulary row and context string.
#[derive(Debug, Clone)]
pub struct CoocCounter {
    rows: Vec<HashMap<usize, u64>>,
    context_ids: HashMap<String, usize>,
    contexts: Vec<String>,
}

impl CoocCounter {
    pub fn new(n_rows: usize) -> Self {
        CoocCounter {
            rows: vec![HashMap::new(); n_rows],
            context_ids: HashMap::new(),
            contexts: Vec::new(),
        }
    }

    pub fn add(&mut self, row: usize, context: &str) {
        let id = match self.context_ids.get(context) {
            Some(&id) => id,
            None => {
                let id = self.contexts.len();
                self.contexts.push(context.to_string());
                self.context_ids.insert(context.to_string(), id);
                id
            }
        };
        *self.rows[row].entry(id).or_insert(0) += 1;
    }

    pub fn merge(&mut self, other: CoocCounter) {
        for (row, counts) in other.rows.into_iter().enumerate() {
            for (id, n) in counts {
                let ctx = &other.contexts[id];
                let mine = match self.context_ids.get(ctx) {
                    Some(&m) => m,
                    None => {
                        let m = self.contexts.len();
                        self.contexts.push(ctx.clone());
                        self.context_ids.insert(ctx.clone(), m);
                        m
                    }
                };
                *self.rows[row].entry(mine).or_insert(0) += n;
            }
        }
    }

    pub fn finish(self, vocab: Vocabulary, context_limit: usize) -> CoocMatrix {
        let mut marginals = vec![0u64; self.contexts.len()];
        for row in &self.rows {
            for (&id, &n) in row {
                marginals[id] += n;
            }
        }
        let mut order: Vec<usize> = (0..self.contexts.len()).collect();
        order.sort_by(|&a, &b| {
            marginals[b]
                .cmp(&marginals[a])
                .then_with(|| self.contexts[a].cmp(&self.contexts[b]))
        });
        order.truncate(context_limit);
        let mut remap = vec![usize::MAX; self.contexts.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old] = new;
        }
        let cols = ContextVocab::from_strings(order.iter().map(|&i| self.contexts[i].clone()).collect());
        let cells = self
            .rows
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .filter(|&(id, _)| remap[id] != usize::MAX)
                    .map(|(id, n)| (remap[id], n as f64))
                    .collect()
            })
            .collect();
        CoocMatrix::from_rows(vocab, cols, cells)
    }
}

/// Positive pointwise mutual information with natural log.
///
/// `ppmi(w, c) = max(0, ln(p(w,c) / (p(w) p(c))))`; cells that become zero
/// are removed.
pub fn ppmi_reweight(counts: &CoocMatrix) -> Result<CoocMatrix, MatrixError> {
    let total = counts.total();
    if total <= 0.0 {
        return Err(MatrixError::EmptyMatrix);
    }
    let row_sums: Vec<f64> = (0..counts.n_rows())
        .map(|r| counts.row(r).iter().map(|&(_, v)| v).sum())
        .collect();
    let mut col_sums = vec![0.0; counts.n_cols()];
    for (_, c, v) in counts.iter() {
        col_sums[c] += v;
    }
    let cells = (0..counts.n_rows())
        .map(|r| {
            counts
                .row(r)
                .iter()
                .filter_map(|&(c, v)| {
                    // p(w,c) / (p(w) p(c)) = n(w,c) N / (n(w) n(c))
                    let pmi = (v * total / (row_sums[r] * col_sums[c])).ln();
                    (pmi > 0.0).then_some((c, pmi))
                })
                .collect()
        })
        .collect();
    Ok(CoocMatrix::from_rows(
        counts.rows.clone(),
        counts.cols.clone(),
        cells,
    ))
}
