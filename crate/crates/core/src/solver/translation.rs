//! Translation matrices built from word-alignment counts.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, BufRead};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sparse::WordIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TranslationMode {
    /// Each row keeps only its most frequent translation, with weight 1.
    #[default]
    OneHot,
    /// Each row holds count / row-sum.
    Weighted,
}

impl FromStr for TranslationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "one-hot" | "onehot" => Ok(TranslationMode::OneHot),
            "weighted" => Ok(TranslationMode::Weighted),
            other => Err(format!(
                "unknown translation mode {other:?} (expected one-hot|weighted)"
            )),
        }
    }
}

impl fmt::Display for TranslationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TranslationMode::OneHot => "one-hot",
            TranslationMode::Weighted => "weighted",
        })
    }
}

/// Sparse non-negative `rows × cols` correspondence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationMatrix {
    rows: usize,
    cols: usize,
    mode: TranslationMode,
    entries: Vec<Vec<(usize, f64)>>,
}

/// A single alignment-count record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentCount {
    pub e_word: String,
    pub f_word: String,
    pub count: u64,
}

impl TranslationMatrix {
    /// A matrix with no nonzeros.
    pub fn empty(rows: usize, cols: usize) -> Self {
        TranslationMatrix {
            rows,
            cols,
            mode: TranslationMode::OneHot,
            entries: vec![Vec::new(); rows],
        }
    }

    /// One-hot matrix from `(row, col)` pairs. At most one pair per row.
    pub fn one_hot(rows: usize, cols: usize, pairs: &[(usize, usize)]) -> Self {
        let mut entries = vec![Vec::new(); rows];
        for &(i, j) in pairs {
            assert!(i < rows && j < cols, "pair out of range");
            assert!(entries[i].is_empty(), "row {i} paired twice");
            entries[i].push((j, 1.0));
        }
        TranslationMatrix {
            rows,
            cols,
            mode: TranslationMode::OneHot,
            entries,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn mode(&self) -> TranslationMode {
        self.mode
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.entries[i]
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.nnz() == 0
    }

    /// The column-major view: for each column, its `(row, weight)` entries.
    pub fn transposed_rows(&self) -> Vec<Vec<(usize, f64)>> {
        let mut out = vec![Vec::new(); self.cols];
        for (i, row) in self.entries.iter().enumerate() {
            for &(j, w) in row {
                out[j].push((i, w));
            }
        }
        out
    }

    /// The single translation of a row in one-hot mode.
    pub fn translation_of(&self, i: usize) -> Option<usize> {
        self.entries[i].first().map(|&(j, _)| j)
    }

    /// Checks the mode's row invariant.
    pub fn check(&self) -> Result<(), String> {
        for (i, row) in self.entries.iter().enumerate() {
            if row.iter().any(|&(j, w)| j >= self.cols || !(w > 0.0)) {
                return Err(format!("row {i} has an invalid entry"));
            }
            match self.mode {
                TranslationMode::OneHot => {
                    if row.len() > 1 || row.iter().any(|&(_, w)| w != 1.0) {
                        return Err(format!("row {i} is not one-hot"));
                    }
                }
                TranslationMode::Weighted => {
                    let sum: f64 = row.iter().map(|&(_, w)| w).sum();
                    if !row.is_empty() && (sum - 1.0).abs() > 1e-9 {
                        return Err(format!("row {i} sums to {sum}"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Builds `S` from alignment counts. Words outside either index are dropped.
///
/// One-hot rows select the highest-count translation, ties going to the
/// lexicographically smallest target word. Repeated `(e, f)` records are summed.
pub fn build_translation_matrix<I>(
    counts: I,
    rows: &WordIndex,
    cols: &WordIndex,
    mode: TranslationMode,
) -> TranslationMatrix
where
    I: IntoIterator<Item = AlignmentCount>,
{
    let mut per_row: Vec<BTreeMap<&str, u64>> = vec![BTreeMap::new(); rows.len()];
    for c in counts {
        if c.count == 0 {
            continue;
        }
        let (Some(i), Some(j)) = (rows.id(&c.e_word), cols.id(&c.f_word)) else {
            continue;
        };
        *per_row[i].entry(cols.word(j)).or_insert(0) += c.count;
    }
    let entries = per_row
        .into_iter()
        .map(|row| match mode {
            TranslationMode::OneHot => {
                // BTreeMap iterates ascending, so the first maximum wins ties.
                let mut best: Option<(&str, u64)> = None;
                for (w, n) in row {
                    if best.is_none_or(|(_, b)| n > b) {
                        best = Some((w, n));
                    }
                }
                best.map(|(w, _)| vec![(cols.id(w).expect("indexed word"), 1.0)])
                    .unwrap_or_default()
            }
            TranslationMode::Weighted => {
                let sum: u64 = row.values().sum();
                let mut v: Vec<(usize, f64)> = row
                    .into_iter()
                    .map(|(w, n)| (cols.id(w).expect("indexed word"), n as f64 / sum as f64))
                    .collect();
                v.sort_by_key(|&(j, _)| j);
                v
            }
        })
        .collect();
    TranslationMatrix {
        rows: rows.len(),
        cols: cols.len(),
        mode,
        entries,
    }
}

/// Swaps the roles of the two languages in each record.
pub fn reverse_counts(counts: &[AlignmentCount]) -> Vec<AlignmentCount> {
    counts
        .iter()
        .map(|c| AlignmentCount {
            e_word: c.f_word.clone(),
            f_word: c.e_word.clone(),
            count: c.count,
        })
        .collect()
}

/// Reads `e_word<TAB>f_word<TAB>count` rows.
pub fn read_alignment_counts<R: BufRead>(reader: R) -> io::Result<Vec<AlignmentCount>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let parsed = match cols[..] {
            [e, f, n] => n.parse().ok().map(|count| AlignmentCount {
                e_word: e.to_string(),
                f_word: f.to_string(),
                count,
            }),
            _ => None,
        };
        match parsed {
            Some(c) if c.count >= 1 => out.push(c),
            _ => {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("translation counts line {}: malformed row {line:?}", i + 1),
                ))
            }
        }
    }
    Ok(out)
}

/// Keeps each record independently with probability `fraction`.
pub fn subsample_counts(counts: &[AlignmentCount], fraction: f64, seed: u64) -> Vec<AlignmentCount> {
    assert!(fraction > 0.0 && fraction <= 1.0, "fraction must lie in (0, 1]");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    counts
        .iter()
        .filter(|_| rng.random::<f64>() < fraction)
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(e: &str, f: &str, n: u64) -> AlignmentCount {
        AlignmentCount {
            e_word: e.into(),
            f_word: f.into(),
            count: n,
        }
    }

    fn setup() -> (WordIndex, WordIndex) {
        (
            WordIndex::from_words(["dog", "bank", "cat"]),
            WordIndex::from_words(["chien", "canine", "rive", "banque"]),
        )
    }

    #[test]
    fn one_hot_argmax() {
        let (e, f) = setup();
        let s = build_translation_matrix(
            vec![rec("dog", "chien", 10), rec("dog", "canine", 3)],
            &e,
            &f,
            TranslationMode::OneHot,
        );
        assert_eq!(s.row(0), &[(0, 1.0)]);
        assert!(s.row(2).is_empty());
        s.check().unwrap();
    }

    #[test]
    fn weighted_rows_normalise() {
        let (e, f) = setup();
        let s = build_translation_matrix(
            vec![rec("dog", "chien", 10), rec("dog", "canine", 3)],
            &e,
            &f,
            TranslationMode::Weighted,
        );
        assert_eq!(s.row(0), &[(0, 10.0 / 13.0), (1, 3.0 / 13.0)]);
        s.check().unwrap();
    }

    #[test]
    fn ties_go_to_smallest_word() {
        let (e, f) = setup();
        let s = build_translation_matrix(
            vec![rec("bank", "rive", 5), rec("bank", "banque", 5)],
            &e,
            &f,
            TranslationMode::OneHot,
        );
        assert_eq!(s.translation_of(1), f.id("banque"));
    }

    #[test]
    fn unknown_words_dropped_and_duplicates_summed() {
        let (e, f) = setup();
        let s = build_translation_matrix(
            vec![
                rec("dog", "hund", 50),
                rec("dog", "canine", 3),
                rec("dog", "chien", 2),
                rec("dog", "chien", 2),
                rec("wolf", "chien", 9),
            ],
            &e,
            &f,
            TranslationMode::OneHot,
        );
        assert_eq!(s.translation_of(0), f.id("chien"));
        assert_eq!(s.nnz(), 1);
    }

    #[test]
    fn reads_counts() {
        let c = read_alignment_counts("dog\tchien\t3\n\ncat\tchat\t1\n".as_bytes()).unwrap();
        assert_eq!(c, vec![rec("dog", "chien", 3), rec("cat", "chat", 1)]);
        assert!(read_alignment_counts("dog\tchien\n".as_bytes()).is_err());
        assert!(read_alignment_counts("dog\tchien\t0\n".as_bytes()).is_err());
    }

    #[test]
    fn subsampling_identity() {
        let c = vec![rec("a", "b", 1), rec("c", "d", 2)];
        assert_eq!(subsample_counts(&c, 1.0, 3), c);
    }
}
