//! Directional entailment scores over sparse non-negative features.
//!
//! `BalAPinc(u → v) = sqrt(LIN(u, v) · APinc(u → v))` measures how well the
//! features of `u` are included among those of `v`. SLQS compares the median
//! column entropy of each word's strongest dimensions.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Default number of dimensions used for SLQS informativeness.
pub const DEFAULT_SLQS_N: usize = 50;

#[derive(Debug, Error, PartialEq)]
pub enum ScoreError {
    #[error("informativeness is undefined for an all-zero vector")]
    ZeroVector,
    #[error("SLQS is undefined when the entailed word has zero informativeness")]
    ZeroEntailedEntropy,
    #[error("invalid feature list: {0}")]
    InvalidList(String),
}

/// A word's positive features, strongest first (ties by ascending id).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankedFeatureList {
    entries: Vec<(usize, f64)>,
}

impl RankedFeatureList {
    /// Ranks the positive entries of a sparse vector, keeping at most `top_k`.
    pub fn from_sparse(vector: &[(usize, f64)], top_k: usize) -> Self {
        let mut entries: Vec<(usize, f64)> = vector.iter().copied().filter(|&(_, w)| w > 0.0).collect();
        // a repeated id keeps its largest weight
        entries.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.total_cmp(&a.1)));
        entries.dedup_by_key(|e| e.0);
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        entries.truncate(top_k);
        RankedFeatureList { entries }
    }

    /// Accepts an already ranked list, checking the ordering invariants.
    pub fn new(entries: Vec<(usize, f64)>) -> Result<Self, ScoreError> {
        if entries.iter().any(|&(_, w)| !(w > 0.0) || !w.is_finite()) {
            return Err(ScoreError::InvalidList("weights must be positive".into()));
        }
        for pair in entries.windows(2) {
            let ((ia, wa), (ib, wb)) = (pair[0], pair[1]);
            if wa < wb || (wa == wb && ia >= ib) {
                return Err(ScoreError::InvalidList(
                    "entries must be sorted by weight descending, then id ascending".into(),
                ));
            }
        }
        let mut ids: Vec<usize> = entries.iter().map(|e| e.0).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != entries.len() {
            return Err(ScoreError::InvalidList("duplicate feature id".into()));
        }
        Ok(RankedFeatureList { entries })
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn truncated(&self, k: usize) -> Self {
        RankedFeatureList {
            entries: self.entries[..k.min(self.entries.len())].to_vec(),
        }
    }

    fn total_weight(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    /// Feature id → (1-based rank, weight).
    fn rank_index(&self) -> HashMap<usize, (usize, f64)> {
        self.entries
            .iter()
            .enumerate()
            .map(|(r, &(f, w))| (f, (r + 1, w)))
            .collect()
    }
}

/// Symmetric weighted overlap in `[0, 1]`.
pub fn lin_score(u: &RankedFeatureList, v: &RankedFeatureList) -> f64 {
    let denom = u.total_weight() + v.total_weight();
    if denom == 0.0 {
        return 0.0;
    }
    let (small, large) = if u.len() <= v.len() { (u, v) } else { (v, u) };
    let index = large.rank_index();
    // summing in feature order keeps the result exactly symmetric
    let mut shared: Vec<(usize, f64)> = small
        .entries
        .iter()
        .filter_map(|&(f, w)| index.get(&f).map(|&(_, w2)| (f, w + w2)))
        .collect();
    shared.sort_unstable_by_key(|e| e.0);
    shared.iter().map(|e| e.1).sum::<f64>() / denom
}

/// Average-precision style inclusion of `u`'s features in `v`'s.
///
/// `rel′(f) = 1 − rank(f, v) / (|v| + 1)` for shared features, 0 otherwise.
pub fn apinc_score(u: &RankedFeatureList, v: &RankedFeatureList) -> f64 {
    if u.is_empty() {
        return 0.0;
    }
    let index = v.rank_index();
    let denom = (v.len() + 1) as f64;
    let mut included = 0usize;
    let mut sum = 0.0;
    for (r, &(f, _)) in u.entries.iter().enumerate() {
        if let Some(&(rank_v, _)) = index.get(&f) {
            included += 1;
            let precision = included as f64 / (r + 1) as f64;
            sum += precision * (1.0 - rank_v as f64 / denom);
        }
    }
    sum / u.len() as f64
}

/// Geometric mean of LIN and APinc.
pub fn balapinc(u: &RankedFeatureList, v: &RankedFeatureList) -> f64 {
    // adding 0.0 turns a negative zero into a positive one
    (lin_score(u, v) * apinc_score(u, v)).sqrt() + 0.0
}

/// Entropy (nats) of each column of a non-negative matrix, normalised over rows.
/// Columns without mass have no entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnEntropies {
    entropies: Vec<Option<f64>>,
}

impl ColumnEntropies {
    pub fn from_rows<'a, I>(dim: usize, rows: I) -> Self
    where
        I: IntoIterator<Item = &'a [(usize, f64)]> + Clone,
    {
        let mut sums = vec![0.0; dim];
        for row in rows.clone() {
            for &(c, w) in row {
                if w > 0.0 {
                    sums[c] += w;
                }
            }
        }
        let mut h = vec![0.0; dim];
        for row in rows {
            for &(c, w) in row {
                if w > 0.0 {
                    let p = w / sums[c];
                    h[c] -= p * p.ln();
                }
            }
        }
        let entropies = h
            .into_iter()
            .zip(sums)
            .map(|(h, s)| (s > 0.0).then_some(h.max(0.0)))
            .collect();
        ColumnEntropies { entropies }
    }

    pub fn get(&self, dim: usize) -> Option<f64> {
        self.entropies.get(dim).copied().flatten()
    }

    pub fn dim(&self) -> usize {
        self.entropies.len()
    }
}

/// Median entropy of the word's `n` strongest dimensions (ties to lower id).
pub fn word_informativeness(
    word_vector: &[(usize, f64)],
    entropies: &ColumnEntropies,
    n: usize,
) -> Result<f64, ScoreError> {
    assert!(n >= 1, "N must be positive");
    let top = RankedFeatureList::from_sparse(word_vector, n);
    if top.is_empty() {
        return Err(ScoreError::ZeroVector);
    }
    let mut values: Vec<f64> = top
        .entries
        .iter()
        .map(|&(c, _)| entropies.get(c).expect("a positive weight implies column mass"))
        .collect();
    values.sort_by(f64::total_cmp);
    let m = values.len();
    Ok(if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    })
}

/// `1 − E_u / E_v`.
pub fn slqs_from_entropies(e_u: f64, e_v: f64) -> Result<f64, ScoreError> {
    if e_v == 0.0 {
        return Err(ScoreError::ZeroEntailedEntropy);
    }
    Ok(1.0 - e_u / e_v)
}

pub fn slqs(
    u: &[(usize, f64)],
    v: &[(usize, f64)],
    entropies: &ColumnEntropies,
    n: usize,
) -> Result<f64, ScoreError> {
    let e_u = word_informativeness(u, entropies, n)?;
    let e_v = word_informativeness(v, entropies, n)?;
    slqs_from_entropies(e_u, e_v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScorerKind {
    #[default]
    BalApinc,
    Slqs,
}

impl FromStr for ScorerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "balapinc" => Ok(ScorerKind::BalApinc),
            "slqs" => Ok(ScorerKind::Slqs),
            other => Err(format!("unknown scorer {other:?} (expected balapinc|slqs)")),
        }
    }
}

impl fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScorerKind::BalApinc => "balapinc",
            ScorerKind::Slqs => "slqs",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScorerParams {
    pub threshold: f64,
    pub top_k: usize,
    pub slqs_n: usize,
}

impl Default for ScorerParams {
    fn default() -> Self {
        ScorerParams {
            threshold: 0.0,
            top_k: 100,
            slqs_n: DEFAULT_SLQS_N,
        }
    }
}

impl ScorerParams {
    /// The feature budget the given scorer reads.
    pub fn budget(&self, kind: ScorerKind) -> usize {
        match kind {
            ScorerKind::BalApinc => self.top_k,
            ScorerKind::Slqs => self.slqs_n,
        }
    }

    pub fn with_budget(mut self, kind: ScorerKind, budget: usize) -> Self {
        match kind {
            ScorerKind::BalApinc => self.top_k = budget,
            ScorerKind::Slqs => self.slqs_n = budget,
        }
        self
    }
}

/// Scores `u → v` with the given feature budget (K for BalAPinc, N for SLQS).
pub fn score_pair(
    kind: ScorerKind,
    u: &[(usize, f64)],
    v: &[(usize, f64)],
    budget: usize,
    entropies: Option<&ColumnEntropies>,
) -> Result<f64, ScoreError> {
    match kind {
        ScorerKind::BalApinc => Ok(balapinc(
            &RankedFeatureList::from_sparse(u, budget),
            &RankedFeatureList::from_sparse(v, budget),
        )),
        ScorerKind::Slqs => slqs(
            u,
            v,
            entropies.expect("SLQS needs column entropies"),
            budget,
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Positive,
    Negative,
    /// A word is missing or the score is undefined.
    Unclassifiable,
}

impl Decision {
    pub fn as_bool(self) -> Option<bool> {
        match self {
            Decision::Positive => Some(true),
            Decision::Negative => Some(false),
            Decision::Unclassifiable => None,
        }
    }
}

/// Strict threshold decision: positive iff `score > t`.
pub fn decide(score: f64, threshold: f64) -> Decision {
    if score > threshold {
        Decision::Positive
    } else {
        Decision::Negative
    }
}

/// Classifies `u → v`; `None` vectors mark out-of-vocabulary words.
pub fn classify_pair(
    u: Option<&[(usize, f64)]>,
    v: Option<&[(usize, f64)]>,
    kind: ScorerKind,
    params: &ScorerParams,
    entropies: Option<&ColumnEntropies>,
) -> Decision {
    let (Some(u), Some(v)) = (u, v) else {
        return Decision::Unclassifiable;
    };
    match score_pair(kind, u, v, params.budget(kind), entropies) {
        Ok(s) => decide(s, params.threshold),
        Err(_) => Decision::Unclassifiable,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn list(entries: &[(usize, f64)]) -> RankedFeatureList {
        RankedFeatureList::from_sparse(entries, usize::MAX)
    }

    #[test]
    fn lin_examples() {
        let u = list(&[(0, 1.0), (1, 1.0)]);
        let v = list(&[(1, 1.0), (2, 1.0)]);
        assert!((lin_score(&u, &v) - 0.5).abs() < 1e-15);
        assert_eq!(lin_score(&u, &u), 1.0);
        assert_eq!(lin_score(&u, &list(&[(5, 2.0)])), 0.0);
        assert_eq!(lin_score(&list(&[]), &list(&[])), 0.0);
    }

    #[test]
    fn apinc_examples() {
        let u = list(&[(0, 2.0), (1, 1.0)]);
        assert!((apinc_score(&u, &u) - 0.5).abs() < 1e-15);
        assert_eq!(apinc_score(&u, &list(&[(4, 1.0)])), 0.0);
        let single = list(&[(3, 1.0)]);
        assert!((apinc_score(&single, &single) - 0.5).abs() < 1e-15);
        assert_eq!(apinc_score(&list(&[]), &u), 0.0);
    }

    #[test]
    fn balapinc_identity_pair() {
        let u = list(&[(0, 1.0), (1, 1.0)]);
        assert!((balapinc(&u, &u) - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(balapinc(&u, &list(&[(7, 1.0)])), 0.0);
    }

    #[test]
    fn ranking_and_truncation() {
        let l = RankedFeatureList::from_sparse(&[(3, 0.5), (1, 2.0), (0, 0.5), (2, 0.0)], 2);
        assert_eq!(l.entries(), &[(1, 2.0), (0, 0.5)]);
        assert!(RankedFeatureList::new(vec![(0, 1.0), (1, 2.0)]).is_err());
        assert!(RankedFeatureList::new(vec![(1, 1.0), (0, 1.0)]).is_err());
        assert!(RankedFeatureList::new(vec![(0, 2.0), (1, 1.0)]).is_ok());
    }

    #[test]
    fn asymmetry_witness() {
        // u's support is a subset of v's
        let u = list(&[(0, 3.0), (1, 2.0)]);
        let v = list(&[(0, 3.0), (1, 2.0), (2, 1.5), (3, 1.0)]);
        assert!(apinc_score(&u, &v) > apinc_score(&v, &u));
    }

    #[test]
    fn entropy_cases() {
        // dimension 0: single nonzero; dimension 1: uniform over four words
        let rows: Vec<Vec<(usize, f64)>> = vec![
            vec![(0, 2.0), (1, 0.5)],
            vec![(1, 0.5)],
            vec![(1, 0.5)],
            vec![(1, 0.5)],
        ];
        let h = ColumnEntropies::from_rows(3, rows.iter().map(Vec::as_slice));
        assert_eq!(h.get(0), Some(0.0));
        assert!((h.get(1).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert_eq!(h.get(2), None);
        // N = 1 picks the heaviest dimension, 0
        assert_eq!(word_informativeness(&rows[0], &h, 1).unwrap(), 0.0);
        // median of {0, ln 4}
        let e = word_informativeness(&rows[0], &h, 2).unwrap();
        assert!((e - 0.5 * 4f64.ln()).abs() < 1e-12);
        assert_eq!(word_informativeness(&[], &h, 3), Err(ScoreError::ZeroVector));
    }

    #[test]
    fn slqs_formula() {
        assert_eq!(slqs_from_entropies(1.3, 1.3).unwrap(), 0.0);
        assert_eq!(slqs_from_entropies(1.0, 2.0).unwrap(), 0.5);
        assert_eq!(slqs_from_entropies(2.0, 1.0).unwrap(), -1.0);
        assert_eq!(
            slqs_from_entropies(1.0, 0.0),
            Err(ScoreError::ZeroEntailedEntropy)
        );
    }

    #[test]
    fn classification_policy() {
        assert_eq!(decide(0.3, 0.2), Decision::Positive);
        assert_eq!(decide(0.2, 0.2), Decision::Negative);
        let v = [(0, 1.0)];
        let p = ScorerParams::default();
        assert_eq!(
            classify_pair(None, Some(&v), ScorerKind::BalApinc, &p, None),
            Decision::Unclassifiable
        );
    }
}
