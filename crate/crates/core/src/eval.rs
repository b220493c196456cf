//! Labeled pair datasets, dev/test protocol, parameter tuning, accuracy and
//! McNemar significance.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{Binomial, DiscreteCDF};
use statrs::function::gamma::gamma_ur;
use thiserror::Error;

use crate::scoring::{self, ColumnEntropies, Decision, ScorerKind, ScorerParams};
use crate::solver::TranslationMatrix;
use crate::sparse::{SparseEmbeddings, WordIndex};

/// Feature budgets searched during tuning, before capping at the sparse dimension.
pub const K_GRID: [usize; 7] = [10, 25, 50, 100, 250, 500, 1000];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("pairs line {line}: {message}")]
    Row { line: usize, message: String },
    #[error("at least 3 pairs are needed to split, got {0}")]
    TooFewPairs(usize),
    #[error("dev set must contain both classes")]
    SingleClass,
    #[error("no pair could be classified")]
    NoClassifiable,
    #[error("prediction sets are misaligned: {0}")]
    Misaligned(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Hyper,
    Hypo,
    Cohypo,
    None,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Hyper => "hyper",
            Relation::Hypo => "hypo",
            Relation::Cohypo => "cohypo",
            Relation::None => "none",
        }
    }
}

impl FromStr for Relation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hyper" => Ok(Relation::Hyper),
            "hypo" => Ok(Relation::Hypo),
            "cohypo" => Ok(Relation::Cohypo),
            "none" => Ok(Relation::None),
            other => Err(format!("unknown relation {other:?}")),
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `(f_word, e_word)`: is the non-English word a kind of the English one?
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabeledPair {
    pub f_word: String,
    pub e_word: String,
    pub relation: Relation,
}

impl LabeledPair {
    pub fn new(f_word: impl Into<String>, e_word: impl Into<String>, relation: Relation) -> Self {
        LabeledPair {
            f_word: f_word.into(),
            e_word: e_word.into(),
            relation,
        }
    }

    pub fn is_positive(&self) -> bool {
        self.relation == Relation::Hyper
    }
}

/// Reads `f_word<TAB>e_word<TAB>relation` rows.
pub fn load_pairs<R: BufRead>(reader: R) -> Result<Vec<LabeledPair>, EvalError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let row_err = |message: String| EvalError::Row {
            line: line_no,
            message,
        };
        let cols: Vec<&str> = line.split('\t').collect();
        let [f, e, rel] = cols[..] else {
            return Err(row_err(format!("expected 3 columns, found {}", cols.len())));
        };
        let relation = rel.parse().map_err(row_err)?;
        if !seen.insert((f.to_string(), e.to_string())) {
            return Err(row_err(format!("duplicate pair ({f}, {e})")));
        }
        out.push(LabeledPair::new(f, e, relation));
    }
    Ok(out)
}

pub fn write_pairs<W: Write>(out: &mut W, pairs: &[LabeledPair]) -> io::Result<()> {
    for p in pairs {
        writeln!(out, "{}\t{}\t{}", p.f_word, p.e_word, p.relation)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Dev,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalDataset {
    pub pairs: Vec<LabeledPair>,
    pub split: Vec<Split>,
    pub seed: u64,
}

impl EvalDataset {
    fn select(&self, which: Split) -> Vec<LabeledPair> {
        self.pairs
            .iter()
            .zip(&self.split)
            .filter(|(_, s)| **s == which)
            .map(|(p, _)| p.clone())
            .collect()
    }

    pub fn dev(&self) -> Vec<LabeledPair> {
        self.select(Split::Dev)
    }

    pub fn test(&self) -> Vec<LabeledPair> {
        self.select(Split::Test)
    }
}

/// Stratified seeded 1:2 split. The dev set holds `floor(n / 3)` pairs with
/// as close to the overall positive rate as rounding allows.
pub fn split_dataset(pairs: Vec<LabeledPair>, seed: u64) -> Result<EvalDataset, EvalError> {
    let n = pairs.len();
    if n < 3 {
        return Err(EvalError::TooFewPairs(n));
    }
    let n_dev = n / 3;
    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| pairs[i].is_positive());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let dev_pos = ((pos.len() * n_dev) as f64 / n as f64).round() as usize;
    let dev_pos = dev_pos.min(pos.len()).max(n_dev.saturating_sub(neg.len()));
    let dev_neg = n_dev - dev_pos;
    let mut split = vec![Split::Test; n];
    for &i in pos[..dev_pos].iter().chain(&neg[..dev_neg]) {
        split[i] = Split::Dev;
    }
    Ok(EvalDataset { pairs, split, seed })
}

/// Produces a directional score for a pair given a feature budget, or `None`
/// when the pair cannot be classified.
pub trait PairScorer: Sync {
    fn kind(&self) -> ScorerKind;

    /// Largest meaningful budget (the sparse dimension).
    fn max_budget(&self) -> usize;

    fn score(&self, pair: &LabeledPair, budget: usize) -> Option<f64>;
}

fn space_entropies(spaces: &[&SparseEmbeddings]) -> ColumnEntropies {
    let dim = spaces.iter().map(|s| s.dim).max().unwrap_or(0);
    ColumnEntropies::from_rows(dim, spaces.iter().flat_map(|s| s.rows()).collect::<Vec<_>>())
}

/// Scores `f_word → e_word` directly in a shared bilingual space.
pub struct BilingualScorer {
    pub f_space: SparseEmbeddings,
    pub e_space: SparseEmbeddings,
    kind: ScorerKind,
    entropies: Option<ColumnEntropies>,
}

impl BilingualScorer {
    /// SLQS entropies are taken over the stacked rows of both languages.
    pub fn new(f_space: SparseEmbeddings, e_space: SparseEmbeddings, kind: ScorerKind) -> Self {
        let entropies = (kind == ScorerKind::Slqs).then(|| space_entropies(&[&e_space, &f_space]));
        BilingualScorer {
            f_space,
            e_space,
            kind,
            entropies,
        }
    }
}

impl PairScorer for BilingualScorer {
    fn kind(&self) -> ScorerKind {
        self.kind
    }

    fn max_budget(&self) -> usize {
        self.e_space.dim.max(self.f_space.dim)
    }

    fn score(&self, pair: &LabeledPair, budget: usize) -> Option<f64> {
        let u = self.f_space.lookup(&pair.f_word)?;
        let v = self.e_space.lookup(&pair.e_word)?;
        scoring::score_pair(self.kind, u, v, budget, self.entropies.as_ref()).ok()
    }
}

/// Translates the non-English word with its most common translation and
/// scores the resulting English pair monolingually.
pub struct MonoDepScorer {
    pub english: SparseEmbeddings,
    translations: HashMap<String, String>,
    kind: ScorerKind,
    entropies: Option<ColumnEntropies>,
}

impl MonoDepScorer {
    /// `s` is one-hot with rows indexed by `f_words` and columns by `e_words`.
    pub fn new(
        english: SparseEmbeddings,
        s: &TranslationMatrix,
        f_words: &WordIndex,
        e_words: &WordIndex,
        kind: ScorerKind,
    ) -> Self {
        assert_eq!(s.shape(), (f_words.len(), e_words.len()));
        let translations = (0..f_words.len())
            .filter_map(|i| {
                s.translation_of(i)
                    .map(|j| (f_words.word(i).to_string(), e_words.word(j).to_string()))
            })
            .collect();
        let entropies = (kind == ScorerKind::Slqs).then(|| space_entropies(&[&english]));
        MonoDepScorer {
            english,
            translations,
            kind,
            entropies,
        }
    }

    pub fn translate(&self, f_word: &str) -> Option<&str> {
        self.translations.get(f_word).map(String::as_str)
    }
}

impl PairScorer for MonoDepScorer {
    fn kind(&self) -> ScorerKind {
        self.kind
    }

    fn max_budget(&self) -> usize {
        self.english.dim
    }

    fn score(&self, pair: &LabeledPair, budget: usize) -> Option<f64> {
        let translated = self.translate(&pair.f_word)?;
        let u = self.english.lookup(translated)?;
        let v = self.english.lookup(&pair.e_word)?;
        scoring::score_pair(self.kind, u, v, budget, self.entropies.as_ref()).ok()
    }
}

/// The budget grid capped at `max_budget`, with the cap itself included when
/// it falls inside the grid's range.
pub fn budget_grid(max_budget: usize) -> Vec<usize> {
    let mut grid: Vec<usize> = K_GRID.iter().map(|&k| k.min(max_budget.max(1))).collect();
    grid.dedup();
    grid
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunedParams {
    pub params: ScorerParams,
    pub dev_accuracy: f64,
}

/// `(correct, total)` compared as exact fractions.
fn better(a: (usize, usize), b: (usize, usize)) -> bool {
    a.0 * b.1 > b.0 * a.1
}

/// Best threshold for one list of `(score, gold)` points. Candidates are the
/// midpoints of consecutive distinct scores plus one threshold below and one
/// at the top of the range, so all-positive and all-negative are reachable.
pub fn best_threshold(points: &[(f64, bool)]) -> Option<(f64, usize)> {
    if points.is_empty() {
        return None;
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let distinct: Vec<f64> = {
        let mut d: Vec<f64> = sorted.iter().map(|p| p.0).collect();
        d.dedup();
        d
    };
    let mut candidates = Vec::with_capacity(distinct.len() + 1);
    candidates.push(distinct[0] - 1.0);
    candidates.extend(distinct.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    candidates.push(distinct[distinct.len() - 1]);
    // prefix[i] = positives among the i smallest scores
    let mut prefix = vec![0usize; sorted.len() + 1];
    for (i, p) in sorted.iter().enumerate() {
        prefix[i + 1] = prefix[i] + p.1 as usize;
    }
    let total_pos = prefix[sorted.len()];
    let mut best: Option<(f64, usize)> = None;
    for t in candidates {
        let below = sorted.partition_point(|p| p.0 <= t);
        let correct = (below - prefix[below]) + (total_pos - prefix[below]);
        if best.is_none_or(|(_, c)| correct > c) {
            best = Some((t, correct));
        }
    }
    best
}

fn score_all(scorer: &dyn PairScorer, pairs: &[LabeledPair], budget: usize) -> Vec<Option<f64>> {
    pairs.par_iter().map(|p| scorer.score(p, budget)).collect()
}

/// Grid search over budget and threshold maximising dev accuracy; ties go to
/// the smaller budget, then the smaller threshold.
pub fn tune_params(scorer: &dyn PairScorer, dev: &[LabeledPair]) -> Result<TunedParams, EvalError> {
    let has_pos = dev.iter().any(LabeledPair::is_positive);
    let has_neg = dev.iter().any(|p| !p.is_positive());
    if !(has_pos && has_neg) {
        return Err(EvalError::SingleClass);
    }
    let kind = scorer.kind();
    let mut best: Option<(ScorerParams, (usize, usize))> = None;
    for budget in budget_grid(scorer.max_budget()) {
        let points: Vec<(f64, bool)> = score_all(scorer, dev, budget)
            .into_iter()
            .zip(dev)
            .filter_map(|(s, p)| s.map(|s| (s, p.is_positive())))
            .collect();
        let Some((t, correct)) = best_threshold(&points) else {
            continue;
        };
        let cell = (correct, points.len());
        if best.is_none_or(|(_, b)| better(cell, b)) {
            let params = ScorerParams {
                threshold: t,
                ..ScorerParams::default()
            }
            .with_budget(kind, budget);
            best = Some((params, cell));
        }
    }
    let (params, (correct, total)) = best.ok_or(EvalError::NoClassifiable)?;
    Ok(TunedParams {
        params,
        dev_accuracy: correct as f64 / total as f64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub coverage: f64,
    pub scores: Vec<Option<f64>>,
    /// `None` for unclassifiable pairs.
    pub predictions: Vec<Option<bool>>,
}

impl Evaluation {
    pub fn n_classifiable(&self) -> usize {
        self.predictions.iter().flatten().count()
    }
}

pub fn evaluate_accuracy(
    scorer: &dyn PairScorer,
    params: &ScorerParams,
    test: &[LabeledPair],
) -> Result<Evaluation, EvalError> {
    let scores = score_all(scorer, test, params.budget(scorer.kind()));
    let predictions: Vec<Option<bool>> = scores
        .iter()
        .map(|s| match s {
            Some(s) => scoring::decide(*s, params.threshold).as_bool(),
            None => Decision::Unclassifiable.as_bool(),
        })
        .collect();
    accuracy_of(&predictions, test).map(|(accuracy, coverage)| Evaluation {
        accuracy,
        coverage,
        scores,
        predictions,
    })
}

/// `(correct / classifiable, classifiable / total)`.
pub fn accuracy_of(
    predictions: &[Option<bool>],
    gold: &[LabeledPair],
) -> Result<(f64, f64), EvalError> {
    assert_eq!(predictions.len(), gold.len());
    let mut classifiable = 0usize;
    let mut correct = 0usize;
    for (pred, pair) in predictions.iter().zip(gold) {
        if let Some(p) = pred {
            classifiable += 1;
            correct += (*p == pair.is_positive()) as usize;
        }
    }
    if classifiable == 0 {
        return Err(EvalError::NoClassifiable);
    }
    Ok((
        correct as f64 / classifiable as f64,
        classifiable as f64 / gold.len() as f64,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McNemar {
    /// a correct, b wrong
    pub b: usize,
    /// a wrong, b correct
    pub c: usize,
    pub statistic: f64,
    pub p_value: f64,
}

/// Continuity-corrected statistic with a chi-squared (1 dof) p-value.
pub fn mcnemar_from_counts(b: usize, c: usize) -> McNemar {
    if b + c == 0 {
        return McNemar {
            b,
            c,
            statistic: 0.0,
            p_value: 1.0,
        };
    }
    let diff = (b.abs_diff(c) as f64 - 1.0).max(0.0);
    let statistic = diff * diff / (b + c) as f64;
    let p_value = if statistic == 0.0 {
        1.0
    } else {
        gamma_ur(0.5, statistic / 2.0)
    };
    McNemar {
        b,
        c,
        statistic,
        p_value,
    }
}

/// Two-sided exact binomial p-value on the discordant pairs.
pub fn mcnemar_exact(b: usize, c: usize) -> f64 {
    let n = (b + c) as u64;
    if n == 0 {
        return 1.0;
    }
    let binom = Binomial::new(0.5, n).expect("valid binomial");
    (2.0 * binom.cdf(b.min(c) as u64)).min(1.0)
}

fn discordant(a: &[bool], b: &[bool], gold: &[bool]) -> Result<(usize, usize), EvalError> {
    if a.len() != b.len() || a.len() != gold.len() {
        return Err(EvalError::Misaligned(format!(
            "lengths {}, {} and {} differ",
            a.len(),
            b.len(),
            gold.len()
        )));
    }
    let mut counts = (0, 0);
    for ((&pa, &pb), &g) in a.iter().zip(b).zip(gold) {
        match (pa == g, pb == g) {
            (true, false) => counts.0 += 1,
            (false, true) => counts.1 += 1,
            _ => {}
        }
    }
    Ok(counts)
}

pub fn mcnemar_test(preds_a: &[bool], preds_b: &[bool], gold: &[bool]) -> Result<McNemar, EvalError> {
    let (b, c) = discordant(preds_a, preds_b, gold)?;
    Ok(mcnemar_from_counts(b, c))
}

/// Restricts two prediction vectors to pairs both systems classified.
pub fn align_predictions(
    preds_a: &[Option<bool>],
    preds_b: &[Option<bool>],
    gold: &[bool],
) -> Result<(Vec<bool>, Vec<bool>, Vec<bool>), EvalError> {
    if preds_a.len() != preds_b.len() || preds_a.len() != gold.len() {
        return Err(EvalError::Misaligned("prediction vectors differ in length".into()));
    }
    let mut out = (Vec::new(), Vec::new(), Vec::new());
    for ((a, b), &g) in preds_a.iter().zip(preds_b).zip(gold) {
        if let (Some(a), Some(b)) = (a, b) {
            out.0.push(*a);
            out.1.push(*b);
            out.2.push(g);
        }
    }
    Ok(out)
}

/// Writes `f_word, e_word, relation, gold, prediction, score` rows; `NA`
/// marks unclassifiable pairs.
pub fn write_predictions<W: Write>(
    out: &mut W,
    pairs: &[LabeledPair],
    eval: &Evaluation,
) -> io::Result<()> {
    writeln!(out, "f_word\te_word\trelation\tgold\tprediction\tscore")?;
    for ((p, pred), score) in pairs.iter().zip(&eval.predictions).zip(&eval.scores) {
        let pred = match pred {
            Some(b) => (*b as u8).to_string(),
            None => "NA".to_string(),
        };
        let score = score.map_or_else(|| "NA".to_string(), |s| s.to_string());
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{pred}\t{score}",
            p.f_word,
            p.e_word,
            p.relation,
            p.is_positive() as u8
        )?;
    }
    Ok(())
}

/// A prediction file row: the pair and the system's decision.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub pair: LabeledPair,
    pub prediction: Option<bool>,
}

pub fn read_predictions<R: BufRead>(reader: R) -> Result<Vec<PredictionRow>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 || line.is_empty() {
            continue;
        }
        let row_err = |message: &str| EvalError::Row {
            line: i + 1,
            message: message.to_string(),
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 5 {
            return Err(row_err("expected at least 5 columns"));
        }
        let relation = cols[2].parse().map_err(|e: String| row_err(&e))?;
        let prediction = match cols[4] {
            "1" => Some(true),
            "0" => Some(false),
            "NA" => None,
            _ => return Err(row_err("prediction must be 0, 1 or NA")),
        };
        out.push(PredictionRow {
            pair: LabeledPair::new(cols[0], cols[1], relation),
            prediction,
        });
    }
    Ok(out)
}

/// Flat `key=value` results report.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub scorer: ScorerKind,
    pub accuracy: f64,
    pub coverage: f64,
    pub tuned_k: usize,
    pub tuned_t: f64,
    pub dev_accuracy: f64,
    pub n_dev: usize,
    pub n_test: usize,
}

impl EvalReport {
    pub fn write<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "scorer={}", self.scorer)?;
        writeln!(out, "accuracy={}", self.accuracy)?;
        writeln!(out, "coverage={}", self.coverage)?;
        writeln!(out, "tuned_k={}", self.tuned_k)?;
        writeln!(out, "tuned_t={}", self.tuned_t)?;
        writeln!(out, "dev_accuracy={}", self.dev_accuracy)?;
        writeln!(out, "n_dev={}", self.n_dev)?;
        writeln!(out, "n_test={}", self.n_test)
    }
}

/// Parses a `key=value` report into a map.
pub fn read_report<R: BufRead>(reader: R) -> io::Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for line in reader.lines() {
        let line = line?;
        if let Some((k, v)) = line.split_once('=') {
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(n_pos: usize, n_neg: usize) -> Vec<LabeledPair> {
        (0..n_pos)
            .map(|i| LabeledPair::new(format!("p{i}"), "x", Relation::Hyper))
            .chain((0..n_neg).map(|i| LabeledPair::new(format!("n{i}"), "x", Relation::Hypo)))
            .collect()
    }

    /// Scores looked up from a table, budget ignored.
    struct Table(HashMap<String, f64>);

    impl PairScorer for Table {
        fn kind(&self) -> ScorerKind {
            ScorerKind::BalApinc
        }
        fn max_budget(&self) -> usize {
            100
        }
        fn score(&self, pair: &LabeledPair, _: usize) -> Option<f64> {
            self.0.get(&pair.f_word).copied()
        }
    }

    #[test]
    fn loads_rows() {
        let p = load_pairs("pomme\tfruit\thyper\naliments\tlemon\thypo\n".as_bytes()).unwrap();
        assert!(p[0].is_positive());
        assert_eq!(p[1].relation, Relation::Hypo);
        assert!(!p[1].is_positive());
        assert!(load_pairs("a\tb\thyper\na\tb\thypo\n".as_bytes()).is_err());
        assert!(load_pairs("a\tb\tmeronym\n".as_bytes()).is_err());
        assert!(load_pairs("a\tb\n".as_bytes()).is_err());
    }

    #[test]
    fn split_sizes() {
        let d = split_dataset(pairs(5, 4), 1).unwrap();
        assert_eq!(d.dev().len(), 3);
        assert_eq!(d.test().len(), 6);
        assert_eq!(split_dataset(pairs(5, 4), 1).unwrap(), d);
        let big = split_dataset(pairs(1058, 1057), 3).unwrap();
        assert_eq!(big.dev().len(), 705);
        assert_eq!(big.test().len(), 1410);
        assert!(split_dataset(pairs(1, 1), 0).is_err());
    }

    #[test]
    fn four_point_tuning() {
        let dev = pairs(2, 2);
        let scores = [("p0", 0.8), ("p1", 0.6), ("n0", 0.4), ("n1", 0.2)];
        let t = Table(scores.iter().map(|(w, s)| (w.to_string(), *s)).collect());
        let tuned = tune_params(&t, &dev).unwrap();
        assert_eq!(tuned.dev_accuracy, 1.0);
        assert!((tuned.params.threshold - 0.5).abs() < 1e-15);
        assert_eq!(tuned.params.top_k, 10);
    }

    #[test]
    fn constant_scorer_gets_majority() {
        let dev = pairs(3, 3);
        let t = Table(dev.iter().map(|p| (p.f_word.clone(), 0.3)).collect());
        assert_eq!(tune_params(&t, &dev).unwrap().dev_accuracy, 0.5);
        assert!(matches!(tune_params(&t, &pairs(3, 0)), Err(EvalError::SingleClass)));
    }

    #[test]
    fn coverage_counts_oov() {
        let test = pairs(5, 5);
        let mut table: HashMap<String, f64> = test
            .iter()
            .map(|p| (p.f_word.clone(), if p.is_positive() { 1.0 } else { 0.0 }))
            .collect();
        table.remove("n0");
        let params = ScorerParams {
            threshold: 0.5,
            ..ScorerParams::default()
        };
        let e = evaluate_accuracy(&Table(table), &params, &test).unwrap();
        assert_eq!(e.accuracy, 1.0);
        assert!((e.coverage - 0.9).abs() < 1e-15);
        let none = evaluate_accuracy(&Table(HashMap::new()), &params, &test);
        assert!(matches!(none, Err(EvalError::NoClassifiable)));
    }

    #[test]
    fn mcnemar_cases() {
        let m = mcnemar_from_counts(10, 2);
        assert!((m.statistic - 49.0 / 12.0).abs() < 1e-12);
        assert!((m.p_value - 0.0433).abs() < 1e-3);
        assert_eq!(mcnemar_from_counts(4, 4).p_value, 1.0);
        assert_eq!(mcnemar_from_counts(0, 0).statistic, 0.0);
        // 2 * P(X <= 2), X ~ Bin(12, 1/2) = 2 * 79 / 4096
        assert!((mcnemar_exact(10, 2) - 158.0 / 4096.0).abs() < 1e-12);
        assert_eq!(mcnemar_exact(3, 3), 1.0);
        let g = [true, false];
        assert!(mcnemar_test(&[true], &[true, false], &g).is_err());
        assert_eq!(mcnemar_test(&g, &g, &g).unwrap().p_value, 1.0);
    }

    #[test]
    fn mono_dep_translates() {
        let english = SparseEmbeddings::from_rows(
            WordIndex::from_words(["dog", "animal"]),
            3,
            vec![vec![(0, 1.0)], vec![(0, 1.0), (1, 1.0)]],
        );
        let f = WordIndex::from_words(["chien", "chat"]);
        let e = WordIndex::from_words(["dog", "animal"]);
        let s = TranslationMatrix::one_hot(2, 2, &[(0, 0)]);
        let m = MonoDepScorer::new(english, &s, &f, &e, ScorerKind::BalApinc);
        assert_eq!(m.translate("chien"), Some("dog"));
        assert!(m.score(&LabeledPair::new("chien", "animal", Relation::Hyper), 10).is_some());
        assert!(m.score(&LabeledPair::new("chat", "animal", Relation::Hyper), 10).is_none());
        // translation equal to e_word: sqrt(1 * APinc(w -> w)) with one feature = sqrt(0.5)
        let own = m.score(&LabeledPair::new("chien", "dog", Relation::Hyper), 10).unwrap();
        assert!((own - 0.5f64.sqrt()).abs() < 1e-15);
    }
}
