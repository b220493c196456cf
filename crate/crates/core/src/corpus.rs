//! CoNLL-U ingestion, content-word vocabularies and corpus subsampling.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use flate2::read::MultiGzDecoder;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Default cap on the number of vocabulary entries.
pub const DEFAULT_VOCAB_SIZE: usize = 50_000;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {kind}")]
    Sentence { line: usize, kind: SentenceErrorKind },
    #[error("POS map line {line}: {message}")]
    PosMap { line: usize, message: String },
    #[error("vocabulary line {line}: {message}")]
    VocabFormat { line: usize, message: String },
}

/// Why a sentence was rejected. `line` in [`SentenceError`] points at the
/// offending token line (or the first line of the sentence for tree errors).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SentenceErrorKind {
    ColumnCount(usize),
    BadIndex(String),
    NonConsecutiveIndex { expected: usize, found: usize },
    NonIntegerHead(String),
    HeadOutOfRange { head: usize, len: usize },
    EmptyField(&'static str),
    Cycle { token: usize },
}

impl fmt::Display for SentenceErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ColumnCount(n) => write!(f, "expected 10 columns, found {n}"),
            Self::BadIndex(s) => write!(f, "bad token index {s:?}"),
            Self::NonConsecutiveIndex { expected, found } => {
                write!(f, "token index {found}, expected {expected}")
            }
            Self::NonIntegerHead(s) => write!(f, "non-integer head {s:?}"),
            Self::HeadOutOfRange { head, len } => {
                write!(f, "head {head} out of range for sentence of length {len}")
            }
            Self::EmptyField(name) => write!(f, "empty {name} field"),
            Self::Cycle { token } => write!(f, "cyclic head chain through token {token}"),
        }
    }
}

/// A sentence-level error record produced in lenient mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceError {
    pub line: usize,
    pub kind: SentenceErrorKind,
}

impl From<SentenceError> for CorpusError {
    fn from(e: SentenceError) -> Self {
        CorpusError::Sentence {
            line: e.line,
            kind: e.kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    /// Index of the head token, 0 for the root.
    pub head: usize,
    pub deprel: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedSentence {
    pub tokens: Vec<Token>,
}

impl ParsedSentence {
    /// Builds a sentence from tokens, checking the head structure.
    pub fn new(tokens: Vec<Token>) -> Result<Self, SentenceErrorKind> {
        let sentence = ParsedSentence { tokens };
        sentence.validate()?;
        Ok(sentence)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token at a 1-based index.
    pub fn token(&self, index: usize) -> Option<&Token> {
        index.checked_sub(1).and_then(|i| self.tokens.get(i))
    }

    /// Head token of `token`, `None` when attached to the root.
    pub fn parent(&self, token: &Token) -> Option<&Token> {
        self.token(token.head)
    }

    /// Dependents of the token at the given 1-based index, in sentence order.
    pub fn children(&self, index: usize) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(move |t| t.head == index)
    }

    /// Checks token numbering, field contents and that heads form a forest rooted at 0.
    pub fn validate(&self) -> Result<(), SentenceErrorKind> {
        let len = self.tokens.len();
        for (i, t) in self.tokens.iter().enumerate() {
            if t.index != i + 1 {
                return Err(SentenceErrorKind::NonConsecutiveIndex {
                    expected: i + 1,
                    found: t.index,
                });
            }
            if t.upos.is_empty() {
                return Err(SentenceErrorKind::EmptyField("UPOS"));
            }
            if t.deprel.is_empty() {
                return Err(SentenceErrorKind::EmptyField("DEPREL"));
            }
            if t.head > len {
                return Err(SentenceErrorKind::HeadOutOfRange { head: t.head, len });
            }
            if t.head == t.index {
                return Err(SentenceErrorKind::Cycle { token: t.index });
            }
        }
        // 0 = unvisited, 1 = on current path, 2 = reaches the root
        let mut state = vec![0u8; len + 1];
        state[0] = 2;
        for start in 1..=len {
            let mut path = Vec::new();
            let mut cur = start;
            while state[cur] == 0 {
                state[cur] = 1;
                path.push(cur);
                cur = self.tokens[cur - 1].head;
            }
            if state[cur] == 1 {
                return Err(SentenceErrorKind::Cycle { token: cur });
            }
            for p in path {
                state[p] = 2;
            }
        }
        Ok(())
    }

    /// Writes the sentence as CoNLL-U token lines followed by a blank line.
    /// Columns not modelled here are written as `_`.
    pub fn write_conllu<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for t in &self.tokens {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t_\t_\t{}\t{}\t_\t_",
                t.index, t.form, t.lemma, t.upos, t.head, t.deprel
            )?;
        }
        writeln!(out)
    }
}

/// How malformed sentences are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Report and skip.
    #[default]
    Lenient,
    /// Abort on the first malformed sentence.
    Strict,
}

/// Streaming CoNLL-U reader yielding one result per sentence.
pub struct ConlluReader<R> {
    lines: io::Lines<R>,
    line_no: usize,
    done: bool,
}

impl<R: BufRead> ConlluReader<R> {
    pub fn new(reader: R) -> Self {
        ConlluReader {
            lines: reader.lines(),
            line_no: 0,
            done: false,
        }
    }

    fn parse_token(line: &str) -> Result<Option<(Token, String)>, SentenceErrorKind> {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(SentenceErrorKind::ColumnCount(cols.len()));
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            return Ok(None);
        }
        let index = id
            .parse::<usize>()
            .map_err(|_| SentenceErrorKind::BadIndex(id.to_string()))?;
        if index == 0 {
            return Err(SentenceErrorKind::BadIndex(id.to_string()));
        }
        let head_field = cols[6].to_string();
        let token = Token {
            index,
            form: cols[1].to_string(),
            lemma: cols[2].to_string(),
            upos: cols[3].to_string(),
            head: 0,
            deprel: cols[7].to_string(),
        };
        Ok(Some((token, head_field)))
    }
}

impl<R: BufRead> Iterator for ConlluReader<R> {
    type Item = Result<ParsedSentence, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut tokens: Vec<(Token, String)> = Vec::new();
        let mut first_line = 0;
        let mut error: Option<SentenceError> = None;
        loop {
            let line = match self.lines.next() {
                None => {
                    self.done = true;
                    break;
                }
                Some(Err(e)) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
                Some(Ok(l)) => l,
            };
            self.line_no += 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                if tokens.is_empty() && error.is_none() {
                    continue;
                }
                break;
            }
            if line.starts_with('#') {
                continue;
            }
            if first_line == 0 {
                first_line = self.line_no;
            }
            if error.is_some() {
                continue;
            }
            match Self::parse_token(line) {
                Ok(Some(t)) => tokens.push(t),
                Ok(None) => {}
                Err(kind) => {
                    error = Some(SentenceError {
                        line: self.line_no,
                        kind,
                    })
                }
            }
        }
        if let Some(e) = error {
            return Some(Err(e.into()));
        }
        if tokens.is_empty() {
            // only skipped lines (ranges, empty nodes) in this block
            return if self.done { None } else { self.next() };
        }
        let result = build_sentence(tokens).map_err(|kind| {
            CorpusError::from(SentenceError {
                line: first_line,
                kind,
            })
        });
        Some(result)
    }
}

fn build_sentence(raw: Vec<(Token, String)>) -> Result<ParsedSentence, SentenceErrorKind> {
    let mut tokens = Vec::with_capacity(raw.len());
    for (mut token, head) in raw {
        token.head = head
            .parse::<usize>()
            .map_err(|_| SentenceErrorKind::NonIntegerHead(head.clone()))?;
        tokens.push(token);
    }
    ParsedSentence::new(tokens)
}

/// Result of parsing a whole stream in lenient mode.
#[derive(Debug, Default)]
pub struct ParseOutcome {
    pub sentences: Vec<ParsedSentence>,
    pub errors: Vec<SentenceError>,
}

/// Parses a full CoNLL-U stream. In strict mode the first malformed sentence
/// aborts; in lenient mode it is recorded in `errors` and skipped.
pub fn parse_conllu<R: BufRead>(reader: R, mode: ParseMode) -> Result<ParseOutcome, CorpusError> {
    let mut outcome = ParseOutcome::default();
    for item in ConlluReader::new(reader) {
        match item {
            Ok(s) => outcome.sentences.push(s),
            Err(CorpusError::Sentence { line, kind }) if mode == ParseMode::Lenient => {
                log::warn!("skipping malformed sentence at line {line}: {kind}");
                outcome.errors.push(SentenceError { line, kind });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(outcome)
}

/// Opens a corpus file, transparently decompressing gzip input.
pub fn open_corpus(path: &Path) -> io::Result<Box<dyn BufRead + Send>> {
    let mut file = BufReader::new(File::open(path)?);
    let magic = file.fill_buf()?;
    if magic.len() >= 2 && magic[0] == 0x1f && magic[1] == 0x8b {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(file))
    }
}

/// Writes sentences in CoNLL-U format.
pub fn write_conllu<'a, W, I>(out: &mut W, sentences: I) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a ParsedSentence>,
{
    for s in sentences {
        s.write_conllu(out)?;
    }
    Ok(())
}

/// Content-word classes kept in the vocabulary. Ordering breaks POS ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PosClass {
    Noun,
    Verb,
    Adj,
}

impl PosClass {
    pub fn as_str(self) -> &'static str {
        match self {
            PosClass::Noun => "NOUN",
            PosClass::Verb => "VERB",
            PosClass::Adj => "ADJ",
        }
    }

    pub const ALL: [PosClass; 3] = [PosClass::Noun, PosClass::Verb, PosClass::Adj];
}

impl fmt::Display for PosClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PosClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "NOUN" | "N" => Ok(PosClass::Noun),
            "VERB" | "V" => Ok(PosClass::Verb),
            "ADJ" | "A" => Ok(PosClass::Adj),
            other => Err(format!("unknown POS class {other:?}")),
        }
    }
}

/// Maps UPOS (or language-specific) tags onto content-word classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PosMap {
    map: HashMap<String, PosClass>,
}

impl Default for PosMap {
    fn default() -> Self {
        Self::identity()
    }
}

impl PosMap {
    /// `NOUN`, `VERB`, `ADJ` map to themselves; everything else is unmapped.
    pub fn identity() -> Self {
        let map = PosClass::ALL
            .iter()
            .map(|c| (c.as_str().to_string(), *c))
            .collect();
        PosMap { map }
    }

    /// Reads a `tag<TAB>class` mapping file. Blank lines and `#` comments are ignored.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, CorpusError> {
        let mut map = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(tag), Some(class), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(CorpusError::PosMap {
                    line: i + 1,
                    message: "expected tag<TAB>class".into(),
                });
            };
            let class = class
                .parse()
                .map_err(|message| CorpusError::PosMap { line: i + 1, message })?;
            map.insert(tag.to_string(), class);
        }
        Ok(PosMap { map })
    }

    pub fn class_of(&self, tag: &str) -> Option<PosClass> {
        self.map.get(tag).copied()
    }
}

/// Which token column is used as the word unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WordUnit {
    #[default]
    Lemma,
    Form,
}

impl WordUnit {
    pub fn of<'a>(&self, token: &'a Token) -> &'a str {
        match self {
            WordUnit::Lemma => &token.lemma,
            WordUnit::Form => &token.form,
        }
    }
}

impl FromStr for WordUnit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lemma" => Ok(WordUnit::Lemma),
            "form" => Ok(WordUnit::Form),
            other => Err(format!("unknown word unit {other:?} (expected lemma|form)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabEntry {
    pub word: String,
    pub pos: PosClass,
    pub freq: u64,
}

/// Frequency-ordered content-word vocabulary with dense ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    entries: Vec<VocabEntry>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from entries, sorting by descending frequency then word.
    pub fn from_entries(mut entries: Vec<VocabEntry>) -> Self {
        entries.sort_by(|a, b| b.freq.cmp(&a.freq).then_with(|| a.word.cmp(&b.word)));
        entries.dedup_by(|a, b| a.word == b.word);
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.word.clone(), i))
            .collect();
        Vocabulary { entries, index }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    pub fn word(&self, id: usize) -> &str {
        &self.entries[id].word
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.word.as_str())
    }

    /// Writes `word<TAB>pos<TAB>freq<TAB>id` rows in id order.
    pub fn write_tsv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for (id, e) in self.entries.iter().enumerate() {
            writeln!(out, "{}\t{}\t{}\t{}", e.word, e.pos, e.freq, id)?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R) -> Result<Self, CorpusError> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let bad = |message: &str| CorpusError::VocabFormat {
                line: i + 1,
                message: message.to_string(),
            };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(bad("expected 4 columns"));
            }
            let pos = cols[1].parse().map_err(|m: String| bad(&m))?;
            let freq = cols[2].parse().map_err(|_| bad("bad frequency"))?;
            let id: usize = cols[3].parse().map_err(|_| bad("bad id"))?;
            if id != entries.len() {
                return Err(bad("ids must be dense and sorted"));
            }
            entries.push(VocabEntry {
                word: cols[0].to_string(),
                pos,
                freq,
            });
        }
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.word.clone(), i))
            .collect();
        Ok(Vocabulary { entries, index })
    }
}

/// Mergeable per-shard vocabulary counts. Merging is commutative.
#[derive(Debug, Clone, Default)]
pub struct VocabCounter {
    counts: HashMap<String, BTreeMap<PosClass, u64>>,
}

impl VocabCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_sentence(
        &mut self,
        sentence: &ParsedSentence,
        unit: WordUnit,
        pos_map: &PosMap,
        pos_set: &[PosClass],
    ) {
        for t in &sentence.tokens {
            if let Some(class) = pos_map.class_of(&t.upos) {
                if pos_set.contains(&class) {
                    *self
                        .counts
                        .entry(unit.of(t).to_string())
                        .or_default()
                        .entry(class)
                        .or_insert(0) += 1;
                }
            }
        }
    }

    pub fn merge(&mut self, other: VocabCounter) {
        for (word, by_pos) in other.counts {
            let slot = self.counts.entry(word).or_default();
            for (pos, n) in by_pos {
                *slot.entry(pos).or_insert(0) += n;
            }
        }
    }

    /// Keeps the `max_size` most frequent words, ties broken by ascending word.
    /// A word's class is its most frequent tagged class.
    pub fn finish(self, max_size: usize) -> Vocabulary {
        let mut entries: Vec<VocabEntry> = self
            .counts
            .into_iter()
            .map(|(word, by_pos)| {
                let freq = by_pos.values().sum();
                // BTreeMap iterates classes in order, so max_by_key keeps the last maximum;
                // reverse to prefer the earliest class on ties.
                let pos = by_pos
                    .iter()
                    .rev()
                    .max_by_key(|(_, n)| **n)
                    .map(|(p, _)| *p)
                    .unwrap_or(PosClass::Noun);
                VocabEntry { word, pos, freq }
            })
            .collect();
        entries.sort_by(|a, b| b.freq.cmp(&a.freq).then_with(|| a.word.cmp(&b.word)));
        entries.truncate(max_size);
        Vocabulary::from_entries(entries)
    }
}

/// Counts content-word frequencies and keeps the `max_size` most frequent.
pub fn build_vocabulary<'a, I>(
    sentences: I,
    max_size: usize,
    pos_set: &[PosClass],
    pos_map: &PosMap,
    unit: WordUnit,
) -> Vocabulary
where
    I: IntoIterator<Item = &'a ParsedSentence>,
{
    assert!(max_size >= 1, "max_size must be positive");
    assert!(!pos_set.is_empty(), "pos_set must be nonempty");
    let mut counter = VocabCounter::new();
    for s in sentences {
        counter.add_sentence(s, unit, pos_map, pos_set);
    }
    counter.finish(max_size)
}

/// Keeps each sentence independently with probability `fraction`.
///
/// The selection depends only on the seed and the position in the stream.
pub fn subsample_corpus<I>(
    sentences: I,
    fraction: f64,
    seed: u64,
) -> impl Iterator<Item = ParsedSentence>
where
    I: IntoIterator<Item = ParsedSentence>,
{
    assert!(
        fraction > 0.0 && fraction <= 1.0,
        "fraction must lie in (0, 1]"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sentences
        .into_iter()
        .filter(move |_| rng.random::<f64>() < fraction)
}
