//! Word–context co-occurrence events from parsed sentences.
//!
//! Four context definitions are supported:
//!
//! * `Full`: each child as `lemma#deprel`, the parent as `lemma#deprel^-1`
//!   (the target's own relation, marked as inverse).
//! * `Joint`: the parent concatenated with each sibling, `parent#sibling`.
//! * `Unlabeled`: parent and children as bare lemmas.
//! * `Window`: lemmas within a fixed linear distance.
//!
//! Punctuation (`UPOS = PUNCT`) never appears as a context.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use crate::corpus::{ParsedSentence, PosMap, Token, Vocabulary, WordUnit};

/// Suffix marking a context reached through the target's own head edge.
pub const INVERSE_MARKER: &str = "^-1";

/// Default number of context strings kept per matrix.
pub const DEFAULT_CONTEXT_LIMIT: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ContextEvent {
    pub target: String,
    pub context: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextKind {
    Full,
    Joint,
    Unlabeled,
    Window,
}

impl ContextKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ContextKind::Full => "full",
            ContextKind::Joint => "joint",
            ContextKind::Unlabeled => "unlabeled",
            ContextKind::Window => "window",
        }
    }
}

impl fmt::Display for ContextKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ContextKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(ContextKind::Full),
            "joint" => Ok(ContextKind::Joint),
            "unlabeled" => Ok(ContextKind::Unlabeled),
            "window" => Ok(ContextKind::Window),
            other => Err(format!(
                "unknown context type {other:?} (expected full|joint|unlabeled|window)"
            )),
        }
    }
}

/// Extraction settings shared by all context types.
#[derive(Debug, Clone)]
pub struct Extractor {
    pub kind: ContextKind,
    pub window: usize,
    /// Restrict window contexts to content words.
    pub content_only: bool,
    pub unit: WordUnit,
    pub pos_map: PosMap,
}

impl Extractor {
    pub fn new(kind: ContextKind) -> Self {
        Extractor {
            kind,
            window: 2,
            content_only: false,
            unit: WordUnit::Lemma,
            pos_map: PosMap::identity(),
        }
    }

    pub fn with_window(mut self, window: usize) -> Self {
        assert!(window >= 1, "window must be positive");
        self.window = window;
        self
    }

    pub fn extract(&self, sentence: &ParsedSentence, vocab: &Vocabulary) -> Vec<ContextEvent> {
        let mut out = Vec::new();
        self.extract_into(sentence, vocab, &mut out);
        out
    }

    pub fn extract_into(
        &self,
        sentence: &ParsedSentence,
        vocab: &Vocabulary,
        out: &mut Vec<ContextEvent>,
    ) {
        match self.kind {
            ContextKind::Full => dependency_contexts(sentence, vocab, self.unit, true, out),
            ContextKind::Unlabeled => dependency_contexts(sentence, vocab, self.unit, false, out),
            ContextKind::Joint => joint_contexts(sentence, vocab, self.unit, out),
            ContextKind::Window => window_contexts(
                sentence,
                vocab,
                self.window,
                self.content_only.then_some(&self.pos_map),
                self.unit,
                out,
            ),
        }
    }
}

fn is_punct(t: &Token) -> bool {
    t.upos == "PUNCT"
}

fn usable(word: &str) -> bool {
    !word.is_empty() && !word.contains(['\t', '\n'])
}

fn dependency_contexts(
    sentence: &ParsedSentence,
    vocab: &Vocabulary,
    unit: WordUnit,
    labeled: bool,
    out: &mut Vec<ContextEvent>,
) {
    for target in &sentence.tokens {
        let word = unit.of(target);
        if !vocab.contains(word) {
            continue;
        }
        for child in sentence.children(target.index) {
            let lemma = unit.of(child);
            if is_punct(child) || !usable(lemma) {
                continue;
            }
            let context = if labeled {
                format!("{lemma}#{}", child.deprel)
            } else {
                lemma.to_string()
            };
            out.push(ContextEvent {
                target: word.to_string(),
                context,
            });
        }
        if let Some(parent) = sentence.parent(target) {
            let lemma = unit.of(parent);
            if is_punct(parent) || !usable(lemma) {
                continue;
            }
            let context = if labeled {
                format!("{lemma}#{}{INVERSE_MARKER}", target.deprel)
            } else {
                lemma.to_string()
            };
            out.push(ContextEvent {
                target: word.to_string(),
                context,
            });
        }
    }
}

/// Children and parent contexts with relation labels and direction.
pub fn extract_full_contexts(sentence: &ParsedSentence, vocab: &Vocabulary) -> Vec<ContextEvent> {
    Extractor::new(ContextKind::Full).extract(sentence, vocab)
}

/// Parent and children as bare lemmas.
pub fn extract_unlabeled_contexts(
    sentence: &ParsedSentence,
    vocab: &Vocabulary,
) -> Vec<ContextEvent> {
    Extractor::new(ContextKind::Unlabeled).extract(sentence, vocab)
}

/// Parent concatenated with each sibling. Targets attached to the virtual
/// root have no parent and produce nothing.
pub fn extract_joint_contexts(sentence: &ParsedSentence, vocab: &Vocabulary) -> Vec<ContextEvent> {
    Extractor::new(ContextKind::Joint).extract(sentence, vocab)
}

/// Lemmas within `window` positions on either side.
pub fn extract_window_contexts(
    sentence: &ParsedSentence,
    vocab: &Vocabulary,
    window: usize,
) -> Vec<ContextEvent> {
    Extractor::new(ContextKind::Window)
        .with_window(window)
        .extract(sentence, vocab)
}

fn joint_contexts(
    sentence: &ParsedSentence,
    vocab: &Vocabulary,
    unit: WordUnit,
    out: &mut Vec<ContextEvent>,
) {
    for target in &sentence.tokens {
        let word = unit.of(target);
        if !vocab.contains(word) {
            continue;
        }
        let Some(parent) = sentence.parent(target) else {
            continue;
        };
        let parent_lemma = unit.of(parent);
        if is_punct(parent) || !usable(parent_lemma) {
            continue;
        }
        for sibling in sentence.children(parent.index) {
            let lemma = unit.of(sibling);
            if sibling.index == target.index || is_punct(sibling) || !usable(lemma) {
                continue;
            }
            out.push(ContextEvent {
                target: word.to_string(),
                context: format!("{parent_lemma}#{lemma}"),
            });
        }
    }
}

fn window_contexts(
    sentence: &ParsedSentence,
    vocab: &Vocabulary,
    window: usize,
    content_only: Option<&PosMap>,
    unit: WordUnit,
    out: &mut Vec<ContextEvent>,
) {
    let tokens = &sentence.tokens;
    for (i, target) in tokens.iter().enumerate() {
        let word = unit.of(target);
        if !vocab.contains(word) {
            continue;
        }
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(tokens.len().saturating_sub(1));
        for (j, other) in tokens.iter().enumerate().take(hi + 1).skip(lo) {
            if j == i || is_punct(other) || !usable(unit.of(other)) {
                continue;
            }
            if let Some(map) = content_only {
                if map.class_of(&other.upos).is_none() {
                    continue;
                }
            }
            out.push(ContextEvent {
                target: word.to_string(),
                context: unit.of(other).to_string(),
            });
        }
    }
}

/// Writes `target<TAB>context<TAB>1` rows.
pub fn write_events<'a, W, I>(out: &mut W, events: I) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a ContextEvent>,
{
    for e in events {
        writeln!(out, "{}\t{}\t1", e.target, e.context)?;
    }
    Ok(())
}

/// Streams events back from a dump. Rows with a count above 1 are expanded.
pub fn read_events<R: BufRead>(reader: R) -> impl Iterator<Item = io::Result<ContextEvent>> {
    reader.lines().flat_map(|line| -> Vec<io::Result<ContextEvent>> {
        let line = match line {
            Ok(l) => l,
            Err(e) => return vec![Err(e)],
        };
        if line.is_empty() {
            return Vec::new();
        }
        let mut cols = line.split('\t');
        match (cols.next(), cols.next(), cols.next(), cols.next()) {
            (Some(t), Some(c), Some(n), None) if !c.is_empty() => match n.parse::<usize>() {
                Ok(n) => (0..n)
                    .map(|_| {
                        Ok(ContextEvent {
                            target: t.to_string(),
                            context: c.to_string(),
                        })
                    })
                    .collect(),
                Err(_) => vec![Err(bad_event(&line))],
            },
            _ => vec![Err(bad_event(&line))],
        }
    })
}

fn bad_event(line: &str) -> io::Error {
    io::Error::new(
        io::ErrorKind::InvalidData,
        format!("malformed event row {line:?}"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocabulary, PosClass};

    fn tok(index: usize, lemma: &str, upos: &str, head: usize, deprel: &str) -> Token {
        Token {
            index,
            form: lemma.to_string(),
            lemma: lemma.to_string(),
            upos: upos.to_string(),
            head,
            deprel: deprel.to_string(),
        }
    }

    /// "tired traveler roamed the sandy desert, seeking shelter"
    fn traveler_sentence() -> ParsedSentence {
        ParsedSentence::new(vec![
            tok(1, "tired", "ADJ", 2, "amod"),
            tok(2, "traveler", "NOUN", 3, "nsubj"),
            tok(3, "roamed", "VERB", 0, "root"),
            tok(4, "the", "DET", 6, "det"),
            tok(5, "sandy", "ADJ", 6, "amod"),
            tok(6, "desert", "NOUN", 3, "dobj"),
            tok(7, ",", "PUNCT", 3, "punct"),
            tok(8, "seeking", "VERB", 3, "xcomp"),
            tok(9, "shelter", "NOUN", 8, "dobj"),
        ])
        .unwrap()
    }

    fn vocab_of(sentences: &[ParsedSentence]) -> Vocabulary {
        build_vocabulary(sentences, 100, &PosClass::ALL, &PosMap::identity(), WordUnit::Lemma)
    }

    fn contexts_for(events: &[ContextEvent], target: &str) -> Vec<String> {
        let mut v: Vec<_> = events
            .iter()
            .filter(|e| e.target == target)
            .map(|e| e.context.clone())
            .collect();
        v.sort();
        v
    }

    #[test]
    fn full_contexts_of_traveler() {
        let s = traveler_sentence();
        let v = vocab_of(std::slice::from_ref(&s));
        let ev = extract_full_contexts(&s, &v);
        assert_eq!(
            contexts_for(&ev, "traveler"),
            vec!["roamed#nsubj^-1", "tired#amod"]
        );
        // the root has no parent edge and the comma is never a context
        assert_eq!(
            contexts_for(&ev, "roamed"),
            vec!["desert#dobj", "seeking#xcomp", "traveler#nsubj"]
        );
        // DET targets are out of vocabulary
        assert!(contexts_for(&ev, "the").is_empty());
    }

    #[test]
    fn joint_contexts_of_traveler() {
        let s = traveler_sentence();
        let v = vocab_of(std::slice::from_ref(&s));
        let ev = extract_joint_contexts(&s, &v);
        assert_eq!(
            contexts_for(&ev, "traveler"),
            vec!["roamed#desert", "roamed#seeking"]
        );
        assert!(contexts_for(&ev, "roamed").is_empty());
        // only child of "seeking"
        assert!(contexts_for(&ev, "shelter").is_empty());
    }

    #[test]
    fn joint_with_root_token_as_parent() {
        let s = ParsedSentence::new(vec![
            tok(1, "a", "NOUN", 2, "nsubj"),
            tok(2, "r", "VERB", 0, "root"),
            tok(3, "b", "NOUN", 2, "dobj"),
            tok(4, "c", "NOUN", 2, "obl"),
        ])
        .unwrap();
        let v = vocab_of(std::slice::from_ref(&s));
        let ev = extract_joint_contexts(&s, &v);
        assert_eq!(contexts_for(&ev, "a"), vec!["r#b", "r#c"]);
    }

    #[test]
    fn unlabeled_contexts_of_traveler() {
        let s = traveler_sentence();
        let v = vocab_of(std::slice::from_ref(&s));
        let ev = extract_unlabeled_contexts(&s, &v);
        assert_eq!(contexts_for(&ev, "traveler"), vec!["roamed", "tired"]);
    }

    #[test]
    fn single_root_token_has_no_contexts() {
        let s = ParsedSentence::new(vec![tok(1, "dog", "NOUN", 0, "root")]).unwrap();
        let v = vocab_of(std::slice::from_ref(&s));
        assert!(extract_full_contexts(&s, &v).is_empty());
        assert!(extract_joint_contexts(&s, &v).is_empty());
        assert!(extract_unlabeled_contexts(&s, &v).is_empty());
    }

    #[test]
    fn multiplicity_and_shared_lemma() {
        let s = ParsedSentence::new(vec![
            tok(1, "a", "ADJ", 3, "amod"),
            tok(2, "b", "ADJ", 3, "amod"),
            tok(3, "dog", "NOUN", 4, "nsubj"),
            tok(4, "dog", "VERB", 0, "root"),
        ])
        .unwrap();
        let v = vocab_of(std::slice::from_ref(&s));
        let full = extract_full_contexts(&s, &v);
        let of_token3: Vec<_> = full.iter().filter(|e| e.context.ends_with("#amod")).collect();
        assert_eq!(of_token3.len(), 2);
        let unl = extract_unlabeled_contexts(&s, &v);
        // parent of both adjectives, plus the noun/verb pair in both directions
        assert_eq!(unl.iter().filter(|e| e.context == "dog").count(), 4);
        assert_eq!(
            unl.iter().filter(|e| e.target == "dog" && e.context == "dog").count(),
            2
        );
    }

    #[test]
    fn window_contexts_clip_at_bounds() {
        let s = ParsedSentence::new(vec![
            tok(1, "a", "NOUN", 0, "root"),
            tok(2, "b", "NOUN", 1, "dep"),
            tok(3, "c", "NOUN", 1, "dep"),
        ])
        .unwrap();
        let v = vocab_of(std::slice::from_ref(&s));
        let ev = extract_window_contexts(&s, &v, 1);
        assert_eq!(contexts_for(&ev, "b"), vec!["a", "c"]);
        assert_eq!(contexts_for(&ev, "a"), vec!["b"]);

        let five = ParsedSentence::new(
            (1..=5)
                .map(|i| tok(i, &format!("w{i}"), "NOUN", if i == 1 { 0 } else { 1 }, "dep"))
                .collect(),
        )
        .unwrap();
        let v = vocab_of(std::slice::from_ref(&five));
        let ev = extract_window_contexts(&five, &v, 2);
        assert_eq!(contexts_for(&ev, "w3").len(), 4);
    }

    #[test]
    fn window_content_only_flag() {
        let s = traveler_sentence();
        let v = vocab_of(std::slice::from_ref(&s));
        let mut x = Extractor::new(ContextKind::Window).with_window(2);
        assert_eq!(
            contexts_for(&x.extract(&s, &v), "desert"),
            vec!["sandy", "seeking", "the"]
        );
        x.content_only = true;
        assert_eq!(contexts_for(&x.extract(&s, &v), "desert"), vec!["sandy", "seeking"]);
    }

    #[test]
    fn event_dump_round_trip() {
        let s = traveler_sentence();
        let v = vocab_of(std::slice::from_ref(&s));
        let ev = extract_full_contexts(&s, &v);
        let mut buf = Vec::new();
        write_events(&mut buf, &ev).unwrap();
        let back: Vec<_> = read_events(&buf[..]).collect::<Result<_, _>>().unwrap();
        assert_eq!(back, ev);
        assert!(read_events("a\tb\n".as_bytes()).next().unwrap().is_err());
    }
}
