//! Synthetic bilingual corpora over a planted taxonomy.
//!
//! Every concept owns a small signature of `(verb, relation)` contexts. A
//! concept's words are generated in the contexts of its own signature and of
//! all its descendants, so a hyponym's contexts are a subset of each
//! hypernym's. Verbs are reused across concepts under different relations,
//! which makes unlabeled contexts ambiguous where labeled ones are not.
//!
//! Background nouns, each seen with two random signature contexts, make the
//! vocabulary much larger than the sparse dimension so the signature
//! contexts become the natural dictionary atoms.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{self, ParsedSentence, Token};
use crate::eval::{self, LabeledPair, Relation};
use crate::solver::AlignmentCount;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("taxonomy needs depth >= 2 and branching >= 2, got depth {depth}, branching {branching}")]
    Shape { depth: usize, branching: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

const ROLES: [&str; 2] = ["nsubj", "dobj"];
const N_FILLERS: usize = 6;
const N_ADJECTIVES: usize = 6;
/// Background nouns per distinct signature context.
const BACKGROUND_PER_CONTEXT: usize = 20;
/// Sentences generated for each background noun.
pub const BACKGROUND_SENTENCES: usize = 12;

/// A tree of concepts below an unlexicalised root, with one word per concept
/// in each language. Concepts are numbered breadth first.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedTaxonomy {
    pub depth: usize,
    pub branching: usize,
    /// `None` for children of the root.
    pub parents: Vec<Option<usize>>,
    pub lexicon_e: Vec<String>,
    pub lexicon_f: Vec<String>,
    /// Context pair of each background noun.
    pub background: Vec<[(usize, &'static str); 2]>,
}

impl PlantedTaxonomy {
    pub fn new(depth: usize, branching: usize) -> Result<Self, SynthError> {
        if depth < 2 || branching < 2 {
            return Err(SynthError::Shape { depth, branching });
        }
        let mut parents = Vec::new();
        let mut level: Vec<Option<usize>> = vec![None];
        for _ in 0..depth {
            let mut next = Vec::new();
            for parent in level {
                for _ in 0..branching {
                    next.push(Some(parents.len()));
                    parents.push(parent);
                }
            }
            level = next;
        }
        let n = parents.len();
        let mut tax = PlantedTaxonomy {
            depth,
            branching,
            parents,
            lexicon_e: (0..n).map(|c| format!("thing{c:03}")).collect(),
            lexicon_f: (0..n).map(|c| format!("chose{c:03}")).collect(),
            background: Vec::new(),
        };
        let mut all: Vec<_> = (0..n).flat_map(|c| tax.signature(c)).collect();
        all.sort_unstable();
        all.dedup();
        tax.background = (0..BACKGROUND_PER_CONTEXT * all.len())
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(b as u64);
                let first = b % all.len();
                let second = (first + rng.random_range(1..all.len())) % all.len();
                [all[first], all[second]]
            })
            .collect();
        Ok(tax)
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn ancestors(&self, c: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = self.parents[c];
        while let Some(p) = cur {
            out.push(p);
            cur = self.parents[p];
        }
        out
    }

    /// The concept itself and everything below it.
    pub fn subtree(&self, c: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&d| d == c || self.ancestors(d).contains(&c))
            .collect()
    }

    /// `(descendant, ancestor)` concept pairs.
    pub fn hypernym_pairs(&self) -> Vec<(usize, usize)> {
        (0..self.len())
            .flat_map(|d| self.ancestors(d).into_iter().map(move |a| (d, a)))
            .collect()
    }

    /// Own signature: `(verb id, role)` pairs. Verb ids are permuted between
    /// the two roles so that one verb serves unrelated concepts.
    pub fn signature(&self, c: usize) -> Vec<(usize, &'static str)> {
        let n = self.len();
        let stride = (5..).find(|s| gcd(*s, n) == 1).expect("a coprime stride exists");
        vec![(c, ROLES[0]), ((c * stride + 3) % n, ROLES[1])]
    }

    /// The generator's context set for a concept: its own signature plus the
    /// signatures of all its descendants.
    pub fn context_set(&self, c: usize) -> Vec<(usize, &'static str)> {
        let mut out: Vec<_> = self
            .subtree(c)
            .into_iter()
            .flat_map(|d| self.signature(d))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Balanced pairs: `(f descendant, e ancestor)` as hypernymy and the
    /// reversed direction as hyponymy.
    pub fn labeled_pairs(&self) -> Vec<LabeledPair> {
        let hyper = self.hypernym_pairs();
        let pos = hyper.iter().map(|&(d, a)| {
            LabeledPair::new(&self.lexicon_f[d], &self.lexicon_e[a], Relation::Hyper)
        });
        let neg = hyper.iter().map(|&(d, a)| {
            LabeledPair::new(&self.lexicon_f[a], &self.lexicon_e[d], Relation::Hypo)
        });
        pos.chain(neg).collect()
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Surface vocabulary for one language.
struct Lexicon<'a> {
    concepts: &'a [String],
    background: Vec<String>,
    verbs: Vec<String>,
    fillers: Vec<String>,
    adjectives: Vec<String>,
    det: &'static str,
    punct: &'static str,
}

impl<'a> Lexicon<'a> {
    fn english(tax: &'a PlantedTaxonomy) -> Self {
        Lexicon {
            concepts: &tax.lexicon_e,
            background: (0..tax.background.len()).map(|b| format!("item{b:04}")).collect(),
            verbs: (0..tax.len()).map(|v| format!("do{v:03}")).collect(),
            fillers: (0..N_FILLERS).map(|i| format!("stuff{i}")).collect(),
            adjectives: (0..N_ADJECTIVES).map(|i| format!("nice{i}")).collect(),
            det: "the",
            punct: ".",
        }
    }

    fn foreign(tax: &'a PlantedTaxonomy) -> Self {
        Lexicon {
            concepts: &tax.lexicon_f,
            background: (0..tax.background.len()).map(|b| format!("objet{b:04}")).collect(),
            verbs: (0..tax.len()).map(|v| format!("faire{v:03}")).collect(),
            fillers: (0..N_FILLERS).map(|i| format!("truc{i}")).collect(),
            adjectives: (0..N_ADJECTIVES).map(|i| format!("joli{i}")).collect(),
            det: "le",
            punct: ".",
        }
    }
}

fn token(index: usize, lemma: &str, upos: &str, head: usize, deprel: &str) -> Token {
    Token {
        index,
        form: lemma.to_string(),
        lemma: lemma.to_string(),
        upos: upos.to_string(),
        head,
        deprel: deprel.to_string(),
    }
}

/// One 3–6 token sentence placing `noun` in the `(verb, role)` context.
fn sentence<'a>(
    lex: &'a Lexicon,
    noun: &'a str,
    (verb, role): (usize, &'a str),
    rng: &mut ChaCha8Rng,
) -> ParsedSentence {
    let with_det = rng.random_bool(0.7);
    let with_adj = rng.random_bool(0.3);
    let with_other = rng.random_bool(0.5);
    let filler = lex.fillers.choose(rng).expect("fillers");
    let adjective = lex.adjectives.choose(rng).expect("adjectives");
    let verb = lex.verbs[verb].as_str();

    // word order: [det] [adj] noun verb [filler] . for subjects,
    //             filler verb [det] [adj] noun . for objects
    let mut words: Vec<(&'a str, &'a str, &'a str)> = Vec::new(); // lemma, upos, role tag
    let noun_phrase = |words: &mut Vec<(&'a str, &'a str, &'a str)>| {
        if with_det {
            words.push((lex.det, "DET", "det"));
        }
        if with_adj {
            words.push((adjective, "ADJ", "amod"));
        }
        words.push((noun, "NOUN", role));
    };
    if role == "nsubj" {
        noun_phrase(&mut words);
        words.push((verb, "VERB", "root"));
        if with_other {
            words.push((filler, "NOUN", "dobj"));
        }
    } else {
        words.push((filler, "NOUN", "nsubj"));
        words.push((verb, "VERB", "root"));
        noun_phrase(&mut words);
    }
    words.push((lex.punct, "PUNCT", "punct"));

    let verb_pos = words.iter().position(|w| w.1 == "VERB").expect("verb") + 1;
    let noun_pos = words.iter().position(|w| w.0 == noun).expect("noun") + 1;
    let tokens = words
        .iter()
        .enumerate()
        .map(|(i, &(lemma, upos, tag))| {
            let head = match tag {
                "root" => 0,
                "det" | "amod" => noun_pos,
                _ => verb_pos,
            };
            token(i + 1, lemma, upos, head, tag)
        })
        .collect();
    ParsedSentence::new(tokens).expect("generated sentences are well formed")
}

fn generate_language(
    tax: &PlantedTaxonomy,
    lex: &Lexicon,
    sentences: usize,
    seed: u64,
    stream: u64,
) -> Vec<ParsedSentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let contexts: Vec<_> = (0..tax.len()).map(|c| tax.context_set(c)).collect();
    let mut out = Vec::with_capacity(sentences + BACKGROUND_SENTENCES * tax.background.len());
    for i in 0..sentences {
        let concept = i % tax.len();
        let ctx = *contexts[concept].choose(&mut rng).expect("nonempty context set");
        out.push(sentence(lex, &lex.concepts[concept], ctx, &mut rng));
    }
    for i in 0..BACKGROUND_SENTENCES * tax.background.len() {
        let b = i % tax.background.len();
        let ctx = *tax.background[b].choose(&mut rng).expect("two contexts");
        out.push(sentence(lex, &lex.background[b], ctx, &mut rng));
    }
    out
}

fn translation_counts(tax: &PlantedTaxonomy, rng: &mut ChaCha8Rng) -> Vec<AlignmentCount> {
    let (e, f) = (Lexicon::english(tax), Lexicon::foreign(tax));
    let groups = [
        (e.concepts.to_vec(), f.concepts.to_vec()),
        (e.background, f.background),
        (e.verbs, f.verbs),
        (e.fillers, f.fillers),
        (e.adjectives, f.adjectives),
    ];
    let mut out = Vec::new();
    for (ew, fw) in &groups {
        for (i, (a, b)) in ew.iter().zip(fw).enumerate() {
            out.push(AlignmentCount {
                e_word: a.clone(),
                f_word: b.clone(),
                count: rng.random_range(40..100),
            });
            // a low-count spurious alignment to another word of the group
            let j = (i + 1 + rng.random_range(0..fw.len() - 1)) % fw.len();
            out.push(AlignmentCount {
                e_word: a.clone(),
                f_word: fw[j].clone(),
                count: rng.random_range(1..5),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthBundle {
    pub e_sentences: Vec<ParsedSentence>,
    pub f_sentences: Vec<ParsedSentence>,
    pub counts: Vec<AlignmentCount>,
    pub pairs: Vec<LabeledPair>,
}

/// Generates both corpora, the alignment counts and the labeled pairs.
///
/// Each language gets `sentences_per_lang` sentences spread evenly over the
/// concepts, followed by [`BACKGROUND_SENTENCES`] per background noun.
pub fn generate_corpora(tax: &PlantedTaxonomy, sentences_per_lang: usize, seed: u64) -> SynthBundle {
    let (e_lex, f_lex) = (Lexicon::english(tax), Lexicon::foreign(tax));
    let (e_sentences, f_sentences) = rayon::join(
        || generate_language(tax, &e_lex, sentences_per_lang, seed, 0),
        || generate_language(tax, &f_lex, sentences_per_lang, seed, 1),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    SynthBundle {
        e_sentences,
        f_sentences,
        counts: translation_counts(tax, &mut rng),
        pairs: tax.labeled_pairs(),
    }
}

/// Paths of a bundle written to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct BundlePaths {
    pub e_corpus: PathBuf,
    pub f_corpus: PathBuf,
    pub translations: PathBuf,
    pub pairs: PathBuf,
}

impl BundlePaths {
    pub fn in_dir(dir: &Path) -> Self {
        BundlePaths {
            e_corpus: dir.join("e.conllu"),
            f_corpus: dir.join("f.conllu"),
            translations: dir.join("translations.tsv"),
            pairs: dir.join("pairs.tsv"),
        }
    }
}

impl SynthBundle {
    pub fn write_corpus<W: Write>(sentences: &[ParsedSentence], out: &mut W) -> io::Result<()> {
        corpus::write_conllu(out, sentences)
    }

    pub fn write_counts<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for c in &self.counts {
            writeln!(out, "{}\t{}\t{}", c.e_word, c.f_word, c.count)?;
        }
        Ok(())
    }

    pub fn write_pairs<W: Write>(&self, out: &mut W) -> io::Result<()> {
        eval::write_pairs(out, &self.pairs)
    }
}
