//! Flat `key = value` pipeline configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::contexts::{ContextKind, DEFAULT_CONTEXT_LIMIT};
use crate::corpus::{WordUnit, DEFAULT_VOCAB_SIZE};
use crate::scoring::ScorerKind;
use crate::solver::{Lambdas, TranslationMode, DEFAULT_SPARSE_DIM};
use crate::svd::DEFAULT_SVD_DIM;

use super::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum System {
    /// Bilingual sparse space, pairs scored directly across languages.
    #[default]
    Bisparse,
    /// English-only space, the non-English word replaced by its translation.
    MonoDep,
}

impl System {
    pub fn as_str(self) -> &'static str {
        match self {
            System::Bisparse => "bisparse",
            System::MonoDep => "mono-dep",
        }
    }
}

const KEYS: &[&str] = &[
    "lang_e",
    "lang_f",
    "corpus_e",
    "corpus_f",
    "translations",
    "pairs",
    "pos_map",
    "work_dir",
    "context",
    "window",
    "content_only",
    "unit",
    "vocab_size",
    "context_limit",
    "svd_dim",
    "sparse_dim",
    "lambda_e",
    "lambda_f",
    "lambda_x",
    "translation_mode",
    "max_iters",
    "tolerance",
    "system",
    "scorer",
    "top_k",
    "threshold",
    "slqs_n",
    "seed",
    "split_seed",
    "corpus_fraction",
    "dictionary_fraction",
    "synth_depth",
    "synth_branching",
    "synth_sentences_per_concept",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub lang_e: String,
    pub lang_f: String,
    pub corpus_e: Option<PathBuf>,
    pub corpus_f: Option<PathBuf>,
    pub translations: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
    pub pos_map: Option<PathBuf>,
    pub work_dir: Option<PathBuf>,
    pub context: ContextKind,
    pub window: Option<usize>,
    pub content_only: bool,
    pub unit: WordUnit,
    pub vocab_size: usize,
    pub context_limit: usize,
    pub svd_dim: usize,
    pub sparse_dim: usize,
    pub lambdas: Lambdas,
    pub translation_mode: TranslationMode,
    pub max_iters: usize,
    pub tolerance: f64,
    pub system: System,
    pub scorer: ScorerKind,
    /// Fixed K and t skip tuning when both are given.
    pub top_k: Option<usize>,
    pub threshold: Option<f64>,
    pub slqs_n: Option<usize>,
    pub seed: u64,
    pub split_seed: Option<u64>,
    pub corpus_fraction: f64,
    pub dictionary_fraction: f64,
    pub synth_depth: usize,
    pub synth_branching: usize,
    pub synth_sentences_per_concept: usize,
    /// Effective settings as written, for hashing.
    raw: BTreeMap<String, String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig::from_map(BTreeMap::new(), Path::new(".")).expect("defaults are valid")
    }
}

/// Parses `key = value` lines; `#` starts a comment line.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, Vec<String>> {
    let mut map = BTreeMap::new();
    let mut errors = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => {
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
            None => errors.push(format!("line {}: expected key = value, found {line:?}", i + 1)),
        }
    }
    if errors.is_empty() {
        Ok(map)
    } else {
        Err(errors)
    }
}

struct Reader<'a> {
    map: &'a BTreeMap<String, String>,
    base: &'a Path,
    errors: Vec<String>,
}

impl Reader<'_> {
    fn parse<T: std::str::FromStr>(&mut self, key: &str, default: T) -> T
    where
        T::Err: std::fmt::Display,
    {
        self.optional(key).unwrap_or(default)
    }

    fn optional<T: std::str::FromStr>(&mut self, key: &str) -> Option<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.map.get(key)?;
        match raw.parse() {
            Ok(v) => Some(v),
            Err(e) => {
                self.errors.push(format!("{key}: invalid value {raw:?}: {e}"));
                None
            }
        }
    }

    fn path(&mut self, key: &str) -> Option<PathBuf> {
        self.map.get(key).map(|p| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                // collecting components drops interior `.` segments
                self.base.join(p).components().collect()
            }
        })
    }

    fn string(&mut self, key: &str, default: &str) -> String {
        self.map.get(key).cloned().unwrap_or_else(|| default.to_string())
    }
}

fn parse_unit(s: &str) -> Result<WordUnit, String> {
    match s {
        "lemma" => Ok(WordUnit::Lemma),
        "form" => Ok(WordUnit::Form),
        other => Err(format!("expected lemma|form, found {other:?}")),
    }
}

fn parse_system(s: &str) -> Result<System, String> {
    match s {
        "bisparse" => Ok(System::Bisparse),
        "mono-dep" => Ok(System::MonoDep),
        other => Err(format!("expected bisparse|mono-dep, found {other:?}")),
    }
}

const PATH_KEYS: [&str; 6] = ["corpus_e", "corpus_f", "translations", "pairs", "pos_map", "work_dir"];

impl PipelineConfig {
    /// Reads a config file; relative paths in the file are resolved against its
    /// directory, relative paths in `overrides` against the working directory.
    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|_| PipelineError::MissingInput(path.to_path_buf()))?;
        let mut map = parse_pairs(&text).map_err(PipelineError::Config)?;
        for (k, v) in overrides {
            // override paths are relative to the caller, not the config file
            let v = if PATH_KEYS.contains(&k.as_str()) && Path::new(v).is_relative() {
                std::path::absolute(v).map_or_else(|_| v.clone(), |p| p.display().to_string())
            } else {
                v.clone()
            };
            map.insert(k.clone(), v);
        }
        let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        PipelineConfig::from_map(map, base)
    }

    pub fn from_map(map: BTreeMap<String, String>, base: &Path) -> Result<Self, PipelineError> {
        let mut errors: Vec<String> = map
            .keys()
            .filter(|k| !KEYS.contains(&k.as_str()))
            .map(|k| format!("{k}: unknown key"))
            .collect();
        let mut r = Reader {
            map: &map,
            base,
            errors: Vec::new(),
        };
        let defaults = Lambdas::default();
        let context = r.parse("context", ContextKind::Full);
        let unit = r
            .map
            .get("unit")
            .map(|s| parse_unit(s))
            .transpose()
            .unwrap_or_else(|e| {
                r.errors.push(format!("unit: {e}"));
                None
            })
            .unwrap_or(WordUnit::Lemma);
        let system = r
            .map
            .get("system")
            .map(|s| parse_system(s))
            .transpose()
            .unwrap_or_else(|e| {
                r.errors.push(format!("system: {e}"));
                None
            })
            .unwrap_or_default();
        let cfg = PipelineConfig {
            lang_e: r.string("lang_e", "en"),
            lang_f: r.string("lang_f", "fr"),
            corpus_e: r.path("corpus_e"),
            corpus_f: r.path("corpus_f"),
            translations: r.path("translations"),
            pairs: r.path("pairs"),
            pos_map: r.path("pos_map"),
            work_dir: r.path("work_dir"),
            context,
            window: r.optional("window"),
            content_only: r.parse("content_only", false),
            unit,
            vocab_size: r.parse("vocab_size", DEFAULT_VOCAB_SIZE),
            context_limit: r.parse("context_limit", DEFAULT_CONTEXT_LIMIT),
            svd_dim: r.parse("svd_dim", DEFAULT_SVD_DIM),
            sparse_dim: r.parse("sparse_dim", DEFAULT_SPARSE_DIM),
            lambdas: Lambdas {
                e: r.parse("lambda_e", defaults.e),
                f: r.parse("lambda_f", defaults.f),
                x: r.parse("lambda_x", defaults.x),
            },
            translation_mode: r.parse("translation_mode", TranslationMode::OneHot),
            max_iters: r.parse("max_iters", 200),
            tolerance: r.parse("tolerance", 1e-5),
            system,
            scorer: r.parse("scorer", ScorerKind::BalApinc),
            top_k: r.optional("top_k"),
            threshold: r.optional("threshold"),
            slqs_n: r.optional("slqs_n"),
            seed: r.parse("seed", 1),
            split_seed: r.optional("split_seed"),
            corpus_fraction: r.parse("corpus_fraction", 1.0),
            dictionary_fraction: r.parse("dictionary_fraction", 1.0),
            synth_depth: r.parse("synth_depth", 3),
            synth_branching: r.parse("synth_branching", 3),
            synth_sentences_per_concept: r.parse("synth_sentences_per_concept", 300),
            raw: map.clone(),
        };
        errors.append(&mut r.errors);
        errors.extend(cfg.violations());
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(PipelineError::Config(errors))
        }
    }

    fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.context == ContextKind::Window && self.window.is_none() {
            v.push("window: required when context = window".to_string());
        }
        if self.window == Some(0) {
            v.push("window: must be positive".to_string());
        }
        for (key, value) in [
            ("vocab_size", self.vocab_size),
            ("context_limit", self.context_limit),
            ("svd_dim", self.svd_dim),
            ("sparse_dim", self.sparse_dim),
            ("max_iters", self.max_iters),
            ("synth_sentences_per_concept", self.synth_sentences_per_concept),
        ] {
            if value == 0 {
                v.push(format!("{key}: must be positive"));
            }
        }
        for (key, value) in [
            ("lambda_e", self.lambdas.e),
            ("lambda_f", self.lambdas.f),
            ("lambda_x", self.lambdas.x),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                v.push(format!("{key}: must be a non-negative number"));
            }
        }
        if !(self.tolerance > 0.0) {
            v.push("tolerance: must be positive".to_string());
        }
        for (key, value) in [
            ("corpus_fraction", self.corpus_fraction),
            ("dictionary_fraction", self.dictionary_fraction),
        ] {
            if !(value > 0.0 && value <= 1.0) {
                v.push(format!("{key}: must lie in (0, 1]"));
            }
        }
        if self.top_k == Some(0) || self.slqs_n == Some(0) {
            v.push("top_k/slqs_n: must be positive".to_string());
        }
        if self.synth_depth < 2 || self.synth_branching < 2 {
            v.push("synth_depth/synth_branching: must be at least 2".to_string());
        }
        v
    }

    /// Fails with the names of required keys that are unset.
    pub fn require(&self, keys: &[(&str, bool)]) -> Result<(), PipelineError> {
        let missing: Vec<String> = keys
            .iter()
            .filter(|(_, present)| !present)
            .map(|(k, _)| format!("{k}: required by this stage"))
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(PipelineError::Config(missing))
        }
    }

    pub fn work_dir(&self) -> Result<&Path, PipelineError> {
        self.work_dir
            .as_deref()
            .ok_or_else(|| PipelineError::Config(vec!["work_dir: required".to_string()]))
    }

    pub fn window_size(&self) -> usize {
        self.window.unwrap_or(2)
    }

    pub fn split_seed(&self) -> u64 {
        self.split_seed.unwrap_or(self.seed)
    }

    /// Overrides one key, re-validating the result.
    pub fn with(&self, key: &str, value: &str) -> Result<Self, PipelineError> {
        let mut map = self.raw.clone();
        map.insert(key.to_string(), value.to_string());
        let mut cfg = PipelineConfig::from_map(map, Path::new("."))?;
        // keep the already resolved paths
        for (k, slot, old) in [
            ("corpus_e", &mut cfg.corpus_e, &self.corpus_e),
            ("corpus_f", &mut cfg.corpus_f, &self.corpus_f),
            ("translations", &mut cfg.translations, &self.translations),
            ("pairs", &mut cfg.pairs, &self.pairs),
            ("pos_map", &mut cfg.pos_map, &self.pos_map),
            ("work_dir", &mut cfg.work_dir, &self.work_dir),
        ] {
            if k != key {
                *slot = old.clone();
            }
        }
        Ok(cfg)
    }

    /// `key=value` lines for every setting, defaults included, sorted by key.
    pub fn canonical(&self) -> String {
        let mut map: BTreeMap<&str, String> = BTreeMap::new();
        let path = |p: &Option<PathBuf>| p.as_ref().map_or(String::new(), |p| p.display().to_string());
        map.insert("lang_e", self.lang_e.clone());
        map.insert("lang_f", self.lang_f.clone());
        map.insert("corpus_e", path(&self.corpus_e));
        map.insert("corpus_f", path(&self.corpus_f));
        map.insert("translations", path(&self.translations));
        map.insert("pairs", path(&self.pairs));
        map.insert("pos_map", path(&self.pos_map));
        map.insert("context", self.context.to_string());
        map.insert("window", self.window.map_or(String::new(), |w| w.to_string()));
        map.insert("content_only", self.content_only.to_string());
        map.insert(
            "unit",
            match self.unit {
                WordUnit::Lemma => "lemma",
                WordUnit::Form => "form",
            }
            .to_string(),
        );
        map.insert("vocab_size", self.vocab_size.to_string());
        map.insert("context_limit", self.context_limit.to_string());
        map.insert("svd_dim", self.svd_dim.to_string());
        map.insert("sparse_dim", self.sparse_dim.to_string());
        map.insert("lambda_e", self.lambdas.e.to_string());
        map.insert("lambda_f", self.lambdas.f.to_string());
        map.insert("lambda_x", self.lambdas.x.to_string());
        map.insert("translation_mode", self.translation_mode.to_string());
        map.insert("max_iters", self.max_iters.to_string());
        map.insert("tolerance", self.tolerance.to_string());
        map.insert("system", self.system.as_str().to_string());
        map.insert("scorer", self.scorer.to_string());
        map.insert("top_k", self.top_k.map_or(String::new(), |k| k.to_string()));
        map.insert("threshold", self.threshold.map_or(String::new(), |t| t.to_string()));
        map.insert("slqs_n", self.slqs_n.map_or(String::new(), |n| n.to_string()));
        map.insert("seed", self.seed.to_string());
        map.insert("split_seed", self.split_seed().to_string());
        map.insert("corpus_fraction", self.corpus_fraction.to_string());
        map.insert("dictionary_fraction", self.dictionary_fraction.to_string());
        map.insert("synth_depth", self.synth_depth.to_string());
        map.insert("synth_branching", self.synth_branching.to_string());
        map.insert(
            "synth_sentences_per_concept",
            self.synth_sentences_per_concept.to_string(),
        );
        map.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Result<PipelineConfig, PipelineError> {
        PipelineConfig::from_map(parse_pairs(text).unwrap(), Path::new("/base"))
    }

    #[test]
    fn defaults_and_paths() {
        let c = cfg("corpus_e = data/e.conllu\nwork_dir=/tmp/w\n").unwrap();
        assert_eq!(c.corpus_e, Some(PathBuf::from("/base/data/e.conllu")));
        assert_eq!(c.work_dir, Some(PathBuf::from("/tmp/w")));
        assert_eq!(c.vocab_size, 50_000);
        assert_eq!(c.context_limit, 100_000);
        assert_eq!(c.svd_dim, 1000);
        assert_eq!(c.sparse_dim, 100);
        assert_eq!(c.context, ContextKind::Full);
    }

    #[test]
    fn window_requires_size() {
        let Err(PipelineError::Config(v)) = cfg("context = window\n") else {
            panic!("expected a config error");
        };
        assert!(v.iter().any(|m| m.starts_with("window:")));
        assert_eq!(cfg("context = window\nwindow = 3\n").unwrap().window_size(), 3);
    }

    #[test]
    fn violations_are_listed() {
        let Err(PipelineError::Config(v)) = cfg("context = bag\nlambda_x = -1\nbogus = 1\n") else {
            panic!("expected a config error");
        };
        assert_eq!(v.len(), 3, "{v:?}");
    }

    #[test]
    fn hash_tracks_settings() {
        let a = cfg("seed = 1\n").unwrap();
        assert_eq!(a.hash(), cfg("").unwrap().hash());
        assert_ne!(a.hash(), cfg("seed = 2\n").unwrap().hash());
        assert_eq!(a.with("seed", "2").unwrap().hash(), cfg("seed = 2\n").unwrap().hash());
    }

    #[test]
    fn file_paths_follow_the_file_and_overrides_the_caller() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "corpus_e = e.conllu
").unwrap();
        let over = [("corpus_f".to_string(), "f.conllu".to_string())];
        let c = PipelineConfig::load(&path, &over).unwrap();
        assert_eq!(c.corpus_e, Some(dir.path().join("e.conllu")));
        assert_eq!(c.corpus_f, Some(std::env::current_dir().unwrap().join("f.conllu")));
        let missing = PipelineConfig::load(&dir.path().join("absent.conf"), &[]);
        assert!(matches!(missing, Err(PipelineError::MissingInput(_))));
    }
}
