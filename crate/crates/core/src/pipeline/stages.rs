use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::contexts::{self, ContextEvent, Extractor};
use crate::cooc::{count_cooccurrences, ppmi_reweight};
use crate::corpus::{self, ParseMode, PosClass, PosMap, Vocabulary};
use crate::eval::{
    self, BilingualScorer, EvalReport, LabeledPair, MonoDepScorer, PairScorer, TunedParams,
};
use crate::scoring::{ScorerKind, ScorerParams};
use crate::solver::{
    self, build_translation_matrix, read_alignment_counts, reverse_counts, subsample_counts,
    AlignmentCount, Language, SolverConfig, TranslationMode,
};
use crate::sparse::{SparseEmbeddings, WordIndex};
use crate::svd::{self, DenseEmbeddings, SvdOptions};
use crate::synth::{generate_corpora, BundlePaths, PlantedTaxonomy, SynthBundle};

use super::{
    require_inputs, write_atomic, Manifest, PipelineConfig, PipelineError, System, WorkDirLock,
};

/// File layout of a work directory.
#[derive(Debug, Clone)]
pub struct WorkFiles {
    dir: PathBuf,
}

impl WorkFiles {
    pub fn new(dir: &Path) -> Self {
        WorkFiles {
            dir: dir.to_path_buf(),
        }
    }

    fn lang(&self, stem: &str, lang: Language, ext: &str) -> PathBuf {
        let tag = match lang {
            Language::E => "e",
            Language::F => "f",
        };
        self.dir.join(format!("{stem}.{tag}.{ext}"))
    }

    pub fn vocab(&self, lang: Language) -> PathBuf {
        self.lang("vocab", lang, "tsv")
    }

    pub fn events(&self, lang: Language) -> PathBuf {
        self.lang("contexts", lang, "tsv")
    }

    pub fn dense(&self, lang: Language) -> PathBuf {
        self.lang("dense", lang, "txt")
    }

    pub fn sparse(&self, lang: Language) -> PathBuf {
        self.lang("sparse", lang, "txt")
    }

    /// English-only sparse space used by the translation baseline.
    pub fn sparse_mono(&self) -> PathBuf {
        self.dir.join("sparse.mono.e.txt")
    }

    pub fn train_report(&self, system: System) -> PathBuf {
        self.dir.join(format!("train.{}.txt", system.as_str()))
    }

    pub fn results(&self, system: System, scorer: ScorerKind) -> PathBuf {
        self.dir.join(format!("results.{}.{scorer}.txt", system.as_str()))
    }

    pub fn predictions(&self, system: System, scorer: ScorerKind) -> PathBuf {
        self.dir.join(format!("predictions.{}.{scorer}.tsv", system.as_str()))
    }

    pub fn synth_config(&self) -> PathBuf {
        self.dir.join("pipeline.conf")
    }
}

#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub outputs: Vec<PathBuf>,
    pub manifest: PathBuf,
}

fn finish_stage(
    stage: &str,
    cfg: &PipelineConfig,
    dir: &Path,
    inputs: &[PathBuf],
    outputs: Vec<PathBuf>,
) -> Result<StageOutcome, PipelineError> {
    let manifest = Manifest::build(stage, cfg, inputs, &outputs)?;
    let path = Manifest::path_in(dir, stage);
    write_atomic(&path, |w| manifest.write_to(w))?;
    log::info!("{stage}: wrote {} outputs", outputs.len());
    Ok(StageOutcome {
        outputs,
        manifest: path,
    })
}

fn open(path: &Path) -> Result<BufReader<File>, PipelineError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|_| PipelineError::MissingInput(path.to_path_buf()))
}

fn language_seed(seed: u64, lang: Language) -> u64 {
    match lang {
        Language::E => seed,
        Language::F => seed.wrapping_add(1),
    }
}

fn extract_language(
    cfg: &PipelineConfig,
    corpus_path: &Path,
    lang: Language,
    mode: ParseMode,
    pos_map: &PosMap,
) -> Result<(Vocabulary, Vec<ContextEvent>), PipelineError> {
    let reader = corpus::open_corpus(corpus_path).map_err(PipelineError::io(corpus_path))?;
    let parsed = corpus::parse_conllu(reader, mode)
        .map_err(|e| PipelineError::Stage(format!("{}: {e}", corpus_path.display())))?;
    if !parsed.errors.is_empty() {
        log::warn!(
            "{}: skipped {} malformed sentences",
            corpus_path.display(),
            parsed.errors.len()
        );
    }
    let sentences: Vec<_> = if cfg.corpus_fraction < 1.0 {
        corpus::subsample_corpus(parsed.sentences, cfg.corpus_fraction, language_seed(cfg.seed, lang))
            .collect()
    } else {
        parsed.sentences
    };
    let vocab = corpus::build_vocabulary(&sentences, cfg.vocab_size, &PosClass::ALL, pos_map, cfg.unit);
    let extractor = Extractor {
        kind: cfg.context,
        window: cfg.window_size(),
        content_only: cfg.content_only,
        unit: cfg.unit,
        pos_map: pos_map.clone(),
    };
    let events = sentences
        .par_iter()
        .map(|s| extractor.extract(s, &vocab))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Ok((vocab, events))
}

/// Parses both corpora, builds vocabularies and writes context events.
pub fn run_extract(cfg: &PipelineConfig, strict: bool) -> Result<StageOutcome, PipelineError> {
    let dir = cfg.work_dir()?;
    cfg.require(&[
        ("corpus_e", cfg.corpus_e.is_some()),
        ("corpus_f", cfg.corpus_f.is_some()),
    ])?;
    let (ce, cf) = (cfg.corpus_e.clone().unwrap(), cfg.corpus_f.clone().unwrap());
    let mut inputs = vec![ce.clone(), cf.clone()];
    inputs.extend(cfg.pos_map.iter().cloned());
    require_inputs(inputs.iter().map(PathBuf::as_path))?;
    let _lock = WorkDirLock::acquire(dir)?;
    let pos_map = match &cfg.pos_map {
        Some(p) => PosMap::from_reader(open(p)?).map_err(PipelineError::stage)?,
        None => PosMap::identity(),
    };
    let mode = if strict { ParseMode::Strict } else { ParseMode::Lenient };
    let (e, f) = rayon::join(
        || extract_language(cfg, &ce, Language::E, mode, &pos_map),
        || extract_language(cfg, &cf, Language::F, mode, &pos_map),
    );
    let files = WorkFiles::new(dir);
    let mut outputs = Vec::new();
    for (lang, result) in [(Language::E, e), (Language::F, f)] {
        let (vocab, events) = result?;
        if vocab.is_empty() {
            return Err(PipelineError::Stage(format!(
                "{lang:?} corpus yields an empty vocabulary"
            )));
        }
        let vp = files.vocab(lang);
        write_atomic(&vp, |w| vocab.write_tsv(w))?;
        let ep = files.events(lang);
        write_atomic(&ep, |w| contexts::write_events(w, &events))?;
        outputs.extend([vp, ep]);
    }
    finish_stage("extract-contexts", cfg, dir, &inputs, outputs)
}

fn build_language(
    cfg: &PipelineConfig,
    files: &WorkFiles,
    lang: Language,
) -> Result<DenseEmbeddings, PipelineError> {
    let vp = files.vocab(lang);
    let ep = files.events(lang);
    let vocab = Vocabulary::read_tsv(open(&vp)?).map_err(PipelineError::stage)?;
    let events: Vec<ContextEvent> = contexts::read_events(open(&ep)?)
        .collect::<Result<_, _>>()
        .map_err(PipelineError::io(&ep))?;
    let counts = count_cooccurrences(events, &vocab, cfg.context_limit);
    let weighted = ppmi_reweight(&counts).map_err(PipelineError::stage)?;
    let opts = SvdOptions {
        seed: cfg.seed,
        ..SvdOptions::default()
    };
    let (dense, _) = svd::truncated_svd(&weighted, cfg.svd_dim, &opts).map_err(PipelineError::stage)?;
    Ok(dense)
}

/// Counts, PPMI and truncated SVD for both languages.
pub fn run_build(cfg: &PipelineConfig) -> Result<StageOutcome, PipelineError> {
    let dir = cfg.work_dir()?;
    let files = WorkFiles::new(dir);
    let langs = [Language::E, Language::F];
    let inputs: Vec<PathBuf> = langs
        .iter()
        .flat_map(|&l| [files.vocab(l), files.events(l)])
        .collect();
    require_inputs(inputs.iter().map(PathBuf::as_path))?;
    let _lock = WorkDirLock::acquire(dir)?;
    let (e, f) = rayon::join(
        || build_language(cfg, &files, Language::E),
        || build_language(cfg, &files, Language::F),
    );
    let mut outputs = Vec::new();
    for (lang, dense) in [(Language::E, e), (Language::F, f)] {
        let dense = dense?;
        let path = files.dense(lang);
        write_atomic(&path, |w| dense.write(w))?;
        outputs.push(path);
    }
    finish_stage("build-embeddings", cfg, dir, &inputs, outputs)
}

fn read_dense(path: &Path) -> Result<DenseEmbeddings, PipelineError> {
    DenseEmbeddings::read(open(path)?).map_err(|e| PipelineError::Stage(format!("{}: {e}", path.display())))
}

fn read_sparse(path: &Path) -> Result<SparseEmbeddings, PipelineError> {
    SparseEmbeddings::read(open(path)?).map_err(|e| PipelineError::Stage(format!("{}: {e}", path.display())))
}

fn read_counts(cfg: &PipelineConfig) -> Result<Vec<AlignmentCount>, PipelineError> {
    let path = cfg.translations.as_ref().expect("required earlier");
    let counts = read_alignment_counts(open(path)?).map_err(PipelineError::io(path))?;
    Ok(if cfg.dictionary_fraction < 1.0 {
        subsample_counts(&counts, cfg.dictionary_fraction, cfg.seed)
    } else {
        counts
    })
}

fn solver_config(cfg: &PipelineConfig) -> SolverConfig {
    SolverConfig {
        k: cfg.sparse_dim,
        max_outer_iters: cfg.max_iters,
        tolerance: cfg.tolerance,
        seed: cfg.seed,
        ..SolverConfig::default()
    }
}

fn write_train_report(
    path: &Path,
    result: &solver::SolveResult,
    translation_nnz: usize,
) -> Result<(), PipelineError> {
    write_atomic(path, |w| {
        writeln!(w, "objective={}", result.final_objective())?;
        writeln!(w, "iterations={}", result.iterations)?;
        writeln!(w, "converged={}", result.converged)?;
        writeln!(w, "translation_pairs={translation_nnz}")
    })
}

/// Learns the sparse space the configured system needs.
pub fn run_train(cfg: &PipelineConfig) -> Result<StageOutcome, PipelineError> {
    let dir = cfg.work_dir()?;
    let files = WorkFiles::new(dir);
    let solver_cfg = solver_config(cfg);
    match cfg.system {
        System::Bisparse => {
            cfg.require(&[("translations", cfg.translations.is_some())])?;
            let inputs = vec![
                files.dense(Language::E),
                files.dense(Language::F),
                cfg.translations.clone().unwrap(),
            ];
            require_inputs(inputs.iter().map(PathBuf::as_path))?;
            let _lock = WorkDirLock::acquire(dir)?;
            let de = read_dense(&inputs[0])?;
            let df = read_dense(&inputs[1])?;
            let e_words = WordIndex::from_words(de.words.clone());
            let f_words = WordIndex::from_words(df.words.clone());
            let s = build_translation_matrix(read_counts(cfg)?, &e_words, &f_words, cfg.translation_mode);
            let nnz = s.nnz();
            log::info!("translation matrix: {nnz} nonzeros over {} rows", e_words.len());
            let result = solver::solve_bisparse(de.matrix, df.matrix, s, cfg.lambdas, &solver_cfg)
                .map_err(PipelineError::stage)?;
            let se = SparseEmbeddings::from_dense(e_words, &result.space.a_e, 0.0);
            let sf = SparseEmbeddings::from_dense(f_words, &result.space.a_f, 0.0);
            let outputs = vec![
                files.sparse(Language::E),
                files.sparse(Language::F),
                files.train_report(cfg.system),
            ];
            write_atomic(&outputs[0], |w| se.write(w))?;
            write_atomic(&outputs[1], |w| sf.write(w))?;
            write_train_report(&outputs[2], &result, nnz)?;
            finish_stage("train", cfg, dir, &inputs, outputs)
        }
        System::MonoDep => {
            let inputs = vec![files.dense(Language::E)];
            require_inputs(inputs.iter().map(PathBuf::as_path))?;
            let _lock = WorkDirLock::acquire(dir)?;
            let de = read_dense(&inputs[0])?;
            let e_words = WordIndex::from_words(de.words.clone());
            let result = solver::solve_monolingual(de.matrix, cfg.lambdas.e, Language::E, &solver_cfg)
                .map_err(PipelineError::stage)?;
            let se = SparseEmbeddings::from_dense(e_words, &result.space.a_e, 0.0);
            let outputs = vec![files.sparse_mono(), files.train_report(cfg.system)];
            write_atomic(&outputs[0], |w| se.write(w))?;
            write_train_report(&outputs[1], &result, 0)?;
            finish_stage("train", cfg, dir, &inputs, outputs)
        }
    }
}

fn fixed_params(cfg: &PipelineConfig) -> Option<ScorerParams> {
    let threshold = cfg.threshold?;
    let budget = match cfg.scorer {
        ScorerKind::BalApinc => cfg.top_k?,
        ScorerKind::Slqs => cfg.slqs_n?,
    };
    Some(
        ScorerParams {
            threshold,
            ..ScorerParams::default()
        }
        .with_budget(cfg.scorer, budget),
    )
}

fn tuned(
    cfg: &PipelineConfig,
    scorer: &dyn PairScorer,
    dev: &[LabeledPair],
) -> Result<TunedParams, PipelineError> {
    match fixed_params(cfg) {
        Some(params) => {
            let dev_eval = eval::evaluate_accuracy(scorer, &params, dev).map_err(PipelineError::stage)?;
            Ok(TunedParams {
                params,
                dev_accuracy: dev_eval.accuracy,
            })
        }
        None => eval::tune_params(scorer, dev).map_err(PipelineError::stage),
    }
}

/// Splits the pairs, tunes on dev and reports test accuracy.
pub fn run_evaluate(cfg: &PipelineConfig) -> Result<(StageOutcome, EvalReport), PipelineError> {
    let dir = cfg.work_dir()?;
    let files = WorkFiles::new(dir);
    cfg.require(&[("pairs", cfg.pairs.is_some())])?;
    let pairs_path = cfg.pairs.clone().unwrap();
    let inputs = match cfg.system {
        System::Bisparse => vec![
            pairs_path.clone(),
            files.sparse(Language::E),
            files.sparse(Language::F),
        ],
        System::MonoDep => {
            cfg.require(&[("translations", cfg.translations.is_some())])?;
            vec![
                pairs_path.clone(),
                files.sparse_mono(),
                files.vocab(Language::F),
                cfg.translations.clone().unwrap(),
            ]
        }
    };
    require_inputs(inputs.iter().map(PathBuf::as_path))?;
    let _lock = WorkDirLock::acquire(dir)?;
    let pairs = eval::load_pairs(open(&pairs_path)?).map_err(PipelineError::stage)?;
    let scorer: Box<dyn PairScorer> = match cfg.system {
        System::Bisparse => Box::new(BilingualScorer::new(
            read_sparse(&inputs[2])?,
            read_sparse(&inputs[1])?,
            cfg.scorer,
        )),
        System::MonoDep => {
            let english = read_sparse(&inputs[1])?;
            let f_vocab = Vocabulary::read_tsv(open(&inputs[2])?).map_err(PipelineError::stage)?;
            let f_words = WordIndex::from(&f_vocab);
            let e_words = english.words.clone();
            let counts = reverse_counts(&read_counts(cfg)?);
            let s = build_translation_matrix(counts, &f_words, &e_words, TranslationMode::OneHot);
            Box::new(MonoDepScorer::new(english, &s, &f_words, &e_words, cfg.scorer))
        }
    };
    let dataset = eval::split_dataset(pairs, cfg.split_seed()).map_err(PipelineError::stage)?;
    let (dev, test) = (dataset.dev(), dataset.test());
    let tuned = tuned(cfg, scorer.as_ref(), &dev)?;
    let result = eval::evaluate_accuracy(scorer.as_ref(), &tuned.params, &test).map_err(PipelineError::stage)?;
    let report = EvalReport {
        scorer: cfg.scorer,
        accuracy: result.accuracy,
        coverage: result.coverage,
        tuned_k: tuned.params.budget(cfg.scorer),
        tuned_t: tuned.params.threshold,
        dev_accuracy: tuned.dev_accuracy,
        n_dev: dev.len(),
        n_test: test.len(),
    };
    let outputs = vec![
        files.results(cfg.system, cfg.scorer),
        files.predictions(cfg.system, cfg.scorer),
    ];
    write_atomic(&outputs[0], |w| report.write(w))?;
    write_atomic(&outputs[1], |w| eval::write_predictions(w, &test, &result))?;
    let outcome = finish_stage("evaluate", cfg, dir, &inputs, outputs)?;
    Ok((outcome, report))
}

/// Writes a synthetic bundle and a config that runs the pipeline on it.
pub fn run_synth(cfg: &PipelineConfig) -> Result<StageOutcome, PipelineError> {
    let dir = cfg.work_dir()?;
    let _lock = WorkDirLock::acquire(dir)?;
    let tax = PlantedTaxonomy::new(cfg.synth_depth, cfg.synth_branching).map_err(PipelineError::stage)?;
    let bundle = generate_corpora(&tax, cfg.synth_sentences_per_concept * tax.len(), cfg.seed);
    let paths = BundlePaths::in_dir(dir);
    write_atomic(&paths.e_corpus, |w| SynthBundle::write_corpus(&bundle.e_sentences, w))?;
    write_atomic(&paths.f_corpus, |w| SynthBundle::write_corpus(&bundle.f_sentences, w))?;
    write_atomic(&paths.translations, |w| bundle.write_counts(w))?;
    write_atomic(&paths.pairs, |w| bundle.write_pairs(w))?;
    let conf = WorkFiles::new(dir).synth_config();
    let name = |p: &Path| p.file_name().unwrap().to_string_lossy().into_owned();
    write_atomic(&conf, |w| {
        writeln!(w, "corpus_e = {}", name(&paths.e_corpus))?;
        writeln!(w, "corpus_f = {}", name(&paths.f_corpus))?;
        writeln!(w, "translations = {}", name(&paths.translations))?;
        writeln!(w, "pairs = {}", name(&paths.pairs))?;
        writeln!(w, "work_dir = .")?;
        writeln!(w, "seed = {}", cfg.seed)
    })?;
    let outputs = vec![paths.e_corpus, paths.f_corpus, paths.translations, paths.pairs, conf];
    finish_stage("synth", cfg, dir, &[], outputs)
}

/// Extract, build, train and evaluate in sequence.
pub fn run_all(cfg: &PipelineConfig, strict: bool) -> Result<EvalReport, PipelineError> {
    run_extract(cfg, strict)?;
    run_build(cfg)?;
    run_train(cfg)?;
    Ok(run_evaluate(cfg)?.1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Significance {
    pub n_compared: usize,
    pub test: eval::McNemar,
    pub exact_p: f64,
}

/// McNemar's test between two prediction files over the same pairs.
pub fn run_significance(a: &Path, b: &Path) -> Result<Significance, PipelineError> {
    require_inputs([a, b])?;
    let ra = eval::read_predictions(open(a)?).map_err(PipelineError::stage)?;
    let rb = eval::read_predictions(open(b)?).map_err(PipelineError::stage)?;
    if ra.len() != rb.len() || ra.iter().zip(&rb).any(|(x, y)| x.pair != y.pair) {
        return Err(PipelineError::Stage(
            "prediction files do not cover the same pairs in the same order".into(),
        ));
    }
    let pa: Vec<_> = ra.iter().map(|r| r.prediction).collect();
    let pb: Vec<_> = rb.iter().map(|r| r.prediction).collect();
    let gold: Vec<bool> = ra.iter().map(|r| r.pair.is_positive()).collect();
    let (xa, xb, g) = eval::align_predictions(&pa, &pb, &gold).map_err(PipelineError::stage)?;
    let test = eval::mcnemar_test(&xa, &xb, &g).map_err(PipelineError::stage)?;
    Ok(Significance {
        n_compared: g.len(),
        exact_p: eval::mcnemar_exact(test.b, test.c),
        test,
    })
}
