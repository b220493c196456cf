use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hypersparse::pipeline::{self, PipelineConfig, PipelineError};

#[derive(Debug, Parser)]
#[command(name = "hypersparse", version, about = "Cross-lingual hypernymy detection pipeline")]
struct Cli {
    /// Flat key = value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Abort on the first malformed sentence instead of skipping it.
    #[arg(long, global = true)]
    strict: bool,
    /// Config override, repeatable: --set key=value.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse corpora, build vocabularies and write context events.
    ExtractContexts,
    /// PPMI-weighted counts reduced by truncated SVD.
    BuildEmbeddings,
    /// Learn the sparse embedding space.
    Train,
    /// Tune on dev pairs and report test accuracy.
    Evaluate,
    /// Write a synthetic planted-taxonomy bundle.
    Synth,
    /// Run extract-contexts, build-embeddings, train and evaluate.
    Run,
    /// McNemar's test between two prediction files.
    Significance { a: PathBuf, b: PathBuf },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let mut overrides = Vec::new();
    let mut bad = Vec::new();
    for o in &cli.overrides {
        match o.split_once('=') {
            Some((k, v)) => overrides.push((k.trim().to_string(), v.trim().to_string())),
            None => bad.push(format!("--set {o:?}: expected key=value")),
        }
    }
    if let Some(seed) = cli.seed {
        overrides.push(("seed".to_string(), seed.to_string()));
    }
    if !bad.is_empty() {
        return Err(PipelineError::Config(bad));
    }
    match &cli.config {
        Some(path) => PipelineConfig::load(path, &overrides),
        None => PipelineConfig::from_map(overrides.into_iter().collect(), std::path::Path::new(".")),
    }
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    if let Command::Significance { a, b } = &cli.command {
        let s = pipeline::run_significance(a, b)?;
        println!("n_compared={}", s.n_compared);
        println!("b={}", s.test.b);
        println!("c={}", s.test.c);
        println!("statistic={}", s.test.statistic);
        println!("p_value={}", s.test.p_value);
        println!("exact_p_value={}", s.exact_p);
        return Ok(());
    }
    let cfg = load_config(cli)?;
    let print_outputs = |o: pipeline::StageOutcome| {
        for p in o.outputs {
            println!("{}", p.display());
        }
    };
    match cli.command {
        Command::ExtractContexts => print_outputs(pipeline::run_extract(&cfg, cli.strict)?),
        Command::BuildEmbeddings => print_outputs(pipeline::run_build(&cfg)?),
        Command::Train => print_outputs(pipeline::run_train(&cfg)?),
        Command::Synth => print_outputs(pipeline::run_synth(&cfg)?),
        Command::Evaluate => {
            let (_, report) = pipeline::run_evaluate(&cfg)?;
            report.write(&mut std::io::stdout()).map_err(PipelineError::stage)?;
        }
        Command::Run => {
            let report = pipeline::run_all(&cfg, cli.strict)?;
            report.write(&mut std::io::stdout()).map_err(PipelineError::stage)?;
        }
        Command::Significance { .. } => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: cannot configure {jobs} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
