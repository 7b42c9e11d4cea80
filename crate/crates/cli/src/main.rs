//! `ovaner` — corpus stats, subset sampling, training, evaluation,
//! per-token score export, experiment grids, and grid reports.

use std::fs::File;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use ovaner_core::corpus::{build_label_set, corpus_stats, load_conll, write_conll, Corpus};
use ovaner_core::evaluation::{evaluate_model, export_probs, write_metrics_csv, MetricsRow};
use ovaner_core::experiment::{run_grid, write_summary, ExperimentSpec};
use ovaner_core::model::{load_model, save_model, ModelState};
use ovaner_core::sampling::{sample_imbalanced, sample_partition, SampleSpec};
use ovaner_core::training::{train, write_train_log, TrainConfig};

const MODEL_FILE: &str = "model.nermodel";

#[derive(Parser)]
#[command(name = "ovaner", version, about = "One-vs-all NER via direct AUC maximization")]
struct Cli {
    /// Seed for subcommands that draw randomness outside a config file;
    /// for `train` it overrides the config's seed when given.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress progress lines and timestamps.
    #[arg(long, global = true)]
    quiet: bool,
    /// Also append progress lines to this file.
    #[arg(long, global = true, value_name = "PATH")]
    log_file: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print corpus statistics as a one-row CSV.
    Stats {
        #[arg(long)]
        data: PathBuf,
    },
    /// Draw a training subset and write it in CoNLL format.
    Sample {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        size: usize,
        /// Target entity-token percentage; omitted = uniform subset.
        #[arg(long)]
        entity_pct: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model from a JSON config; writes model.nermodel and
    /// train_log.csv into --out.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        dev: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a model on a test corpus; writes a metrics CSV.
    Eval {
        /// Model file, or a train --out directory containing model.nermodel.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export per-token head scores; writes a CSV with one row per token.
    Probs {
        /// Model file, or a train --out directory containing model.nermodel.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a methods × sizes × seeds grid from a JSON spec.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Concurrent runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Aggregate an experiment directory into summary CSVs.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

struct Logger {
    quiet: bool,
    start: Instant,
    file: Option<File>,
}

impl Logger {
    fn new(quiet: bool, path: Option<&Path>) -> Result<Logger> {
        let file = match path {
            Some(p) => Some(
                File::options()
                    .create(true)
                    .append(true)
                    .open(p)
                    .with_context(|| format!("opening log file {}", p.display()))?,
            ),
            None => None,
        };
        Ok(Logger { quiet, start: Instant::now(), file })
    }

    fn log(&mut self, msg: &str) {
        let line = if self.quiet {
            msg.to_string()
        } else {
            format!("[{:.3}s] {msg}", self.start.elapsed().as_secs_f64())
        };
        if !self.quiet {
            eprintln!("{line}");
        }
        if let Some(f) = &mut self.file {
            let _ = writeln!(f, "{line}");
        }
    }
}

fn model_path(arg: &Path) -> PathBuf {
    if arg.is_dir() {
        arg.join(MODEL_FILE)
    } else {
        arg.to_path_buf()
    }
}

fn load_corpus(path: &Path) -> Result<Corpus> {
    load_conll(path).with_context(|| format!("loading corpus {}", path.display()))
}

fn load(path: &Path) -> Result<ModelState> {
    let path = model_path(path);
    load_model(&path).with_context(|| format!("loading model {}", path.display()))
}

fn run(cli: Cli, log: &mut Logger) -> Result<()> {
    match cli.command {
        Command::Stats { data } => {
            let corpus = load_corpus(&data)?;
            let stats = corpus_stats(&corpus);
            let k = build_label_set(&corpus).len();
            println!("corpus,sentences,tokens,labels,pct_b,pct_i,pct_o,pct_entity_sentences");
            println!(
                "{},{},{},{},{:.1},{:.1},{:.1},{:.1}",
                corpus.name,
                stats.sentences,
                stats.tokens,
                k,
                stats.pct_b(),
                stats.pct_i(),
                stats.pct_o(),
                stats.pct_entity_sentences(),
            );
        }
        Command::Sample { data, size, entity_pct, out } => {
            let corpus = load_corpus(&data)?;
            let seed = cli.seed.unwrap_or(0);
            let subset = match entity_pct {
                Some(pct) => sample_imbalanced(&corpus, &SampleSpec::imbalanced(size, pct, seed))?,
                None => sample_partition(&corpus, &SampleSpec::uniform(size, seed))?,
            };
            write_conll(&subset, &out)?;
            log.log(&format!(
                "sampled {} sentences from {} into {}",
                subset.sentences.len(),
                corpus.name,
                out.display()
            ));
        }
        Command::Train { config, train: train_path, dev, out } => {
            let mut cfg = TrainConfig::from_json_file(&config)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let train_corpus = load_corpus(&train_path)?;
            let dev_corpus = load_corpus(&dev)?;
            log.log(&format!(
                "training {} on {} ({} sentences), dev {} ({} sentences)",
                cfg.method.as_str(),
                train_corpus.name,
                train_corpus.sentences.len(),
                dev_corpus.name,
                dev_corpus.sentences.len()
            ));
            let (model, epochs) = train(&train_corpus, &dev_corpus, &cfg)?;
            std::fs::create_dir_all(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            save_model(&model, out.join(MODEL_FILE))?;
            write_train_log(out.join("train_log.csv"), &epochs)?;
            let best = epochs.iter().map(|e| e.dev_f1).fold(f64::NEG_INFINITY, f64::max);
            log.log(&format!(
                "trained {} epochs, best dev F1 {:.4}, model in {}",
                epochs.len(),
                best.max(0.0),
                out.display()
            ));
        }
        Command::Eval { model, test, out } => {
            let state = load(&model)?;
            let corpus = load_corpus(&test)?;
            let metrics = evaluate_model(&state, &corpus)?;
            log.log(&format!(
                "{} on {}: P {:.4} R {:.4} F1 {:.4}",
                state.method.as_str(),
                corpus.name,
                metrics.precision,
                metrics.recall,
                metrics.f1
            ));
            let row = MetricsRow {
                method: state.method.as_str().into(),
                corpus: corpus.name.clone(),
                train_size: None,
                entity_pct: None,
                seed: None,
                metrics,
            };
            write_metrics_csv(&out, std::slice::from_ref(&row))?;
        }
        Command::Probs { model, data, out } => {
            let state = load(&model)?;
            let corpus = load_corpus(&data)?;
            export_probs(&state, &corpus, &out)?;
            log.log(&format!(
                "wrote per-token scores for {} to {}",
                corpus.name,
                out.display()
            ));
        }
        Command::Experiment { config, out, jobs } => {
            let spec = ExperimentSpec::from_json_file(&config)?;
            let outcome = run_grid(&spec, &out, jobs)?;
            log.log(&format!(
                "grid finished: {} completed, {} skipped, {} failed",
                outcome.completed, outcome.skipped, outcome.failed
            ));
            if outcome.failed > 0 {
                log.log(&format!(
                    "failures are recorded in {}",
                    out.join("manifest.json").display()
                ));
            }
        }
        Command::Report { results, out } => {
            write_summary(&results, &out)?;
            log.log(&format!("wrote {}", out.display()));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut log = match Logger::new(cli.quiet, cli.log_file.as_deref()) {
        Ok(log) => log,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    match run(cli, &mut log) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
