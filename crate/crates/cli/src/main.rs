use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use xmai_core::harness::{
    evaluate_entailment, evaluate_retrieval, run_augment, run_sweep, sweep_tsv, EvalReport,
    MethodSpec, ProviderPaths, ProviderSet, RunManifest, Source, SweepGrid,
};
use xmai_core::io::{load_augmented_texts, load_corpus, load_detections, load_labels, write_file};
use xmai_core::{AugmentationConfig, Label};

/// Exit status when more than the allowed share of examples failed.
const EXIT_FAILURE_BUDGET: u8 = 2;

#[derive(Parser)]
#[command(name = "xmai", version, about = "Cross-modal attribute insertion and robustness evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Insert detected attributes into every text of a corpus.
    Augment(AugmentArgs),
    /// Text-only baseline augmentation (random deletion or EDA).
    Baseline(BaselineArgs),
    /// Text-to-image retrieval before and after augmentation.
    EvalRetrieval(EvalRetrievalArgs),
    /// Entailment predictions before and after augmentation.
    EvalEntailment(EvalEntailmentArgs),
    /// Augment and evaluate over a grid of hyper-parameters.
    Sweep(SweepArgs),
}

#[derive(Args, Clone, Default)]
struct ProviderArgs {
    /// GloVe-style word vectors: fixture text encoder, EDA synonyms and the
    /// default for the match and attribute tables.
    #[arg(long)]
    word_embeddings: Option<PathBuf>,
    /// Word vectors for noun-to-object matching.
    #[arg(long)]
    match_embeddings: Option<PathBuf>,
    /// Word vectors for candidate-to-attribute similarity.
    #[arg(long)]
    attr_embeddings: Option<PathBuf>,
    /// JSON object of image id to embedding.
    #[arg(long)]
    image_embeddings: Option<PathBuf>,
    /// fixture:<path> or remote:<uri>
    #[arg(long)]
    maskfill: Option<Source>,
    /// fixture:<path> or remote:<uri>
    #[arg(long)]
    pos: Option<Source>,
    /// Remote adapter URI serving text and image embeddings.
    #[arg(long)]
    encoder: Option<String>,
    /// Per-request timeout for remote adapters, in seconds.
    #[arg(long)]
    timeout: Option<u64>,
}

impl ProviderArgs {
    fn paths(&self) -> ProviderPaths {
        ProviderPaths {
            word_vectors: self.word_embeddings.clone(),
            match_vectors: self.match_embeddings.clone(),
            attribute_vectors: self.attr_embeddings.clone(),
            image_vectors: self.image_embeddings.clone(),
            mask_filler: self.maskfill.clone(),
            pos_tagger: self.pos.clone(),
            encoder: self.encoder.clone(),
            timeout: self.timeout.map(Duration::from_secs),
        }
    }
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    lambda1: f64,
    #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
    lambda2: f64,
    #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
    lambda3: f64,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 0.7)]
    threshold: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rank against only the first N gallery images (sorted by id).
    #[arg(long)]
    gallery_size: Option<usize>,
}

impl ConfigArgs {
    fn config(&self) -> AugmentationConfig {
        AugmentationConfig {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            lambda3: self.lambda3,
            k: self.k,
            threshold: self.threshold,
            seed: self.seed,
            max_gallery: self.gallery_size,
        }
    }
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    detections: PathBuf,
    #[command(flatten)]
    providers: ProviderArgs,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output directory for augmented.jsonl and summary.json. Without it the
    /// JSONL goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineMethod {
    Deletion,
    Eda,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum)]
    method: BaselineMethod,
    /// Deletion probability per word, or the EDA alpha.
    #[arg(long, default_value_t = 0.1)]
    rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Synonym source for EDA.
    #[arg(long)]
    word_embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalRetrievalArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Augmented texts (augment output or any corpus-format file).
    #[arg(long)]
    augmented: PathBuf,
    #[command(flatten)]
    providers: ProviderArgs,
    #[arg(long)]
    gallery_size: Option<usize>,
    /// Row label for the augmented texts.
    #[arg(long, default_value = "xmai")]
    method: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalEntailmentArgs {
    /// Gold labels; defaults to the corpus gold_label fields.
    #[arg(long)]
    gold: Option<PathBuf>,
    #[arg(long)]
    pred_original: PathBuf,
    #[arg(long)]
    pred_augmented: PathBuf,
    /// Corpus aligned with the label files; enables the text columns.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, requires = "corpus")]
    augmented: Option<PathBuf>,
    #[command(flatten)]
    providers: ProviderArgs,
    #[arg(long, default_value = "xmai")]
    method: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    detections: PathBuf,
    #[command(flatten)]
    providers: ProviderArgs,
    /// Comma-separated values; each axis defaults to its usual value.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambda1: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambda2: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambda3: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    threshold: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    gallery_size: Option<usize>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Skip retrieval evaluation at each point.
    #[arg(long)]
    no_eval: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit_report(report: &EvalReport, out: Option<&Path>) -> Result<()> {
    if let Some(dir) = out {
        write_file(dir.join("report.json"), &report.to_json())?;
        write_file(dir.join("report.txt"), &report.render_table())?;
    }
    print!("{}", report.render_table());
    Ok(())
}

fn augment_like(manifest: RunManifest) -> Result<ExitCode> {
    let run = run_augment(&manifest)?;
    if manifest.out.is_none() {
        print!("{}", xmai_core::io::to_jsonl(&run.results));
    }
    let s = &run.summary;
    eprintln!(
        "{} examples, {} modified, {} failed; insertions {:.3} (± {:.3})",
        s.examples, s.modified, s.failures, s.mean_insertions, s.std_insertions
    );
    if !run.within_failure_budget() {
        eprintln!("error: failure rate {:.3} exceeds the allowed share", s.failure_rate);
        return Ok(ExitCode::from(EXIT_FAILURE_BUDGET));
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Augment(a) => augment_like(RunManifest {
            config: a.config.config(),
            providers: a.providers.paths(),
            corpus: a.corpus,
            detections: Some(a.detections),
            out: a.out,
            method: MethodSpec::Xmai,
            workers: a.workers,
        }),
        Command::Baseline(b) => augment_like(RunManifest {
            config: AugmentationConfig { seed: b.seed, ..Default::default() },
            providers: ProviderPaths { word_vectors: b.word_embeddings, ..Default::default() },
            corpus: b.corpus,
            detections: None,
            out: b.out,
            method: match b.method {
                BaselineMethod::Deletion => MethodSpec::Deletion { rate: b.rate },
                BaselineMethod::Eda => MethodSpec::Eda { rate: b.rate },
            },
            workers: b.workers,
        }),
        Command::EvalRetrieval(e) => {
            let corpus = load_corpus(&e.corpus)?;
            let augmented = load_augmented_texts(&e.augmented)?;
            let set = ProviderSet::load(&e.providers.paths())?;
            let (text, image) = set.encoders()?;
            let report = evaluate_retrieval(&corpus, &augmented, text.as_ref(), image.as_ref(), e.gallery_size, &e.method)?;
            emit_report(&report, e.out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::EvalEntailment(e) => {
            let corpus = e.corpus.as_ref().map(load_corpus).transpose()?;
            let gold: Vec<Label> = match (&e.gold, &corpus) {
                (Some(path), _) => load_labels(path)?,
                (None, Some(c)) => c
                    .iter()
                    .map(|ex| ex.gold_label.with_context(|| format!("example {} has no gold_label", ex.id)))
                    .collect::<Result<_>>()?,
                (None, None) => bail!("pass --gold or a --corpus with gold labels"),
            };
            let pred_original = load_labels(&e.pred_original)?;
            let pred_augmented = load_labels(&e.pred_augmented)?;
            let augmented = e.augmented.as_ref().map(load_augmented_texts).transpose()?;
            let texts = match (&corpus, &augmented) {
                (Some(c), Some(a)) => Some((c.as_slice(), a)),
                _ => None,
            };
            let paths = e.providers.paths();
            let encoders = if texts.is_some() && (paths.encoder.is_some() || (paths.word_vectors.is_some() && paths.image_vectors.is_some())) {
                Some(ProviderSet::load(&paths)?.encoders()?)
            } else {
                None
            };
            let encoder_refs = encoders.as_ref().map(|(t, i)| (t.as_ref(), i.as_ref()));
            let report = evaluate_entailment(&gold, &pred_original, &pred_augmented, texts, encoder_refs, &e.method)?;
            emit_report(&report, e.out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep(s) => {
            let corpus = load_corpus(&s.corpus)?;
            let detections = load_detections(&s.detections)?;
            let set = ProviderSet::load(&s.providers.paths())?;
            let base = AugmentationConfig {
                seed: s.seed,
                max_gallery: s.gallery_size,
                ..Default::default()
            };
            let grid = SweepGrid {
                lambda1: s.lambda1,
                lambda2: s.lambda2,
                lambda3: s.lambda3,
                k: s.k,
                threshold: s.threshold,
            };
            let points = run_sweep(&corpus, &detections, &set, &base, &grid, s.workers, !s.no_eval);
            let tsv = sweep_tsv(&points);
            match &s.out {
                Some(dir) => {
                    write_file(dir.join("sweep.tsv"), &tsv)?;
                    write_file(dir.join("sweep.json"), &(serde_json::to_string_pretty(&points)? + "\n"))?;
                }
                None => print!("{tsv}"),
            }
            let failed = points.iter().filter(|p| p.error.is_some()).count();
            eprintln!("{} points, {} failed", points.len(), failed);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("XMAI_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
