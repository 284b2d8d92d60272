//! Batch augmentation, evaluation and hyper-parameter sweeps.

mod eval;
mod report;
mod sweep;

pub use eval::{evaluate_entailment, evaluate_retrieval, text_metrics, TextMetrics};
pub use report::{published_reference, EvalReport, MetricRow, Task};
pub use sweep::{run_sweep, sweep_tsv, SweepGrid, SweepPoint};

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::augmenter::augment_example;
use crate::baselines::{augment_baseline, BaselineConfig, BaselineKind};
use crate::error::{Error, Result};
use crate::io::{
    load_augmented_texts, load_corpus, load_detections, to_jsonl, write_file, Detections,
};
use crate::metrics::{count_insertions, mean_std, word_tokens};
use crate::model::{AugmentationConfig, AugmentationResult, Example, MatchKind};
use crate::providers::fixture::{
    FixtureImageEmbedder, FixtureMaskFiller, FixturePosTagger, FixtureTextEmbedder,
};
use crate::providers::remote::{RemoteClient, DEFAULT_TIMEOUT};
use crate::providers::{
    ImageEmbedder, MaskFiller, PosTagger, Providers, TextEmbedder, WordEmbeddingTable,
};

/// Share of failed examples above which a run counts as failed.
pub const MAX_FAILURE_RATE: f64 = 0.10;

/// A local fixture file or a remote adapter URI.
///
/// Parsed from `fixture:<path>`, `remote:<uri>`, a bare `stdio:`/`tcp:` URI,
/// or a bare path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Fixture(PathBuf),
    Remote(String),
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if let Some(path) = s.strip_prefix("fixture:") {
            return Ok(Source::Fixture(PathBuf::from(path)));
        }
        let uri = s.strip_prefix("remote:").unwrap_or(s);
        if uri.starts_with("stdio:") || uri.starts_with("tcp:") {
            Ok(Source::Remote(uri.to_string()))
        } else if s.starts_with("remote:") {
            Err(format!("unsupported remote uri {uri:?}; expected stdio:<cmd> or tcp:<host>:<port>"))
        } else if s.is_empty() {
            Err("empty source".into())
        } else {
            Ok(Source::Fixture(PathBuf::from(s)))
        }
    }
}

/// Where each provider comes from.
#[derive(Debug, Clone, Default)]
pub struct ProviderPaths {
    /// Word vectors backing the fixture text encoder and the EDA synonyms.
    /// Also the default for the match and attribute tables.
    pub word_vectors: Option<PathBuf>,
    pub match_vectors: Option<PathBuf>,
    pub attribute_vectors: Option<PathBuf>,
    /// Fixture image embeddings (JSON object of id to vector).
    pub image_vectors: Option<PathBuf>,
    pub mask_filler: Option<Source>,
    pub pos_tagger: Option<Source>,
    /// Remote adapter serving both text and image embeddings. Takes
    /// precedence over the fixture encoders.
    pub encoder: Option<String>,
    pub timeout: Option<Duration>,
}

enum Slot<T: ?Sized> {
    Shared(Arc<T>),
    Remote(String),
    Missing(&'static str),
}

impl<T: ?Sized> Clone for Slot<T> {
    fn clone(&self) -> Self {
        match self {
            Slot::Shared(v) => Slot::Shared(v.clone()),
            Slot::Remote(uri) => Slot::Remote(uri.clone()),
            Slot::Missing(what) => Slot::Missing(what),
        }
    }
}

impl<T: ?Sized> Slot<T> {
    fn resolve(
        &self,
        clients: &mut HashMap<String, Arc<RemoteClient>>,
        timeout: Duration,
        cast: fn(Arc<RemoteClient>) -> Arc<T>,
    ) -> Result<Arc<T>> {
        match self {
            Slot::Shared(v) => Ok(v.clone()),
            Slot::Remote(uri) => {
                if let Some(c) = clients.get(uri) {
                    return Ok(cast(c.clone()));
                }
                let client = Arc::new(RemoteClient::connect_with_timeout(uri, timeout)?);
                clients.insert(uri.clone(), client.clone());
                Ok(cast(client))
            }
            Slot::Missing(what) => Err(Error::Invalid(format!("no {what} configured"))),
        }
    }
}

/// Loaded fixtures plus remote URIs. Each call to [`ProviderSet::worker`]
/// yields an independent provider bundle; remote adapters get one connection
/// per bundle and URI.
#[derive(Clone)]
pub struct ProviderSet {
    mask_filler: Slot<dyn MaskFiller>,
    text_embedder: Slot<dyn TextEmbedder>,
    image_embedder: Slot<dyn ImageEmbedder>,
    pos_tagger: Slot<dyn PosTagger>,
    match_table: Arc<WordEmbeddingTable>,
    attribute_table: Arc<WordEmbeddingTable>,
    synonyms: Arc<WordEmbeddingTable>,
    timeout: Duration,
}

impl std::fmt::Debug for ProviderSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProviderSet")
            .field("match_table", &self.match_table.len())
            .field("attribute_table", &self.attribute_table.len())
            .field("synonyms", &self.synonyms.len())
            .finish_non_exhaustive()
    }
}

fn load_table(path: &Option<PathBuf>) -> Result<Option<Arc<WordEmbeddingTable>>> {
    path.as_ref()
        .map(|p| WordEmbeddingTable::load(p).map(Arc::new))
        .transpose()
}

impl ProviderSet {
    pub fn load(paths: &ProviderPaths) -> Result<Self> {
        let words = load_table(&paths.word_vectors)?;
        let empty = || Arc::new(WordEmbeddingTable::new());
        let match_table = load_table(&paths.match_vectors)?
            .or_else(|| words.clone())
            .unwrap_or_else(empty);
        let attribute_table = load_table(&paths.attribute_vectors)?
            .or_else(|| words.clone())
            .unwrap_or_else(empty);

        let (text_embedder, image_embedder): (Slot<dyn TextEmbedder>, Slot<dyn ImageEmbedder>) =
            match &paths.encoder {
                Some(uri) => (Slot::Remote(uri.clone()), Slot::Remote(uri.clone())),
                None => (
                    match &words {
                        Some(t) => Slot::Shared(Arc::new(FixtureTextEmbedder::new(t.clone()))),
                        None => Slot::Missing("text encoder (word vectors or remote encoder)"),
                    },
                    match &paths.image_vectors {
                        Some(p) => Slot::Shared(Arc::new(FixtureImageEmbedder::load(p)?)),
                        None => Slot::Missing("image encoder (image vectors or remote encoder)"),
                    },
                ),
            };
        let mask_filler: Slot<dyn MaskFiller> = match &paths.mask_filler {
            Some(Source::Fixture(p)) => Slot::Shared(Arc::new(FixtureMaskFiller::load(p)?)),
            Some(Source::Remote(uri)) => Slot::Remote(uri.clone()),
            None => Slot::Missing("mask filler"),
        };
        let pos_tagger: Slot<dyn PosTagger> = match &paths.pos_tagger {
            Some(Source::Fixture(p)) => Slot::Shared(Arc::new(FixturePosTagger::load(p)?)),
            Some(Source::Remote(uri)) => Slot::Remote(uri.clone()),
            None => Slot::Missing("part-of-speech tagger"),
        };
        Ok(ProviderSet {
            mask_filler,
            text_embedder,
            image_embedder,
            pos_tagger,
            synonyms: words.unwrap_or_else(|| attribute_table.clone()),
            match_table,
            attribute_table,
            timeout: paths.timeout.unwrap_or(DEFAULT_TIMEOUT),
        })
    }

    /// Wraps an already built bundle; every worker shares it.
    pub fn from_providers(providers: Providers) -> Self {
        ProviderSet {
            mask_filler: Slot::Shared(providers.mask_filler),
            text_embedder: Slot::Shared(providers.text_embedder),
            image_embedder: Slot::Shared(providers.image_embedder),
            pos_tagger: Slot::Shared(providers.pos_tagger),
            synonyms: providers.attribute_table.clone(),
            match_table: providers.match_table,
            attribute_table: providers.attribute_table,
            timeout: DEFAULT_TIMEOUT,
        }
    }

    /// A complete bundle for one worker.
    pub fn worker(&self) -> Result<Providers> {
        let mut clients = HashMap::new();
        let t = self.timeout;
        Ok(Providers {
            mask_filler: self.mask_filler.resolve(&mut clients, t, |c| c)?,
            text_embedder: self.text_embedder.resolve(&mut clients, t, |c| c)?,
            image_embedder: self.image_embedder.resolve(&mut clients, t, |c| c)?,
            pos_tagger: self.pos_tagger.resolve(&mut clients, t, |c| c)?,
            match_table: self.match_table.clone(),
            attribute_table: self.attribute_table.clone(),
        })
    }

    /// Text and image encoders only, for evaluation.
    pub fn encoders(&self) -> Result<(Arc<dyn TextEmbedder>, Arc<dyn ImageEmbedder>)> {
        let mut clients = HashMap::new();
        let t = self.timeout;
        Ok((
            self.text_embedder.resolve(&mut clients, t, |c| c)?,
            self.image_embedder.resolve(&mut clients, t, |c| c)?,
        ))
    }

    pub fn synonyms(&self) -> Arc<WordEmbeddingTable> {
        self.synonyms.clone()
    }
}

/// How augmented texts are produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Xmai,
    Baseline(BaselineConfig),
    /// Texts produced elsewhere, keyed by example id.
    External(BTreeMap<String, String>),
}

impl Method {
    pub fn name(&self) -> &str {
        match self {
            Method::Xmai => "xmai",
            Method::Baseline(cfg) => cfg.kind.name(),
            Method::External(_) => "external",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentSummary {
    pub method: String,
    pub config: AugmentationConfig,
    pub examples: usize,
    pub modified: usize,
    pub failures: usize,
    pub failure_rate: f64,
    pub sites: usize,
    pub fallback_sites: usize,
    pub fallback_examples: usize,
    pub dropped_sites: usize,
    pub mean_insertions: f64,
    pub std_insertions: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentRun {
    /// Sorted by example id.
    pub results: Vec<AugmentationResult>,
    pub summary: AugmentSummary,
}

impl AugmentRun {
    pub fn augmented_texts(&self) -> BTreeMap<String, String> {
        self.results
            .iter()
            .map(|r| (r.example_id.clone(), r.augmented_text.clone()))
            .collect()
    }

    pub fn within_failure_budget(&self) -> bool {
        self.summary.failure_rate <= MAX_FAILURE_RATE
    }
}

/// Maps `f` over `items` on up to `workers` threads, each owning the state
/// built by `init`. Contiguous chunks keep the output in input order.
pub fn parallel_map<T, S, R>(
    items: &[T],
    workers: usize,
    init: &(dyn Fn() -> Result<S> + Sync),
    f: &(dyn Fn(&S, &T) -> R + Sync),
) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
{
    if items.is_empty() {
        return Ok(Vec::new());
    }
    let workers = workers.clamp(1, items.len());
    if workers == 1 {
        let state = init()?;
        return Ok(items.iter().map(|item| f(&state, item)).collect());
    }
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || -> Result<Vec<R>> {
                    let state = init()?;
                    Ok(part.iter().map(|item| f(&state, item)).collect())
                })
            })
            .collect();
        let mut out = Vec::with_capacity(items.len());
        for h in handles {
            out.extend(h.join().expect("worker panicked")?);
        }
        Ok(out)
    })
}

/// Augments every example of `corpus`. Per-example provider failures are
/// recorded on the result and leave the text unchanged.
pub fn augment_corpus(
    corpus: &[Example],
    detections: &Detections,
    providers: &ProviderSet,
    method: &Method,
    config: &AugmentationConfig,
    workers: usize,
) -> Result<AugmentRun> {
    let config = config.validate()?;
    let no_detections = Vec::new();
    let mut results = match method {
        Method::Xmai => parallel_map(corpus, workers, &|| providers.worker(), &|p, ex: &Example| {
            let dets = detections.get(&ex.image_id).unwrap_or(&no_detections);
            augment_example(ex, dets, p, &config).unwrap_or_else(|e| {
                log::warn!("example {}: {e}", ex.id);
                let mut r = AugmentationResult::unchanged(ex);
                r.error = Some(e.to_string());
                r
            })
        })?,
        Method::Baseline(cfg) => {
            let cfg = cfg.validate()?;
            let synonyms = providers.synonyms();
            parallel_map(corpus, workers, &|| Ok(()), &|_, ex: &Example| {
                augment_baseline(ex, &cfg, &synonyms)
            })?
        }
        Method::External(texts) => corpus
            .iter()
            .map(|ex| {
                let mut r = AugmentationResult::unchanged(ex);
                match texts.get(&ex.id) {
                    Some(t) => r.augmented_text = t.clone(),
                    None => r.error = Some("missing from augmented file".into()),
                }
                r.baseline = Some("external".into());
                r
            })
            .collect(),
    };
    results.sort_by(|a, b| a.example_id.cmp(&b.example_id));
    let summary = summarize(&results, method.name(), config);
    Ok(AugmentRun { results, summary })
}

pub fn summarize(results: &[AugmentationResult], method: &str, config: AugmentationConfig) -> AugmentSummary {
    let examples = results.len();
    let failures = results.iter().filter(|r| r.error.is_some()).count();
    let insertions: Vec<f64> = results
        .iter()
        .filter(|r| r.error.is_none())
        .map(|r| count_insertions(&word_tokens(&r.original_text), &word_tokens(&r.augmented_text)) as f64)
        .collect();
    let (mean_insertions, std_insertions) = mean_std(&insertions);
    let decisions = || results.iter().flat_map(|r| r.decisions.iter());
    AugmentSummary {
        method: method.to_string(),
        config,
        examples,
        modified: results.iter().filter(|r| r.augmented_text != r.original_text).count(),
        failures,
        failure_rate: if examples == 0 { 0.0 } else { failures as f64 / examples as f64 },
        sites: decisions().count(),
        fallback_sites: decisions()
            .filter(|d| d.site.match_kind == MatchKind::NounFallback)
            .count(),
        fallback_examples: results.iter().filter(|r| r.fallback_used).count(),
        dropped_sites: decisions().filter(|d| d.chosen.is_none()).count(),
        mean_insertions,
        std_insertions,
    }
}

/// Method choice as written in a manifest.
#[derive(Debug, Clone, PartialEq)]
pub enum MethodSpec {
    Xmai,
    Deletion { rate: f64 },
    Eda { rate: f64 },
    ExternalFile(PathBuf),
}

/// Everything one augmentation run needs.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub config: AugmentationConfig,
    pub providers: ProviderPaths,
    pub corpus: PathBuf,
    pub detections: Option<PathBuf>,
    /// Output directory; nothing is written when absent.
    pub out: Option<PathBuf>,
    pub method: MethodSpec,
    pub workers: usize,
}

impl RunManifest {
    fn referenced_paths(&self) -> Vec<&Path> {
        let p = &self.providers;
        let mut paths: Vec<&Path> = vec![&self.corpus];
        paths.extend(self.detections.as_deref());
        for opt in [&p.word_vectors, &p.match_vectors, &p.attribute_vectors, &p.image_vectors] {
            paths.extend(opt.as_deref());
        }
        for src in [&p.mask_filler, &p.pos_tagger].into_iter().flatten() {
            if let Source::Fixture(path) = src {
                paths.push(path);
            }
        }
        if let MethodSpec::ExternalFile(path) = &self.method {
            paths.push(path);
        }
        paths
    }

    /// Checks the config and that every referenced file exists.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let missing: Vec<String> = self
            .referenced_paths()
            .into_iter()
            .filter(|p| !p.exists())
            .map(|p| p.display().to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Invalid(format!("missing input files: {}", missing.join(", "))));
        }
        if self.method == MethodSpec::Xmai && self.detections.is_none() {
            return Err(Error::Invalid("xmai needs a detections file".into()));
        }
        Ok(())
    }

    pub fn resolve_method(&self) -> Result<Method> {
        let seed = self.config.seed;
        Ok(match &self.method {
            MethodSpec::Xmai => Method::Xmai,
            MethodSpec::Deletion { rate } => Method::Baseline(BaselineConfig { kind: BaselineKind::Deletion, rate: *rate, seed }),
            MethodSpec::Eda { rate } => Method::Baseline(BaselineConfig { kind: BaselineKind::Eda, rate: *rate, seed }),
            MethodSpec::ExternalFile(path) => Method::External(load_augmented_texts(path)?),
        })
    }
}

/// Loads the manifest inputs, augments the corpus and, with an output
/// directory, writes `augmented.jsonl` and `summary.json`.
pub fn run_augment(manifest: &RunManifest) -> Result<AugmentRun> {
    manifest.validate()?;
    let corpus = load_corpus(&manifest.corpus)?;
    let detections = match &manifest.detections {
        Some(p) => load_detections(p)?,
        None => Detections::new(),
    };
    let providers = ProviderSet::load(&manifest.providers)?;
    let method = manifest.resolve_method()?;
    let run = augment_corpus(&corpus, &detections, &providers, &method, &manifest.config, manifest.workers)?;
    if let Some(dir) = &manifest.out {
        write_run(dir, &run)?;
    }
    Ok(run)
}

pub fn write_run(dir: &Path, run: &AugmentRun) -> Result<()> {
    write_file(dir.join("augmented.jsonl"), &to_jsonl(&run.results))?;
    write_file(
        dir.join("summary.json"),
        &(serde_json::to_string_pretty(&run.summary).expect("summary serializes") + "\n"),
    )
}
