//! Staged, resumable workflow behind the command line: prepare, contextualize,
//! translate, evaluate, report, plus timeline drift injection.
//!
//! Every stage writes JSON Lines artifacts under the work directory with a
//! `.meta.json` sidecar holding a hash of the configuration slice and upstream
//! artifacts that produced it. Downstream stages recompute the expected hash
//! and refuse artifacts that do not match.

mod artifact;
mod config;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::backends::{Backend, BackendError, BackendProfile, Client, Role, TransportRegistry};
use crate::context::{
    render_translation_prompt, ContextCacheLine, ContextInput, StrategyOptions, StrategyRegistry, VisualContext,
};
use crate::error::{Error, Result};
use crate::report::{
    build_gain_matrix, build_language_summary, gain_matrix_csv, ingest_results, load_published_tables,
    render_language_summary, render_tables, results_to_json, validate_results, Condition, DeltaRuleRegistry,
    LanguageSummary, Method, RunResult, TableFormat,
};
use crate::scoring::{
    apply_selective, corpus_bleu, corpus_chrfpp, corpus_score_from_segments, ingest_segment_scores, merged_scores,
    plan_selective, MetricTriple, SegmentScore, TranslationRecord, Variant,
};
use crate::timedtext::{
    normalize, pair, parse_srt, CorpusLine, CorpusStats, FilterReport, PairReport, ParallelCorpus, SubtitleSegment,
};
use crate::timeline::{apply_drift, count_frames_in_spans, load_frames, DriftModel, Timeline};

pub use artifact::{
    check_upstream, hash_path, hash_value, meta_path, read_jsonl, read_meta, write_artifact, ArtifactMeta,
};
pub use config::{BackendsConfig, Overrides, PathsConfig, PipelineConfig, SelectiveConfig};

const TIMELINE: &str = "timeline.jsonl";
const STATS: &str = "stats.json";
const RESULTS: &str = "results.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguagePrep {
    pub language: String,
    pub stats: CorpusStats,
    pub pairing: PairReport,
    pub filter: FilterReport,
}

/// Written to `stats.json` by `prepare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareReport {
    pub movie_id: String,
    pub source_segments: usize,
    pub frames: usize,
    /// Frame instants at `fps` that fall inside any source subtitle span.
    pub frames_in_spans: u64,
    pub languages: Vec<LanguagePrep>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentFailure {
    pub idx: u32,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LanguageRun {
    pub language: String,
    pub total: usize,
    pub cached: usize,
    pub completed: usize,
    pub failures: Vec<SegmentFailure>,
}

/// Outcome of a per-segment stage across languages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub stage: String,
    pub languages: Vec<LanguageRun>,
    pub backend_calls: u64,
}

impl StageReport {
    pub fn is_complete(&self) -> bool {
        self.languages.iter().all(|l| l.failures.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOutput {
    pub results: usize,
    pub summaries: Vec<LanguageSummary>,
    pub files: Vec<PathBuf>,
}

trait Keyed {
    fn key(&self) -> u32;
}

impl Keyed for ContextCacheLine {
    fn key(&self) -> u32 {
        self.idx
    }
}

impl Keyed for TranslationRecord {
    fn key(&self) -> u32 {
        self.idx
    }
}

pub struct Pipeline {
    config: PipelineConfig,
    transports: TransportRegistry,
    strategies: StrategyRegistry,
    delta_rules: DeltaRuleRegistry,
}

impl Pipeline {
    /// Config with already-resolved paths.
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            transports: TransportRegistry::default(),
            strategies: StrategyRegistry::default(),
            delta_rules: DeltaRuleRegistry::default(),
        })
    }

    /// Loads a JSON config; relative paths resolve against its directory.
    pub fn from_file(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = PipelineConfig::from_json(&text)
            .map_err(|e| Error::format(path, e.to_string()))?;
        config.apply(overrides);
        config.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Self::new(config)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn transports_mut(&mut self) -> &mut TransportRegistry {
        &mut self.transports
    }

    pub fn strategies_mut(&mut self) -> &mut StrategyRegistry {
        &mut self.strategies
    }

    pub fn delta_rules_mut(&mut self) -> &mut DeltaRuleRegistry {
        &mut self.delta_rules
    }

    pub fn workdir(&self) -> &Path {
        &self.config.paths.workdir
    }

    fn work(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.workdir().join(rel)
    }

    pub fn corpus_path(&self, lang: &str) -> PathBuf {
        self.work(format!("corpus.{lang}.jsonl"))
    }

    pub fn timeline_path(&self) -> PathBuf {
        self.work(TIMELINE)
    }

    pub fn context_path(&self, method: &str, lang: &str) -> PathBuf {
        self.work(format!("contexts/{method}.{lang}.jsonl"))
    }

    pub fn translation_path(&self, variant: Variant, lang: &str) -> PathBuf {
        self.work(format!("translations/{variant}.{lang}.jsonl"))
    }

    pub fn results_path(&self) -> PathBuf {
        self.work(RESULTS)
    }

    fn scores_path(&self, variant: Variant, lang: &str) -> PathBuf {
        let dir = self.config.paths.scores_dir.clone().unwrap_or_else(|| self.work("scores"));
        dir.join(format!("{variant}.{lang}.jsonl"))
    }

    fn client(&self, role: Role) -> Result<Client> {
        let cfg = match role {
            Role::Describe => self
                .config
                .backends
                .describe
                .as_ref()
                .ok_or_else(|| Error::Config("backends.describe is not configured".into()))?,
            Role::Summarize => &self.config.backends.summarize,
            Role::Translate => &self.config.backends.translate,
        };
        let profile = BackendProfile::resolve(role, cfg, self.config.seed)?;
        Ok(self.transports.build(profile)?)
    }

    // ---- stage hashes -------------------------------------------------

    pub fn prepare_hash(&self) -> Result<String> {
        let c = &self.config;
        let mut refs = BTreeMap::new();
        for lang in &c.languages {
            refs.insert(lang.clone(), hash_path(&c.paths.srt_reference[lang])?);
        }
        let frames_from_images = fs::metadata(&c.paths.frames).map(|m| m.is_dir()).unwrap_or(false);
        Ok(hash_value(&json!({
            "stage": "prepare",
            "movie_id": c.movie_id,
            "duration_ms": c.duration_ms,
            "languages": c.languages,
            "fps": c.fps,
            "filter": c.filter,
            "drift": c.drift,
            "seed": c.seed,
            "describe": if frames_from_images { json!(c.backends.describe) } else { json!(null) },
            "inputs": {
                "srt_source": hash_path(&c.paths.srt_source)?,
                "srt_reference": refs,
                "frames": hash_path(&c.paths.frames)?,
            },
        })))
    }

    fn context_hash(&self, method: &str, lang: &str, prepare: &str) -> String {
        hash_value(&json!({
            "stage": "contextualize",
            "upstream": prepare,
            "method": method,
            "language": lang,
            "window_half_ms": self.config.window_half_ms,
            "duration_ms": self.config.duration_ms,
            "summarize": self.config.backends.summarize,
            "seed": self.config.seed,
        }))
    }

    fn translate_hash(&self, variant: Variant, lang: &str, prepare: &str) -> String {
        let upstream = if variant.is_visual() {
            self.context_hash(variant.as_str(), lang, prepare)
        } else {
            prepare.to_string()
        };
        hash_value(&json!({
            "stage": "translate",
            "upstream": upstream,
            "variant": variant,
            "language": lang,
            "translate": self.config.backends.translate,
            "seed": self.config.seed,
        }))
    }

    fn evaluated_variants(&self, lang: &str) -> Vec<Variant> {
        Variant::ALL
            .into_iter()
            .filter(|v| !v.is_visual() || self.translation_path(*v, lang).exists())
            .collect()
    }

    fn evaluate_hash(&self, prepare: &str) -> Result<String> {
        let mut parts = Vec::new();
        for lang in &self.config.languages {
            for v in self.evaluated_variants(lang) {
                let scores = self.scores_path(v, lang);
                let scores_hash = if scores.exists() { hash_path(&scores)? } else { "missing".into() };
                parts.push(json!([lang, v, self.translate_hash(v, lang, prepare), scores_hash]));
            }
        }
        Ok(hash_value(&json!({
            "stage": "evaluate",
            "k_list": self.config.selective.k_list,
            "inputs": parts,
        })))
    }

    // ---- prepare ------------------------------------------------------

    pub fn prepare(&self) -> Result<PrepareReport> {
        let c = &self.config;
        let hash = self.prepare_hash()?;
        let meta = ArtifactMeta {
            stage: "prepare".into(),
            config_hash: hash,
        };
        let mut warnings = Vec::new();

        let source = read_srt(&c.paths.srt_source, &mut warnings)?;
        if source.is_empty() {
            return Err(Error::EmptyCorpus(format!("{} has no subtitles", c.paths.srt_source.display())));
        }
        let spans: Vec<_> = source.iter().map(|s| s.span).collect();
        let frames_in_spans = count_frames_in_spans(c.fps, &spans)?;

        let describer = if fs::metadata(&c.paths.frames).map(|m| m.is_dir()).unwrap_or(false) {
            Some(self.client(Role::Describe)?)
        } else {
            None
        };
        let mut timeline = load_frames(&c.paths.frames, describer.as_ref().map(|d| d as &dyn Backend))?;
        if let Some(model) = &c.drift {
            timeline = apply_drift(&timeline, model, c.seed);
        }

        let mut languages = Vec::new();
        for lang in &c.languages {
            let reference = read_srt(&c.paths.srt_reference[lang], &mut warnings)?;
            let (mut corpus, pairing) = pair(&c.movie_id, lang, &source, &reference)?;
            let filter = corpus.retain_filtered(c.filter)?;
            if corpus.is_empty() {
                return Err(Error::EmptyCorpus(format!("{}/{lang}: every pair was filtered out", c.movie_id)));
            }
            let lines = artifact::to_jsonl(&corpus.to_lines())?;
            write_artifact(&self.corpus_path(lang), lines.as_bytes(), &meta)?;
            languages.push(LanguagePrep {
                language: lang.clone(),
                stats: corpus.stats(),
                pairing,
                filter,
            });
        }

        let mut buf = Vec::new();
        timeline.write_jsonl(&mut buf).map_err(|e| Error::io(self.timeline_path(), e))?;
        write_artifact(&self.timeline_path(), &buf, &meta)?;

        let report = PrepareReport {
            movie_id: c.movie_id.clone(),
            source_segments: source.len(),
            frames: timeline.len(),
            frames_in_spans,
            languages,
            warnings,
        };
        let mut text = serde_json::to_string_pretty(&report)?;
        text.push('\n');
        write_artifact(&self.work(STATS), text.as_bytes(), &meta)?;
        Ok(report)
    }

    fn load_corpus(&self, lang: &str, prepare: &str) -> Result<ParallelCorpus> {
        let path = self.corpus_path(lang);
        check_upstream(&path, "prepare", prepare)?;
        let lines: Vec<CorpusLine> = read_jsonl(&path, false)?;
        ParallelCorpus::from_lines(&self.config.movie_id, lang, &lines)
    }

    fn load_timeline(&self, prepare: &str) -> Result<Timeline> {
        let path = self.timeline_path();
        check_upstream(&path, "prepare", prepare)?;
        load_frames(&path, None)
    }

    // ---- contextualize ------------------------------------------------

    pub fn contextualize(&self, method: &str) -> Result<StageReport> {
        let strategy = self.strategies.create(
            method,
            &StrategyOptions {
                window_half_ms: self.config.window_half_ms,
            },
        )?;
        let prepare = self.prepare_hash()?;
        let timeline = self.load_timeline(&prepare)?;
        let client = self.client(Role::Summarize)?;
        let workers = client.profile().max_concurrency;
        let mut languages = Vec::new();
        for lang in &self.config.languages {
            let corpus = self.load_corpus(lang, &prepare)?;
            let segments = corpus.sources();
            let hash = self.context_hash(method, lang, &prepare);
            let run = run_cached(
                "contextualize",
                lang,
                &self.context_path(method, lang),
                &hash,
                &segments,
                workers,
                |position| {
                    let input = ContextInput {
                        timeline: &timeline,
                        segments: &segments,
                        position,
                        target_language: lang,
                        duration_ms: self.config.duration_ms,
                    };
                    let (ctx, chars) = strategy.build(&input, &client)?;
                    Ok(ContextCacheLine::new(segments[position].index, &ctx, chars))
                },
            )?;
            languages.push(run);
        }
        Ok(StageReport {
            stage: format!("contextualize {method}"),
            languages,
            backend_calls: client.calls(),
        })
    }

    fn load_contexts(&self, method: &str, lang: &str, prepare: &str, corpus: &ParallelCorpus) -> Result<HashMap<u32, VisualContext>> {
        let path = self.context_path(method, lang);
        check_upstream(&path, "contextualize", &self.context_hash(method, lang, prepare))?;
        let lines: Vec<ContextCacheLine> = read_jsonl(&path, false)?;
        let mut out = HashMap::new();
        for line in lines {
            let ctx = line.to_context().map_err(|e| Error::format(&path, format!("idx {}: {e}", line.idx)))?;
            out.insert(line.idx, ctx);
        }
        let missing: Vec<u32> = corpus
            .pairs
            .iter()
            .map(|p| p.source.index)
            .filter(|i| !out.contains_key(i))
            .collect();
        if !missing.is_empty() {
            return Err(Error::Invalid(format!(
                "{}: no context for idx {missing:?}; re-run `contextualize --method {method}`",
                path.display()
            )));
        }
        Ok(out)
    }

    // ---- translate ----------------------------------------------------

    pub fn translate(&self, variant: Variant) -> Result<StageReport> {
        let prepare = self.prepare_hash()?;
        let client = self.client(Role::Translate)?;
        let workers = client.profile().max_concurrency;
        let mut languages = Vec::new();
        for lang in &self.config.languages {
            let corpus = self.load_corpus(lang, &prepare)?;
            let contexts = if variant.is_visual() {
                self.load_contexts(variant.as_str(), lang, &prepare, &corpus)?
            } else {
                HashMap::new()
            };
            let segments = corpus.sources();
            let hash = self.translate_hash(variant, lang, &prepare);
            let run = run_cached(
                "translate",
                lang,
                &self.translation_path(variant, lang),
                &hash,
                &segments,
                workers,
                |position| {
                    let seg = &segments[position];
                    let ctx = contexts.get(&seg.index);
                    let prompt = render_translation_prompt(&seg.text, ctx, lang);
                    let hypothesis = client.complete(&prompt)?;
                    Ok(TranslationRecord {
                        idx: seg.index,
                        variant,
                        hypothesis,
                        fallback: variant.is_visual() && ctx.is_none_or(|c| c.is_empty()),
                        prompt,
                    })
                },
            )?;
            languages.push(run);
        }
        Ok(StageReport {
            stage: format!("translate {variant}"),
            languages,
            backend_calls: client.calls(),
        })
    }

    // ---- evaluate -----------------------------------------------------

    fn load_translations(&self, variant: Variant, lang: &str, prepare: &str, order: &[u32]) -> Result<Vec<TranslationRecord>> {
        let path = self.translation_path(variant, lang);
        check_upstream(&path, "translate", &self.translate_hash(variant, lang, prepare))?;
        let records: Vec<TranslationRecord> = read_jsonl(&path, false)?;
        let by_idx: HashMap<u32, TranslationRecord> = records.into_iter().map(|r| (r.idx, r)).collect();
        let missing: Vec<u32> = order.iter().copied().filter(|i| !by_idx.contains_key(i)).collect();
        if !missing.is_empty() {
            return Err(Error::Invalid(format!(
                "{}: no translation for idx {missing:?}; re-run `translate --variant {variant}`",
                path.display()
            )));
        }
        Ok(order.iter().map(|i| by_idx[i].clone()).collect())
    }

    fn load_scores(&self, variant: Variant, lang: &str, order: &[u32]) -> Result<(Vec<SegmentScore>, HashMap<u32, f64>)> {
        let path = self.scores_path(variant, lang);
        if !path.exists() {
            return Err(Error::Config(format!(
                "missing segment score file for variant {variant} ({lang}): {}",
                path.display()
            )));
        }
        let scores = ingest_segment_scores(&path)?;
        if let Some(bad) = scores.iter().find(|s| s.variant != variant) {
            return Err(Error::format(
                &path,
                format!("idx {} is scored as {} in the {variant} file", bad.idx, bad.variant),
            ));
        }
        let map: HashMap<u32, f64> = scores.iter().map(|s| (s.idx, s.score)).collect();
        let missing: Vec<u32> = order.iter().copied().filter(|i| !map.contains_key(i)).collect();
        if !missing.is_empty() {
            if variant == Variant::Baseline {
                return Err(Error::MissingScores(missing));
            }
            return Err(Error::Invalid(format!("{}: no {variant} score for idx {missing:?}", path.display())));
        }
        Ok((scores, map))
    }

    pub fn evaluate(&self) -> Result<Vec<RunResult>> {
        let prepare = self.prepare_hash()?;
        let meta = ArtifactMeta {
            stage: "evaluate".into(),
            config_hash: self.evaluate_hash(&prepare)?,
        };
        let mut results = Vec::new();
        for lang in &self.config.languages {
            let corpus = self.load_corpus(lang, &prepare)?;
            let order: Vec<u32> = corpus.pairs.iter().map(|p| p.source.index).collect();
            let refs: Vec<String> = corpus.pairs.iter().map(|p| p.reference.text.clone()).collect();
            let variants = self.evaluated_variants(lang);
            if variants.len() < 2 {
                return Err(Error::Invalid(format!(
                    "{lang}: no visual translations to evaluate; run `translate --variant attr_vc` or `inter_vs`"
                )));
            }

            let base_records = self.load_translations(Variant::Baseline, lang, &prepare, &order)?;
            let (base_list, base_scores) = self.load_scores(Variant::Baseline, lang, &order)?;
            let triple = |records: &[TranslationRecord], scores: &[f64]| -> Result<MetricTriple> {
                let hyps: Vec<String> = records.iter().map(|r| r.hypothesis.clone()).collect();
                Ok(MetricTriple {
                    bleu: Some(corpus_bleu(&hyps, &refs)?),
                    chrfpp: Some(corpus_chrfpp(&hyps, &refs)?),
                    comet: corpus_score_from_segments(scores)?,
                })
            };
            let ordered = |m: &HashMap<u32, f64>| order.iter().map(|i| m[i]).collect::<Vec<f64>>();
            let baseline = triple(&base_records, &ordered(&base_scores))?;

            for variant in variants.into_iter().filter(|v| v.is_visual()) {
                let method: Method = variant.as_str().parse()?;
                let records = self.load_translations(variant, lang, &prepare, &order)?;
                let (_, scores) = self.load_scores(variant, lang, &order)?;
                let mut push = |condition, metrics| {
                    results.push(RunResult {
                        movie_id: self.config.movie_id.clone(),
                        language: lang.clone(),
                        method,
                        condition,
                        metrics,
                        baseline,
                    })
                };
                push(Condition::Full, triple(&records, &ordered(&scores))?);
                for &k in &self.config.selective.k_list {
                    let plan = plan_selective(&base_list, &order, k)?;
                    let merged = apply_selective(&base_records, &records, &plan)?;
                    let merged_scores = merged_scores(&order, &base_scores, &scores, &plan)?;
                    let cond = Condition::Selective(k);
                    let stem = format!("selective/{method}.{cond}.{lang}");
                    let mut plan_json = serde_json::to_string_pretty(&plan)?;
                    plan_json.push('\n');
                    write_artifact(&self.work(format!("{stem}.plan.json")), plan_json.as_bytes(), &meta)?;
                    write_artifact(
                        &self.work(format!("{stem}.jsonl")),
                        artifact::to_jsonl(&merged)?.as_bytes(),
                        &meta,
                    )?;
                    push(cond, triple(&merged, &merged_scores)?);
                }
            }
        }
        validate_results(&results)?;
        write_artifact(&self.results_path(), results_to_json(&results)?.as_bytes(), &meta)?;
        Ok(results)
    }

    // ---- report -------------------------------------------------------

    /// Renders tables, language summaries and gain matrices under
    /// `<workdir>/report`. Inputs: this run's `results.json` when present,
    /// extra result files, and optionally the two published-table fixtures.
    pub fn report(&self, extra_results: &[PathBuf], tables: Option<(&Path, &Path)>) -> Result<ReportOutput> {
        let mut results = Vec::new();
        let own = self.results_path();
        if own.exists() {
            let prepare = self.prepare_hash()?;
            check_upstream(&own, "evaluate", &self.evaluate_hash(&prepare)?)?;
            results.extend(ingest_results(&fs::read_to_string(&own).map_err(|e| Error::io(&own, e))?)?);
        }
        for path in extra_results {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            results.extend(ingest_results(&text).map_err(|e| Error::format(path, e.to_string()))?);
        }
        if let Some((combined, selective)) = tables {
            results.extend(load_published_tables(combined, selective)?);
        }
        write_report(&self.work("report"), &results, self.delta_rules.get(&self.config.delta_rule)?)
    }

    // ---- drift --------------------------------------------------------

    /// Re-emits the prepared timeline under `model`; defaults to
    /// `<workdir>/timeline.drift.jsonl`.
    pub fn drift(&self, model: &DriftModel, out: Option<&Path>) -> Result<PathBuf> {
        let prepare = self.prepare_hash()?;
        let timeline = self.load_timeline(&prepare)?;
        let drifted = apply_drift(&timeline, model, self.config.seed);
        let out = out.map(Path::to_path_buf).unwrap_or_else(|| self.work("timeline.drift.jsonl"));
        let mut buf = Vec::new();
        drifted.write_jsonl(&mut buf).map_err(|e| Error::io(&out, e))?;
        let meta = ArtifactMeta {
            stage: "drift".into(),
            config_hash: hash_value(&json!({
                "stage": "drift",
                "upstream": prepare,
                "model": model,
                "seed": self.config.seed,
            })),
        };
        write_artifact(&out, &buf, &meta)?;
        Ok(out)
    }
}

/// Writes every report artifact for `results` into `dir`.
pub fn write_report(dir: &Path, results: &[RunResult], rule: &dyn crate::report::DeltaRule) -> Result<ReportOutput> {
    validate_results(results)?;
    let summaries = build_language_summary(results, rule)?;
    let mut files = Vec::new();
    let mut emit = |name: String, body: String| -> Result<()> {
        let path = dir.join(name);
        artifact::write_atomic(&path, body.as_bytes())?;
        files.push(path);
        Ok(())
    };
    for format in [TableFormat::Tsv, TableFormat::Markdown, TableFormat::Json] {
        emit(format!("results.{}", format.extension()), render_tables(results, format))?;
        emit(format!("summary.{}", format.extension()), render_language_summary(&summaries, format))?;
    }
    let conditions: std::collections::BTreeSet<Condition> = results.iter().map(|r| r.condition).collect();
    for &c in &conditions {
        emit(format!("gain_matrix.{c}.csv"), gain_matrix_csv(&build_gain_matrix(results, c)))?;
    }
    // The headline matrix uses the largest selective budget, as plotted.
    let headline = conditions.iter().next_back().copied().unwrap_or(Condition::Selective(30.0));
    emit("gain_matrix.csv".into(), gain_matrix_csv(&build_gain_matrix(results, headline)))?;
    Ok(ReportOutput {
        results: results.len(),
        summaries,
        files,
    })
}

fn read_srt(path: &Path, warnings: &mut Vec<String>) -> Result<Vec<SubtitleSegment>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let doc = parse_srt(&bytes).map_err(|e| Error::format(path, e.to_string()))?;
    for w in &doc.warnings {
        let msg = format!("{}: {w:?}", path.display());
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(doc.segments.iter().map(normalize).collect())
}

/// Runs `work` for every segment not already in the cache at `artifact`,
/// appending results as they finish, then rewrites the cache in corpus order.
/// A cache whose sidecar hash differs is discarded, never mixed.
#[allow(clippy::too_many_arguments)]
fn run_cached<T, F>(
    stage: &str,
    lang: &str,
    artifact: &Path,
    hash: &str,
    segments: &[SubtitleSegment],
    workers: usize,
    work: F,
) -> Result<LanguageRun>
where
    T: Keyed + Serialize + DeserializeOwned + Send,
    F: Fn(usize) -> std::result::Result<T, BackendError> + Sync,
{
    let position: HashMap<u32, usize> = segments.iter().enumerate().map(|(i, s)| (s.index, i)).collect();
    let meta = ArtifactMeta {
        stage: stage.to_string(),
        config_hash: hash.to_string(),
    };
    let mut done: Vec<T> = Vec::new();
    if artifact.exists() {
        if read_meta(artifact)?.as_ref() == Some(&meta) {
            let mut seen = HashSet::new();
            done = read_jsonl::<T>(artifact, true)?
                .into_iter()
                .filter(|t| position.contains_key(&t.key()) && seen.insert(t.key()))
                .collect();
        } else {
            log::info!("{}: built under another configuration, starting over", artifact.display());
        }
    }
    sort_by_position(&mut done, &position);
    write_artifact(artifact, artifact::to_jsonl(&done)?.as_bytes(), &meta)?;

    let cached: HashSet<u32> = done.iter().map(Keyed::key).collect();
    let pending: Vec<usize> = (0..segments.len()).filter(|&i| !cached.contains(&segments[i].index)).collect();
    let appender = artifact::Appender::open(artifact)?;
    let next = AtomicUsize::new(0);
    let fresh: Mutex<Vec<T>> = Mutex::new(Vec::new());
    let failures: Mutex<Vec<SegmentFailure>> = Mutex::new(Vec::new());
    let fatal: Mutex<Option<Error>> = Mutex::new(None);
    let threads = workers.max(1).min(pending.len());
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= pending.len() || lock(&fatal).is_some() {
                    break;
                }
                let pos = pending[i];
                match work(pos) {
                    Ok(item) => match appender.append(&item) {
                        Ok(()) => lock(&fresh).push(item),
                        Err(e) => {
                            lock(&fatal).get_or_insert(e);
                        }
                    },
                    Err(e) => {
                        log::warn!("{stage} {lang} idx {}: {e}", segments[pos].index);
                        lock(&failures).push(SegmentFailure {
                            idx: segments[pos].index,
                            error: e.to_string(),
                        });
                    }
                }
            });
        }
    });
    if let Some(e) = fatal.into_inner().unwrap_or_else(|p| p.into_inner()) {
        return Err(e);
    }
    let fresh = fresh.into_inner().unwrap_or_else(|p| p.into_inner());
    let mut failures = failures.into_inner().unwrap_or_else(|p| p.into_inner());
    failures.sort_by_key(|f| position[&f.idx]);

    let cached_count = done.len();
    let completed = fresh.len();
    done.extend(fresh);
    sort_by_position(&mut done, &position);
    artifact::write_atomic(artifact, artifact::to_jsonl(&done)?.as_bytes())?;

    let failures_path = artifact.with_extension("failures.json");
    if failures.is_empty() {
        if failures_path.exists() {
            fs::remove_file(&failures_path).map_err(|e| Error::io(&failures_path, e))?;
        }
    } else {
        let mut text = serde_json::to_string_pretty(&failures)?;
        text.push('\n');
        artifact::write_atomic(&failures_path, text.as_bytes())?;
    }
    Ok(LanguageRun {
        language: lang.to_string(),
        total: segments.len(),
        cached: cached_count,
        completed,
        failures,
    })
}

fn sort_by_position<T: Keyed>(items: &mut [T], position: &HashMap<u32, usize>) {
    items.sort_by_key(|t| position[&t.key()]);
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}
