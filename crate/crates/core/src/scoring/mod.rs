//! Corpus BLEU / chrF++, segment score ingestion and oracle selective grounding.

mod bleu;
mod chrf;
mod selective;
mod tokenize;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bleu::{bleu_from_stats, corpus_bleu_tokens, sentence_stats as bleu_sentence_stats, BleuStats};
pub use chrf::{chrf_from_stats, chrf_words, sentence_stats as chrf_sentence_stats, ChrfStats};
pub use selective::{
    apply_selective, corpus_score_from_segments, merged_scores, plan_selective, replacement_budget,
    SelectivePlan, TranslationRecord,
};
pub use tokenize::tokenize_intl;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Baseline,
    AttrVc,
    InterVs,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Baseline, Variant::AttrVc, Variant::InterVs];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::AttrVc => "attr_vc",
            Variant::InterVs => "inter_vs",
        }
    }

    pub fn is_visual(self) -> bool {
        self != Variant::Baseline
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentScore {
    pub idx: u32,
    pub variant: Variant,
    pub score: f64,
}

/// Corpus metrics for one system output. BLEU and chrF++ are absent when only
/// externally computed COMET values are known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricTriple {
    pub bleu: Option<f64>,
    pub chrfpp: Option<f64>,
    pub comet: f64,
}

impl MetricTriple {
    pub fn comet_only(comet: f64) -> Self {
        MetricTriple {
            bleu: None,
            chrfpp: None,
            comet,
        }
    }
}

fn check_lengths(hyps: &[String], refs: &[String]) -> Result<()> {
    if hyps.len() != refs.len() {
        return Err(Error::Invalid(format!(
            "{} hypotheses for {} references",
            hyps.len(),
            refs.len()
        )));
    }
    if hyps.is_empty() {
        return Err(Error::EmptyCorpus("no sentences to score".into()));
    }
    Ok(())
}

/// Corpus BLEU (orders 1-4, exponential smoothing, intl tokenization), 0-100.
pub fn corpus_bleu(hyps: &[String], refs: &[String]) -> Result<f64> {
    check_lengths(hyps, refs)?;
    Ok(bleu::corpus_bleu_intl(hyps, refs))
}

/// Corpus chrF++ (char order 6, word order 2, beta 2), 0-100.
pub fn corpus_chrfpp(hyps: &[String], refs: &[String]) -> Result<f64> {
    check_lengths(hyps, refs)?;
    Ok(chrf::corpus_chrfpp(hyps, refs))
}

pub trait CorpusMetric: Send + Sync {
    fn name(&self) -> &'static str;
    fn score(&self, hyps: &[String], refs: &[String]) -> Result<f64>;
}

struct Bleu;
struct ChrfPlusPlus;

impl CorpusMetric for Bleu {
    fn name(&self) -> &'static str {
        "bleu"
    }
    fn score(&self, hyps: &[String], refs: &[String]) -> Result<f64> {
        corpus_bleu(hyps, refs)
    }
}

impl CorpusMetric for ChrfPlusPlus {
    fn name(&self) -> &'static str {
        "chrfpp"
    }
    fn score(&self, hyps: &[String], refs: &[String]) -> Result<f64> {
        corpus_chrfpp(hyps, refs)
    }
}

/// Metrics by name.
pub struct MetricRegistry {
    metrics: BTreeMap<&'static str, Box<dyn CorpusMetric>>,
}

impl Default for MetricRegistry {
    fn default() -> Self {
        let mut reg = MetricRegistry {
            metrics: BTreeMap::new(),
        };
        reg.register(Box::new(Bleu));
        reg.register(Box::new(ChrfPlusPlus));
        reg
    }
}

impl MetricRegistry {
    pub fn register(&mut self, metric: Box<dyn CorpusMetric>) {
        self.metrics.insert(metric.name(), metric);
    }

    pub fn get(&self, name: &str) -> Result<&dyn CorpusMetric> {
        self.metrics
            .get(name)
            .map(|m| m.as_ref())
            .ok_or_else(|| Error::Config(format!("unknown metric {name:?}")))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.metrics.keys().copied()
    }
}

#[derive(Deserialize)]
struct RawScore {
    idx: u32,
    variant: String,
    score: f64,
}

/// Reads `{"idx", "variant", "score"}` lines; duplicates and unknown variants are rejected.
pub fn ingest_segment_scores(path: &Path) -> Result<Vec<SegmentScore>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_segment_scores(&text).map_err(|(line, msg)| Error::format(path, format!("line {line}: {msg}")))
}

fn parse_segment_scores(text: &str) -> std::result::Result<Vec<SegmentScore>, (usize, String)> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawScore = serde_json::from_str(line).map_err(|e| (line_no, e.to_string()))?;
        let variant: Variant = raw.variant.parse().map_err(|e: Error| (line_no, e.to_string()))?;
        if !raw.score.is_finite() {
            return Err((line_no, "score is not finite".into()));
        }
        if !seen.insert((raw.idx, variant)) {
            return Err((line_no, format!("duplicate score for idx {} variant {variant}", raw.idx)));
        }
        out.push(SegmentScore {
            idx: raw.idx,
            variant,
            score: raw.score,
        });
    }
    Ok(out)
}
