//! SubRip corpora: parsing, normalization, filtering and source/reference pairing.

mod normalize;
mod pair;
mod srt;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use normalize::{normalize, normalize_text};
pub use pair::{pair, PairReport};
pub use srt::{format_timestamp, parse_srt, serialize_srt, SrtDocument, SrtWarning};

/// Closed millisecond interval `[start_ms, end_ms]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TimeSpan {
    start_ms: u64,
    end_ms: u64,
}

impl TimeSpan {
    pub fn new(start_ms: u64, end_ms: u64) -> Result<Self> {
        if end_ms < start_ms {
            return Err(Error::InvalidSpan {
                line: 0,
                start_ms,
                end_ms,
            });
        }
        Ok(Self { start_ms, end_ms })
    }

    pub fn start_ms(&self) -> u64 {
        self.start_ms
    }

    pub fn end_ms(&self) -> u64 {
        self.end_ms
    }

    pub fn duration_ms(&self) -> u64 {
        self.end_ms - self.start_ms
    }

    /// Length of the intersection with `other`, zero when disjoint or touching.
    pub fn overlap_ms(&self, other: &TimeSpan) -> u64 {
        let lo = self.start_ms.max(other.start_ms);
        let hi = self.end_ms.min(other.end_ms);
        hi.saturating_sub(lo)
    }
}

impl fmt::Display for TimeSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} --> {}",
            format_timestamp(self.start_ms),
            format_timestamp(self.end_ms)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubtitleSegment {
    pub index: u32,
    pub span: TimeSpan,
    /// Normalized text. Equal to `raw_text` until [`normalize`] runs.
    pub text: String,
    pub raw_text: String,
}

impl SubtitleSegment {
    pub fn new(index: u32, span: TimeSpan, raw_text: impl Into<String>) -> Self {
        let raw_text = raw_text.into();
        Self {
            index,
            span,
            text: raw_text.clone(),
            raw_text,
        }
    }

    pub fn word_count(&self) -> usize {
        self.text.split_whitespace().count()
    }
}

/// One source/reference pair. After pairing both sides carry the source index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentPair {
    pub source: SubtitleSegment,
    pub reference: SubtitleSegment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelCorpus {
    pub movie_id: String,
    pub language: String,
    pub pairs: Vec<SegmentPair>,
}

/// One line of the canonical corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusLine {
    pub idx: u32,
    pub start_ms: u64,
    pub end_ms: u64,
    pub src: String,
    #[serde(rename = "ref")]
    pub reference: String,
}

/// Corpus statistics in the shape of a per-movie subtitle table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub pairs: usize,
    pub avg_words: f64,
    pub avg_chars: f64,
}

impl ParallelCorpus {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn sources(&self) -> Vec<SubtitleSegment> {
        self.pairs.iter().map(|p| p.source.clone()).collect()
    }

    pub fn to_lines(&self) -> Vec<CorpusLine> {
        self.pairs
            .iter()
            .map(|p| CorpusLine {
                idx: p.source.index,
                start_ms: p.source.span.start_ms(),
                end_ms: p.source.span.end_ms(),
                src: p.source.text.clone(),
                reference: p.reference.text.clone(),
            })
            .collect()
    }

    pub fn from_lines(movie_id: &str, language: &str, lines: &[CorpusLine]) -> Result<Self> {
        let mut pairs = Vec::with_capacity(lines.len());
        for line in lines {
            let span = TimeSpan::new(line.start_ms, line.end_ms)?;
            let mut source = SubtitleSegment::new(line.idx, span, line.src.clone());
            source.text = line.src.clone();
            let reference = SubtitleSegment::new(line.idx, span, line.reference.clone());
            pairs.push(SegmentPair { source, reference });
        }
        if pairs.is_empty() {
            return Err(Error::EmptyCorpus(format!("{movie_id}/{language}")));
        }
        Ok(Self {
            movie_id: movie_id.to_string(),
            language: language.to_string(),
            pairs,
        })
    }

    /// Average source length in whitespace words and in Unicode scalar values.
    pub fn stats(&self) -> CorpusStats {
        let n = self.pairs.len();
        if n == 0 {
            return CorpusStats {
                pairs: 0,
                avg_words: 0.0,
                avg_chars: 0.0,
            };
        }
        let words: usize = self.pairs.iter().map(|p| p.source.word_count()).sum();
        let chars: usize = self.pairs.iter().map(|p| p.source.text.chars().count()).sum();
        CorpusStats {
            pairs: n,
            avg_words: words as f64 / n as f64,
            avg_chars: chars as f64 / n as f64,
        }
    }

    /// Drops pairs whose source fails [`filter`] or whose reference is empty.
    pub fn retain_filtered(&mut self, config: FilterConfig) -> Result<FilterReport> {
        let sources: Vec<SubtitleSegment> = self.sources();
        let (kept, mut report) = filter(&sources, config)?;
        let keep: std::collections::HashSet<u32> = kept.iter().map(|s| s.index).collect();
        let before = self.pairs.len();
        self.pairs
            .retain(|p| keep.contains(&p.source.index) && !p.reference.text.is_empty());
        report.kept = self.pairs.len();
        report.dropped = before - self.pairs.len();
        Ok(report)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub min_words: usize,
    /// `usize::MAX` disables the upper bound.
    pub max_words: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_words: 1,
            max_words: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FilterReport {
    pub kept: usize,
    pub dropped: usize,
}

/// Keeps segments with non-empty text and a word count in `[min_words, max_words]`.
pub fn filter(
    segments: &[SubtitleSegment],
    config: FilterConfig,
) -> Result<(Vec<SubtitleSegment>, FilterReport)> {
    if config.min_words < 1 {
        return Err(Error::Config("filter.min_words must be at least 1".into()));
    }
    if config.min_words > config.max_words {
        return Err(Error::Config(format!(
            "filter.min_words ({}) exceeds filter.max_words ({})",
            config.min_words, config.max_words
        )));
    }
    let kept: Vec<SubtitleSegment> = segments
        .iter()
        .filter(|s| {
            let words = s.word_count();
            !s.text.is_empty() && words >= config.min_words && words <= config.max_words
        })
        .cloned()
        .collect();
    let report = FilterReport {
        kept: kept.len(),
        dropped: segments.len() - kept.len(),
    };
    Ok((kept, report))
}
