//! Aggregation of run results into per-movie tables, language summaries and
//! gain matrices.

mod delta;
mod fixtures;
mod render;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scoring::{MetricTriple, Variant};

pub use delta::{DeltaRule, DeltaRuleRegistry, PerMovieMean, Pooled, DEFAULT_DELTA_RULE};
pub use fixtures::{load_published_tables, parse_combined, parse_selective, CombinedRow, SelectiveRow};
pub use render::{format_delta, render_language_summary, render_tables, TableFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    AttrVc,
    InterVs,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::AttrVc, Method::InterVs];

    pub fn as_str(self) -> &'static str {
        self.variant().as_str()
    }

    pub fn variant(self) -> Variant {
        match self {
            Method::AttrVc => Variant::AttrVc,
            Method::InterVs => Variant::InterVs,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown method {s:?}")))
    }
}

/// `full`, or selective replacement of the worst k percent (`sel20`, `sel12.5`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Condition {
    Full,
    Selective(f64),
}

impl Condition {
    fn rank(&self) -> (u8, f64) {
        match *self {
            Condition::Full => (0, 0.0),
            Condition::Selective(k) => (1, k),
        }
    }
}

impl Eq for Condition {}

impl Ord for Condition {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, ka) = self.rank();
        let (b, kb) = other.rank();
        a.cmp(&b).then(ka.total_cmp(&kb))
    }
}

impl std::hash::Hash for Condition {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        let (tag, k) = self.rank();
        tag.hash(state);
        k.to_bits().hash(state);
    }
}

impl PartialOrd for Condition {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Full => f.write_str("full"),
            Condition::Selective(k) => write!(f, "sel{k}"),
        }
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "full" {
            return Ok(Condition::Full);
        }
        let k: f64 = s
            .strip_prefix("sel")
            .and_then(|k| k.parse().ok())
            .ok_or_else(|| Error::Invalid(format!("unknown condition {s:?}")))?;
        if !(k > 0.0 && k <= 100.0) {
            return Err(Error::Invalid(format!("condition {s:?}: k must be in (0, 100]")));
        }
        Ok(Condition::Selective(k))
    }
}

impl Serialize for Condition {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Condition {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub movie_id: String,
    pub language: String,
    pub method: Method,
    pub condition: Condition,
    pub metrics: MetricTriple,
    pub baseline: MetricTriple,
}

impl RunResult {
    fn key(&self) -> (&str, &str, Method, Condition) {
        (&self.movie_id, &self.language, self.method, self.condition)
    }
}

/// Rejects duplicate (movie, language, method, condition) entries.
pub fn validate_results(results: &[RunResult]) -> Result<()> {
    let mut seen = HashSet::new();
    for r in results {
        if !seen.insert(r.key()) {
            return Err(Error::Invalid(format!(
                "duplicate result for {} {} {} {}",
                r.movie_id, r.language, r.method, r.condition
            )));
        }
    }
    Ok(())
}

/// Results in (movie, language, method, condition) order.
pub fn sorted_results(results: &[RunResult]) -> Vec<RunResult> {
    let mut out = results.to_vec();
    out.sort_by(|a, b| a.key().cmp(&b.key()));
    out
}

pub fn results_to_json(results: &[RunResult]) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&sorted_results(results))?;
    s.push('\n');
    Ok(s)
}

pub fn ingest_results(json: &str) -> Result<Vec<RunResult>> {
    let results: Vec<RunResult> = serde_json::from_str(json)?;
    validate_results(&results)?;
    Ok(results)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageSummary {
    pub language: String,
    pub method: Method,
    pub condition: Condition,
    /// Full precision; round only for display.
    pub delta_percent: f64,
    pub movies: usize,
}

/// Language-wise relative COMET change over the baseline, one entry per
/// (language, method, condition) with at least one movie.
pub fn build_language_summary(results: &[RunResult], rule: &dyn DeltaRule) -> Result<Vec<LanguageSummary>> {
    validate_results(results)?;
    let mut groups: BTreeMap<(&str, Method, Condition), Vec<(&str, f64, f64)>> = BTreeMap::new();
    for r in results {
        groups
            .entry((&r.language, r.method, r.condition))
            .or_default()
            .push((&r.movie_id, r.baseline.comet, r.metrics.comet));
    }
    let mut out = Vec::new();
    for ((language, method, condition), mut rows) in groups {
        // Movie order must not matter; sort so float sums are reproducible too.
        rows.sort_by(|a, b| a.0.cmp(b.0));
        let pairs: Vec<(f64, f64)> = rows.iter().map(|&(_, b, c)| (b, c)).collect();
        if pairs.iter().any(|&(b, _)| b <= 0.0) {
            log::warn!("{language} {method} {condition}: non-positive baseline COMET, skipped");
            continue;
        }
        out.push(LanguageSummary {
            language: language.to_string(),
            method,
            condition,
            delta_percent: rule.delta_percent(&pairs),
            movies: pairs.len(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainCell {
    pub movie_id: String,
    pub language: String,
    /// Best absolute COMET gain over both methods; `None` when a method is missing.
    pub delta: Option<f64>,
}

pub fn build_gain_matrix(results: &[RunResult], condition: Condition) -> Vec<GainCell> {
    let mut cells: BTreeMap<(&str, &str), BTreeMap<Method, f64>> = BTreeMap::new();
    for r in results {
        let cell = cells.entry((&r.movie_id, &r.language)).or_default();
        if r.condition == condition {
            cell.insert(r.method, r.metrics.comet - r.baseline.comet);
        }
    }
    cells
        .into_iter()
        .map(|((movie, language), by_method)| GainCell {
            movie_id: movie.to_string(),
            language: language.to_string(),
            delta: if by_method.len() == Method::ALL.len() {
                by_method.values().copied().reduce(f64::max)
            } else {
                None
            },
        })
        .collect()
}

pub fn gain_matrix_csv(cells: &[GainCell]) -> String {
    let mut out = String::from("movie,language,delta\n");
    for c in cells {
        let delta = c.delta.map_or_else(|| "NA".to_string(), |d| format!("{d:.4}"));
        out.push_str(&format!("{},{},{}\n", c.movie_id, c.language, delta));
    }
    out
}
