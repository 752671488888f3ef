use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{SegmentScore, Variant};
use crate::context::PromptBundle;
use crate::error::{Error, Result};

/// Hypothesis for one segment under one variant, with the prompt that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationRecord {
    pub idx: u32,
    pub variant: Variant,
    pub hypothesis: String,
    pub prompt: PromptBundle,
    /// Visual variant that fell back to the baseline prompt for lack of context.
    #[serde(default)]
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectivePlan {
    pub k_percent: f64,
    /// Ascending idx.
    pub replaced: BTreeSet<u32>,
    pub n_total: usize,
}

/// `floor(n * k / 100)`, guarded against representation error just below an integer.
pub fn replacement_budget(n_total: usize, k_percent: f64) -> usize {
    let exact = n_total as f64 * k_percent / 100.0;
    ((exact + 1e-9).floor() as usize).min(n_total)
}

/// Selects the `floor(n * k / 100)` lowest baseline scores, ties by ascending idx.
pub fn plan_selective(baseline: &[SegmentScore], expected: &[u32], k_percent: f64) -> Result<SelectivePlan> {
    if !(k_percent > 0.0 && k_percent <= 100.0) {
        return Err(Error::Config(format!("k_percent must be in (0, 100], got {k_percent}")));
    }
    let scores: HashMap<u32, f64> = baseline
        .iter()
        .filter(|s| s.variant == Variant::Baseline)
        .map(|s| (s.idx, s.score))
        .collect();
    let missing: Vec<u32> = expected.iter().copied().filter(|i| !scores.contains_key(i)).collect();
    if !missing.is_empty() {
        return Err(Error::MissingScores(missing));
    }
    let mut ranked: Vec<(f64, u32)> = expected.iter().map(|i| (scores[i], *i)).collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let budget = replacement_budget(ranked.len(), k_percent);
    Ok(SelectivePlan {
        k_percent,
        replaced: ranked[..budget].iter().map(|&(_, i)| i).collect(),
        n_total: ranked.len(),
    })
}

/// Baseline records with the planned segments swapped for their visual
/// counterparts. Order follows the baseline list.
pub fn apply_selective(
    baseline: &[TranslationRecord],
    visual: &[TranslationRecord],
    plan: &SelectivePlan,
) -> Result<Vec<TranslationRecord>> {
    let by_idx: HashMap<u32, &TranslationRecord> = visual.iter().map(|r| (r.idx, r)).collect();
    if let Some(first) = visual.first() {
        if visual.iter().any(|r| r.variant != first.variant) {
            return Err(Error::Invalid("visual records mix variants".into()));
        }
    }
    let missing: Vec<u32> = plan
        .replaced
        .iter()
        .copied()
        .filter(|i| !by_idx.contains_key(i))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Invalid(format!(
            "planned replacements missing from visual records: {missing:?}"
        )));
    }
    Ok(baseline
        .iter()
        .map(|b| {
            if plan.replaced.contains(&b.idx) {
                by_idx[&b.idx].clone()
            } else {
                b.clone()
            }
        })
        .collect())
}

/// Corpus score as the arithmetic mean of segment scores.
pub fn corpus_score_from_segments(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Invalid("cannot aggregate an empty score list".into()));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Per-segment scores after selective replacement, in `order`.
pub fn merged_scores(
    order: &[u32],
    baseline: &HashMap<u32, f64>,
    visual: &HashMap<u32, f64>,
    plan: &SelectivePlan,
) -> Result<Vec<f64>> {
    order
        .iter()
        .map(|i| {
            let table = if plan.replaced.contains(i) { visual } else { baseline };
            table
                .get(i)
                .copied()
                .ok_or_else(|| Error::Invalid(format!("no score for idx {i}")))
        })
        .collect()
}
