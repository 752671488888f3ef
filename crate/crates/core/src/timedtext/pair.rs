use std::collections::{BTreeSet, HashMap};

use super::{ParallelCorpus, SegmentPair, SubtitleSegment};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct PairReport {
    /// True when the index sets matched and pairing used index identity.
    pub by_index: bool,
    pub paired: usize,
    pub dropped_source: usize,
    pub dropped_reference: usize,
}

fn index_set(segs: &[SubtitleSegment]) -> Option<BTreeSet<u32>> {
    let set: BTreeSet<u32> = segs.iter().map(|s| s.index).collect();
    (set.len() == segs.len()).then_some(set)
}

/// For every source, the position of the reference with the largest positive
/// overlap (earliest reference on ties).
fn best_overlaps(source: &[SubtitleSegment], reference: &[SubtitleSegment]) -> Vec<Option<(usize, u64)>> {
    let mut order: Vec<usize> = (0..reference.len()).collect();
    order.sort_by_key(|&i| (reference[i].span.start_ms(), i));
    let starts: Vec<u64> = order.iter().map(|&i| reference[i].span.start_ms()).collect();
    let mut max_end = Vec::with_capacity(order.len());
    let mut running = 0u64;
    for &i in &order {
        running = running.max(reference[i].span.end_ms());
        max_end.push(running);
    }

    source
        .iter()
        .map(|src| {
            let (lo, hi) = (src.span.start_ms(), src.span.end_ms());
            let upper = starts.partition_point(|&s| s < hi);
            let mut best: Option<(usize, u64)> = None;
            for j in (0..upper).rev() {
                if max_end[j] <= lo {
                    break;
                }
                let pos = order[j];
                let overlap = src.span.overlap_ms(&reference[pos].span);
                if overlap == 0 {
                    continue;
                }
                best = match best {
                    Some((b, o)) if o > overlap || (o == overlap && b < pos) => Some((b, o)),
                    _ => Some((pos, overlap)),
                };
            }
            best
        })
        .collect()
}

/// Pairs source and reference segments: by equal index when the two index sets
/// coincide, otherwise by maximal temporal overlap. In the overlap case a
/// reference claimed by several sources goes to the one with the largest
/// overlap (earliest source on ties); the others are dropped.
pub fn pair(
    movie_id: &str,
    language: &str,
    source: &[SubtitleSegment],
    reference: &[SubtitleSegment],
) -> Result<(ParallelCorpus, PairReport)> {
    let mut report = PairReport::default();
    let mut pairs = Vec::new();

    match (index_set(source), index_set(reference)) {
        (Some(a), Some(b)) if a == b => {
            report.by_index = true;
            let by_idx: HashMap<u32, &SubtitleSegment> =
                reference.iter().map(|r| (r.index, r)).collect();
            for src in source {
                let reference = by_idx[&src.index].clone();
                pairs.push(SegmentPair {
                    source: src.clone(),
                    reference,
                });
            }
        }
        _ => {
            let best = best_overlaps(source, reference);
            // reference position -> (source position, overlap)
            let mut winner: HashMap<usize, (usize, u64)> = HashMap::new();
            for (si, b) in best.iter().enumerate() {
                if let Some((ri, overlap)) = *b {
                    winner
                        .entry(ri)
                        .and_modify(|w| {
                            if overlap > w.1 {
                                *w = (si, overlap);
                            }
                        })
                        .or_insert((si, overlap));
                }
            }
            let mut chosen: Vec<(usize, usize)> = winner.iter().map(|(&r, &(s, _))| (s, r)).collect();
            chosen.sort_unstable();
            for (si, ri) in chosen {
                let src = source[si].clone();
                let mut reference = reference[ri].clone();
                reference.index = src.index;
                pairs.push(SegmentPair {
                    source: src,
                    reference,
                });
            }
        }
    }

    report.paired = pairs.len();
    report.dropped_source = source.len() - pairs.len();
    report.dropped_reference = reference.len() - pairs.len();
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus(format!(
            "{movie_id}/{language}: no source/reference pairs"
        )));
    }
    Ok((
        ParallelCorpus {
            movie_id: movie_id.to_string(),
            language: language.to_string(),
            pairs,
        },
        report,
    ))
}
