use std::collections::HashMap;

use super::tokenize::tokenize_intl;

pub const MAX_ORDER: usize = 4;

/// Sufficient statistics; sums over sentences are order independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BleuStats {
    pub correct: [u64; MAX_ORDER],
    pub total: [u64; MAX_ORDER],
    pub sys_len: u64,
    pub ref_len: u64,
}

impl std::ops::AddAssign for BleuStats {
    fn add_assign(&mut self, rhs: Self) {
        for n in 0..MAX_ORDER {
            self.correct[n] += rhs.correct[n];
            self.total[n] += rhs.total[n];
        }
        self.sys_len += rhs.sys_len;
        self.ref_len += rhs.ref_len;
    }
}

fn ngram_counts<'a>(tokens: &'a [String], n: usize) -> HashMap<&'a [String], u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

pub fn sentence_stats(hyp: &[String], reference: &[String]) -> BleuStats {
    let mut stats = BleuStats {
        sys_len: hyp.len() as u64,
        ref_len: reference.len() as u64,
        ..Default::default()
    };
    for n in 1..=MAX_ORDER {
        let h = ngram_counts(hyp, n);
        let r = ngram_counts(reference, n);
        stats.total[n - 1] = hyp.len().saturating_sub(n - 1) as u64;
        stats.correct[n - 1] = h
            .iter()
            .map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)))
            .sum();
    }
    stats
}

/// BLEU on the 0..100 scale with exponential smoothing of zero match counts.
/// An order with no hypothesis n-grams at all scores zero.
pub fn bleu_from_stats(stats: &BleuStats) -> f64 {
    let mut log_sum = 0.0;
    let mut smooth = 1.0;
    for n in 0..MAX_ORDER {
        if stats.total[n] == 0 {
            return 0.0;
        }
        let precision = if stats.correct[n] == 0 {
            smooth *= 2.0;
            100.0 / (smooth * stats.total[n] as f64)
        } else {
            100.0 * stats.correct[n] as f64 / stats.total[n] as f64
        };
        log_sum += precision.ln();
    }
    let bp = if stats.sys_len < stats.ref_len {
        (1.0 - stats.ref_len as f64 / stats.sys_len as f64).exp()
    } else {
        1.0
    };
    bp * (log_sum / MAX_ORDER as f64).exp()
}

pub fn corpus_bleu_tokens(hyps: &[Vec<String>], refs: &[Vec<String>]) -> f64 {
    let mut stats = BleuStats::default();
    for (h, r) in hyps.iter().zip(refs) {
        stats += sentence_stats(h, r);
    }
    bleu_from_stats(&stats)
}

pub(super) fn corpus_bleu_intl(hyps: &[String], refs: &[String]) -> f64 {
    let h: Vec<Vec<String>> = hyps.iter().map(|s| tokenize_intl(s)).collect();
    let r: Vec<Vec<String>> = refs.iter().map(|s| tokenize_intl(s)).collect();
    corpus_bleu_tokens(&h, &r)
}
