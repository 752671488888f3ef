use std::collections::HashMap;
use std::hash::Hash;

pub const CHAR_ORDER: usize = 6;
pub const WORD_ORDER: usize = 2;
pub const BETA: f64 = 2.0;

const ASCII_PUNCT: &str = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";

/// Per order: hypothesis n-grams, reference n-grams, matches. Character
/// orders first, then word orders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChrfStats {
    pub orders: Vec<[u64; 3]>,
}

impl Default for ChrfStats {
    fn default() -> Self {
        Self {
            orders: vec![[0; 3]; CHAR_ORDER + WORD_ORDER],
        }
    }
}

impl std::ops::AddAssign<&ChrfStats> for ChrfStats {
    fn add_assign(&mut self, rhs: &ChrfStats) {
        for (a, b) in self.orders.iter_mut().zip(&rhs.orders) {
            for k in 0..3 {
                a[k] += b[k];
            }
        }
    }
}

fn ngram_counts<T: Hash + Eq>(xs: &[T], n: usize) -> HashMap<&[T], u64> {
    let mut m = HashMap::new();
    if xs.len() >= n {
        for w in xs.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

fn match_counts<T: Hash + Eq>(hyp: &[T], reference: &[T], n: usize) -> [u64; 3] {
    let h = ngram_counts(hyp, n);
    let r = ngram_counts(reference, n);
    let n_hyp = hyp.len().saturating_sub(n - 1) as u64;
    let n_ref = reference.len().saturating_sub(n - 1) as u64;
    let matches = h.iter().map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0))).sum();
    [n_hyp, n_ref, matches]
}

/// Whitespace tokens with one leading or trailing ASCII punctuation mark split
/// off (trailing wins when both are present).
pub fn chrf_words(sentence: &str) -> Vec<String> {
    let mut out = Vec::new();
    for w in sentence.split_whitespace() {
        let mut chars = w.chars();
        let first = chars.next().expect("non-empty token");
        let last = w.chars().next_back().expect("non-empty token");
        if w.chars().count() == 1 {
            out.push(w.to_string());
        } else if ASCII_PUNCT.contains(last) {
            out.push(w[..w.len() - last.len_utf8()].to_string());
            out.push(last.to_string());
        } else if ASCII_PUNCT.contains(first) {
            out.push(first.to_string());
            out.push(w[first.len_utf8()..].to_string());
        } else {
            out.push(w.to_string());
        }
    }
    out
}

pub fn sentence_stats(hyp: &str, reference: &str) -> ChrfStats {
    let hc: Vec<char> = hyp.chars().filter(|c| !c.is_whitespace()).collect();
    let rc: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
    let hw = chrf_words(hyp);
    let rw = chrf_words(reference);
    let mut orders = Vec::with_capacity(CHAR_ORDER + WORD_ORDER);
    for n in 1..=CHAR_ORDER {
        orders.push(match_counts(&hc, &rc, n));
    }
    for n in 1..=WORD_ORDER {
        orders.push(match_counts(&hw, &rw, n));
    }
    ChrfStats { orders }
}

/// F-beta of precision and recall averaged over the orders where both sides
/// have n-grams; 0..100 scale.
pub fn chrf_from_stats(stats: &ChrfStats) -> f64 {
    let factor = BETA * BETA;
    let (mut p_sum, mut r_sum, mut effective) = (0.0, 0.0, 0usize);
    for &[n_hyp, n_ref, n_match] in &stats.orders {
        if n_hyp > 0 && n_ref > 0 {
            p_sum += n_match as f64 / n_hyp as f64;
            r_sum += n_match as f64 / n_ref as f64;
            effective += 1;
        }
    }
    if effective == 0 {
        return 0.0;
    }
    let p = p_sum / effective as f64;
    let r = r_sum / effective as f64;
    if p + r == 0.0 {
        return 0.0;
    }
    100.0 * (1.0 + factor) * p * r / (factor * p + r)
}

pub(super) fn corpus_chrfpp(hyps: &[String], refs: &[String]) -> f64 {
    let mut stats = ChrfStats::default();
    for (h, r) in hyps.iter().zip(refs) {
        stats += &sentence_stats(h, r);
    }
    chrf_from_stats(&stats)
}
