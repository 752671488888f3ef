//! Slow, obviously-correct reimplementations used as oracles by the
//! integration and acceptance tests. The oracles share no code with the
//! crate; `golden` renders the crate's prompts for byte comparison.

#![allow(dead_code)]

pub mod checks;
pub mod golden;

use std::path::PathBuf;

pub fn workspace_fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

fn windows<T: Clone>(xs: &[T], n: usize) -> Vec<Vec<T>> {
    if xs.len() < n {
        return Vec::new();
    }
    (0..=xs.len() - n).map(|i| xs[i..i + n].to_vec()).collect()
}

/// Clipped matches by linear scans: each distinct hypothesis n-gram counts
/// min(occurrences in hyp, occurrences in ref).
fn clipped<T: PartialEq + Clone>(hyp: &[Vec<T>], reference: &[Vec<T>]) -> usize {
    let mut distinct: Vec<&Vec<T>> = Vec::new();
    for g in hyp {
        if !distinct.contains(&g) {
            distinct.push(g);
        }
    }
    distinct
        .into_iter()
        .map(|g| {
            let h = hyp.iter().filter(|x| *x == g).count();
            let r = reference.iter().filter(|x| *x == g).count();
            h.min(r)
        })
        .sum()
}

/// Corpus BLEU over whitespace tokens: orders 1-4, zero-match orders get
/// 100 / (2^k * total) with k counting zero-match orders so far, an order
/// without hypothesis n-grams gives 0, geometric mean, brevity penalty.
pub fn bleu(hyps: &[&str], refs: &[&str]) -> f64 {
    let mut correct = [0usize; 4];
    let mut total = [0usize; 4];
    let (mut c, mut r) = (0usize, 0usize);
    for (h, rf) in hyps.iter().zip(refs) {
        let ht: Vec<&str> = h.split_whitespace().collect();
        let rt: Vec<&str> = rf.split_whitespace().collect();
        c += ht.len();
        r += rt.len();
        for n in 1..=4 {
            let hg = windows(&ht, n);
            let rg = windows(&rt, n);
            total[n - 1] += hg.len();
            correct[n - 1] += clipped(&hg, &rg);
        }
    }
    if total.iter().any(|&t| t == 0) {
        return 0.0;
    }
    let mut zero_orders = 0;
    let mut product = 1.0f64;
    for n in 0..4 {
        let p = if correct[n] == 0 {
            zero_orders += 1;
            100.0 / (2f64.powi(zero_orders) * total[n] as f64)
        } else {
            100.0 * correct[n] as f64 / total[n] as f64
        };
        product *= p;
    }
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    bp * product.powf(0.25)
}

/// Corpus chrF++ (char 1-6 without whitespace, word 1-2, beta 2) for inputs
/// without punctuation: precision and recall are averaged over the orders with
/// n-grams on both sides, then combined.
pub fn chrfpp(hyps: &[&str], refs: &[&str]) -> f64 {
    // stats[order] = (hyp n-grams, ref n-grams, matches)
    let mut stats = vec![(0usize, 0usize, 0usize); 8];
    for (h, rf) in hyps.iter().zip(refs) {
        let hc: Vec<char> = h.chars().filter(|c| !c.is_whitespace()).collect();
        let rc: Vec<char> = rf.chars().filter(|c| !c.is_whitespace()).collect();
        for n in 1..=6 {
            let hg = windows(&hc, n);
            let rg = windows(&rc, n);
            let s = &mut stats[n - 1];
            s.0 += hg.len();
            s.1 += rg.len();
            s.2 += clipped(&hg, &rg);
        }
        let hw: Vec<String> = h.split_whitespace().map(str::to_string).collect();
        let rw: Vec<String> = rf.split_whitespace().map(str::to_string).collect();
        for n in 1..=2 {
            let hg = windows(&hw, n);
            let rg = windows(&rw, n);
            let s = &mut stats[5 + n];
            s.0 += hg.len();
            s.1 += rg.len();
            s.2 += clipped(&hg, &rg);
        }
    }
    let effective: Vec<_> = stats.iter().filter(|s| s.0 > 0 && s.1 > 0).collect();
    if effective.is_empty() {
        return 0.0;
    }
    let p: f64 = effective.iter().map(|s| s.2 as f64 / s.0 as f64).sum::<f64>() / effective.len() as f64;
    let r: f64 = effective.iter().map(|s| s.2 as f64 / s.1 as f64).sum::<f64>() / effective.len() as f64;
    if p == 0.0 && r == 0.0 {
        return 0.0;
    }
    100.0 * 5.0 * p * r / (4.0 * p + r)
}

/// Worst `floor(n*k/100)` idx by full sort on (score, idx).
pub fn select_worst(scores: &[(u32, f64)], k_percent: f64) -> Vec<u32> {
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    let count = ((scores.len() as f64 * k_percent / 100.0) + 1e-9).floor() as usize;
    let mut out: Vec<u32> = sorted[..count].iter().map(|s| s.0).collect();
    out.sort();
    out
}

/// Timestamps inside `[max(0, c - h), min(d, c + h)]`, by scanning all frames.
pub fn window_scan(times: &[u64], center: u64, half: u64, duration: u64) -> Vec<u64> {
    let lo = center as i128 - half as i128;
    let hi = (center as i128 + half as i128).min(duration as i128);
    times
        .iter()
        .copied()
        .filter(|&t| (t as i128) >= lo.max(0) && (t as i128) <= hi)
        .collect()
}

/// Timestamps in `[prev_end, cur_start)`.
pub fn gap_scan(times: &[u64], prev_end: u64, cur_start: u64) -> Vec<u64> {
    times.iter().copied().filter(|&t| t >= prev_end && t < cur_start).collect()
}

/// Counts sampling instants `k / fps` falling in any closed span, by
/// enumerating every instant up to the last span end.
pub fn frames_in_spans(fps: f64, spans: &[(u64, u64)]) -> u64 {
    let end = spans.iter().map(|s| s.1).max().unwrap_or(0);
    let mut count = 0;
    let mut k = 0u64;
    loop {
        let t_ms = k as f64 * 1000.0 / fps;
        if t_ms > end as f64 {
            break;
        }
        if spans.iter().any(|&(a, b)| t_ms >= a as f64 && t_ms <= b as f64) {
            count += 1;
        }
        k += 1;
    }
    count
}

/// Pair count, mean words and mean characters of source texts, counted
/// directly from the text.
pub fn text_stats(sources: &[&str]) -> (usize, f64, f64) {
    let n = sources.len();
    let words: usize = sources.iter().map(|s| s.split(' ').filter(|w| !w.is_empty()).count()).sum();
    let chars: usize = sources.iter().map(|s| s.chars().count()).sum();
    (n, words as f64 / n as f64, chars as f64 / n as f64)
}
