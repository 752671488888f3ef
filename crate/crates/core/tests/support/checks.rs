//! One function per acceptance criterion. Each returns a short summary on
//! success and the first counterexample on failure; the acceptance binary and
//! the per-area integration tests both call these.

use std::collections::{BTreeSet, HashMap};
use std::fs;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use subgrain::context::{
    attr_summarize, gap_summarize, AttrWindow, ContextInput, ContextStrategy, GapSummary, PromptBundle,
    TemplateId, ATTR_SAMPLE_CHARS, GAP_BLOB_CHARS,
};
use subgrain::report::{
    build_language_summary, format_delta, load_published_tables, Condition, DeltaRule, Method, Pooled,
};
use subgrain::scoring::{
    apply_selective, corpus_bleu, corpus_chrfpp, plan_selective, SegmentScore, TranslationRecord, Variant,
};
use subgrain::timedtext::{normalize, pair, parse_srt, serialize_srt, FilterConfig, SubtitleSegment, TimeSpan};
use subgrain::timeline::{
    frames_in_gap, frames_in_window, FrameDescription, GapSpan, Timeline, DEFAULT_WINDOW_HALF_MS,
};
use subgrain::Error;

use super::{bleu, chrfpp, gap_scan, golden, select_worst, text_stats, window_scan, workspace_fixture};

pub type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

// ---------------------------------------------------------------- language summary

/// (language, method, condition, published delta %).
pub const PUBLISHED_SUMMARY: [(&str, Method, f64, f64); 20] = [
    ("hin", Method::AttrVc, 0.0, -5.0),
    ("hin", Method::AttrVc, 30.0, 3.4),
    ("hin", Method::InterVs, 0.0, 0.0),
    ("hin", Method::InterVs, 30.0, 3.9),
    ("ben", Method::AttrVc, 0.0, -1.6),
    ("ben", Method::AttrVc, 30.0, 3.7),
    ("ben", Method::InterVs, 0.0, 0.3),
    ("ben", Method::InterVs, 30.0, 3.7),
    ("tel", Method::AttrVc, 0.0, -1.6),
    ("tel", Method::AttrVc, 30.0, 3.0),
    ("tel", Method::InterVs, 0.0, -1.7),
    ("tel", Method::InterVs, 30.0, 2.9),
    ("tam", Method::AttrVc, 0.0, 4.0),
    ("tam", Method::AttrVc, 30.0, 5.9),
    ("tam", Method::InterVs, 0.0, 5.0),
    ("tam", Method::InterVs, 30.0, 5.8),
    ("kan", Method::AttrVc, 0.0, -5.1),
    ("kan", Method::AttrVc, 30.0, 2.3),
    ("kan", Method::InterVs, 0.0, -4.9),
    ("kan", Method::InterVs, 30.0, 2.4),
];

fn condition(k: f64) -> Condition {
    if k == 0.0 {
        Condition::Full
    } else {
        Condition::Selective(k)
    }
}

/// Largest deviation under `rule` and the first cell outside tolerance, if any.
pub fn summary_deviations(rule: &dyn DeltaRule) -> Result<(f64, Option<String>), String> {
    let results = load_published_tables(
        &workspace_fixture("published/combined.tsv"),
        &workspace_fixture("published/selective.tsv"),
    )
    .map_err(|e| e.to_string())?;
    let summaries = build_language_summary(&results, rule).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    let mut first_miss = None;
    for (lang, method, k, want) in PUBLISHED_SUMMARY {
        let cond = condition(k);
        let got = summaries
            .iter()
            .find(|s| s.language == lang && s.method == method && s.condition == cond)
            .ok_or_else(|| format!("no summary for {lang} {method} {cond}"))?
            .delta_percent;
        let tol = if k == 0.0 { 0.3 } else { 0.6 };
        let dev = (got - want).abs();
        worst = worst.max(dev);
        if dev > tol && first_miss.is_none() {
            first_miss = Some(format!("{lang} {method} {cond}: {got:.3} vs published {want}"));
        }
    }
    Ok((worst, first_miss))
}

pub fn criterion_summary() -> Outcome {
    let start = std::time::Instant::now();
    let (worst, miss) = summary_deviations(&Pooled)?;
    if let Some(m) = miss {
        return Err(m);
    }
    let results = load_published_tables(
        &workspace_fixture("published/combined.tsv"),
        &workspace_fixture("published/selective.tsv"),
    )
    .map_err(|e| e.to_string())?;
    let summaries = build_language_summary(&results, &Pooled).map_err(|e| e.to_string())?;
    for (method, want) in [(Method::AttrVc, "-5.0%"), (Method::InterVs, "0.0%")] {
        let s = summaries
            .iter()
            .find(|s| s.language == "hin" && s.method == method && s.condition == Condition::Full)
            .ok_or("no Hindi full summary")?;
        let shown = format_delta(s.delta_percent);
        ensure!(shown == want, "Hindi {method} full renders {shown}, published {want}");
    }
    let elapsed = start.elapsed();
    ensure!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    Ok(format!("20 cells, max deviation {worst:.3} pp, {elapsed:.0?}"))
}

// ---------------------------------------------------------- selective

fn record(idx: u32, variant: Variant) -> TranslationRecord {
    TranslationRecord {
        idx,
        variant,
        hypothesis: format!("{variant}-{idx}"),
        prompt: PromptBundle::new(TemplateId::BaselineTranslate, "", ""),
        fallback: false,
    }
}

fn random_scores(rng: &mut ChaCha8Rng, n: usize, coarse: bool) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if coarse {
                // few distinct values so ties are common
                rng.random_range(0..8) as f64 / 8.0
            } else {
                rng.random::<f64>()
            }
        })
        .collect()
}

/// One random instance; `Err` describes the mismatch.
fn selective_instance(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let n = rng.random_range(1..=500usize);
    // sparse, shuffled idx space
    let mut ids: Vec<u32> = {
        let mut set = BTreeSet::new();
        while set.len() < n {
            set.insert(rng.random_range(0..5000u32));
        }
        set.into_iter().collect()
    };
    for i in (1..ids.len()).rev() {
        ids.swap(i, rng.random_range(0..=i));
    }
    let coarse = rng.random_bool(0.5);
    let base = random_scores(rng, n, coarse);
    let dominant = rng.random_bool(0.5);
    let vis: Vec<f64> = if dominant {
        base.iter().map(|b| b + rng.random::<f64>() * (1.0 - b).max(0.0)).collect()
    } else {
        random_scores(rng, n, coarse)
    };
    let k = *[5.0, 10.0, 12.5, 20.0, 30.0, 33.3, 50.0, 100.0, rng.random_range(0.1..100.0)]
        .choose(rng)
        .unwrap();

    let baseline_scores: Vec<SegmentScore> = ids
        .iter()
        .zip(&base)
        .map(|(&idx, &score)| SegmentScore {
            idx,
            variant: Variant::Baseline,
            score,
        })
        .collect();
    let base_by: HashMap<u32, f64> = ids.iter().copied().zip(base.iter().copied()).collect();
    let vis_by: HashMap<u32, f64> = ids.iter().copied().zip(vis.iter().copied()).collect();

    let plan = plan_selective(&baseline_scores, &ids, k).map_err(|e| e.to_string())?;
    let baseline_records: Vec<_> = ids.iter().map(|&i| record(i, Variant::Baseline)).collect();
    let visual_records: Vec<_> = ids.iter().map(|&i| record(i, Variant::AttrVc)).collect();
    let merged = apply_selective(&baseline_records, &visual_records, &plan).map_err(|e| e.to_string())?;
    let crate_scores: Vec<f64> = merged
        .iter()
        .map(|r| if r.variant == Variant::Baseline { base_by[&r.idx] } else { vis_by[&r.idx] })
        .collect();
    let crate_mean = subgrain::scoring::corpus_score_from_segments(&crate_scores).map_err(|e| e.to_string())?;

    let pairs: Vec<(u32, f64)> = ids.iter().copied().zip(base.iter().copied()).collect();
    let oracle_set = select_worst(&pairs, k);
    let crate_set: Vec<u32> = plan.replaced.iter().copied().collect();
    if crate_set != oracle_set {
        return Err(format!("n={n} k={k}: selection differs ({} vs {} ids)", crate_set.len(), oracle_set.len()));
    }
    let mut sum = 0.0;
    for &i in &ids {
        sum += if oracle_set.binary_search(&i).is_ok() { vis_by[&i] } else { base_by[&i] };
    }
    let oracle_mean = sum / n as f64;
    if crate_mean != oracle_mean {
        return Err(format!("n={n} k={k}: mean {crate_mean} vs oracle {oracle_mean}"));
    }
    let base_mean = base.iter().sum::<f64>() / n as f64;
    let replaced_dominates = oracle_set.iter().all(|i| vis_by[i] >= base_by[i]);
    if replaced_dominates && crate_mean < base_mean - 1e-12 {
        return Err(format!("n={n} k={k}: dominance violated ({crate_mean} < {base_mean})"));
    }
    Ok(())
}

pub fn selective_suite(instances: usize, seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..instances {
        selective_instance(&mut rng).map_err(|e| format!("instance {i}: {e}"))?;
    }
    Ok(format!("{instances} instances"))
}

pub fn criterion_selective() -> Outcome {
    let start = std::time::Instant::now();
    let summary = selective_suite(1000, 0x5e1ec7)?;
    let elapsed = start.elapsed();
    ensure!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    Ok(format!("{summary}, {elapsed:.0?}"))
}

// ------------------------------------------------------------ windows

fn random_times(rng: &mut ChaCha8Rng, count: usize, max: u64) -> Vec<u64> {
    let mut set = BTreeSet::new();
    while set.len() < count.min(max as usize + 1) {
        set.insert(rng.random_range(0..=max));
    }
    set.into_iter().collect()
}

fn timeline_from(times: &[u64], tag: &str) -> Timeline {
    Timeline::new(
        times
            .iter()
            .map(|&t| FrameDescription::new(t, format!("{tag} frame at {t} ms")))
            .collect(),
    )
    .expect("distinct timestamps")
}

fn layout(rng: &mut ChaCha8Rng, count: usize, duration: u64) -> Vec<SubtitleSegment> {
    let mut starts = random_times(rng, count, duration.saturating_sub(1).max(1));
    starts.sort();
    starts
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            // overlapping neighbours are allowed, which yields degenerate gaps
            let len = rng.random_range(0..8000);
            SubtitleSegment::new(i as u32 + 1, TimeSpan::new(s, s + len).unwrap(), format!("line {i}"))
        })
        .collect()
}

fn window_instance(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let duration = rng.random_range(1_000..4_000_000u64);
    // frames may run past the nominal duration
    let times = {
        let count = rng.random_range(0..400);
        random_times(rng, count, duration + 20_000)
    };
    let tl = timeline_from(&times, "a");
    let segs = {
        let count = rng.random_range(1..40);
        layout(rng, count, duration)
    };
    let half = if rng.random_bool(0.7) {
        DEFAULT_WINDOW_HALF_MS
    } else {
        rng.random_range(0..400_000)
    };
    for (pos, seg) in segs.iter().enumerate() {
        let center = seg.span.start_ms();
        let got: Vec<u64> = frames_in_window(&tl, center, half, duration).iter().map(|f| f.t_ms).collect();
        let want = window_scan(&times, center, half, duration);
        if got != want {
            return Err(format!("window c={center} h={half} d={duration}: {} vs {} frames", got.len(), want.len()));
        }
        let prev_end = if pos == 0 { 0 } else { segs[pos - 1].span.end_ms() };
        let got: Vec<u64> = frames_in_gap(&tl, GapSpan::new(prev_end, center)).iter().map(|f| f.t_ms).collect();
        let want = gap_scan(&times, prev_end, center);
        if got != want {
            return Err(format!("gap [{prev_end}, {center}): {} vs {} frames", got.len(), want.len()));
        }
    }
    Ok(())
}

/// Moves and rewrites every frame outside the clamped window of one segment and
/// checks the attribute prompt does not change.
fn locality_instance(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let duration = rng.random_range(10_000..2_000_000u64);
    let times = {
        let count = rng.random_range(1..300);
        random_times(rng, count, duration + 20_000)
    };
    let segs = {
        let count = rng.random_range(1..10);
        layout(rng, count, duration)
    };
    let pos = rng.random_range(0..segs.len());
    let center = segs[pos].span.start_ms();
    let half = DEFAULT_WINDOW_HALF_MS;
    let lo = center.saturating_sub(half);
    let hi = (center + half).min(duration);

    let original = timeline_from(&times, "a");
    let mut taken = BTreeSet::new();
    let mut perturbed = Vec::new();
    for f in original.frames() {
        if f.t_ms >= lo && f.t_ms <= hi {
            taken.insert(f.t_ms);
            perturbed.push(f.clone());
        }
    }
    let outside = original.frames().len() - perturbed.len();
    for _ in 0..outside + rng.random_range(0..5) {
        // a fresh timestamp strictly outside [lo, hi]
        let t = loop {
            let t = if lo > 0 && rng.random_bool(0.5) {
                rng.random_range(0..lo)
            } else {
                rng.random_range(hi + 1..hi + 500_000)
            };
            if taken.insert(t) {
                break t;
            }
        };
        perturbed.push(FrameDescription::new(t, format!("drifted {}", rng.random::<u32>())));
    }
    let perturbed = Timeline::new(perturbed).map_err(|e| e.to_string())?;

    let strategy = AttrWindow { half_width_ms: half };
    let render = |tl: &Timeline| {
        let input = ContextInput {
            timeline: tl,
            segments: &segs,
            position: pos,
            target_language: "ben",
            duration_ms: duration,
        };
        strategy.plan(&input).prompt.map(|p| p.render_raw())
    };
    if render(&original) != render(&perturbed) {
        return Err(format!("attr prompt for c={center} changed after perturbing {outside} outside frames"));
    }
    Ok(())
}

pub fn window_suite(instances: usize, seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..instances {
        window_instance(&mut rng).map_err(|e| format!("timeline {i}: {e}"))?;
        locality_instance(&mut rng).map_err(|e| format!("locality {i}: {e}"))?;
    }
    Ok(format!("{instances} timelines, {instances} locality checks"))
}

pub fn criterion_windows() -> Outcome {
    window_suite(1000, 0x3d0_0d)
}

// ------------------------------------------------------------ metrics

pub const ALPHABET: [&str; 4] = ["a", "b", "ab", "ba"];

/// Every sentence of at most `max_len` tokens over the alphabet.
pub fn all_sentences(max_len: usize) -> Vec<String> {
    let mut out = vec![Vec::<&str>::new()];
    let mut frontier = vec![Vec::<&str>::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for w in ALPHABET {
                let mut t = s.clone();
                t.push(w);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out.into_iter().map(|s| s.join(" ")).collect()
}

fn compare_corpus(hyps: &[String], refs: &[String]) -> Result<(), String> {
    let h: Vec<&str> = hyps.iter().map(String::as_str).collect();
    let r: Vec<&str> = refs.iter().map(String::as_str).collect();
    let got = corpus_bleu(hyps, refs).map_err(|e| e.to_string())?;
    let want = bleu(&h, &r);
    if (got - want).abs() > 1e-6 {
        return Err(format!("BLEU {got} vs oracle {want} for {h:?} / {r:?}"));
    }
    let got = corpus_chrfpp(hyps, refs).map_err(|e| e.to_string())?;
    let want = chrfpp(&h, &r);
    if (got - want).abs() > 1e-6 {
        return Err(format!("chrF++ {got} vs oracle {want} for {h:?} / {r:?}"));
    }
    Ok(())
}

/// Hand-computed values; see the comments for the arithmetic.
pub fn metric_hand_cases() -> Result<usize, String> {
    let s = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let close = |a: f64, b: f64| (a - b).abs() < 1e-4;
    let mut n = 0;

    // chrF++ abc / abd: char orders 1-3 match 2/3, 1/2, 0/1 (orders 4-6 absent
    // on both sides); the single word unigram misses, word bigrams absent.
    // P = R = (2/3 + 1/2 + 0 + 0) / 4 = 7/24, F = 29.1667
    let v = chrfpp_crate(&s(&["abc"]), &s(&["abd"]))?;
    ensure!(close(v, 700.0 / 24.0), "chrF++ abc/abd = {v}");
    n += 1;

    // BLEU: no bigram of "the the the" occurs in the reference; unigram clip 1/3,
    // bigrams 0/2 -> 100/(2*2), trigram 0/1 -> 100/(4*1), 4-grams absent -> 0
    let v = corpus_bleu(&s(&["the the the"]), &s(&["the cat sat"])).map_err(|e| e.to_string())?;
    ensure!(v == 0.0, "BLEU with no hypothesis 4-grams = {v}");
    n += 1;

    // BLEU "the the the the" / "the cat sat on": p1 = 25, p2 = 100/(2*3),
    // p3 = 100/(4*2), p4 = 100/(8*1); BLEU = (25 * 16.667 * 12.5 * 12.5)^(1/4)
    let v = corpus_bleu(&s(&["the the the the"]), &s(&["the cat sat on"])).map_err(|e| e.to_string())?;
    let want = (25.0f64 * (100.0 / 6.0) * 12.5 * 12.5).powf(0.25);
    ensure!(close(v, want), "BLEU repeated-the = {v}, want {want}");
    n += 1;

    // fully disjoint 4 tokens: each order zero-match, p_n = 100/(2^n (5-n))
    // -> 12.5, 8.333, 6.25, 6.25
    let v = corpus_bleu(&s(&["w x y z"]), &s(&["p q r s"])).map_err(|e| e.to_string())?;
    let want = (12.5f64 * (100.0 / 12.0) * 6.25 * 6.25).powf(0.25);
    ensure!(v > 0.0 && close(v, want), "BLEU disjoint = {v}, want {want}");
    n += 1;

    // brevity: hypothesis "a b c d" matches the first 4 of 8 reference tokens,
    // all precisions 100, BP = exp(1 - 8/4)
    let v = corpus_bleu(&s(&["a b c d"]), &s(&["a b c d e f g h"])).map_err(|e| e.to_string())?;
    ensure!(close(v, 100.0 * (-1.0f64).exp()), "BLEU brevity = {v}");
    n += 1;

    // intl tokenization splits punctuation: "Hello, world!" -> Hello , world !
    let v = corpus_bleu(&s(&["Hello, world!"]), &s(&["Hello , world !"])).map_err(|e| e.to_string())?;
    ensure!(close(v, 100.0), "BLEU punctuation split = {v}");
    n += 1;

    // identities
    for corpus in [s(&["a b ab ba"]), s(&["the cat sat on the mat", "a dog"]), s(&["বাংলা ভাষা আমার ভালো লাগে"])] {
        let b = corpus_bleu(&corpus, &corpus).map_err(|e| e.to_string())?;
        let c = chrfpp_crate(&corpus, &corpus)?;
        ensure!(close(b, 100.0) && close(c, 100.0), "identity {corpus:?}: BLEU {b}, chrF++ {c}");
        n += 1;
    }

    // empty hypotheses score zero on both metrics
    for refs in [s(&["a b c d"]), s(&["x", "y z"])] {
        let hyps = vec![String::new(); refs.len()];
        let b = corpus_bleu(&hyps, &refs).map_err(|e| e.to_string())?;
        let c = chrfpp_crate(&hyps, &refs)?;
        ensure!(b == 0.0 && c == 0.0, "empty hypotheses: BLEU {b}, chrF++ {c}");
        n += 1;
    }

    // an empty corpus is an error, not a score
    ensure!(
        matches!(corpus_bleu(&[], &[]), Err(Error::EmptyCorpus(_))),
        "empty corpus must be rejected"
    );
    n += 1;
    Ok(n)
}

fn chrfpp_crate(h: &[String], r: &[String]) -> Result<f64, String> {
    corpus_chrfpp(h, r).map_err(|e| e.to_string())
}

/// Exhaustive families plus seeded random corpora; returns the number of corpora.
pub fn metric_suite(random_corpora: usize, seed: u64) -> Result<usize, String> {
    let mut count = 0;
    // every single-sentence corpus up to 3 tokens per side
    let short = all_sentences(3);
    for h in &short {
        for r in &short {
            compare_corpus(std::slice::from_ref(h), std::slice::from_ref(r))?;
            count += 1;
        }
    }
    // every two-sentence corpus up to 1 token per sentence
    let tiny = all_sentences(1);
    for h1 in &tiny {
        for h2 in &tiny {
            for r1 in &tiny {
                for r2 in &tiny {
                    compare_corpus(&[h1.clone(), h2.clone()], &[r1.clone(), r2.clone()])?;
                    count += 1;
                }
            }
        }
    }
    // random corpora of up to 5 sentences with up to 8 tokens
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sentence = |rng: &mut ChaCha8Rng| {
        let len = rng.random_range(0..=8);
        (0..len).map(|_| *ALPHABET.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
    };
    for _ in 0..random_corpora {
        let n = rng.random_range(1..=5);
        let hyps: Vec<String> = (0..n).map(|_| sentence(&mut rng)).collect();
        let refs: Vec<String> = (0..n).map(|_| sentence(&mut rng)).collect();
        compare_corpus(&hyps, &refs)?;
        count += 1;
    }
    Ok(count)
}

pub fn criterion_metrics() -> Outcome {
    let hand = metric_hand_cases()?;
    let corpora = metric_suite(3000, 0xb1e0)?;
    Ok(format!("{corpora} corpora vs oracle, {hand} hand cases"))
}

// ------------------------------------------------------------ prompts

/// Frames whose cleaned, newline-joined text is exactly `len` chars long, with
/// multibyte letters so char and byte offsets differ. Returns the frames and
/// that aggregate.
fn frames_of_length(len: usize, start_ms: u64) -> (Vec<FrameDescription>, String) {
    // ten chars each: two for the conjunct, seven digits, one accented letter
    let token = |i: usize| format!("দৃ{i:07}é");
    let mut texts = Vec::new();
    let mut remaining = len;
    loop {
        let sep = usize::from(!texts.is_empty());
        if remaining - sep <= 21 {
            texts.push("q".repeat(remaining - sep));
            break;
        }
        texts.push(token(texts.len()));
        remaining -= 10 + sep;
    }
    let aggregate = texts.join("\n");
    let frames = texts
        .into_iter()
        .enumerate()
        .map(|(i, t)| FrameDescription::new(start_ms + 1000 * i as u64, t))
        .collect();
    (frames, aggregate)
}

pub fn truncation_checks() -> Result<usize, String> {
    let mut checks = 0;
    for (limit, is_attr) in [(ATTR_SAMPLE_CHARS, true), (GAP_BLOB_CHARS, false)] {
        for len in [limit - 1, limit, limit + 1, limit + 737] {
            let (frames, aggregate) = frames_of_length(len, 1000);
            for f in &frames {
                ensure!(f.clean_text == f.raw_text, "cleaning altered {:?}", f.raw_text);
            }
            ensure!(aggregate.chars().count() == len, "aggregate length {} != {len}", aggregate.chars().count());
            let last_t = frames.last().unwrap().t_ms;
            let tl = Timeline::new(frames).map_err(|e| e.to_string())?;
            let expected_slice: String = aggregate.chars().take(limit).collect();
            let prompt = if is_attr {
                let seg = SubtitleSegment::new(1, TimeSpan::new(1000, 2000).unwrap(), "hi");
                let segs = [seg];
                let input = ContextInput {
                    timeline: &tl,
                    segments: &segs,
                    position: 0,
                    target_language: "ben",
                    duration_ms: last_t + 1000,
                };
                let plan = AttrWindow {
                    half_width_ms: last_t + 1000,
                }
                .plan(&input);
                ensure!(plan.prompt_chars == len.min(limit), "attr prompt_chars {}", plan.prompt_chars);
                plan.prompt.ok_or("attr prompt missing")?
            } else {
                let cur = SubtitleSegment::new(2, TimeSpan::new(last_t + 1, last_t + 2).unwrap(), "hi");
                let prev = SubtitleSegment::new(1, TimeSpan::new(0, 1000).unwrap(), "yo");
                let segs = [prev, cur];
                let input = ContextInput {
                    timeline: &tl,
                    segments: &segs,
                    position: 1,
                    target_language: "ben",
                    duration_ms: last_t + 1000,
                };
                let plan = GapSummary.plan(&input);
                ensure!(plan.prompt_chars == len.min(limit), "gap prompt_chars {}", plan.prompt_chars);
                plan.prompt.ok_or("gap prompt missing")?
            };
            let want_user = format!("Visual Data: {expected_slice}");
            ensure!(
                prompt.user_text == want_user,
                "{} len {len}: user text has {} chars, want {}",
                if is_attr { "attr" } else { "gap" },
                prompt.user_text.chars().count(),
                want_user.chars().count()
            );
            // the template functions slice the same way when called directly
            let direct = if is_attr {
                attr_summarize("Bengali", &aggregate)
            } else {
                gap_summarize(1, last_t / 1000, &aggregate)
            };
            ensure!(direct.user_text == want_user, "direct template slice differs at len {len}");
            checks += 1;
        }
    }
    Ok(checks)
}

pub fn criterion_prompts() -> Outcome {
    golden::check_goldens()?;
    let n = truncation_checks()?;
    Ok(format!("4 golden files byte-identical, {n} truncation boundaries"))
}

// ------------------------------------------------------------- parser

#[derive(Debug, Clone, PartialEq)]
pub struct GenCue {
    pub index: u32,
    pub start: u64,
    pub end: u64,
    pub lines: Vec<String>,
}

fn stamp(ms: u64) -> String {
    format!(
        "{:02}:{:02}:{:02},{:03}",
        ms / 3_600_000,
        ms / 60_000 % 60,
        ms / 1000 % 60,
        ms % 1000
    )
}

/// A random SubRip file and the cues it encodes.
pub fn generate_srt(rng: &mut ChaCha8Rng) -> (Vec<u8>, Vec<GenCue>) {
    let crlf = rng.random_bool(0.5);
    let bom = rng.random_bool(0.3);
    let vocabulary = ["hello", "world", "¿qué?", "<i>there</i>", "দিদি", "go!", "—", "12", "it's"];
    let mut cues = Vec::new();
    let mut index = 0u32;
    let mut t = 0u64;
    for _ in 0..rng.random_range(1..30) {
        index += if rng.random_bool(0.2) { rng.random_range(2..50) } else { 1 };
        t += rng.random_range(0..5000);
        let start = t;
        let end = start + rng.random_range(0..6000);
        t = end.saturating_sub(rng.random_range(0..1000));
        let lines = (0..rng.random_range(1..=3))
            .map(|_| {
                (0..rng.random_range(1..6))
                    .map(|_| *vocabulary.choose(rng).unwrap())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        cues.push(GenCue { index, start, end, lines });
    }
    let nl = if crlf { "\r\n" } else { "\n" };
    let mut out = String::new();
    if bom {
        out.push('\u{feff}');
    }
    for (i, c) in cues.iter().enumerate() {
        out.push_str(&format!("{}{nl}{} --> {}{nl}", c.index, stamp(c.start), stamp(c.end)));
        for l in &c.lines {
            out.push_str(l);
            out.push_str(nl);
        }
        // last cue: blank line optional
        if i + 1 < cues.len() || rng.random_bool(0.5) {
            for _ in 0..rng.random_range(1..=2) {
                out.push_str(nl);
            }
        }
    }
    (out.into_bytes(), cues)
}

fn gen_matches(segs: &[SubtitleSegment], cues: &[GenCue]) -> Result<(), String> {
    ensure!(segs.len() == cues.len(), "{} cues parsed, {} generated", segs.len(), cues.len());
    for (s, c) in segs.iter().zip(cues) {
        ensure!(
            s.index == c.index && s.span.start_ms() == c.start && s.span.end_ms() == c.end && s.raw_text == c.lines.join("\n"),
            "cue {} parsed as {s:?}",
            c.index
        );
    }
    Ok(())
}

/// Replaces the timing line of one cue with garbage; returns the file and the
/// 1-based line number of the bad line.
fn corrupt(rng: &mut ChaCha8Rng, cues: &[GenCue]) -> (String, usize) {
    let bad_at = rng.random_range(0..cues.len());
    let garbage = ["00:00:01,000 -> 00:00:02,000", "00:00:01.000 --> 00:00:02,000", "1 --> 2", "00:61:00,000 --> 00:62:00,000", ""];
    let mut out = String::new();
    let mut line = 0;
    let mut bad_line = 0;
    for (i, c) in cues.iter().enumerate() {
        out.push_str(&format!("{}\n", c.index));
        line += 1;
        line += 1;
        if i == bad_at {
            bad_line = line;
            let g = garbage.choose(rng).unwrap();
            // an empty timing line is still the line after the index
            out.push_str(&format!("{g}\n"));
        } else {
            out.push_str(&format!("{} --> {}\n", stamp(c.start), stamp(c.end)));
        }
        for l in &c.lines {
            out.push_str(l);
            out.push('\n');
            line += 1;
        }
        out.push('\n');
        line += 1;
    }
    (out, bad_line)
}

pub fn srt_suite(files: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for f in 0..files {
        let (bytes, cues) = generate_srt(&mut rng);
        let doc = parse_srt(&bytes).map_err(|e| format!("file {f}: {e}"))?;
        gen_matches(&doc.segments, &cues).map_err(|e| format!("file {f}: {e}"))?;
        let again = parse_srt(serialize_srt(&doc.segments).as_bytes()).map_err(|e| format!("file {f} reparse: {e}"))?;
        ensure!(again.segments == doc.segments, "file {f}: round trip changed the cues");

        let (bad, line) = corrupt(&mut rng, &cues);
        match parse_srt(bad.as_bytes()) {
            Err(Error::Parse { line: got, .. }) if got == line => {}
            other => return Err(format!("file {f}: malformed timing on line {line} gave {other:?}")),
        }
    }
    Ok(())
}

/// Normalization done by hand for the fixture: tags dropped, lines joined with
/// a space, the ellipsis character spelled out, whitespace collapsed.
pub fn hand_normalize(raw: &str) -> String {
    let mut no_tags = String::new();
    let mut in_tag = false;
    for ch in raw.chars() {
        match ch {
            '<' => in_tag = true,
            '>' if in_tag => in_tag = false,
            _ if !in_tag => no_tags.push(ch),
            _ => {}
        }
    }
    no_tags.replace('\u{2026}', "...").split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn fixture_stats_check() -> Outcome {
    let read = |name: &str| fs::read(workspace_fixture(&format!("synthetic/{name}"))).unwrap();
    let src = parse_srt(&read("source.en.srt")).map_err(|e| e.to_string())?.segments;
    let reference = parse_srt(&read("reference.ben.srt")).map_err(|e| e.to_string())?.segments;
    let src_n: Vec<_> = src.iter().map(normalize).collect();
    let ref_n: Vec<_> = reference.iter().map(normalize).collect();
    let (mut corpus, _) = pair("synthetic", "ben", &src_n, &ref_n).map_err(|e| e.to_string())?;
    corpus.retain_filtered(FilterConfig::default()).map_err(|e| e.to_string())?;
    let stats = corpus.stats();

    let hand: Vec<String> = src.iter().map(|s| hand_normalize(&s.raw_text)).collect();
    let kept: Vec<&str> = hand
        .iter()
        .map(String::as_str)
        .filter(|s| (1..=40).contains(&s.split(' ').filter(|w| !w.is_empty()).count()))
        .collect();
    let (n, words, chars) = text_stats(&kept);
    ensure!(stats.pairs == n, "pairs {} vs recount {n}", stats.pairs);
    ensure!((stats.avg_words - words).abs() < 1e-9, "avg words {} vs recount {words}", stats.avg_words);
    ensure!((stats.avg_chars - chars).abs() < 1e-9, "avg chars {} vs recount {chars}", stats.avg_chars);
    Ok(format!("pairs={n} avg_words={words:.2} avg_chars={chars:.2}"))
}

pub fn criterion_parser() -> Outcome {
    srt_suite(100, 0x5127)?;
    let stats = fixture_stats_check()?;
    Ok(format!("100 generated files round-tripped, malformed lines located, {stats}"))
}
