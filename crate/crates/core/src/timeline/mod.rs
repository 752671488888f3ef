//! Sampled frame-description timeline: loading and cleaning, window and gap
//! queries, frame-in-span accounting and synthetic drift.

mod clean;
mod drift;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::backends::Backend;
use crate::error::{Error, Result};
use crate::timedtext::{SubtitleSegment, TimeSpan};

pub use clean::{clean_description, collapse_repeats};
pub use drift::{apply_drift, DriftModel};

/// Default half-width of the attribute window: 2.5 minutes either side.
pub const DEFAULT_WINDOW_HALF_MS: u64 = 150_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameDescription {
    pub t_ms: u64,
    pub raw_text: String,
    pub clean_text: String,
}

impl FrameDescription {
    pub fn new(t_ms: u64, raw_text: impl Into<String>) -> Self {
        let raw_text = raw_text.into();
        let clean_text = clean_description(&raw_text);
        Self {
            t_ms,
            raw_text,
            clean_text,
        }
    }
}

/// Frames sorted by strictly increasing `t_ms`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Timeline {
    frames: Vec<FrameDescription>,
}

#[derive(Debug, Deserialize, Serialize)]
struct FrameLine {
    t_ms: u64,
    text: String,
}

impl Timeline {
    /// Sorts the frames; duplicate timestamps are rejected.
    pub fn new(mut frames: Vec<FrameDescription>) -> Result<Self> {
        frames.sort_by_key(|f| f.t_ms);
        if let Some(w) = frames.windows(2).find(|w| w[0].t_ms == w[1].t_ms) {
            return Err(Error::Invalid(format!(
                "duplicate frame timestamp t_ms={}",
                w[0].t_ms
            )));
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[FrameDescription] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Writes `{"t_ms", "text"}` lines carrying the cleaned text.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for f in &self.frames {
            let line = FrameLine {
                t_ms: f.t_ms,
                text: f.clean_text.clone(),
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn frame_file_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^frame_(\d+)\.jpg$").expect("frame regex"))
}

/// Loads a frame-description timeline from a JSON Lines file, or from a
/// directory of `frame_<seconds>.jpg` images described by `describer`.
pub fn load_frames(path: &Path, describer: Option<&dyn Backend>) -> Result<Timeline> {
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.is_dir() {
        let describer = describer.ok_or_else(|| {
            Error::Config(format!(
                "{} is a frame directory but no describe backend is configured",
                path.display()
            ))
        })?;
        return load_frame_dir(path, describer);
    }

    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut frames = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: FrameLine = serde_json::from_str(&line)
            .map_err(|e| Error::format(path, format!("line {}: {e}", n + 1)))?;
        frames.push(FrameDescription::new(parsed.t_ms, parsed.text));
    }
    Timeline::new(frames).map_err(|e| Error::format(path, e.to_string()))
}

fn load_frame_dir(dir: &Path, describer: &dyn Backend) -> Result<Timeline> {
    let mut images: BTreeMap<u64, std::path::PathBuf> = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let Some(caps) = name.to_str().and_then(|n| frame_file_regex().captures(n)) else {
            continue;
        };
        let secs: u64 = caps[1]
            .parse()
            .map_err(|_| Error::format(entry.path(), "frame number out of range"))?;
        if images.insert(secs * 1000, entry.path()).is_some() {
            return Err(Error::format(dir, format!("duplicate frame for second {secs}")));
        }
    }
    let mut frames = Vec::with_capacity(images.len());
    for (t_ms, image) in images {
        let text = describer.describe_frame(&image)?;
        frames.push(FrameDescription::new(t_ms, text));
    }
    Timeline::new(frames)
}

/// Frames with `t_ms` in the closed window `[center - half, center + half]`
/// clamped to `[0, duration]`. Always a contiguous slice of the timeline.
pub fn frames_in_window(
    timeline: &Timeline,
    center_ms: u64,
    half_width_ms: u64,
    duration_ms: u64,
) -> &[FrameDescription] {
    let (lo, hi) = window_bounds(center_ms, half_width_ms, duration_ms);
    if lo > hi {
        return &[];
    }
    let frames = timeline.frames();
    let start = frames.partition_point(|f| f.t_ms < lo);
    let end = frames.partition_point(|f| f.t_ms <= hi);
    &frames[start..end.max(start)]
}

/// Clamped window bounds; `lo > hi` when the window lies beyond the duration.
pub fn window_bounds(center_ms: u64, half_width_ms: u64, duration_ms: u64) -> (u64, u64) {
    let lo = center_ms.saturating_sub(half_width_ms);
    let hi = center_ms.saturating_add(half_width_ms).min(duration_ms);
    (lo, hi)
}

/// The interval between the end of the previous subtitle and the start of the
/// current one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapSpan {
    pub prev_end_ms: u64,
    pub cur_start_ms: u64,
    pub degenerate: bool,
}

impl GapSpan {
    pub fn new(prev_end_ms: u64, cur_start_ms: u64) -> Self {
        Self {
            prev_end_ms,
            cur_start_ms,
            degenerate: prev_end_ms >= cur_start_ms,
        }
    }

    /// Gap before `cur`; the first segment's gap starts at zero.
    pub fn between(prev: Option<&SubtitleSegment>, cur: &SubtitleSegment) -> Self {
        let prev_end = prev.map_or(0, |p| p.span.end_ms());
        Self::new(prev_end, cur.span.start_ms())
    }
}

/// Frames with `prev_end_ms <= t_ms < cur_start_ms`.
pub fn frames_in_gap(timeline: &Timeline, gap: GapSpan) -> &[FrameDescription] {
    if gap.degenerate {
        return &[];
    }
    let frames = timeline.frames();
    let start = frames.partition_point(|f| f.t_ms < gap.prev_end_ms);
    let end = frames.partition_point(|f| f.t_ms < gap.cur_start_ms);
    &frames[start..end]
}

/// Number of sample instants `k / fps` seconds (k = 0, 1, ...) inside the union
/// of the closed spans.
pub fn count_frames_in_spans(fps: f64, spans: &[TimeSpan]) -> Result<u64> {
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::Config(format!("fps must be positive, got {fps}")));
    }
    let mut sorted: Vec<(u64, u64)> = spans.iter().map(|s| (s.start_ms(), s.end_ms())).collect();
    sorted.sort_unstable();

    let mut merged: Vec<(u64, u64)> = Vec::with_capacity(sorted.len());
    for (s, e) in sorted {
        match merged.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }

    let instant = |k: u64| k as f64 * 1000.0 / fps;
    let mut total = 0u64;
    for (s, e) in merged {
        let mut first = (s as f64 * fps / 1000.0).ceil() as u64;
        while first > 0 && instant(first - 1) >= s as f64 {
            first -= 1;
        }
        while instant(first) < s as f64 {
            first += 1;
        }
        let mut last = (e as f64 * fps / 1000.0).floor() as u64;
        while instant(last + 1) <= e as f64 {
            last += 1;
        }
        while last > 0 && instant(last) > e as f64 {
            last -= 1;
        }
        if instant(last) <= e as f64 && last >= first {
            total += last - first + 1;
        }
    }
    Ok(total)
}
