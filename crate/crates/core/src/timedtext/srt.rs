use std::sync::OnceLock;

use regex::Regex;

use super::{SubtitleSegment, TimeSpan};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SrtWarning {
    /// An index that does not exceed its predecessor. Kept as-is.
    NonMonotonicIndex { line: usize, previous: u32, index: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SrtDocument {
    pub segments: Vec<SubtitleSegment>,
    pub warnings: Vec<SrtWarning>,
}

fn timing_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^(\d{2}):(\d{2}):(\d{2}),(\d{3}) --> (\d{2}):(\d{2}):(\d{2}),(\d{3})\s*$")
            .expect("timing regex")
    })
}

fn to_ms(h: &str, m: &str, s: &str, ms: &str) -> Option<u64> {
    let (h, m, s, ms): (u64, u64, u64, u64) =
        (h.parse().ok()?, m.parse().ok()?, s.parse().ok()?, ms.parse().ok()?);
    if m > 59 || s > 59 {
        return None;
    }
    Some(((h * 60 + m) * 60 + s) * 1000 + ms)
}

/// `HH:MM:SS,mmm`.
pub fn format_timestamp(ms: u64) -> String {
    let (h, rem) = (ms / 3_600_000, ms % 3_600_000);
    let (m, rem) = (rem / 60_000, rem % 60_000);
    let (s, ms) = (rem / 1000, rem % 1000);
    format!("{h:02}:{m:02}:{s:02},{ms:03}")
}

enum State {
    Index,
    Timing { index: u32 },
    Text { index: u32, span: TimeSpan, lines: Vec<String> },
}

/// Parses a SubRip byte stream. Line numbers in errors are 1-based.
pub fn parse_srt(raw: &[u8]) -> Result<SrtDocument> {
    let text = std::str::from_utf8(raw).map_err(|e| {
        let line = raw[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        Error::Parse {
            line,
            message: "input is not valid UTF-8".into(),
        }
    })?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);

    let mut doc = SrtDocument::default();
    let mut state = State::Index;
    let mut previous: Option<u32> = None;

    let finish = |doc: &mut SrtDocument, index: u32, span: TimeSpan, lines: Vec<String>| {
        doc.segments
            .push(SubtitleSegment::new(index, span, lines.join("\n")));
    };

    for (n, line) in text.split('\n').enumerate() {
        let lineno = n + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        state = match state {
            State::Index => {
                if line.trim().is_empty() {
                    State::Index
                } else {
                    let index: u32 = line.trim().parse().map_err(|_| Error::Parse {
                        line: lineno,
                        message: format!("expected subtitle index, found {line:?}"),
                    })?;
                    if let Some(prev) = previous {
                        if index <= prev {
                            doc.warnings.push(SrtWarning::NonMonotonicIndex {
                                line: lineno,
                                previous: prev,
                                index,
                            });
                        }
                    }
                    previous = Some(index);
                    State::Timing { index }
                }
            }
            State::Timing { index } => {
                let caps = timing_regex().captures(line).ok_or_else(|| Error::Parse {
                    line: lineno,
                    message: format!("malformed timing line {line:?}"),
                })?;
                let bad = || Error::Parse {
                    line: lineno,
                    message: format!("timestamp out of range in {line:?}"),
                };
                let start = to_ms(&caps[1], &caps[2], &caps[3], &caps[4]).ok_or_else(bad)?;
                let end = to_ms(&caps[5], &caps[6], &caps[7], &caps[8]).ok_or_else(bad)?;
                if end < start {
                    return Err(Error::InvalidSpan {
                        line: lineno,
                        start_ms: start,
                        end_ms: end,
                    });
                }
                State::Text {
                    index,
                    span: TimeSpan::new(start, end)?,
                    lines: Vec::new(),
                }
            }
            State::Text {
                index,
                span,
                mut lines,
            } => {
                if line.trim().is_empty() {
                    finish(&mut doc, index, span, lines);
                    State::Index
                } else {
                    lines.push(line.to_string());
                    State::Text { index, span, lines }
                }
            }
        };
    }

    match state {
        State::Index => {}
        State::Timing { .. } => {
            let line = text.split('\n').count();
            return Err(Error::Parse {
                line,
                message: "unexpected end of input: missing timing line".into(),
            });
        }
        State::Text { index, span, lines } => finish(&mut doc, index, span, lines),
    }
    Ok(doc)
}

/// Canonical SubRip rendering: LF line endings, no byte-order mark, raw text
/// verbatim, one blank line after every cue.
pub fn serialize_srt(segments: &[SubtitleSegment]) -> String {
    let mut out = String::new();
    for seg in segments {
        out.push_str(&seg.index.to_string());
        out.push('\n');
        out.push_str(&seg.span.to_string());
        out.push('\n');
        if !seg.raw_text.is_empty() {
            out.push_str(&seg.raw_text);
            out.push('\n');
        }
        out.push('\n');
    }
    out
}
