use std::sync::OnceLock;

use regex::Regex;

use super::SubtitleSegment;

fn brace_tags() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{[^}]*\}").expect("brace regex"))
}

fn angle_tags() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"<[^>]*>").expect("angle regex"))
}

fn map_punctuation(c: char, out: &mut String) {
    match c {
        '\u{2018}' | '\u{2019}' | '\u{201A}' | '\u{201B}' | '\u{2032}' => out.push('\''),
        '\u{201C}' | '\u{201D}' | '\u{201E}' | '\u{201F}' | '\u{2033}' | '\u{00AB}'
        | '\u{00BB}' => out.push('"'),
        '\u{2010}' | '\u{2011}' | '\u{2012}' | '\u{2013}' | '\u{2014}' | '\u{2015}'
        | '\u{2212}' => out.push('-'),
        '\u{2026}' => out.push_str("..."),
        _ => out.push(c),
    }
}

/// Fixed-table cleanup: drop `{...}` and `<...>` markup, map typographic
/// quotes, dashes and ellipsis to ASCII, collapse whitespace runs to one space
/// and trim. Idempotent.
pub fn normalize_text(input: &str) -> String {
    let without_braces = brace_tags().replace_all(input, "");
    let without_tags = angle_tags().replace_all(&without_braces, "");

    let mut mapped = String::with_capacity(without_tags.len());
    for c in without_tags.chars() {
        map_punctuation(c, &mut mapped);
    }

    let mut out = String::with_capacity(mapped.len());
    for word in mapped.split(char::is_whitespace).filter(|w| !w.is_empty()) {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Normalizes `seg.text`. A segment left with empty text is to be dropped by
/// [`super::filter`].
pub fn normalize(seg: &SubtitleSegment) -> SubtitleSegment {
    SubtitleSegment {
        text: normalize_text(&seg.text),
        ..seg.clone()
    }
}
