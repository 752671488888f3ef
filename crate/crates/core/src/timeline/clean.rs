use crate::timedtext::normalize_text;

const MAX_REPEAT_NGRAM: usize = 4;

/// Collapses immediately repeated word n-grams (n <= 4) until none remain:
/// `the man the man walks` becomes `the man walks`.
pub fn collapse_repeats(text: &str) -> String {
    let mut tokens: Vec<&str> = text.split_whitespace().collect();
    loop {
        let mut changed = false;
        for n in 1..=MAX_REPEAT_NGRAM {
            let mut i = 0;
            while i + 2 * n <= tokens.len() {
                if tokens[i..i + n] == tokens[i + n..i + 2 * n] {
                    tokens.drain(i + n..i + 2 * n);
                    changed = true;
                } else {
                    i += 1;
                }
            }
        }
        if !changed {
            break;
        }
    }
    tokens.join(" ")
}

/// Punctuation normalization followed by repeated-phrase collapsing.
pub fn clean_description(raw: &str) -> String {
    collapse_repeats(&normalize_text(raw))
}
