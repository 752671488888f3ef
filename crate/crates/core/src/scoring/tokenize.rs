use std::sync::OnceLock;

use regex::Regex;

struct IntlRules {
    punct_after_non_digit: Regex,
    punct_before_non_digit: Regex,
    symbol: Regex,
}

fn rules() -> &'static IntlRules {
    static RULES: OnceLock<IntlRules> = OnceLock::new();
    RULES.get_or_init(|| IntlRules {
        punct_after_non_digit: Regex::new(r"(\P{N})(\p{P})").expect("regex"),
        punct_before_non_digit: Regex::new(r"(\p{P})(\P{N})").expect("regex"),
        symbol: Regex::new(r"(\p{S})").expect("regex"),
    })
}

/// International tokenization: Unicode punctuation is split off unless it sits
/// between digits, every symbol becomes its own token. Case is preserved.
pub fn tokenize_intl(line: &str) -> Vec<String> {
    let r = rules();
    let s = r.punct_after_non_digit.replace_all(line, "$1 $2 ");
    let s = r.punct_before_non_digit.replace_all(&s, " $1 $2");
    let s = r.symbol.replace_all(&s, " $1 ");
    s.split_whitespace().map(str::to_string).collect()
}
