//! The `13a` tokenizer: the mteval-v13a scheme as implemented by the
//! reference scorer, reproduced step by step.

use std::sync::OnceLock;

use regex::Regex;

/// Whitespace as understood by Python's `str.split()` / `str.isspace()`:
/// Unicode `White_Space` plus the four ASCII information separators.
pub fn is_py_space(c: char) -> bool {
    c.is_whitespace() || ('\u{1c}'..='\u{1f}').contains(&c)
}

/// `str.split()` with no argument.
pub fn py_split(s: &str) -> impl Iterator<Item = &str> {
    s.split(is_py_space).filter(|w| !w.is_empty())
}

/// `str.rstrip()` with no argument.
pub fn py_rstrip(s: &str) -> &str {
    s.trim_end_matches(is_py_space)
}

struct Rules {
    symbols: Regex,
    period_comma_after: Regex,
    period_comma_before: Regex,
    digit_dash: Regex,
}

fn rules() -> &'static Rules {
    static RULES: OnceLock<Rules> = OnceLock::new();
    RULES.get_or_init(|| Rules {
        symbols: Regex::new(r"([{-~\[-` -&(-+:-@/])").unwrap(),
        period_comma_after: Regex::new(r"([^0-9])([.,])").unwrap(),
        period_comma_before: Regex::new(r"([.,])([^0-9])").unwrap(),
        digit_dash: Regex::new(r"([0-9])(-)").unwrap(),
    })
}

/// Tokenized text as a single space-joined string.
pub fn tokenize_13a_string(text: &str) -> String {
    let mut line = text.replace("<skipped>", "").replace("-\n", "").replace('\n', " ");
    if line.contains('&') {
        line = line
            .replace("&quot;", "\"")
            .replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">");
    }
    let line = format!(" {line} ");
    let r = rules();
    let line = r.symbols.replace_all(&line, " ${1} ");
    let line = r.period_comma_after.replace_all(&line, "${1} ${2} ");
    let line = r.period_comma_before.replace_all(&line, " ${1} ${2}");
    let line = r.digit_dash.replace_all(&line, "${1} ${2} ");
    py_split(&line).collect::<Vec<_>>().join(" ")
}

pub fn tokenize_13a(text: &str) -> Vec<String> {
    py_split(&tokenize_13a_string(text)).map(str::to_owned).collect()
}
