use std::sync::OnceLock;

use regex::Regex;

const START: &str = "<START>";
const END: &str = "<END>";

fn numbered_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*\(?(\d+)[.):]\s*(.*?)\s*$").expect("valid regex"))
}

/// Splits a list response into items. Numbered lines (`1. foo`, `2) bar`)
/// win when present; otherwise blank-line-separated blocks are used.
pub fn parse_numbered(response: &str) -> Vec<String> {
    let numbered: Vec<String> = response
        .lines()
        .filter_map(|l| numbered_line().captures(l))
        .map(|c| c[2].trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if !numbered.is_empty() {
        return numbered;
    }
    response
        .split("\n\n")
        .map(|block| block.lines().map(str::trim).collect::<Vec<_>>().join(" "))
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Contents of the outermost `<START>…<END>` spans. Nested spans are folded
/// into their parent; unmatched `<END>` tags are ignored.
pub fn tagged_spans(response: &str) -> Vec<String> {
    let mut spans = Vec::new();
    let mut depth = 0usize;
    let mut open_at = 0usize;
    let mut i = 0usize;
    while i < response.len() {
        let rest = &response[i..];
        if rest.starts_with(START) {
            if depth == 0 {
                open_at = i + START.len();
            }
            depth += 1;
            i += START.len();
        } else if rest.starts_with(END) {
            if depth > 0 {
                depth -= 1;
                if depth == 0 {
                    let span = response[open_at..i].trim();
                    if !span.is_empty() {
                        spans.push(span.to_string());
                    }
                }
            }
            i += END.len();
        } else {
            i += rest.chars().next().map_or(1, char::len_utf8);
        }
    }
    spans
}
