//! Small string helpers shared across modules.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// Collapses every run of whitespace into one space and trims the ends.
pub(crate) fn collapse_whitespace(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Case-insensitive comparison after whitespace collapsing.
pub(crate) fn loose_eq(a: &str, b: &str) -> bool {
    collapse_whitespace(a).to_lowercase() == collapse_whitespace(b).to_lowercase()
}

/// Renders a number without exponent notation; integral values lose the
/// fractional part.
pub(crate) fn format_number(value: f64) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    if value.abs() < 1e15 && (value as i64) as f64 == value {
        alloc::format!("{}", value as i64)
    } else {
        alloc::format!("{value}")
    }
}

/// Removes markdown bold markers and `\textbf{...}` wrappers.
pub(crate) fn strip_emphasis(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(pos) = rest.find("\\textbf{") {
        out.push_str(&rest[..pos]);
        let after = &rest[pos + "\\textbf{".len()..];
        match after.find('}') {
            Some(close) => {
                out.push_str(&after[..close]);
                rest = &after[close + 1..];
            }
            None => {
                out.push_str(after);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out.replace("**", "")
}

/// Byte offsets of each line: `(start, end_without_newline, end_with_newline)`.
pub(crate) fn line_spans(text: &str) -> Vec<(usize, usize, usize)> {
    let mut spans = Vec::new();
    let mut start = 0;
    let bytes = text.as_bytes();
    while start < bytes.len() {
        match text[start..].find('\n') {
            Some(rel) => {
                let nl = start + rel;
                spans.push((start, nl, nl + 1));
                start = nl + 1;
            }
            None => {
                spans.push((start, bytes.len(), bytes.len()));
                start = bytes.len();
            }
        }
    }
    spans
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_render_without_exponent() {
        assert_eq!(format_number(2000.0), "2000");
        assert_eq!(format_number(0.48), "0.48");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(1e20), "100000000000000000000");
    }

    #[test]
    fn emphasis_is_removed() {
        assert_eq!(strip_emphasis("**2**."), "2.");
        assert_eq!(strip_emphasis("\\textbf{false}."), "false.");
    }

    #[test]
    fn line_spans_cover_text() {
        let spans = line_spans("a\nbc\n\nd");
        assert_eq!(spans, vec![(0, 1, 2), (2, 4, 5), (5, 5, 6), (6, 7, 7)]);
        assert!(line_spans("").is_empty());
    }
}
