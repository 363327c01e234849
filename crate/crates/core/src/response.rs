//! Segmentation of model generations into SQL blocks with their claimed
//! results, resume points for result injection, and final-answer
//! extraction.
//!
//! Segmentation is lossless: `prefix_text`, then each block's `lead` and
//! `raw`, then `suffix_text` concatenate back to the input byte for byte.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::task::{Label, LabelSet, TaskKind};
use crate::text::{line_spans, strip_emphasis};

/// Result-marker spellings recognized by default, matched as
/// case-insensitive line prefixes.
pub const DEFAULT_MARKERS: &[&str] = &["Executed result:", "Expected result:", "Result:"];

/// Marker inserted when a block has no result marker of its own.
pub const INSERTED_MARKER: &str = "Executed result:";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResponseError {
    #[error("block index {index} out of range ({count} blocks)")]
    IndexOutOfRange { index: usize, count: usize },
}

/// Where a block's result marker sits, as byte offsets into the generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkerSpan {
    pub line_start: usize,
    /// End of the marker token itself (`Executed result:`).
    pub token_end: usize,
    /// End of the marker line, including its newline when present.
    pub line_end: usize,
    /// The marker line carries result text after the token.
    pub inline: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SqlBlock {
    /// Text between the previous block (or `prefix_text`) and this block.
    pub lead: String,
    /// Verbatim block text, from the SQL opener through the claimed result.
    pub raw: String,
    pub sql_text: String,
    pub claimed_result: Option<String>,
    /// Byte range of `raw` in the generation.
    pub span: (usize, usize),
    /// End of the SQL region (closing fence or last statement line).
    pub sql_end: usize,
    pub marker: Option<MarkerSpan>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseSegments {
    pub prefix_text: String,
    pub sql_blocks: Vec<SqlBlock>,
    pub suffix_text: String,
}

impl ResponseSegments {
    pub fn reassemble(&self) -> String {
        let mut out = self.prefix_text.clone();
        for b in &self.sql_blocks {
            out.push_str(&b.lead);
            out.push_str(&b.raw);
        }
        out.push_str(&self.suffix_text);
        out
    }
}

/// Segmenter with a configurable marker set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmenter {
    markers: Vec<String>,
}

impl Default for Segmenter {
    fn default() -> Self {
        Self::new(DEFAULT_MARKERS.iter().map(|m| m.to_string()).collect())
    }
}

fn starts_with_ci(s: &str, prefix: &str) -> bool {
    s.get(..prefix.len()).is_some_and(|head| head.eq_ignore_ascii_case(prefix))
}

fn is_sql_fence(trimmed: &str) -> bool {
    starts_with_ci(trimmed, "```sql")
}

fn is_sql_label(trimmed: &str) -> bool {
    strip_emphasis(trimmed).trim().eq_ignore_ascii_case("sql:")
}

/// `3.`, `**3. Step`, `## 2.` and similar section headings.
pub(crate) fn is_numbered_heading(line: &str) -> bool {
    heading_number(line).is_some()
}

/// The number of a numbered heading line.
pub(crate) fn heading_number(line: &str) -> Option<u32> {
    let mut s = line.trim_start();
    loop {
        let before = s.len();
        s = s.trim_start_matches(['#', '*', ' ', '\t']);
        s = s.strip_prefix("\\textbf{").unwrap_or(s);
        if s.len() == before {
            break;
        }
    }
    let digits = s.bytes().take_while(u8::is_ascii_digit).count();
    if !(1..=2).contains(&digits) || s.as_bytes().get(digits) != Some(&b'.') {
        return None;
    }
    s[..digits].parse().ok()
}

impl Segmenter {
    /// Longer markers are tried first so one marker being a prefix of
    /// another cannot shorten the match.
    pub fn new(mut markers: Vec<String>) -> Self {
        markers.retain(|m| !m.trim().is_empty());
        markers.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        Segmenter { markers }
    }

    pub fn markers(&self) -> &[String] {
        &self.markers
    }

    /// Offsets of the marker token within `line`, if the line is a marker
    /// line. Leading fences, bullets and emphasis are skipped.
    fn marker_in_line(&self, line: &str) -> Option<(usize, usize)> {
        let body = line.trim_start_matches([' ', '\t', '`', '*', '#', '-', '>']);
        let offset = line.len() - body.len();
        let marker = self.markers.iter().find(|m| starts_with_ci(body, m))?;
        let mut end = offset + marker.len();
        if line[end..].starts_with("**") {
            end += 2;
        }
        Some((offset, end))
    }

    fn is_sql_start(&self, line: &str) -> bool {
        let t = line.trim();
        is_sql_fence(t) || is_sql_label(t)
    }

    /// Segments `text` into SQL blocks. Never fails; prose without a
    /// fenced block or `SQL:` line yields zero blocks.
    pub fn segment(&self, text: &str) -> ResponseSegments {
        let lines = line_spans(text);
        let line = |k: usize| &text[lines[k].0..lines[k].1];
        let blank = |k: usize| line(k).trim().is_empty();
        // A blank line whose next non-blank line is a numbered heading.
        let section_break = |k: usize| {
            blank(k)
                && (k + 1..lines.len())
                    .find(|&j| !blank(j))
                    .is_some_and(|j| is_numbered_heading(line(j)))
        };

        let mut blocks = Vec::new();
        let mut cursor = 0;
        let mut prefix_end = None;
        let mut i = 0;
        while i < lines.len() {
            let Some(scan) = self.scan_sql(text, &lines, i) else {
                i += 1;
                continue;
            };
            let start = lines[i].0;
            let mut end = scan.sql_end;
            let mut next = scan.next_line;
            let mut marker_line = scan.close_marker_line;
            if marker_line.is_none() {
                let mut k = scan.next_line;
                while k < lines.len() && !section_break(k) && !self.is_sql_start(line(k)) {
                    if self.marker_in_line(line(k)).is_some() {
                        marker_line = Some(k);
                        break;
                    }
                    k += 1;
                }
            }
            let mut marker = None;
            let mut claimed_result = None;
            if let Some(m) = marker_line {
                let (_, tok_end) = self.marker_in_line(line(m)).unwrap_or_default();
                let inline = !line(m)[tok_end..].trim().is_empty();
                let span = MarkerSpan {
                    line_start: lines[m].0,
                    token_end: lines[m].0 + tok_end,
                    line_end: lines[m].2,
                    inline,
                };
                let mut last = m;
                let mut k = m + 1;
                while k < lines.len() && !section_break(k) && !self.is_sql_start(line(k)) {
                    if !blank(k) {
                        last = k;
                    }
                    k += 1;
                }
                end = lines[last].2;
                next = last + 1;
                let content_start = if inline { span.token_end } else { span.line_end };
                let content = text[content_start..end.max(content_start)].trim_start();
                if !content.trim().is_empty() {
                    claimed_result = Some(content.to_string());
                }
                marker = Some(span);
            }
            if prefix_end.is_none() {
                prefix_end = Some(start);
                cursor = start;
            }
            blocks.push(SqlBlock {
                lead: text[cursor..start].to_string(),
                raw: text[start..end].to_string(),
                sql_text: scan.sql_text,
                claimed_result,
                span: (start, end),
                sql_end: scan.sql_end,
                marker,
            });
            cursor = end;
            i = next;
        }
        let prefix_end = prefix_end.unwrap_or(text.len());
        ResponseSegments {
            prefix_text: text[..prefix_end].to_string(),
            sql_blocks: blocks,
            suffix_text: text[cursor.max(prefix_end)..].to_string(),
        }
    }

    fn scan_sql(&self, text: &str, lines: &[(usize, usize, usize)], i: usize) -> Option<SqlScan> {
        let line = |k: usize| &text[lines[k].0..lines[k].1];
        let opener = line(i).trim();
        if is_sql_fence(opener) {
            let inline = &opener["```sql".len()..];
            if let Some(close) = inline.find("```") {
                // single-line fence
                let sql = inline[..close].trim();
                return (!sql.is_empty()).then(|| SqlScan {
                    sql_text: sql.to_string(),
                    sql_end: lines[i].2,
                    next_line: i + 1,
                    close_marker_line: None,
                });
            }
            let mut parts: Vec<&str> = Vec::new();
            if !inline.trim().is_empty() {
                parts.push(inline.trim());
            }
            let mut k = i + 1;
            let mut close = None;
            while k < lines.len() {
                let t = line(k).trim();
                if t.starts_with("```") {
                    close = Some(k);
                    break;
                }
                if close.is_none() && self.marker_in_line(line(k)).is_some() {
                    // unclosed fence running into a result marker
                    break;
                }
                parts.push(t);
                k += 1;
            }
            let sql = join_statement(&parts);
            if sql.is_empty() {
                return None;
            }
            return Some(match close {
                Some(c) => SqlScan {
                    sql_text: sql,
                    sql_end: lines[c].2,
                    next_line: c + 1,
                    close_marker_line: self.marker_in_line(line(c)).map(|_| c),
                },
                None => SqlScan {
                    sql_text: sql,
                    sql_end: lines[k - 1].2,
                    next_line: k,
                    close_marker_line: None,
                },
            });
        }
        if is_sql_label(opener) {
            let mut k = i + 1;
            while k < lines.len() && line(k).trim().is_empty() {
                k += 1;
            }
            let first = k;
            let mut parts = Vec::new();
            while k < lines.len() {
                let t = line(k).trim();
                if t.is_empty() || self.marker_in_line(line(k)).is_some() || self.is_sql_start(line(k)) {
                    break;
                }
                parts.push(t);
                k += 1;
            }
            if k == first {
                return None;
            }
            return Some(SqlScan {
                sql_text: join_statement(&parts),
                sql_end: lines[k - 1].2,
                next_line: k,
                close_marker_line: None,
            });
        }
        None
    }

    /// The generation cut right after block `index`'s result-marker line,
    /// ready for the actual result to be appended.
    ///
    /// A marker with inline text is cut after the token and given a
    /// newline. A block without a marker is cut after its SQL region and
    /// gets an inserted `Executed result:` line.
    pub fn resume_prefix(&self, generation: &str, index: usize) -> Result<String, ResponseError> {
        let segments = self.segment(generation);
        let count = segments.sql_blocks.len();
        let block = segments
            .sql_blocks
            .get(index)
            .ok_or(ResponseError::IndexOutOfRange { index, count })?;
        let mut out = match block.marker {
            Some(m) if m.inline => generation[..m.token_end].to_string(),
            Some(m) => generation[..m.line_end].to_string(),
            None => {
                let mut s = generation[..block.sql_end].to_string();
                if !s.ends_with('\n') {
                    s.push('\n');
                }
                s.push_str(INSERTED_MARKER);
                s
            }
        };
        if !out.ends_with('\n') {
            out.push('\n');
        }
        Ok(out)
    }
}

struct SqlScan {
    sql_text: String,
    sql_end: usize,
    next_line: usize,
    close_marker_line: Option<usize>,
}

fn join_statement(parts: &[&str]) -> String {
    let mut out = String::new();
    for p in parts.iter().filter(|p| !p.is_empty()) {
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(p);
    }
    out
}

/// [`Segmenter::segment`] with the default markers.
pub fn segment_response(generation: &str) -> ResponseSegments {
    Segmenter::default().segment(generation)
}

/// [`Segmenter::resume_prefix`] with the default markers.
pub fn resume_prefix(generation: &str, index: usize) -> Result<String, ResponseError> {
    Segmenter::default().resume_prefix(generation, index)
}

/// Answer extracted from a generation's concluding lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum FinalAnswer {
    Short(Vec<String>),
    Label(Label),
    Free(String),
    Missing,
}

impl FinalAnswer {
    pub fn is_missing(&self) -> bool {
        matches!(self, FinalAnswer::Missing)
    }

    /// Answer strings for scoring; empty when missing.
    pub fn answers(&self) -> Vec<String> {
        match self {
            FinalAnswer::Short(list) => list.clone(),
            FinalAnswer::Label(l) => alloc::vec![l.as_str().to_string()],
            FinalAnswer::Free(t) => alloc::vec![t.clone()],
            FinalAnswer::Missing => Vec::new(),
        }
    }
}

const WINDOW: usize = 5;
const ANSWER_CUE: &str = "answer is";

fn clean_answer(text: &str) -> String {
    let mut s = strip_emphasis(text).trim().to_string();
    loop {
        let before = s.len();
        let t = s
            .trim()
            .trim_start_matches(':')
            .trim()
            .trim_end_matches('.')
            .trim()
            .trim_matches(['"', '\'', '\u{201c}', '\u{201d}', '`'])
            .trim();
        s = t.to_string();
        if s.len() == before {
            return s;
        }
    }
}

/// Splits a short answer on `,` and ` and `. A comma between two digits
/// (`2,000`) is a thousands separator, not a split point.
fn split_short(text: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let bytes = text.as_bytes();
    let mut start = 0;
    for (i, &b) in bytes.iter().enumerate() {
        if b == b',' {
            let digit_before = i > 0 && bytes[i - 1].is_ascii_digit();
            let digit_after = bytes.get(i + 1).is_some_and(u8::is_ascii_digit);
            if !(digit_before && digit_after) {
                parts.push(&text[start..i]);
                start = i + 1;
            }
        }
    }
    parts.push(&text[start..]);
    let mut out = Vec::new();
    for p in parts {
        let lower = p.to_lowercase();
        let mut rest = p;
        let mut lower_rest = lower.as_str();
        // `to_lowercase` can change byte lengths outside ASCII; only split
        // when offsets agree.
        while lower_rest.len() == rest.len() {
            let Some(pos) = lower_rest.find(" and ") else { break };
            out.push(clean_answer(&rest[..pos]));
            rest = &rest[pos + 5..];
            lower_rest = &lower_rest[pos + 5..];
        }
        out.push(clean_answer(rest));
    }
    out.retain(|s| !s.is_empty());
    out
}

/// Positions of `needle` in `hay` at word boundaries.
fn word_positions(hay: &str, needle: &str) -> Vec<usize> {
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(rel) = hay[from..].find(needle) {
        let pos = from + rel;
        let end = pos + needle.len();
        let before_ok = hay[..pos].chars().next_back().is_none_or(|c| !c.is_alphanumeric());
        let after_ok = hay[end..].chars().next().is_none_or(|c| !c.is_alphanumeric());
        if before_ok && after_ok {
            out.push(pos);
        }
        from = pos + needle.len().max(1);
    }
    out
}

const LABEL_WORDS: &[&str] = &[
    "not enough information",
    "not enough info",
    "supports",
    "supported",
    "refutes",
    "refuted",
    "true",
    "false",
];

/// The last label word in `line` that belongs to `set`.
fn last_label_in(line: &str, set: LabelSet) -> Option<Label> {
    let lower = line.to_lowercase();
    let mut best: Option<(usize, Label)> = None;
    for word in LABEL_WORDS {
        let Some(label) = set.parse(word) else { continue };
        if let Some(&pos) = word_positions(&lower, word).last() {
            // Longer phrases are listed first, so ties keep the longer one.
            if best.is_none_or(|(p, _)| pos > p) {
                best = Some((pos, label));
            }
        }
    }
    best.map(|(_, l)| l)
}

/// Extracts the final answer from the last five non-empty lines.
///
/// The last `answer is X` cue wins; an empty `X` takes the next non-empty
/// line. Verification tasks fall back to the last label word anywhere in
/// the window. Free-form answers are the whole concluding line.
pub fn extract_final_answer(generation: &str, task: TaskKind) -> FinalAnswer {
    let lines: Vec<&str> = generation.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let window = &lines[lines.len().saturating_sub(WINDOW)..];

    let mut cue: Option<(usize, String)> = None;
    for (idx, line) in window.iter().enumerate().rev() {
        let lower = line.to_lowercase();
        if let Some(pos) = lower.rfind(ANSWER_CUE) {
            let after = if lower.len() == line.len() { &line[pos + ANSWER_CUE.len()..] } else { "" };
            let mut value = clean_answer(after);
            if value.is_empty() {
                if let Some(next) = window.get(idx + 1) {
                    value = clean_answer(next);
                }
            }
            cue = Some((idx, value));
            break;
        }
    }

    match task {
        TaskKind::ShortQa => match cue {
            Some((_, value)) => {
                let list = split_short(&value);
                if list.is_empty() {
                    FinalAnswer::Missing
                } else {
                    FinalAnswer::Short(list)
                }
            }
            None => FinalAnswer::Missing,
        },
        TaskKind::FactVerification(set) => {
            if let Some((_, value)) = &cue {
                if let Some(label) = set.parse(value).or_else(|| last_label_in(value, set)) {
                    return FinalAnswer::Label(label);
                }
            }
            window
                .iter()
                .rev()
                .find_map(|l| last_label_in(&strip_emphasis(l), set))
                .map_or(FinalAnswer::Missing, FinalAnswer::Label)
        }
        TaskKind::FreeQa => {
            let line = match cue {
                Some((idx, _)) => window.get(idx).copied(),
                None => window.last().copied(),
            };
            match line.map(|l| strip_emphasis(l).trim().to_string()) {
                Some(l) if !l.is_empty() => FinalAnswer::Free(l),
                _ => FinalAnswer::Missing,
            }
        }
    }
}
