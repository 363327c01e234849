//! Tables, sentence context, and instances.
//!
//! Tables travel through prompts as pipe-delimited text, so this module owns
//! both directions: [`parse_pipe_table`] accepts the loose layouts models and
//! datasets produce (with or without outer pipes, ragged rows, metadata lines)
//! and [`serialize_for_prompt`] emits one canonical layout that parses back to
//! the same table.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::task::{GoldAnswer, Label, LabelSet, TaskKind};
use crate::text::collapse_whitespace;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("no header line found")]
    EmptyInput,
    #[error("token budget {budget} is smaller than the header cost {needed}")]
    BudgetTooSmall { budget: usize, needed: usize },
    #[error("invalid table: {0}")]
    Invalid(String),
    #[error("invalid instance {id}: {reason}")]
    InvalidInstance { id: String, reason: String },
}

/// One table cell. The stored text is trimmed, single-line, and never holds
/// an unescaped `|`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Cell(String);

impl Cell {
    pub fn new(text: &str) -> Self {
        let flat: String = text
            .chars()
            .map(|c| if c == '\n' || c == '\r' { ' ' } else { c })
            .collect();
        let trimmed = flat.trim();
        let mut raw = String::with_capacity(trimmed.len());
        let mut prev = '\0';
        for c in trimmed.chars() {
            if c == '|' && prev != '\\' {
                raw.push('\\');
            }
            raw.push(c);
            prev = c;
        }
        Cell(raw)
    }

    pub fn raw(&self) -> &str {
        &self.0
    }

    /// Both `""` and the `-` placeholder count as empty.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty() || self.0 == "-"
    }

    pub fn as_number(&self) -> Option<f64> {
        cell_as_number(&self.0)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::new(s)
    }
}

impl Serialize for Cell {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Cell {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(Cell::new(&s))
    }
}

/// Parses a cell as a number: commas between digits are dropped, a leading
/// sign is kept, and a trailing `%` divides by 100. Anything that is not then
/// a plain decimal literal yields `None`.
pub fn cell_as_number(text: &str) -> Option<f64> {
    let s = text.trim();
    let (body, percent) = match s.strip_suffix('%') {
        Some(b) => (b.trim_end(), true),
        None => (s, false),
    };
    let (negative, digits) = match body.as_bytes().first() {
        Some(b'-') => (true, &body[1..]),
        Some(b'+') => (false, &body[1..]),
        _ => (false, body),
    };
    let bytes = digits.as_bytes();
    let mut cleaned = String::with_capacity(digits.len());
    let mut seen_digit = false;
    let mut seen_dot = false;
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'0'..=b'9' => {
                seen_digit = true;
                cleaned.push(b as char);
            }
            b'.' if !seen_dot => {
                seen_dot = true;
                cleaned.push('.');
            }
            b',' if !seen_dot
                && i > 0
                && bytes[i - 1].is_ascii_digit()
                && bytes.get(i + 1).is_some_and(|n| n.is_ascii_digit()) => {}
            _ => return None,
        }
    }
    if !seen_digit {
        return None;
    }
    let mut value: f64 = cleaned.parse().ok()?;
    if negative {
        value = -value;
    }
    if percent {
        value /= 100.0;
    }
    Some(value)
}

/// A single table with optional Wikipedia-style metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TableRepr", into = "TableRepr")]
pub struct Table {
    page_title: Option<String>,
    section_title: Option<String>,
    caption: Option<String>,
    headers: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    page_title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    section_title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    caption: Option<String>,
    headers: Vec<String>,
    #[serde(default)]
    rows: Vec<Vec<Cell>>,
}

impl TryFrom<TableRepr> for Table {
    type Error = TableError;

    fn try_from(r: TableRepr) -> Result<Self, TableError> {
        let mut t = Table::new(r.headers, r.rows)?;
        t.page_title = clean_meta(r.page_title);
        t.section_title = clean_meta(r.section_title);
        t.caption = clean_meta(r.caption);
        Ok(t)
    }
}

impl From<Table> for TableRepr {
    fn from(t: Table) -> Self {
        TableRepr {
            page_title: t.page_title,
            section_title: t.section_title,
            caption: t.caption,
            headers: t.headers,
            rows: t.rows,
        }
    }
}

fn clean_meta(value: Option<String>) -> Option<String> {
    value
        .map(|v| Cell::new(&v).0)
        .filter(|v| !v.is_empty())
}

impl Table {
    /// Builds a rectangular table. Header names are sanitized like cells and
    /// must not be empty.
    pub fn new(headers: Vec<String>, rows: Vec<Vec<Cell>>) -> Result<Self, TableError> {
        if headers.is_empty() {
            return Err(TableError::Invalid("table has no columns".to_string()));
        }
        let headers: Vec<String> = headers.iter().map(|h| Cell::new(h).0).collect();
        if let Some(i) = headers.iter().position(|h| h.is_empty()) {
            return Err(TableError::Invalid(alloc::format!("header {i} is empty")));
        }
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != headers.len()) {
            return Err(TableError::Invalid(alloc::format!(
                "row {i} has {} cells, expected {}",
                row.len(),
                headers.len()
            )));
        }
        Ok(Table {
            page_title: None,
            section_title: None,
            caption: None,
            headers,
            rows,
        })
    }

    pub fn with_page_title(mut self, title: &str) -> Self {
        self.page_title = clean_meta(Some(title.to_string()));
        self
    }

    pub fn with_section_title(mut self, title: &str) -> Self {
        self.section_title = clean_meta(Some(title.to_string()));
        self
    }

    pub fn with_caption(mut self, caption: &str) -> Self {
        self.caption = clean_meta(Some(caption.to_string()));
        self
    }

    pub fn page_title(&self) -> Option<&str> {
        self.page_title.as_deref()
    }

    pub fn section_title(&self) -> Option<&str> {
        self.section_title.as_deref()
    }

    pub fn caption(&self) -> Option<&str> {
        self.caption.as_deref()
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Index of the first header matching `name` case-insensitively after
    /// whitespace normalization.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| crate::text::loose_eq(h, name))
    }

    /// Header names that occur more than once (case-insensitively).
    pub fn duplicate_headers(&self) -> Vec<String> {
        let mut seen = BTreeMap::new();
        let mut dups = Vec::new();
        for h in &self.headers {
            let key = collapse_whitespace(h).to_lowercase();
            let count = seen.entry(key).or_insert(0usize);
            *count += 1;
            if *count == 2 {
                dups.push(h.clone());
            }
        }
        dups
    }

    fn with_rows(&self, rows: Vec<Vec<Cell>>) -> Table {
        Table {
            page_title: self.page_title.clone(),
            section_title: self.section_title.clone(),
            caption: self.caption.clone(),
            headers: self.headers.clone(),
            rows,
        }
    }
}

/// Non-fatal irregularities found while parsing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseWarning {
    /// A data line had fewer fields than the header and was padded.
    PaddedRow { line: usize, found: usize },
    /// A data line had more fields than the header and was cut.
    TruncatedRow { line: usize, found: usize },
    /// An empty header cell was given a positional name.
    UnnamedHeader { column: usize, assigned: String },
    DuplicateHeader(String),
}

/// Recognized metadata prefixes, matched case-insensitively.
const META_PREFIXES: &[(&str, MetaField)] = &[
    ("page title:", MetaField::Page),
    ("paper title:", MetaField::Page),
    ("section title:", MetaField::Section),
    ("table caption:", MetaField::Caption),
    ("caption:", MetaField::Caption),
];

#[derive(Clone, Copy)]
enum MetaField {
    Page,
    Section,
    Caption,
}

/// Splits on pipes that are not preceded by a backslash.
fn split_unescaped(line: &str) -> Vec<&str> {
    let mut fields = Vec::new();
    let mut start = 0;
    let mut prev = 0u8;
    for (i, b) in line.bytes().enumerate() {
        if b == b'|' && prev != b'\\' {
            fields.push(&line[start..i]);
            start = i + 1;
        }
        prev = b;
    }
    fields.push(&line[start..]);
    fields
}

fn has_unescaped_pipe(line: &str) -> bool {
    split_unescaped(line).len() > 1
}

fn row_fields(line: &str, outer: bool, width: Option<usize>) -> Vec<&str> {
    let trimmed = line.trim();
    let mut fields = split_unescaped(trimmed);
    let leading = trimmed.starts_with('|');
    let trailing = trimmed.ends_with('|') && !trimmed.ends_with("\\|");
    let too_wide = |n: usize| width.is_some_and(|w| n > w);
    // Outer pipes are delimiters when the header uses them or the row
    // would otherwise be wider than the header.
    if leading && fields.len() > 1 && (outer || too_wide(fields.len())) {
        fields.remove(0);
    }
    if trailing && fields.len() > 1 && (outer || too_wide(fields.len())) {
        fields.pop();
    }
    fields
}

/// Parses pipe-delimited text into a [`Table`], also returning any warnings.
///
/// Leading metadata lines (`Page Title:`, `Section title:`, `Caption:` and
/// their variants) are consumed before the header; blank lines are ignored.
pub fn parse_pipe_table_with_warnings(text: &str) -> Result<(Table, Vec<ParseWarning>), TableError> {
    let mut warnings = Vec::new();
    let mut page = None;
    let mut section = None;
    let mut caption = None;
    let mut header: Option<(Vec<String>, bool)> = None;
    let mut rows = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let Some((headers, outer)) = &header else {
            if !has_unescaped_pipe(trimmed) {
                let lower = trimmed.to_lowercase();
                if let Some((prefix, field)) = META_PREFIXES.iter().find(|(p, _)| lower.starts_with(p)) {
                    let value = trimmed[prefix.len()..].trim();
                    let value = (!value.is_empty()).then(|| Cell::new(value).0);
                    match field {
                        MetaField::Page => page = value,
                        MetaField::Section => section = value,
                        MetaField::Caption => caption = value,
                    }
                    continue;
                }
            }
            let outer = trimmed.starts_with('|');
            let names: Vec<String> = row_fields(trimmed, outer, None)
                .into_iter()
                .enumerate()
                .map(|(i, f)| {
                    let cell = Cell::new(f).0;
                    if cell.is_empty() {
                        let assigned = alloc::format!("column{}", i + 1);
                        warnings.push(ParseWarning::UnnamedHeader {
                            column: i,
                            assigned: assigned.clone(),
                        });
                        assigned
                    } else {
                        cell
                    }
                })
                .collect();
            header = Some((names, outer));
            continue;
        };
        let width = headers.len();
        let fields = row_fields(trimmed, *outer, Some(width));
        let mut cells: Vec<Cell> = fields.iter().map(|f| Cell::new(f)).collect();
        if cells.len() < width {
            warnings.push(ParseWarning::PaddedRow {
                line: lineno,
                found: cells.len(),
            });
            cells.resize(width, Cell::default());
        } else if cells.len() > width {
            warnings.push(ParseWarning::TruncatedRow {
                line: lineno,
                found: cells.len(),
            });
            cells.truncate(width);
        }
        rows.push(cells);
    }

    let (headers, _) = header.ok_or(TableError::EmptyInput)?;
    let mut table = Table::new(headers, rows)?;
    table.page_title = page;
    table.section_title = section;
    table.caption = caption;
    warnings.extend(table.duplicate_headers().into_iter().map(ParseWarning::DuplicateHeader));
    Ok((table, warnings))
}

pub fn parse_pipe_table(text: &str) -> Result<Table, TableError> {
    parse_pipe_table_with_warnings(text).map(|(t, _)| t)
}

fn pipe_line<'a>(cells: impl Iterator<Item = &'a str>) -> String {
    let mut line = String::from("|");
    for c in cells {
        line.push(' ');
        line.push_str(c);
        line.push_str(" |");
    }
    line
}

fn meta_lines(table: &Table) -> Vec<String> {
    let mut lines = Vec::new();
    if let Some(p) = &table.page_title {
        lines.push(alloc::format!("Page Title: {p}"));
    }
    if let Some(s) = &table.section_title {
        lines.push(alloc::format!("Section title: {s}"));
    }
    if let Some(c) = &table.caption {
        lines.push(alloc::format!("Caption: {c}"));
    }
    lines
}

fn body_lines(table: &Table) -> (String, Vec<String>) {
    let header = pipe_line(table.headers.iter().map(String::as_str));
    let rows = table
        .rows
        .iter()
        .map(|r| pipe_line(r.iter().map(Cell::raw)))
        .collect();
    (header, rows)
}

/// Renders metadata lines, the header row, and one line per row, joined by
/// newlines without a trailing newline.
pub fn serialize_for_prompt(table: &Table) -> String {
    let mut lines = meta_lines(table);
    let (header, rows) = body_lines(table);
    lines.push(header);
    lines.extend(rows);
    lines.join("\n")
}

/// Token estimate used for context budgeting: one token per four characters,
/// rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

/// Keeps the longest prefix of rows whose serialization fits in `budget`
/// estimated tokens. Metadata and the header are always kept.
pub fn truncate_to_budget(table: &Table, budget: usize) -> Result<Table, TableError> {
    let mut fixed = meta_lines(table);
    let (header, rows) = body_lines(table);
    fixed.push(header);
    let mut chars: usize = fixed.iter().map(|l| l.chars().count()).sum::<usize>() + fixed.len() - 1;
    let needed = chars.div_ceil(4);
    if needed > budget {
        return Err(TableError::BudgetTooSmall { budget, needed });
    }
    let mut keep = 0;
    for row in &rows {
        let next = chars + 1 + row.chars().count();
        if next.div_ceil(4) > budget {
            break;
        }
        chars = next;
        keep += 1;
    }
    Ok(table.with_rows(table.rows[..keep].to_vec()))
}

/// Sentence evidence accompanying a table.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SentenceContext {
    pub items: Vec<Sentence>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub text: String,
}

impl SentenceContext {
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// One `Title: text` line per sentence.
    pub fn render(&self) -> String {
        let mut lines = Vec::with_capacity(self.items.len());
        for s in &self.items {
            let text = collapse_whitespace(&s.text);
            match s.title.as_deref().map(collapse_whitespace) {
                Some(t) if !t.is_empty() => lines.push(alloc::format!("{t}: {text}")),
                _ => lines.push(text),
            }
        }
        lines.join("\n")
    }
}

/// One task unit: a query or claim over a table plus sentence context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceRepr", into = "InstanceRepr")]
pub struct Instance {
    pub id: String,
    pub task: TaskKind,
    pub query: String,
    pub table: Table,
    pub sentences: SentenceContext,
    pub gold: GoldAnswer,
    pub tags: BTreeMap<String, String>,
}

/// Tag key that pins the label set of a verification instance.
pub const LABEL_SET_TAG: &str = "label_set";

#[derive(Serialize, Deserialize)]
struct InstanceRepr {
    id: String,
    task: String,
    query: String,
    table: Table,
    #[serde(default)]
    sentences: SentenceContext,
    gold: GoldAnswer,
    #[serde(default)]
    tags: BTreeMap<String, String>,
}

fn infer_label_set(gold: &GoldAnswer) -> LabelSet {
    match gold {
        GoldAnswer::Label {
            label: Label::True | Label::False,
        } => LabelSet::TrueFalse,
        _ => LabelSet::ThreeWay,
    }
}

impl TryFrom<InstanceRepr> for Instance {
    type Error = TableError;

    fn try_from(r: InstanceRepr) -> Result<Self, TableError> {
        let invalid = |reason: String| TableError::InvalidInstance {
            id: r.id.clone(),
            reason,
        };
        let task = match r.task.as_str() {
            "short_qa" => TaskKind::ShortQa,
            "free_qa" => TaskKind::FreeQa,
            "fact_verification" => {
                let set = match r.tags.get(LABEL_SET_TAG) {
                    Some(name) => LabelSet::from_name(name)
                        .ok_or_else(|| invalid(alloc::format!("unknown label set {name:?}")))?,
                    None => infer_label_set(&r.gold),
                };
                TaskKind::FactVerification(set)
            }
            other => return Err(invalid(alloc::format!("unknown task {other:?}"))),
        };
        let gold = match (task, r.gold) {
            (TaskKind::FactVerification(set), GoldAnswer::Label { label }) => GoldAnswer::Label {
                label: set
                    .parse(label.as_str())
                    .ok_or_else(|| invalid(alloc::format!("label {label} outside {}", set.as_str())))?,
            },
            (TaskKind::FactVerification(_), GoldAnswer::Answers { .. }) => {
                return Err(invalid("verification instance needs a gold label".to_string()))
            }
            (_, GoldAnswer::Label { .. }) => {
                return Err(invalid("question instance needs gold answers".to_string()))
            }
            (_, answers) => answers,
        };
        if r.sentences.items.iter().any(|s| s.text.trim().is_empty()) {
            return Err(invalid("empty sentence text".to_string()));
        }
        Ok(Instance {
            id: r.id,
            task,
            query: r.query,
            table: r.table,
            sentences: r.sentences,
            gold,
            tags: r.tags,
        })
    }
}

impl From<Instance> for InstanceRepr {
    fn from(i: Instance) -> Self {
        let mut tags = i.tags;
        if let TaskKind::FactVerification(set) = i.task {
            if set != infer_label_set(&i.gold) {
                tags.insert(LABEL_SET_TAG.to_string(), set.as_str().to_string());
            }
        }
        InstanceRepr {
            id: i.id,
            task: i.task.name().to_string(),
            query: i.query,
            table: i.table,
            sentences: i.sentences,
            gold: i.gold,
            tags,
        }
    }
}
