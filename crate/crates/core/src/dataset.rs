//! Instruction-data construction: teacher candidates, machine-detectable
//! error tags, the answer-consistency filter, and segment-selected
//! training pairs.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::eval::{is_correct, normalize_answer, EvalError};
use crate::orchestrator::Trace;
use crate::prompt::PromptTemplates;
use crate::response::{heading_number, FinalAnswer, Segmenter};
use crate::sql::{execute, parse_query, ResultTable};
use crate::table::{Cell, Instance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorTag {
    /// A block failed to parse or referenced an unknown column.
    SqlError,
    /// A block's claimed result differs from its actual result.
    ExecutionMismatch,
}

impl ErrorTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorTag::SqlError => "sql_error",
            ErrorTag::ExecutionMismatch => "execution_mismatch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub instance_id: String,
    /// Assembled response with actual results injected.
    pub teacher_response: String,
    /// Raw text of each teacher generation, in order.
    pub generations: Vec<String>,
    pub extracted_answer: FinalAnswer,
    pub consistent: bool,
    pub error_tags: BTreeSet<ErrorTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Builds the candidate for one orchestrator run.
pub fn candidate_from_trace(trace: &Trace, instance: &Instance, segmenter: &Segmenter) -> Candidate {
    let generations: Vec<String> = trace.rounds.iter().filter_map(|r| r.generation.clone()).collect();
    Candidate {
        instance_id: trace.instance_id.clone(),
        teacher_response: trace.final_generation.clone(),
        error_tags: tag_response_errors(&generations, instance, segmenter),
        generations,
        consistent: trace.error.is_none() && is_correct(instance, &trace.final_answer),
        extracted_answer: trace.final_answer.clone(),
        error: trace.error.clone(),
    }
}

fn split_claimed_line(line: &str) -> Vec<String> {
    let t = line.trim();
    let t = t.strip_prefix('|').unwrap_or(t);
    let t = t.strip_suffix('|').unwrap_or(t);
    t.split('|').map(normalize_answer).collect()
}

/// Claimed result text as normalized rows. Fence lines and the empty-result
/// marker are skipped.
fn claimed_rows(claimed: &str) -> Vec<Vec<String>> {
    claimed
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with("```") && !l.eq_ignore_ascii_case("(no rows)"))
        .map(split_claimed_line)
        .collect()
}

fn claimed_matches(claimed: &str, actual: &ResultTable) -> bool {
    let mut rows = claimed_rows(claimed);
    let headers: Vec<String> = actual.headers.iter().map(|h| normalize_answer(h)).collect();
    // The claimed header row is only a header when it names the actual
    // columns; otherwise it is data.
    if rows.first() == Some(&headers) {
        rows.remove(0);
    }
    let actual_rows: Vec<Vec<String>> = actual
        .rows
        .iter()
        .map(|r| r.iter().map(Cell::raw).map(normalize_answer).collect())
        .collect();
    rows == actual_rows
}

/// Error tags for a list of raw teacher generations. Deterministic.
pub fn tag_response_errors(generations: &[String], instance: &Instance, segmenter: &Segmenter) -> BTreeSet<ErrorTag> {
    let mut tags = BTreeSet::new();
    for g in generations {
        for block in segmenter.segment(g).sql_blocks {
            match parse_query(&block.sql_text).and_then(|q| execute(&q, &instance.table)) {
                Err(_) => {
                    tags.insert(ErrorTag::SqlError);
                }
                Ok(actual) => {
                    if let Some(claimed) = block.claimed_result.as_deref() {
                        if !claimed.trim().is_empty() && !claimed_matches(claimed, &actual) {
                            tags.insert(ErrorTag::ExecutionMismatch);
                        }
                    }
                }
            }
        }
    }
    tags
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum DropReason {
    GenerationFailed { message: String },
    MissingAnswer,
    Inconsistent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dropped {
    pub candidate: Candidate,
    #[serde(flatten)]
    pub reason: DropReason,
}

/// Splits candidates into those whose answer matches gold and the rest.
/// Every candidate lands in exactly one side.
pub fn consistency_filter(
    candidates: Vec<Candidate>,
    instances: &[Instance],
) -> Result<(Vec<Candidate>, Vec<Dropped>), EvalError> {
    let by_id: BTreeMap<&str, &Instance> = instances.iter().map(|i| (i.id.as_str(), i)).collect();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for c in candidates {
        let inst = by_id
            .get(c.instance_id.as_str())
            .ok_or_else(|| EvalError::IdMismatch(alloc::format!("no instance for candidate {:?}", c.instance_id)))?;
        let reason = if let Some(message) = &c.error {
            Some(DropReason::GenerationFailed { message: message.clone() })
        } else if c.extracted_answer.is_missing() {
            Some(DropReason::MissingAnswer)
        } else if !is_correct(inst, &c.extracted_answer) {
            Some(DropReason::Inconsistent)
        } else {
            None
        };
        match reason {
            None => kept.push(c),
            Some(reason) => dropped.push(Dropped { candidate: c, reason }),
        }
    }
    Ok((kept, dropped))
}

/// Which response sections an exported pair keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentSelection {
    Full,
    /// Drops the numbered `1.` plan section.
    NoPlan,
    /// Drops the numbered `3.` reasoning section except its concluding
    /// answer line.
    NoReasoning,
}

impl SegmentSelection {
    pub fn from_name(name: &str) -> Option<Self> {
        match name.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "full" => Some(SegmentSelection::Full),
            "no-plan" | "reasoning-only" => Some(SegmentSelection::NoPlan),
            "no-reasoning" => Some(SegmentSelection::NoReasoning),
            _ => None,
        }
    }
}

/// Line ranges of sections `1.`, `2.`, `3.`: each starts at the first
/// heading with that number after the previous section's heading.
fn section_starts(lines: &[&str]) -> [Option<usize>; 3] {
    let mut starts = [None; 3];
    let mut from = 0;
    for (slot, number) in (1..=3).enumerate() {
        if let Some(k) = (from..lines.len()).find(|&k| heading_number(lines[k]) == Some(number)) {
            starts[slot] = Some(k);
            from = k + 1;
        }
    }
    starts
}

/// `response` with the sections not chosen by `selection` removed.
pub fn select_segments(response: &str, selection: SegmentSelection) -> String {
    if selection == SegmentSelection::Full {
        return response.to_string();
    }
    let lines: Vec<&str> = response.split_inclusive('\n').collect();
    let starts = section_starts(&lines);
    let end_of = |slot: usize| starts[slot + 1..].iter().flatten().next().copied().unwrap_or(lines.len());
    let (slot, keep_conclusion) = match selection {
        SegmentSelection::NoPlan => (0, false),
        _ => (2, true),
    };
    let Some(start) = starts[slot] else {
        return response.to_string();
    };
    let end = end_of(slot);
    let mut out = String::new();
    for (k, line) in lines.iter().enumerate() {
        let inside = (start..end).contains(&k);
        if !inside || (keep_conclusion && line.to_lowercase().contains("answer is")) {
            out.push_str(line);
        }
    }
    out
}

/// One exported prompt/response pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub id: String,
    pub prompt: String,
    pub response: String,
    pub tags: Vec<String>,
}

/// Pairs for kept candidates, in input order. Prompts carry no
/// demonstration.
pub fn training_pairs(
    kept: &[Candidate],
    instances: &[Instance],
    selection: SegmentSelection,
    templates: &PromptTemplates,
) -> Result<Vec<TrainingPair>, EvalError> {
    let by_id: BTreeMap<&str, &Instance> = instances.iter().map(|i| (i.id.as_str(), i)).collect();
    kept.iter()
        .map(|c| {
            let inst = by_id
                .get(c.instance_id.as_str())
                .ok_or_else(|| EvalError::IdMismatch(alloc::format!("no instance for candidate {:?}", c.instance_id)))?;
            let prompt = templates
                .task_prompt(inst, false)
                .map_err(|e| EvalError::IdMismatch(alloc::format!("{}: {e}", c.instance_id)))?;
            Ok(TrainingPair {
                id: c.instance_id.clone(),
                prompt,
                response: select_segments(&c.teacher_response, selection),
                tags: c.error_tags.iter().map(|t| t.as_str().to_string()).collect(),
            })
        })
        .collect()
}
