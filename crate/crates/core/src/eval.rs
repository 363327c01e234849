//! Scoring: answer normalization, denotation match, label accuracy,
//! three-class macro-F1, judge verdicts, and grouped reports.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{Backend, BackendError, GenerationRequest, Message};
use crate::orchestrator::Outcome;
use crate::prompt::PromptTemplates;
use crate::response::FinalAnswer;
use crate::table::{cell_as_number, Instance};
use crate::task::{GoldAnswer, Label, TaskKind};
use crate::text::{collapse_whitespace, format_number, strip_emphasis};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("length mismatch: {left} predictions vs {right} golds")]
    LengthMismatch { left: usize, right: usize },
    #[error("no items to score")]
    EmptyInput,
    #[error("id mismatch: {0}")]
    IdMismatch(String),
}

fn strip_wrappers(s: &str) -> &str {
    let mut s = s.trim();
    loop {
        let before = s.len();
        s = s.trim_end_matches('.').trim();
        for (open, close) in [('"', '"'), ('\'', '\''), ('\u{201c}', '\u{201d}'), ('`', '`')] {
            if s.len() >= 2 && s.starts_with(open) && s.ends_with(close) {
                s = s[open.len_utf8()..s.len() - close.len_utf8()].trim();
            }
        }
        if s.len() == before {
            return s;
        }
    }
}

fn tighten_punctuation(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if matches!(c, ',' | ';' | ':' | '!' | '?' | ')') && out.ends_with(' ') {
            out.pop();
        }
        if c == ' ' && out.ends_with('(') {
            continue;
        }
        out.push(c);
    }
    out
}

/// Canonical form for answer comparison: emphasis removed, lowercase,
/// whitespace collapsed, wrapping quotes and trailing periods dropped, no
/// space before closing punctuation, and numbers (including `2,000` and
/// `48%`) rendered canonically. Idempotent.
pub fn normalize_answer(text: &str) -> String {
    let mut s = text.to_string();
    loop {
        let next = strip_emphasis(&s).to_lowercase();
        let next = collapse_whitespace(&next);
        let next = tighten_punctuation(strip_wrappers(&next));
        if next == s {
            break;
        }
        s = next;
    }
    match cell_as_number(&s) {
        Some(n) => format_number(n),
        None => s,
    }
}

/// True iff the normalized multisets are equal, or, failing that, the
/// comma-joined lists normalize equal. The second test accepts a single
/// value that itself contains commas (a date such as `December 31, 1849`)
/// after extraction split it apart. An empty gold list never matches.
pub fn denotation_match(predicted: &[String], gold: &[String]) -> bool {
    if gold.is_empty() || predicted.is_empty() {
        return false;
    }
    let norm = |xs: &[String]| {
        let mut v: Vec<String> = xs.iter().map(|x| normalize_answer(x)).collect();
        v.sort();
        v
    };
    norm(predicted) == norm(gold) || normalize_answer(&predicted.join(", ")) == normalize_answer(&gold.join(", "))
}

/// Whether `answer` is correct for `instance` under exact scoring.
pub fn is_correct(instance: &Instance, answer: &FinalAnswer) -> bool {
    match (&instance.gold, answer) {
        (GoldAnswer::Label { label }, FinalAnswer::Label(pred)) => label.unified() == pred.unified(),
        (GoldAnswer::Answers { answers }, FinalAnswer::Short(pred)) => denotation_match(pred, answers),
        (GoldAnswer::Answers { answers }, FinalAnswer::Free(text)) => {
            let t = normalize_answer(text);
            answers.iter().any(|a| normalize_answer(a) == t)
        }
        _ => false,
    }
}

/// Per-class counts and F1 for one label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub label: Label,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub f1: f64,
    /// The label occurs in neither sequence; its F1 is 0.
    pub absent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub classes: Vec<ClassScore>,
    pub macro_f1: f64,
}

const THREE_CLASSES: [Label; 3] = [Label::Supports, Label::Refutes, Label::NotEnoughInfo];

/// Macro-averaged F1 over SUPPORTS, REFUTES and NOT ENOUGH INFO (labels
/// are unified first). A missing prediction counts against the gold class.
/// Per-class F1 is `2tp / (2tp + fp + fn)`, and 0 when that denominator is 0.
pub fn three_class_f1(predictions: &[Option<Label>], golds: &[Label]) -> Result<F1Report, EvalError> {
    if predictions.len() != golds.len() {
        return Err(EvalError::LengthMismatch { left: predictions.len(), right: golds.len() });
    }
    if golds.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut classes = Vec::new();
    for class in THREE_CLASSES {
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        for (p, g) in predictions.iter().zip(golds) {
            let p = p.map(Label::unified);
            let g = g.unified();
            match (p == Some(class), g == class) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        let denom = 2 * tp + fp + fn_;
        let f1 = if denom == 0 { 0.0 } else { (2 * tp) as f64 / denom as f64 };
        classes.push(ClassScore { label: class, tp, fp, fn_, f1, absent: denom == 0 });
    }
    let macro_f1 = classes.iter().map(|c| c.f1).sum::<f64>() / classes.len() as f64;
    Ok(F1Report { classes, macro_f1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Yes,
    No,
    Unparseable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub verdict: Verdict,
    pub raw: String,
}

/// Reads a leading `yes` or `no` word, ignoring case and emphasis.
pub fn parse_verdict(text: &str) -> Verdict {
    let lower = strip_emphasis(text).to_lowercase();
    let s = lower.trim_start_matches(|c: char| c.is_whitespace() || c == '"' || c == '\'');
    let word: String = s.chars().take_while(|c| c.is_alphabetic()).collect();
    match word.as_str() {
        "yes" => Verdict::Yes,
        "no" => Verdict::No,
        _ => Verdict::Unparseable,
    }
}

/// One judge generation for a prediction.
pub fn judge_verdict(
    question: &str,
    gold: &[String],
    predicted: &str,
    backend: &dyn Backend,
    templates: &PromptTemplates,
) -> Result<JudgeVerdict, BackendError> {
    let request = GenerationRequest {
        messages: alloc::vec![Message::user(templates.judge_prompt(question, gold, predicted))],
        max_new_tokens: 16,
        temperature: 0.0,
        stop: None,
    };
    let result = backend.generate(&request)?;
    Ok(JudgeVerdict { verdict: parse_verdict(&result.text), raw: result.text })
}

/// Gold answers as strings, for the judge prompt.
pub fn gold_strings(gold: &GoldAnswer) -> Vec<String> {
    match gold {
        GoldAnswer::Answers { answers } => answers.clone(),
        GoldAnswer::Label { label } => alloc::vec![label.as_str().to_string()],
    }
}

/// Predicted answer as one string, for the judge prompt.
pub fn predicted_string(answer: &FinalAnswer) -> String {
    answer.answers().join(", ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Label match for verification, denotation match for questions.
    Accuracy,
    /// Three-class macro-F1 over verification instances.
    F1,
    /// Judge verdicts, reported separately from exact scoring.
    Judge,
}

impl Metric {
    pub fn from_name(name: &str) -> Option<Metric> {
        match name.trim().to_ascii_lowercase().as_str() {
            "accuracy" | "exact" | "denotation" | "label" => Some(Metric::Accuracy),
            "f1" | "macro_f1" | "three_class_f1" => Some(Metric::F1),
            "judge" => Some(Metric::Judge),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub tag: String,
    /// `(none)` for instances without the tag.
    pub value: String,
    pub evaluated: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub evaluated: usize,
    pub missing_answers: usize,
    pub failed: usize,
    pub correct: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub three_class_f1: Option<F1Report>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub judge_accuracy: Option<f64>,
    pub judge_unparseable: usize,
    pub mean_api_calls: f64,
    pub breakdowns: Vec<Breakdown>,
}

pub const NO_TAG: &str = "(none)";

fn rate(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores `outcomes` against `instances`, matched by id. Every outcome
/// needs exactly one instance and vice versa. Judge verdicts, when given,
/// align with `outcomes`.
pub fn build_report(
    outcomes: &[Outcome],
    instances: &[Instance],
    metrics: &[Metric],
    judge: Option<&[JudgeVerdict]>,
) -> Result<EvalReport, EvalError> {
    if outcomes.len() != instances.len() {
        return Err(EvalError::LengthMismatch { left: outcomes.len(), right: instances.len() });
    }
    let mut by_id: BTreeMap<&str, &Instance> = BTreeMap::new();
    for inst in instances {
        if by_id.insert(inst.id.as_str(), inst).is_some() {
            return Err(EvalError::IdMismatch(alloc::format!("duplicate instance id {:?}", inst.id)));
        }
    }
    let mut seen = BTreeMap::new();
    let mut pairs = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        let inst = by_id
            .get(o.instance_id.as_str())
            .ok_or_else(|| EvalError::IdMismatch(alloc::format!("no instance for outcome {:?}", o.instance_id)))?;
        if seen.insert(o.instance_id.as_str(), ()).is_some() {
            return Err(EvalError::IdMismatch(alloc::format!("duplicate outcome id {:?}", o.instance_id)));
        }
        pairs.push((o, *inst));
    }
    if let Some(j) = judge {
        if j.len() != outcomes.len() {
            return Err(EvalError::LengthMismatch { left: j.len(), right: outcomes.len() });
        }
    }

    let correct_flags: Vec<bool> = pairs.iter().map(|(o, i)| is_correct(i, &o.final_answer)).collect();
    let correct = correct_flags.iter().filter(|c| **c).count();
    let evaluated = pairs.len();

    let three_class_f1 = if metrics.contains(&Metric::F1) {
        let (preds, golds): (Vec<Option<Label>>, Vec<Label>) = pairs
            .iter()
            .filter_map(|(o, i)| match (&i.gold, i.task) {
                (GoldAnswer::Label { label }, TaskKind::FactVerification(_)) => {
                    let pred = match o.final_answer {
                        FinalAnswer::Label(l) => Some(l),
                        _ => None,
                    };
                    Some((pred, *label))
                }
                _ => None,
            })
            .unzip();
        three_class_f1(&preds, &golds).ok()
    } else {
        None
    };

    let (judge_accuracy, judge_unparseable) = match (metrics.contains(&Metric::Judge), judge) {
        (true, Some(j)) => {
            let yes = j.iter().filter(|v| v.verdict == Verdict::Yes).count();
            let bad = j.iter().filter(|v| v.verdict == Verdict::Unparseable).count();
            (Some(rate(yes, evaluated)), bad)
        }
        _ => (None, 0),
    };

    let mut groups: BTreeMap<(String, String), (usize, usize)> = BTreeMap::new();
    let tag_keys: alloc::collections::BTreeSet<&String> =
        pairs.iter().flat_map(|(_, i)| i.tags.keys()).collect();
    for key in tag_keys {
        for ((_, inst), ok) in pairs.iter().zip(&correct_flags) {
            let value = inst.tags.get(key).cloned().unwrap_or_else(|| NO_TAG.to_string());
            let entry = groups.entry((key.clone(), value)).or_default();
            entry.0 += 1;
            entry.1 += usize::from(*ok);
        }
    }
    let breakdowns = groups
        .into_iter()
        .map(|((tag, value), (n, c))| Breakdown { tag, value, evaluated: n, correct: c, accuracy: rate(c, n) })
        .collect();

    let total_calls: u64 = outcomes.iter().map(|o| u64::from(o.api_calls)).sum();
    Ok(EvalReport {
        evaluated,
        missing_answers: outcomes.iter().filter(|o| o.final_answer.is_missing()).count(),
        failed: outcomes
            .iter()
            .filter(|o| o.status != crate::orchestrator::OutcomeStatus::Ok)
            .count(),
        correct,
        accuracy: metrics.contains(&Metric::Accuracy).then(|| rate(correct, evaluated)),
        three_class_f1,
        judge_accuracy,
        judge_unparseable,
        mean_api_calls: if evaluated == 0 { 0.0 } else { total_calls as f64 / evaluated as f64 },
        breakdowns,
    })
}

impl EvalReport {
    /// Fixed-width text rendering.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut row = |k: &str, v: String| {
            let _ = writeln!(out, "{k:<24}{v:>12}");
        };
        row("evaluated", self.evaluated.to_string());
        row("correct", self.correct.to_string());
        row("missing answers", self.missing_answers.to_string());
        row("failed", self.failed.to_string());
        if let Some(a) = self.accuracy {
            row("accuracy", alloc::format!("{a:.4}"));
        }
        if let Some(f) = &self.three_class_f1 {
            row("macro f1", alloc::format!("{:.4}", f.macro_f1));
            for c in &f.classes {
                let note = if c.absent { " (absent)" } else { "" };
                row(&alloc::format!("  f1 {}{note}", c.label), alloc::format!("{:.4}", c.f1));
            }
        }
        if let Some(j) = self.judge_accuracy {
            row("judge accuracy", alloc::format!("{j:.4}"));
            row("judge unparseable", self.judge_unparseable.to_string());
        }
        row("mean api calls", alloc::format!("{:.2}", self.mean_api_calls));
        if !self.breakdowns.is_empty() {
            let _ = writeln!(out, "{:<24}{:<16}{:>8}{:>8}{:>10}", "tag", "value", "n", "correct", "accuracy");
            for b in &self.breakdowns {
                let _ = writeln!(
                    out,
                    "{:<24}{:<16}{:>8}{:>8}{:>10.4}",
                    b.tag, b.value, b.evaluated, b.correct, b.accuracy
                );
            }
        }
        out
    }
}
