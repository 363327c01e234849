//! Task and judge prompts assembled from plain-text templates.
//!
//! A task prompt is laid out as: preamble, optional worked demonstration,
//! `## Question` (or `## Claim`), `## Table Context`, optional
//! `## Sentence Context`, `## Task` with the three-step instruction, and a
//! closing `## Answer` heading.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::table::{serialize_for_prompt, Instance};
use crate::task::{LabelSet, TaskKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("no prompt template for task {0}")]
    UnsupportedTask(String),
}

/// The pieces of one task's prompt. A demonstration may contain an
/// `{instruction}` placeholder, filled with `instruction`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskTemplate {
    pub preamble: String,
    pub instruction: String,
    pub demo: Option<String>,
}

/// Template names, also the data-file directory names.
pub const SHORT_QA: &str = "short_qa";
pub const FACT_THREE_WAY: &str = "fact_three_way";
pub const FACT_TRUE_FALSE: &str = "fact_true_false";
pub const FREE_QA: &str = "free_qa";

pub fn template_name(task: TaskKind) -> &'static str {
    match task {
        TaskKind::ShortQa => SHORT_QA,
        TaskKind::FactVerification(LabelSet::ThreeWay) => FACT_THREE_WAY,
        TaskKind::FactVerification(LabelSet::TrueFalse) => FACT_TRUE_FALSE,
        TaskKind::FreeQa => FREE_QA,
    }
}

/// Every task template plus the judge template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplates {
    pub tasks: BTreeMap<String, TaskTemplate>,
    /// Contains `{question}`, `{gold}` and `{predicted}` placeholders.
    pub judge: String,
}

fn builtin(preamble: &str, instruction: &str, demo: Option<&str>) -> TaskTemplate {
    TaskTemplate {
        preamble: preamble.trim().to_string(),
        instruction: instruction.trim().to_string(),
        demo: demo.map(|d| d.trim().to_string()),
    }
}

impl PromptTemplates {
    /// Templates shipped with the crate.
    pub fn builtin() -> Self {
        let mut tasks = BTreeMap::new();
        tasks.insert(
            SHORT_QA.to_string(),
            builtin(
                include_str!("../data/short_qa/preamble.txt"),
                include_str!("../data/short_qa/instruction.txt"),
                Some(include_str!("../data/short_qa/demo.txt")),
            ),
        );
        tasks.insert(
            FACT_THREE_WAY.to_string(),
            builtin(
                include_str!("../data/fact_three_way/preamble.txt"),
                include_str!("../data/fact_three_way/instruction.txt"),
                Some(include_str!("../data/fact_three_way/demo.txt")),
            ),
        );
        tasks.insert(
            FACT_TRUE_FALSE.to_string(),
            builtin(
                include_str!("../data/fact_true_false/preamble.txt"),
                include_str!("../data/fact_true_false/instruction.txt"),
                Some(include_str!("../data/fact_true_false/demo.txt")),
            ),
        );
        tasks.insert(
            FREE_QA.to_string(),
            builtin(
                include_str!("../data/free_qa/preamble.txt"),
                include_str!("../data/free_qa/instruction.txt"),
                None,
            ),
        );
        PromptTemplates {
            tasks,
            judge: include_str!("../data/judge.txt").trim_end().to_string(),
        }
    }

    pub fn template(&self, task: TaskKind) -> Result<&TaskTemplate, PromptError> {
        let name = template_name(task);
        self.tasks
            .get(name)
            .ok_or_else(|| PromptError::UnsupportedTask(name.to_string()))
    }

    /// Renders the prompt for `instance`. Deterministic in its inputs.
    pub fn task_prompt(&self, instance: &Instance, include_demo: bool) -> Result<String, PromptError> {
        let t = self.template(instance.task)?;
        let mut sections: Vec<String> = Vec::new();
        if !t.preamble.is_empty() {
            sections.push(t.preamble.clone());
        }
        if include_demo {
            if let Some(demo) = &t.demo {
                sections.push(demo.replace("{instruction}", &t.instruction));
            }
        }
        let heading = match instance.task {
            TaskKind::FactVerification(_) => "## Claim",
            _ => "## Question",
        };
        sections.push(alloc::format!("{heading}\n{}", instance.query.trim()));
        sections.push(alloc::format!("## Table Context\n{}", serialize_for_prompt(&instance.table)));
        if !instance.sentences.is_empty() {
            sections.push(alloc::format!("## Sentence Context\n{}", instance.sentences.render()));
        }
        sections.push(alloc::format!("## Task\n{}", t.instruction));
        sections.push("## Answer\n".to_string());
        Ok(sections.join("\n\n"))
    }

    /// Judge prompt; multiple gold answers are joined with `; `.
    pub fn judge_prompt(&self, question: &str, gold: &[String], predicted: &str) -> String {
        // Placeholders are replaced in one pass so inserted text is never
        // re-scanned.
        let gold = gold.join("; ");
        let mut out = String::new();
        let mut rest = self.judge.as_str();
        while let Some(open) = rest.find('{') {
            let Some(len) = rest[open..].find('}') else { break };
            let value = match &rest[open + 1..open + len] {
                "question" => Some(question.trim()),
                "gold" => Some(gold.trim()),
                "predicted" => Some(predicted.trim()),
                _ => None,
            };
            match value {
                Some(v) => {
                    out.push_str(&rest[..open]);
                    out.push_str(v);
                    rest = &rest[open + len + 1..];
                }
                None => {
                    out.push_str(&rest[..=open]);
                    rest = &rest[open + 1..];
                }
            }
        }
        out.push_str(rest);
        out.push('\n');
        out
    }
}

/// [`PromptTemplates::task_prompt`] with the built-in templates.
pub fn build_task_prompt(instance: &Instance, include_demo: bool) -> Result<String, PromptError> {
    PromptTemplates::builtin().task_prompt(instance, include_demo)
}

/// [`PromptTemplates::judge_prompt`] with the built-in template.
pub fn build_judge_prompt(question: &str, gold: &[String], predicted: &str) -> String {
    PromptTemplates::builtin().judge_prompt(question, gold, predicted)
}
