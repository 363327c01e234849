//! Loading prompt templates from a directory laid out like the built-in
//! data: `<task>/preamble.txt`, `<task>/instruction.txt`, `<task>/demo.txt`
//! and `judge.txt`. Any file present replaces the built-in piece; absent
//! files keep it.

use std::fs;
use std::path::Path;

use tabreason_core::prompt::{PromptTemplates, TaskTemplate, FACT_THREE_WAY, FACT_TRUE_FALSE, FREE_QA, SHORT_QA};

use crate::io::IoFailure;

fn read_optional(path: &Path) -> Result<Option<String>, IoFailure> {
    match fs::read_to_string(path) {
        Ok(text) => Ok(Some(text)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(source) => Err(IoFailure::Io { path: path.to_path_buf(), source }),
    }
}

/// Built-in templates overlaid with the files under `dir`.
pub fn load_templates(dir: &Path) -> Result<PromptTemplates, IoFailure> {
    if !dir.is_dir() {
        return Err(IoFailure::Invalid { path: dir.to_path_buf(), message: "not a directory".into() });
    }
    let mut templates = PromptTemplates::builtin();
    for name in [SHORT_QA, FACT_THREE_WAY, FACT_TRUE_FALSE, FREE_QA] {
        let task_dir = dir.join(name);
        let entry = templates.tasks.entry(name.to_string()).or_insert_with(|| TaskTemplate {
            preamble: String::new(),
            instruction: String::new(),
            demo: None,
        });
        if let Some(text) = read_optional(&task_dir.join("preamble.txt"))? {
            entry.preamble = text.trim().to_string();
        }
        if let Some(text) = read_optional(&task_dir.join("instruction.txt"))? {
            entry.instruction = text.trim().to_string();
        }
        if let Some(text) = read_optional(&task_dir.join("demo.txt"))? {
            let text = text.trim();
            entry.demo = (!text.is_empty()).then(|| text.to_string());
        }
    }
    if let Some(text) = read_optional(&dir.join("judge.txt"))? {
        templates.judge = text.trim_end().to_string();
    }
    Ok(templates)
}

/// Templates from `dir` when given, built-ins otherwise.
pub fn templates_or_builtin(dir: Option<&Path>) -> Result<PromptTemplates, IoFailure> {
    dir.map_or_else(|| Ok(PromptTemplates::builtin()), load_templates)
}
