//! Per-instance plan-then-reason loop: generate, find the next unresolved
//! SQL block, execute it against the instance table, inject the actual
//! result at the block's resume point, and let the model continue.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::backend::{Backend, GenerationRequest, Message};
use crate::prompt::PromptTemplates;
use crate::response::{extract_final_answer, FinalAnswer, Segmenter, DEFAULT_MARKERS};
use crate::sql::{execute, format_result, parse_query};
use crate::table::Instance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub max_new_tokens: u32,
    pub temperature: f64,
    /// Estimated-token budget for the serialized table.
    pub table_token_budget: usize,
    /// At least 1.
    pub max_injection_rounds: u32,
    pub include_demo: bool,
    pub fallback_on_sql_error: bool,
    pub result_markers: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            max_new_tokens: 1024,
            temperature: 0.0,
            table_token_budget: 2048,
            max_injection_rounds: 4,
            include_demo: true,
            fallback_on_sql_error: true,
            result_markers: DEFAULT_MARKERS.iter().map(|m| m.to_string()).collect(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_injection_rounds == 0 {
            return Err("max_injection_rounds must be at least 1".into());
        }
        if self.max_new_tokens == 0 {
            return Err("max_new_tokens must be positive".into());
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err("temperature must be non-negative".into());
        }
        Ok(())
    }

    fn request(&self, content: String) -> GenerationRequest {
        GenerationRequest {
            messages: alloc::vec![Message::user(content)],
            max_new_tokens: self.max_new_tokens,
            temperature: self.temperature,
            stop: None,
        }
    }
}

/// What happened to the SQL block detected in a round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Execution {
    Ok { result: String },
    SqlError { message: String },
    NoSql,
    /// A block was found after the injection cap was reached.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Round {
    /// Text generated in this round; `None` when the round reuses the
    /// previous generation.
    pub generation: Option<String>,
    pub detected_sql: Option<String>,
    pub execution: Execution,
    pub injected_text: Option<String>,
    pub fallback_used: bool,
}

impl Round {
    fn new(generation: Option<String>) -> Self {
        Round {
            generation,
            detected_sql: None,
            execution: Execution::NoSql,
            injected_text: None,
            fallback_used: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeStatus {
    Ok,
    BackendError,
    PromptError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub instance_id: String,
    pub final_answer: FinalAnswer,
    pub api_calls: u32,
    pub status: OutcomeStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub instance_id: String,
    pub prompt: String,
    pub rounds: Vec<Round>,
    pub final_generation: String,
    pub final_answer: FinalAnswer,
    pub api_calls: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Trace {
    pub fn outcome(&self) -> Outcome {
        let status = match &self.error {
            None => OutcomeStatus::Ok,
            Some(e) if e.starts_with(PROMPT_ERROR_PREFIX) => OutcomeStatus::PromptError,
            Some(_) => OutcomeStatus::BackendError,
        };
        Outcome {
            instance_id: self.instance_id.clone(),
            final_answer: self.final_answer.clone(),
            api_calls: self.api_calls,
            status,
        }
    }
}

const PROMPT_ERROR_PREFIX: &str = "prompt: ";

/// Runs one instance with the built-in templates.
pub fn run_instance(instance: &Instance, config: &RunConfig, backend: &dyn Backend) -> (Outcome, Trace) {
    run_instance_with(instance, config, backend, &PromptTemplates::builtin())
}

/// Runs one instance. The table is used as given; callers truncate it to
/// the token budget beforehand. Backend failures end the run with
/// [`OutcomeStatus::BackendError`] and a missing answer.
pub fn run_instance_with(
    instance: &Instance,
    config: &RunConfig,
    backend: &dyn Backend,
    templates: &PromptTemplates,
) -> (Outcome, Trace) {
    let mut trace = Trace {
        instance_id: instance.id.clone(),
        prompt: String::new(),
        rounds: Vec::new(),
        final_generation: String::new(),
        final_answer: FinalAnswer::Missing,
        api_calls: 0,
        error: None,
    };
    match templates.task_prompt(instance, config.include_demo) {
        Ok(p) => trace.prompt = p,
        Err(e) => {
            trace.error = Some(alloc::format!("{PROMPT_ERROR_PREFIX}{e}"));
            return (trace.outcome(), trace);
        }
    }
    if let Err(e) = drive(instance, config, backend, &mut trace) {
        trace.error = Some(e);
        trace.final_answer = FinalAnswer::Missing;
        return (trace.outcome(), trace);
    }
    trace.final_answer = extract_final_answer(&trace.final_generation, instance.task);
    (trace.outcome(), trace)
}

fn drive(instance: &Instance, config: &RunConfig, backend: &dyn Backend, trace: &mut Trace) -> Result<(), String> {
    let segmenter = Segmenter::new(config.result_markers.clone());
    let generate = |content: String, trace: &mut Trace| -> Result<String, String> {
        let result = backend
            .generate(&config.request(content))
            .map_err(|e| alloc::format!("{e}"))?;
        trace.api_calls += 1;
        Ok(result.text)
    };

    let first = generate(trace.prompt.clone(), trace)?;
    let mut assembled = first.clone();
    let mut round = Round::new(Some(first));
    let mut resolved = 0;
    let mut injections = 0;

    loop {
        let segments = segmenter.segment(&assembled);
        let Some(block) = segments.sql_blocks.get(resolved) else {
            trace.rounds.push(round);
            break;
        };
        round.detected_sql = Some(block.sql_text.clone());
        if injections >= config.max_injection_rounds {
            round.execution = Execution::Skipped;
            trace.rounds.push(round);
            break;
        }
        let injected = match parse_query(&block.sql_text).and_then(|q| execute(&q, &instance.table)) {
            Ok(result) => {
                let text = format_result(&result);
                round.execution = Execution::Ok { result: text.clone() };
                text
            }
            Err(e) => {
                round.execution = Execution::SqlError { message: e.to_string() };
                if !config.fallback_on_sql_error {
                    // No injection and no regeneration; move to the next
                    // block of the same text.
                    trace.rounds.push(core::mem::replace(&mut round, Round::new(None)));
                    resolved += 1;
                    continue;
                }
                round.fallback_used = true;
                block.claimed_result.clone().unwrap_or_default()
            }
        };
        let prefix = segmenter
            .resume_prefix(&assembled, resolved)
            .map_err(|e| alloc::format!("{e}"))?;
        round.injected_text = Some(injected.clone());
        trace.rounds.push(round);
        resolved += 1;
        injections += 1;

        let continuation = prefix + &injected;
        let next = generate(alloc::format!("{}{}", trace.prompt, continuation), trace)?;
        assembled = continuation + &next;
        round = Round::new(Some(next));
    }
    trace.final_generation = assembled;
    Ok(())
}
