//! Deterministic scripted backends and session recording.
//!
//! A replay script is JSONL with one `{"key"?, "response", "finish_reason"}`
//! object per generation. In keyed mode each request is answered by the next
//! unused entry whose key equals the request's prompt key, so concurrent
//! instances never steal each other's responses. Sequential mode ignores
//! keys and answers in file order; it is only deterministic when one caller
//! issues all requests.

use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use tabreason_core::{Backend, BackendError, FinishReason, GenerationRequest, GenerationResult};

use crate::io::{read_jsonl, to_jsonl, write_text, IoFailure};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    pub response: String,
    /// Defaults to `stop` so hand-written scripts can omit it.
    #[serde(default = "stop")]
    pub finish_reason: FinishReason,
}

fn stop() -> FinishReason {
    FinishReason::Stop
}

impl ScriptEntry {
    pub fn result(&self) -> GenerationResult {
        GenerationResult { text: self.response.clone(), finish_reason: self.finish_reason }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplayMode {
    Keyed,
    Sequential,
}

#[derive(Debug)]
enum Queue {
    Sequential(VecDeque<GenerationResult>),
    Keyed(HashMap<String, VecDeque<GenerationResult>>),
}

#[derive(Debug)]
pub struct ReplayBackend {
    queue: Mutex<Queue>,
}

impl ReplayBackend {
    /// Sequential script of plain responses that finished normally.
    pub fn sequential<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        let results = responses
            .into_iter()
            .map(|r| GenerationResult { text: r.into(), finish_reason: FinishReason::Stop })
            .collect();
        ReplayBackend { queue: Mutex::new(Queue::Sequential(results)) }
    }

    /// Keyed mode needs a key on every entry; the error names the first
    /// 0-based entry without one.
    pub fn from_entries(entries: &[ScriptEntry], mode: ReplayMode) -> Result<Self, usize> {
        let queue = match mode {
            ReplayMode::Sequential => Queue::Sequential(entries.iter().map(ScriptEntry::result).collect()),
            ReplayMode::Keyed => {
                let mut map: HashMap<String, VecDeque<GenerationResult>> = HashMap::new();
                for (i, e) in entries.iter().enumerate() {
                    let key = e.key.clone().ok_or(i)?;
                    map.entry(key).or_default().push_back(e.result());
                }
                Queue::Keyed(map)
            }
        };
        Ok(ReplayBackend { queue: Mutex::new(queue) })
    }

    /// Keyed when every entry carries a key, sequential when none does.
    pub fn detect_mode(entries: &[ScriptEntry]) -> Option<ReplayMode> {
        let keyed = entries.iter().filter(|e| e.key.is_some()).count();
        if keyed == entries.len() && keyed > 0 {
            Some(ReplayMode::Keyed)
        } else if keyed == 0 {
            Some(ReplayMode::Sequential)
        } else {
            None
        }
    }

    /// Loads a script file, detecting its mode. Mixing keyed and unkeyed
    /// entries is rejected.
    pub fn load(path: &Path) -> Result<Self, IoFailure> {
        let entries: Vec<ScriptEntry> = read_jsonl(path)?;
        let mode = Self::detect_mode(&entries).ok_or_else(|| IoFailure::Invalid {
            path: path.to_path_buf(),
            message: "script mixes keyed and unkeyed entries".into(),
        })?;
        Self::from_entries(&entries, mode).map_err(|i| IoFailure::Invalid {
            path: path.to_path_buf(),
            message: format!("entry {} has no key", i + 1),
        })
    }

    /// Responses not yet handed out.
    pub fn remaining(&self) -> usize {
        match &*self.queue.lock().unwrap_or_else(|e| e.into_inner()) {
            Queue::Sequential(q) => q.len(),
            Queue::Keyed(map) => map.values().map(VecDeque::len).sum(),
        }
    }
}

impl Backend for ReplayBackend {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        request.validate()?;
        let mut queue = self.queue.lock().unwrap_or_else(|e| e.into_inner());
        match &mut *queue {
            Queue::Sequential(q) => q.pop_front().ok_or(BackendError::ScriptExhausted),
            Queue::Keyed(map) => {
                let key = request.key();
                match map.get_mut(&key) {
                    None => Err(BackendError::ScriptMismatch { key }),
                    Some(q) => q.pop_front().ok_or(BackendError::ScriptExhausted),
                }
            }
        }
    }
}

/// Passes requests through and logs every completed generation with its
/// prompt key.
#[derive(Debug)]
pub struct RecordingBackend<B> {
    inner: B,
    log: Mutex<Vec<ScriptEntry>>,
}

impl<B> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        RecordingBackend { inner, log: Mutex::new(Vec::new()) }
    }

    /// Recorded entries grouped by key, with each key's calls in the order
    /// they happened. The grouping makes the script independent of how
    /// concurrent instances interleaved.
    pub fn entries(&self) -> Vec<ScriptEntry> {
        let mut entries = self.log.lock().unwrap_or_else(|e| e.into_inner()).clone();
        entries.sort_by(|a, b| a.key.cmp(&b.key));
        entries
    }

    /// Writes the session as a keyed replay script.
    pub fn write_script(&self, path: &Path) -> Result<(), IoFailure> {
        write_script(path, &self.entries())
    }
}

impl<B: Backend> Backend for RecordingBackend<B> {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        let result = self.inner.generate(request)?;
        self.log.lock().unwrap_or_else(|e| e.into_inner()).push(ScriptEntry {
            key: Some(request.key()),
            response: result.text.clone(),
            finish_reason: result.finish_reason,
        });
        Ok(result)
    }
}

/// Writes `entries` as JSONL. An empty session is an error.
pub fn write_script(path: &Path, entries: &[ScriptEntry]) -> Result<(), IoFailure> {
    if entries.is_empty() {
        return Err(IoFailure::Empty { path: path.to_path_buf() });
    }
    let text = to_jsonl(entries).map_err(|source| IoFailure::Parse { path: path.to_path_buf(), line: 0, source })?;
    write_text(path, &text)
}
