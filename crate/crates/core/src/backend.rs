//! Generation interface shared by the orchestrator, the judge, and the
//! dataset builder, plus the call counter and the prompt key used by keyed
//! replay.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::text::collapse_whitespace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Message { role: Role::User, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub messages: Vec<Message>,
    pub max_new_tokens: u32,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<Vec<String>>,
}

impl GenerationRequest {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.max_new_tokens == 0 {
            return Err(BackendError::InvalidRequest("max_new_tokens must be positive".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(BackendError::InvalidRequest("temperature must be non-negative".into()));
        }
        if self.messages.is_empty() {
            return Err(BackendError::InvalidRequest("no messages".into()));
        }
        Ok(())
    }

    /// Replay key of this request's messages.
    pub fn key(&self) -> String {
        prompt_key(&self.messages)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub text: String,
    pub finish_reason: FinishReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("replay script exhausted")]
    ScriptExhausted,
    #[error("no scripted response for prompt key {key}")]
    ScriptMismatch { key: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

/// A text generator. Implementations must tolerate concurrent callers.
pub trait Backend: Send + Sync {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError>;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        (**self).generate(request)
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        (**self).generate(request)
    }
}

/// SHA-256 hex of the `role:content` lines with whitespace runs collapsed,
/// so serialization drift in spacing does not change the key.
pub fn prompt_key(messages: &[Message]) -> String {
    let mut hasher = Sha256::new();
    for (i, m) in messages.iter().enumerate() {
        if i > 0 {
            hasher.update(b"\n");
        }
        hasher.update(m.role.as_str().as_bytes());
        hasher.update(b":");
        hasher.update(collapse_whitespace(&m.content).as_bytes());
    }
    hex::encode(hasher.finalize())
}

/// Monotone count of completed generations.
#[derive(Debug, Default)]
pub struct CallCounter(AtomicUsize);

impl CallCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    pub fn get(&self) -> usize {
        self.0.load(Ordering::Relaxed)
    }
}

/// Wraps a backend and counts requests that returned a result. Failed
/// requests are not counted.
#[derive(Debug, Default)]
pub struct Counted<B> {
    inner: B,
    calls: CallCounter,
}

impl<B> Counted<B> {
    pub fn new(inner: B) -> Self {
        Counted { inner, calls: CallCounter::new() }
    }

    pub fn calls(&self) -> usize {
        self.calls.get()
    }

    pub fn inner(&self) -> &B {
        &self.inner
    }
}

impl<B: Backend> Backend for Counted<B> {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        let result = self.inner.generate(request)?;
        self.calls.record();
        Ok(result)
    }
}
