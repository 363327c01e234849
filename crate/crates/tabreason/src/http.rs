//! OpenAI-compatible chat-completions backend.
//!
//! Each generation is one `POST {base_url}/chat/completions`. Transport
//! failures, 429 and 5xx responses are retried with exponential backoff up
//! to `max_attempts` attempts; other statuses fail at once. Only a request
//! that returns a result counts as an API call, so wrapping this backend in
//! [`tabreason_core::backend::Counted`] counts successes, not attempts.

use std::thread;
use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};
use tabreason_core::{Backend, BackendError, FinishReason, GenerationRequest, GenerationResult};

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    /// Endpoint root without a trailing slash, e.g. `http://localhost:8000/v1`.
    pub base_url: String,
    pub model: String,
    /// Environment variable read for the bearer token. An unset variable
    /// sends no `Authorization` header, which suits local servers.
    pub api_key_env: String,
    pub max_attempts: u32,
    pub timeout: Duration,
    pub initial_backoff: Duration,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            max_attempts: 3,
            timeout: Duration::from_secs(120),
            initial_backoff: Duration::from_millis(1000),
        }
    }
}

#[derive(Debug)]
pub struct HttpBackend {
    config: HttpConfig,
    agent: ureq::Agent,
}

enum Attempt {
    Retry(String),
    Fatal(String),
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

/// Maps a completion body to a result. Empty content is reported with
/// [`FinishReason::Error`] so that an empty text always signals a problem.
pub fn parse_completion(body: &Value) -> Result<GenerationResult, String> {
    let completion: Completion = serde_json::from_value(body.clone()).map_err(|e| format!("malformed completion: {e}"))?;
    let choice = completion.choices.into_iter().next().ok_or("completion has no choices")?;
    let text = choice.message.content.unwrap_or_default();
    let finish_reason = if text.is_empty() {
        FinishReason::Error
    } else if choice.finish_reason.as_deref() == Some("length") {
        FinishReason::Length
    } else {
        FinishReason::Stop
    };
    Ok(GenerationResult { text, finish_reason })
}

/// Request body for `request` under `model`.
pub fn request_body(model: &str, request: &GenerationRequest) -> Value {
    let mut body = json!({
        "model": model,
        "messages": request.messages,
        "temperature": request.temperature,
        "max_tokens": request.max_new_tokens,
    });
    if let Some(stop) = &request.stop {
        body["stop"] = json!(stop);
    }
    body
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpBackend { config, agent }
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn attempt(&self, body: &Value) -> Result<GenerationResult, Attempt> {
        let url = format!("{}/chat/completions", self.config.base_url);
        let mut call = self.agent.post(&url).header("Content-Type", "application/json");
        if let Ok(key) = std::env::var(&self.config.api_key_env) {
            call = call.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = call.send_json(body).map_err(|e| Attempt::Retry(format!("transport error: {e}")))?;
        let status = response.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Attempt::Retry(format!("status {status}")));
        }
        if !(200..300).contains(&status) {
            let detail = response.body_mut().read_to_string().unwrap_or_default();
            return Err(Attempt::Fatal(format!("status {status}: {}", detail.trim())));
        }
        let value: Value = response
            .body_mut()
            .read_json()
            .map_err(|e| Attempt::Fatal(format!("unreadable response body: {e}")))?;
        parse_completion(&value).map_err(Attempt::Fatal)
    }
}

impl Backend for HttpBackend {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        request.validate()?;
        let body = request_body(&self.config.model, request);
        let attempts = self.config.max_attempts.max(1);
        let mut delay = self.config.initial_backoff;
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.attempt(&body) {
                Ok(result) => return Ok(result),
                Err(Attempt::Fatal(message)) => return Err(BackendError::BackendUnavailable(message)),
                Err(Attempt::Retry(message)) => last = message,
            }
            if attempt < attempts {
                thread::sleep(delay);
                delay = delay.saturating_mul(2);
            }
        }
        Err(BackendError::BackendUnavailable(format!("{last} after {attempts} attempts")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tabreason_core::backend::Message;

    #[test]
    fn body_shape() {
        let req = GenerationRequest {
            messages: vec![Message::user("hi")],
            max_new_tokens: 1024,
            temperature: 0.0,
            stop: None,
        };
        let body = request_body("m", &req);
        assert_eq!(body["model"], "m");
        assert_eq!(body["max_tokens"], 1024);
        assert_eq!(body["messages"][0]["role"], "user");
        assert_eq!(body["messages"][0]["content"], "hi");
        assert!(body.get("stop").is_none());
        let with_stop = GenerationRequest { stop: Some(vec!["##".into()]), ..req };
        assert_eq!(request_body("m", &with_stop)["stop"][0], "##");
    }

    #[test]
    fn completion_parsing() {
        let ok = json!({"choices": [{"message": {"role": "assistant", "content": "x"}, "finish_reason": "stop"}]});
        assert_eq!(parse_completion(&ok).unwrap(), GenerationResult { text: "x".into(), finish_reason: FinishReason::Stop });
        let cut = json!({"choices": [{"message": {"content": "x"}, "finish_reason": "length"}]});
        assert_eq!(parse_completion(&cut).unwrap().finish_reason, FinishReason::Length);
        let empty = json!({"choices": [{"message": {"content": null}}]});
        assert_eq!(parse_completion(&empty).unwrap().finish_reason, FinishReason::Error);
        assert!(parse_completion(&json!({"choices": []})).is_err());
        assert!(parse_completion(&json!({"error": "x"})).is_err());
    }
}
