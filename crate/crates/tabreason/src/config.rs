//! `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Recognized keys:
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `max_new_tokens` | output length per generation | 1024 |
//! | `temperature` | sampling temperature | 0 |
//! | `table_token_budget` | estimated-token budget for the serialized table | 2048 |
//! | `max_injection_rounds` | cap on executed SQL blocks per instance | 4 |
//! | `include_demo` | prepend the worked demonstration | true |
//! | `fallback_on_sql_error` | inject the model's claimed result when SQL fails | true |
//! | `result_markers` | comma-separated result marker spellings | `Executed result:,Expected result:,Result:` |
//! | `templates_dir` | directory overriding the built-in prompt templates | none |
//! | `base_url` | OpenAI-compatible endpoint root | `https://api.openai.com/v1` |
//! | `model` | model name sent to the endpoint | `gpt-4` |
//! | `api_key_env` | environment variable holding the bearer token | `OPENAI_API_KEY` |
//! | `max_attempts` | HTTP attempts per generation | 3 |
//! | `timeout_secs` | per-attempt HTTP timeout | 120 |
//! | `initial_backoff_ms` | delay before the first retry, doubled afterwards | 1000 |
//!
//! A relative `templates_dir` is resolved against the config file's
//! directory.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use tabreason_core::RunConfig;
use thiserror::Error;

use crate::http::HttpConfig;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Settings {
    pub run: RunConfig,
    pub http: HttpConfig,
    pub templates_dir: Option<PathBuf>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T, String> {
    raw.parse().map_err(|_| format!("bad value {raw:?} for {key}"))
}

fn flag(key: &str, raw: &str) -> Result<bool, String> {
    match raw.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(format!("bad boolean {raw:?} for {key}")),
    }
}

impl Settings {
    fn apply(&mut self, key: &str, raw: &str) -> Result<(), String> {
        match key {
            "max_new_tokens" => self.run.max_new_tokens = value(key, raw)?,
            "temperature" => self.run.temperature = value(key, raw)?,
            "table_token_budget" => self.run.table_token_budget = value(key, raw)?,
            "max_injection_rounds" => self.run.max_injection_rounds = value(key, raw)?,
            "include_demo" => self.run.include_demo = flag(key, raw)?,
            "fallback_on_sql_error" => self.run.fallback_on_sql_error = flag(key, raw)?,
            "result_markers" => {
                let markers: Vec<String> =
                    raw.split(',').map(str::trim).filter(|m| !m.is_empty()).map(String::from).collect();
                if markers.is_empty() {
                    return Err("result_markers needs at least one marker".into());
                }
                self.run.result_markers = markers;
            }
            "templates_dir" => self.templates_dir = Some(PathBuf::from(raw)),
            "base_url" => self.http.base_url = raw.trim_end_matches('/').to_string(),
            "model" => self.http.model = raw.to_string(),
            "api_key_env" => self.http.api_key_env = raw.to_string(),
            "max_attempts" => {
                self.http.max_attempts = value(key, raw)?;
                if self.http.max_attempts == 0 {
                    return Err("max_attempts must be at least 1".into());
                }
            }
            "timeout_secs" => self.http.timeout = Duration::from_secs(value(key, raw)?),
            "initial_backoff_ms" => self.http.initial_backoff = Duration::from_millis(value(key, raw)?),
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }
}

/// Parses a config file body on top of the defaults.
pub fn parse_config(text: &str) -> Result<Settings, ConfigError> {
    let mut settings = Settings::default();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| ConfigError::Line { line: i + 1, message };
        let (key, raw) = line.split_once('=').ok_or_else(|| err("expected key = value".into()))?;
        settings.apply(key.trim(), raw.trim()).map_err(err)?;
    }
    settings.run.validate().map_err(ConfigError::Invalid)?;
    Ok(settings)
}

/// Reads and parses `path`, resolving a relative `templates_dir`.
pub fn load_config(path: &Path) -> anyhow::Result<Settings> {
    let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    let mut settings = parse_config(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    if let Some(dir) = &settings.templates_dir {
        if dir.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            settings.templates_dir = Some(base.join(dir));
        }
    }
    Ok(settings)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_when_empty() {
        let s = parse_config("# nothing\n\n").unwrap();
        assert_eq!(s, Settings::default());
        assert_eq!(s.run.max_new_tokens, 1024);
        assert_eq!(s.http.max_attempts, 3);
    }

    #[test]
    fn every_key_parses() {
        let text = "max_new_tokens = 64\ntemperature=0.7\ntable_token_budget = 100\nmax_injection_rounds = 2\n\
                    include_demo = no\nfallback_on_sql_error = false\nresult_markers = Output:, Result:\n\
                    templates_dir = tpl\nbase_url = http://localhost:8000/v1/\nmodel = local\napi_key_env = KEY\n\
                    max_attempts = 5\ntimeout_secs = 9\ninitial_backoff_ms = 10\n";
        let s = parse_config(text).unwrap();
        assert_eq!(s.run.max_new_tokens, 64);
        assert_eq!(s.run.temperature, 0.7);
        assert_eq!(s.run.table_token_budget, 100);
        assert_eq!(s.run.max_injection_rounds, 2);
        assert!(!s.run.include_demo && !s.run.fallback_on_sql_error);
        assert_eq!(s.run.result_markers, ["Output:", "Result:"]);
        assert_eq!(s.templates_dir, Some(PathBuf::from("tpl")));
        assert_eq!(s.http.base_url, "http://localhost:8000/v1");
        assert_eq!((s.http.model.as_str(), s.http.api_key_env.as_str()), ("local", "KEY"));
        assert_eq!(s.http.max_attempts, 5);
        assert_eq!(s.http.timeout, Duration::from_secs(9));
        assert_eq!(s.http.initial_backoff, Duration::from_millis(10));
    }

    #[test]
    fn errors_name_the_line() {
        assert_eq!(
            parse_config("model = x\nbogus = 1").unwrap_err(),
            ConfigError::Line { line: 2, message: "unknown key \"bogus\"".into() }
        );
        assert!(matches!(parse_config("max_new_tokens = lots"), Err(ConfigError::Line { line: 1, .. })));
        assert!(matches!(parse_config("no equals sign"), Err(ConfigError::Line { .. })));
        assert!(matches!(parse_config("max_injection_rounds = 0"), Err(ConfigError::Invalid(_))));
        assert!(matches!(parse_config("max_attempts = 0"), Err(ConfigError::Line { .. })));
    }

    #[test]
    fn relative_templates_dir_follows_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "templates_dir = tpl\n").unwrap();
        assert_eq!(load_config(&path).unwrap().templates_dir, Some(dir.path().join("tpl")));
    }
}
