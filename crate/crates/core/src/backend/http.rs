use std::time::Duration;

use serde_json::{json, Value};

use super::{BackendError, CompletionRequest};

/// Completion endpoint speaking a completions/chat-style JSON protocol.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    pub url: String,
    pub token: Option<String>,
    pub max_retries: u32,
    pub backoff: Duration,
    pub timeout: Duration,
}

impl HttpBackend {
    pub fn new(url: &str) -> Self {
        HttpBackend {
            url: url.to_string(),
            token: None,
            max_retries: 3,
            backoff: Duration::from_millis(250),
            timeout: Duration::from_secs(120),
        }
    }

    pub fn complete(&self, req: &CompletionRequest) -> Result<String, BackendError> {
        let agent = ureq::AgentBuilder::new().timeout(self.timeout).build();
        let body = json!({
            "model": req.model_id,
            "prompt": req.prompt,
            "temperature": req.temperature,
            "max_new_tokens": req.max_new_tokens,
            "stop": req.stop_sequences,
        });
        let mut last = String::new();
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.saturating_pow(attempt - 1));
            }
            let mut call = agent.post(&self.url);
            if let Some(t) = &self.token {
                call = call.set("Authorization", &format!("Bearer {t}"));
            }
            match call.send_json(body.clone()) {
                Ok(resp) => {
                    let v: Value = resp.into_json().map_err(|e| BackendError::BadResponse(e.to_string()))?;
                    return extract_completion(&v)
                        .map(str::to_string)
                        .ok_or_else(|| BackendError::BadResponse(format!("no completion text in {v}")));
                }
                Err(ureq::Error::Status(code, resp)) => {
                    last = format!("HTTP {code}");
                    if !(code == 429 || code >= 500) {
                        let text = resp.into_string().unwrap_or_default();
                        return Err(BackendError::Http {
                            status: code,
                            detail: text.chars().take(200).collect(),
                        });
                    }
                }
                Err(e) => last = e.to_string(),
            }
            log::warn!("{}: attempt {} failed: {last}", self.url, attempt + 1);
        }
        Err(BackendError::Exhausted {
            attempts: self.max_retries + 1,
            last,
        })
    }
}

/// Accepts `{"choices":[{"text":..}]}`, `{"choices":[{"message":{"content":..}}]}`
/// and `{"completion":..}`.
pub fn extract_completion(v: &Value) -> Option<&str> {
    if let Some(c) = v.get("choices").and_then(|c| c.get(0)) {
        if let Some(t) = c.get("text").and_then(Value::as_str) {
            return Some(t);
        }
        if let Some(t) = c.pointer("/message/content").and_then(Value::as_str) {
            return Some(t);
        }
    }
    v.get("completion").and_then(Value::as_str)
}
