//! Code-model access: a remote completion endpoint or a deterministic
//! rulebook mock, behind one [`CodeModel`] trait.

mod http;
mod mock;
mod ratelimit;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use http::{extract_completion, HttpBackend};
pub use mock::Rulebook;
pub use ratelimit::{RateLimiter, SlidingWindow};

use crate::corpus::fenced_blocks;

pub const DEFAULT_TEMPERATURE: f64 = 0.4;
pub const GENERATION_MAX_TOKENS: u32 = 512;
pub const CONVERSION_MAX_TOKENS: u32 = 1024;

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("no rulebook entry matches prompt starting {prompt_head:?}")]
    MockMiss { prompt_head: String },
    #[error("rulebook {path}: {reason}")]
    Rulebook { path: String, reason: String },
    #[error("HTTP {status}: {detail}")]
    Http { status: u16, detail: String },
    #[error("malformed response: {0}")]
    BadResponse(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("completion contains no code block")]
    EmptyConversion,
    #[error("environment variable {0} is not set")]
    MissingSecret(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_new_tokens: u32,
    pub stop_sequences: Vec<String>,
    pub model_id: String,
}

impl CompletionRequest {
    pub fn new(prompt: &str, model_id: &str) -> Self {
        CompletionRequest {
            prompt: prompt.to_string(),
            temperature: DEFAULT_TEMPERATURE,
            max_new_tokens: GENERATION_MAX_TOKENS,
            stop_sequences: Vec::new(),
            model_id: model_id.to_string(),
        }
    }
}

pub trait CodeModel: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<String, BackendError>;

    fn model_id(&self) -> &str {
        ""
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendLocator {
    HttpEndpoint { url: String },
    MockRulebook { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub locator: BackendLocator,
    pub model_id: String,
    /// Name of the environment variable holding a bearer token.
    pub auth_env: Option<String>,
    pub rate_limit_per_minute: Option<usize>,
}

enum Inner {
    Http(HttpBackend),
    Mock(Rulebook),
}

/// A configured backend. Shareable across threads.
pub struct Backend {
    inner: Inner,
    model_id: String,
    limiter: Option<RateLimiter>,
}

impl Backend {
    pub fn mock(rulebook: Rulebook) -> Self {
        Backend {
            inner: Inner::Mock(rulebook),
            model_id: "mock".into(),
            limiter: None,
        }
    }

    pub fn http(backend: HttpBackend, model_id: &str) -> Self {
        Backend {
            inner: Inner::Http(backend),
            model_id: model_id.to_string(),
            limiter: None,
        }
    }

    pub fn with_rate_limit(mut self, per_minute: usize) -> Self {
        self.limiter = Some(RateLimiter::per_minute(per_minute));
        self
    }

    pub fn from_descriptor(d: &BackendDescriptor) -> Result<Self, BackendError> {
        let mut b = match &d.locator {
            BackendLocator::MockRulebook { path } => Backend::mock(Rulebook::load(path)?),
            BackendLocator::HttpEndpoint { url } => {
                let mut h = HttpBackend::new(url);
                if let Some(var) = &d.auth_env {
                    h.token = Some(std::env::var(var).map_err(|_| BackendError::MissingSecret(var.clone()))?);
                }
                Backend::http(h, &d.model_id)
            }
        };
        if !d.model_id.is_empty() {
            b.model_id = d.model_id.clone();
        }
        if let Some(n) = d.rate_limit_per_minute.filter(|&n| n > 0) {
            b = b.with_rate_limit(n);
        }
        Ok(b)
    }
}

impl CodeModel for Backend {
    fn complete(&self, req: &CompletionRequest) -> Result<String, BackendError> {
        if let Some(l) = &self.limiter {
            l.acquire();
        }
        match &self.inner {
            Inner::Mock(rb) => rb.lookup(&req.prompt).map(str::to_string),
            Inner::Http(h) => h.complete(req),
        }
    }

    fn model_id(&self) -> &str {
        &self.model_id
    }
}

/// Instruction used both as the conversion dataset's `problem` field and as
/// the conversion prompt at seed-generation time.
pub fn conversion_problem(target_display: &str) -> String {
    format!("Convert this code to code that uses the target library ({target_display})")
}

pub fn generation_instruction(api_name: &str, target_display: &str) -> String {
    format!(
        "Generate a code snippet that calls {api_name} from the target library ({target_display}). \
Use inputs that include NaNs and Infs, edge cases, and values likely to trigger the API's error checking."
    )
}

/// Body of the first fenced block; later blocks are ignored.
pub fn first_code_block(completion: &str) -> Option<String> {
    let blocks = fenced_blocks(completion);
    if blocks.len() > 1 {
        log::debug!("completion has {} code blocks; using the first", blocks.len());
    }
    blocks.into_iter().map(|b| b.body).find(|b| !b.trim().is_empty())
}

pub fn convert_code(
    model: &dyn CodeModel,
    source_code: &str,
    target_display: &str,
    temperature: f64,
) -> Result<String, BackendError> {
    convert_with(model, &conversion_problem(target_display), source_code, temperature)
}

/// Source-library implementation of a target-library program, used to pair
/// generated seeds for cross-library comparison.
pub fn source_counterpart(
    model: &dyn CodeModel,
    target_code: &str,
    source_display: &str,
    temperature: f64,
) -> Result<String, BackendError> {
    let instruction = format!("Convert this code to code that uses the source library ({source_display})");
    convert_with(model, &instruction, target_code, temperature)
}

fn convert_with(model: &dyn CodeModel, instruction: &str, code: &str, temperature: f64) -> Result<String, BackendError> {
    let prompt = format!("{instruction}\n\n```python\n{}\n```\n", code.trim_end());
    let mut req = CompletionRequest::new(&prompt, model.model_id());
    req.temperature = temperature;
    req.max_new_tokens = CONVERSION_MAX_TOKENS;
    first_code_block(&model.complete(&req)?).ok_or(BackendError::EmptyConversion)
}

pub fn generate_code(
    model: &dyn CodeModel,
    api_name: &str,
    target_display: &str,
    temperature: f64,
) -> Result<String, BackendError> {
    let mut req = CompletionRequest::new(&generation_instruction(api_name, target_display), model.model_id());
    req.temperature = temperature;
    req.max_new_tokens = GENERATION_MAX_TOKENS;
    first_code_block(&model.complete(&req)?).ok_or(BackendError::EmptyConversion)
}
