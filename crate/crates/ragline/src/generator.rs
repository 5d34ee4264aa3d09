//! Prompt assembly and chat completion.
//!
//! The system message carries the clinical instruction template (eight
//! numbered answer components); the user message carries the retrieved
//! guideline excerpts — each prefixed with a `[title, p.N]` citation — and
//! then the scenario. Context rides in the user message, not the system
//! message, and appears before the scenario; both choices are fixed
//! conventions so outputs stay diffable.
//!
//! Completions come from a remote chat endpoint or from [`StubProvider`],
//! a deterministic test double that echoes its grounding chunk ids. Remote
//! model output is nondeterministic and unverifiable, so every pipeline
//! test runs against the stub.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::remote::{self, RemoteError, RetryPolicy};
use crate::retriever::ContextBundle;

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("empty scenario")]
    EmptyScenario,
    #[error("rag mode requires a retrieved context bundle")]
    MissingContext,
    #[error("bare mode must not receive a context bundle")]
    UnexpectedContext,
    #[error("invalid prompt template: {0}")]
    BadTemplate(String),
    #[error("invalid generation config: {0}")]
    Config(String),
    #[error("missing API key: set {}", remote::API_KEY_VAR)]
    MissingApiKey,
    #[error("generation service error: {0}")]
    Service(RemoteError),
    #[error("malformed completion response: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<RemoteError> for GenerateError {
    fn from(err: RemoteError) -> Self {
        match err {
            RemoteError::MissingApiKey => GenerateError::MissingApiKey,
            RemoteError::Malformed(m) => GenerateError::Malformed(m),
            other => GenerateError::Service(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }
}

/// Model family, which fixes the default sampling temperature:
/// 0 for GPT-style models, 0.1 for LLAMA2-style models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    GptLike,
    LlamaLike,
    Stub,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GenerationMode {
    #[default]
    Rag,
    Bare,
}

/// Model choice and sampling parameters. `base_url` is the remote endpoint
/// root; irrelevant for the stub.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub model_id: String,
    pub family: ModelFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    #[serde(default)]
    pub mode: GenerationMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            model_id: "stub".into(),
            family: ModelFamily::Stub,
            temperature: None,
            max_tokens: None,
            mode: GenerationMode::Rag,
            base_url: None,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), GenerateError> {
        if self.model_id.is_empty() {
            return Err(GenerateError::Config("model_id must be set".into()));
        }
        if let Some(t) = self.temperature {
            if !(t >= 0.0) {
                return Err(GenerateError::Config(format!(
                    "temperature must be >= 0, got {t}"
                )));
            }
        }
        Ok(())
    }

    /// The configured temperature, or the family default when unset.
    pub fn effective_temperature(&self) -> f64 {
        self.temperature.unwrap_or(match self.family {
            ModelFamily::GptLike | ModelFamily::Stub => 0.0,
            ModelFamily::LlamaLike => 0.1,
        })
    }
}

/// The system instruction text plus the header that introduces retrieved
/// context in the user message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub system_text: String,
    pub context_header: String,
}

const DEFAULT_SYSTEM_TEXT: &str = include_str!("default_template.txt");
const DEFAULT_CONTEXT_HEADER: &str =
    "Ground your instructions in the following guideline excerpts:";

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            system_text: DEFAULT_SYSTEM_TEXT.to_string(),
            context_header: DEFAULT_CONTEXT_HEADER.to_string(),
        }
    }
}

impl PromptTemplate {
    /// Build from explicit system text, enforcing the component structure.
    pub fn from_system_text(system_text: impl Into<String>) -> Result<Self, GenerateError> {
        let template = PromptTemplate {
            system_text: system_text.into(),
            context_header: DEFAULT_CONTEXT_HEADER.to_string(),
        };
        template.validate()?;
        Ok(template)
    }

    /// Load the system text from a file.
    pub fn load(path: &Path) -> Result<Self, GenerateError> {
        Self::from_system_text(std::fs::read_to_string(path)?)
    }

    /// The system text must contain exactly eight numbered instruction
    /// components, in order, each on its own line ("1. ..." through
    /// "8. ...").
    pub fn validate(&self) -> Result<(), GenerateError> {
        let numbers: Vec<u32> = self
            .system_text
            .lines()
            .filter_map(|line| {
                let trimmed = line.trim_start();
                let digits: String = trimmed.chars().take_while(char::is_ascii_digit).collect();
                if !digits.is_empty() && trimmed[digits.len()..].starts_with(". ") {
                    digits.parse().ok()
                } else {
                    None
                }
            })
            .collect();
        if numbers != [1, 2, 3, 4, 5, 6, 7, 8] {
            return Err(GenerateError::BadTemplate(format!(
                "expected numbered components 1-8, found {numbers:?}"
            )));
        }
        Ok(())
    }
}

/// Citation line for one retrieved chunk: `[title, p.N]`.
fn citation(result: &crate::vector_store::QueryResult) -> String {
    let title = result
        .metadata
        .get("title")
        .cloned()
        .unwrap_or_else(|| result.id.clone());
    let page = result.metadata.get("page_no").cloned().unwrap_or_else(|| "?".into());
    format!("[{title}, p.{page}]")
}

/// Build the outgoing messages: the template as the system message, then a
/// user message of (in rag mode) context header, one cited excerpt per
/// retrieved chunk, and finally the scenario text.
pub fn assemble_prompt(
    scenario_text: &str,
    context: Option<&ContextBundle>,
    template: &PromptTemplate,
    config: &GenerationConfig,
) -> Result<Vec<ChatMessage>, GenerateError> {
    template.validate()?;
    config.validate()?;
    if scenario_text.trim().is_empty() {
        return Err(GenerateError::EmptyScenario);
    }
    let bundle = match (config.mode, context) {
        (GenerationMode::Rag, Some(bundle)) => Some(bundle),
        (GenerationMode::Rag, None) => return Err(GenerateError::MissingContext),
        (GenerationMode::Bare, None) => None,
        (GenerationMode::Bare, Some(_)) => return Err(GenerateError::UnexpectedContext),
    };

    let mut user = String::new();
    if let Some(bundle) = bundle {
        if !bundle.results.is_empty() {
            user.push_str(&template.context_header);
            user.push_str("\n\n");
            for result in &bundle.results {
                user.push_str(&citation(result));
                user.push('\n');
                user.push_str(&result.text);
                user.push_str("\n\n");
            }
        }
    }
    user.push_str(scenario_text);

    Ok(vec![
        ChatMessage::system(template.system_text.clone()),
        ChatMessage::user(user),
    ])
}

/// What a provider needs to produce a completion. `context_ids` lets the
/// stub echo its grounding; the remote provider ignores them (they never
/// reach the wire).
#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model_id: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub messages: Vec<ChatMessage>,
    pub context_ids: Vec<String>,
}

pub trait ChatProvider {
    fn complete(&self, request: &ChatRequest) -> Result<String, GenerateError>;
}

/// Remote chat-completions endpoint.
pub struct RemoteProvider {
    pub base_url: String,
    pub policy: RetryPolicy,
}

impl RemoteProvider {
    pub fn new(base_url: impl Into<String>) -> Self {
        RemoteProvider {
            base_url: base_url.into(),
            policy: RetryPolicy::default(),
        }
    }
}

impl ChatProvider for RemoteProvider {
    fn complete(&self, request: &ChatRequest) -> Result<String, GenerateError> {
        #[derive(Deserialize)]
        struct Choice {
            message: IncomingMessage,
        }
        #[derive(Deserialize)]
        struct IncomingMessage {
            content: String,
        }
        #[derive(Deserialize)]
        struct Reply {
            choices: Vec<Choice>,
        }

        let api_key = remote::api_key()?;
        let url = format!("{}/chat/completions", self.base_url.trim_end_matches('/'));
        let mut body = serde_json::json!({
            "model": request.model_id,
            "temperature": request.temperature,
            "messages": request.messages,
        });
        if let Some(max_tokens) = request.max_tokens {
            body["max_tokens"] = max_tokens.into();
        }

        let client = remote::http_client();
        let reply = remote::post_json(&client, &url, &api_key, &body, &self.policy)?;
        let reply: Reply = serde_json::from_value(reply)
            .map_err(|e| GenerateError::Malformed(format!("chat reply: {e}")))?;
        let first = reply
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| GenerateError::Malformed("no choices in reply".into()))?;
        Ok(first.message.content)
    }
}

/// Deterministic offline provider: names the model and lists the chunk ids
/// it was grounded on, one per line.
#[derive(Debug, Default, Clone, Copy)]
pub struct StubProvider;

impl ChatProvider for StubProvider {
    fn complete(&self, request: &ChatRequest) -> Result<String, GenerateError> {
        if request.context_ids.is_empty() {
            return Ok(format!("[stub:{}] no retrieved context.", request.model_id));
        }
        let mut out = format!(
            "[stub:{}] grounded on {} chunks:\n",
            request.model_id,
            request.context_ids.len()
        );
        for id in &request.context_ids {
            out.push_str(id);
            out.push('\n');
        }
        Ok(out)
    }
}

/// One completed generation, as logged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub model_id: String,
    pub mode: GenerationMode,
    pub scenario_id: String,
    pub messages: Vec<ChatMessage>,
    pub completion: String,
    pub retrieved_chunk_ids: Vec<String>,
    pub latency_ms: u64,
    pub timestamp: String,
}

/// Run one generation and record it. In rag mode `context_ids` must be
/// exactly the chunk ids of the bundle the prompt was assembled from.
pub fn generate(
    messages: Vec<ChatMessage>,
    config: &GenerationConfig,
    provider: &dyn ChatProvider,
    scenario_id: &str,
    context_ids: Vec<String>,
) -> Result<GenerationRecord, GenerateError> {
    config.validate()?;
    let request = ChatRequest {
        model_id: config.model_id.clone(),
        temperature: config.effective_temperature(),
        max_tokens: config.max_tokens,
        messages,
        context_ids,
    };

    let started = Instant::now();
    let completion = provider.complete(&request)?;
    let latency_ms = started.elapsed().as_millis() as u64;
    if completion.is_empty() {
        log::warn!("empty completion from {}; record kept", request.model_id);
    }

    Ok(GenerationRecord {
        model_id: request.model_id,
        mode: config.mode,
        scenario_id: scenario_id.to_string(),
        messages: request.messages,
        completion,
        retrieved_chunk_ids: request.context_ids,
        latency_ms,
        timestamp: chrono::Utc::now().to_rfc3339(),
    })
}

/// Append one record to a JSONL log; the line is written in a single call
/// so concurrent appenders cannot interleave within a record.
pub fn append_record(path: &Path, record: &GenerationRecord) -> Result<(), GenerateError> {
    let mut line = serde_json::to_vec(record).map_err(|e| GenerateError::Malformed(e.to_string()))?;
    line.push(b'\n');
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    file.write_all(&line)?;
    Ok(())
}

/// Read back a JSONL generation log.
pub fn read_records(path: &Path) -> Result<Vec<GenerationRecord>, GenerateError> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|e| GenerateError::Malformed(format!("record line {}: {e}", line_no + 1)))?;
        records.push(record);
    }
    Ok(records)
}
