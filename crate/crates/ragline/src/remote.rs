//! Shared HTTP plumbing for the remote embedding and chat providers:
//! bearer auth from the environment, bounded retries with exponential
//! backoff, and JSON request/response handling.

use std::thread::sleep;
use std::time::Duration;

use thiserror::Error;

/// Environment variable holding the bearer token. Secrets travel only this
/// way — never through config files or flags.
pub const API_KEY_VAR: &str = "RAGLINE_API_KEY";

#[derive(Debug, Error)]
pub enum RemoteError {
    #[error("missing API key: set {API_KEY_VAR}")]
    MissingApiKey,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
}

/// Retry schedule for remote calls. Retries fire only on transport errors
/// and 429/5xx statuses; other statuses fail immediately.
#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            initial_backoff: Duration::from_millis(500),
        }
    }
}

pub(crate) fn api_key() -> Result<String, RemoteError> {
    std::env::var(API_KEY_VAR).map_err(|_| RemoteError::MissingApiKey)
}

pub(crate) fn http_client() -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(60))
        .build()
        .expect("default TLS backend available")
}

/// POST `body` as JSON and parse a JSON reply, retrying per `policy`.
pub(crate) fn post_json(
    client: &reqwest::blocking::Client,
    url: &str,
    api_key: &str,
    body: &serde_json::Value,
    policy: &RetryPolicy,
) -> Result<serde_json::Value, RemoteError> {
    let mut backoff = policy.initial_backoff;
    let mut last_error = None;
    for attempt in 1..=policy.attempts.max(1) {
        if attempt > 1 {
            sleep(backoff);
            backoff *= 2;
        }
        match client.post(url).bearer_auth(api_key).json(body).send() {
            Ok(response) => {
                let status = response.status();
                if status.is_success() {
                    return response
                        .json()
                        .map_err(|e| RemoteError::Malformed(e.to_string()));
                }
                let retryable = status.as_u16() == 429 || status.is_server_error();
                let error = RemoteError::Status {
                    status: status.as_u16(),
                    body: response.text().unwrap_or_default(),
                };
                if !retryable {
                    return Err(error);
                }
                log::warn!("retrying {url} after {error} (attempt {attempt})");
                last_error = Some(error);
            }
            Err(e) => {
                log::warn!("retrying {url} after transport error (attempt {attempt})");
                last_error = Some(RemoteError::Transport(e.to_string()));
            }
        }
    }
    Err(last_error.expect("loop ran at least once"))
}
