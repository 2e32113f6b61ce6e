//! Blocking JSON-over-HTTP helper shared by the chat and embedding clients.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("request to {url} failed after {attempts} attempt(s): {message}")]
    Failed { url: String, attempts: u32, message: String },
    #[error("HTTP {status} from {url}: {body}")]
    Status { url: String, status: u16, body: String },
    #[error("malformed response from {url}: {message}")]
    Malformed { url: String, message: String },
    #[error("environment variable {0} is not set")]
    MissingKey(String),
}

/// Where and how to reach an OpenAI-style service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    /// Base URL, e.g. `http://localhost:8080/v1`.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token. `None`
    /// sends no authorization header.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    /// Extra attempts after the first on transport errors, 429 and 5xx.
    #[serde(default = "default_retries")]
    pub retries: u32,
}

fn default_timeout() -> f64 {
    60.0
}

fn default_retries() -> u32 {
    2
}

impl ServiceConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        ServiceConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key_env: None,
            timeout_s: default_timeout(),
            retries: default_retries(),
        }
    }

    fn api_key(&self) -> Result<Option<String>, TransportError> {
        match &self.api_key_env {
            None => Ok(None),
            Some(var) => std::env::var(var).map(Some).map_err(|_| TransportError::MissingKey(var.clone())),
        }
    }
}

pub(crate) struct JsonClient {
    agent: ureq::Agent,
    config: ServiceConfig,
}

impl JsonClient {
    pub(crate) fn new(config: ServiceConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_s.max(0.001))))
            .http_status_as_error(false)
            .build()
            .into();
        JsonClient { agent, config }
    }

    pub(crate) fn config(&self) -> &ServiceConfig {
        &self.config
    }

    /// POSTs `body` to `{endpoint}/{path}` and decodes the JSON reply.
    pub(crate) fn post(&self, path: &str, body: &Value) -> Result<Value, TransportError> {
        let url = format!("{}/{}", self.config.endpoint.trim_end_matches('/'), path);
        let key = self.config.api_key()?;
        let attempts = self.config.retries + 1;
        let mut last = None;
        for attempt in 1..=attempts {
            let mut req = self.agent.post(&url).header("Content-Type", "application/json");
            if let Some(k) = &key {
                req = req.header("Authorization", format!("Bearer {k}"));
            }
            match req.send_json(body) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    let text = resp.body_mut().read_to_string().unwrap_or_default();
                    if status == 429 || status >= 500 {
                        log::warn!("{url}: HTTP {status} on attempt {attempt}");
                        last = Some(TransportError::Status { url: url.clone(), status, body: text });
                        continue;
                    }
                    if !(200..300).contains(&status) {
                        return Err(TransportError::Status { url, status, body: text });
                    }
                    return serde_json::from_str(&text)
                        .map_err(|e| TransportError::Malformed { url, message: e.to_string() });
                }
                Err(e) => {
                    log::warn!("{url}: {e} on attempt {attempt}");
                    last = Some(TransportError::Failed { url: url.clone(), attempts: attempt, message: e.to_string() });
                }
            }
        }
        Err(match last {
            Some(TransportError::Failed { url, message, .. }) => TransportError::Failed { url, attempts, message },
            Some(other) => other,
            None => TransportError::Failed { url, attempts, message: "no attempt made".into() },
        })
    }
}
