use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::transport::{JsonClient, ServiceConfig, TransportError};

use super::AgentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
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
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, content: content.into() }
    }
}

/// A chat-completion backend.
pub trait ChatClient: Send + Sync {
    fn chat(&self, messages: &[ChatMessage], temperature: f64) -> Result<String, AgentError>;

    fn name(&self) -> String;
}

/// OpenAI-style `/chat/completions` client.
pub struct HttpChatClient {
    client: JsonClient,
}

impl HttpChatClient {
    pub fn new(config: ServiceConfig) -> Self {
        HttpChatClient { client: JsonClient::new(config) }
    }
}

impl ChatClient for HttpChatClient {
    fn chat(&self, messages: &[ChatMessage], temperature: f64) -> Result<String, AgentError> {
        let body = json!({
            "model": self.client.config().model,
            "messages": messages,
            "temperature": temperature,
        });
        let reply = self.client.post("chat/completions", &body)?;
        reply
            .pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_owned)
            .ok_or_else(|| {
                AgentError::Transport(TransportError::Malformed {
                    url: self.client.config().endpoint.clone(),
                    message: "no choices[0].message.content".into(),
                })
            })
    }

    fn name(&self) -> String {
        format!("http:{}", self.client.config().model)
    }
}

/// Plain-text log of every prompt and raw response in a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    text: String,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn note(&mut self, line: impl AsRef<str>) {
        self.text.push_str(line.as_ref());
        self.text.push('\n');
    }

    pub fn exchange(&mut self, label: &str, messages: &[ChatMessage], temperature: f64, reply: &Result<String, AgentError>) {
        let _ = writeln!(self.text, "===== {label} (temperature {temperature}) =====");
        for m in messages {
            let role = match m.role {
                Role::System => "system",
                Role::User => "user",
                Role::Assistant => "assistant",
            };
            let _ = writeln!(self.text, "--- {role} ---\n{}", m.content.trim_end());
        }
        match reply {
            Ok(r) => {
                let _ = writeln!(self.text, "--- response ---\n{}", r.trim_end());
            }
            Err(e) => {
                let _ = writeln!(self.text, "--- error ---\n{e}");
            }
        }
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn into_string(self) -> String {
        self.text
    }
}
