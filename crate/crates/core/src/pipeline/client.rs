//! Client abstractions for every external call, and the journal that logs
//! each exchange verbatim.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::Document;
use crate::error::{Error, Result};
use crate::trace::TraceEvent;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClientMode {
    Live,
    Recorded,
    Mock,
}

impl std::str::FromStr for ClientMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "live" => Ok(ClientMode::Live),
            "recorded" => Ok(ClientMode::Recorded),
            "mock" => Ok(ClientMode::Mock),
            other => Err(Error::InvalidArgument(format!("unknown client mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<Message>,
}

impl LlmRequest {
    /// The JSON payload carried by the last user message, if any.
    pub fn payload(&self) -> Option<Value> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .and_then(|m| serde_json::from_str(&m.content).ok())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchRequest {
    pub expression: String,
    pub limit: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ClientError {
    #[error("{0}")]
    Failure(String),
    #[error("no recorded exchange for call `{0}`")]
    MissingExchange(String),
}

/// A language-model endpoint. `call_id` names the call within a run so
/// recorded clients can answer from a stored trace.
pub trait LanguageModel: Send + Sync {
    fn complete(&self, call_id: &str, request: &LlmRequest) -> Result<String, ClientError>;
}

pub trait Retriever: Send + Sync {
    fn search(&self, call_id: &str, request: &SearchRequest) -> Result<Vec<Document>, ClientError>;
}

#[derive(Clone)]
pub struct ClientSuite {
    pub refinement: Arc<dyn LanguageModel>,
    pub extraction: Arc<dyn LanguageModel>,
    pub exploration: Arc<dyn LanguageModel>,
    pub synthesis: Arc<dyn LanguageModel>,
    pub retrieval: Arc<dyn Retriever>,
    pub mode: ClientMode,
}

impl ClientSuite {
    /// One model behind all four language roles.
    pub fn uniform(model: Arc<dyn LanguageModel>, retrieval: Arc<dyn Retriever>, mode: ClientMode) -> Self {
        Self {
            refinement: model.clone(),
            extraction: model.clone(),
            exploration: model.clone(),
            synthesis: model,
            retrieval,
            mode,
        }
    }
}

impl std::fmt::Debug for ClientSuite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ClientSuite").field("mode", &self.mode).finish_non_exhaustive()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClientKind {
    Refinement,
    Retrieval,
    Extraction,
    Exploration,
    Synthesis,
}

/// One request/response pair as sent and received.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub call_id: String,
    pub client: ClientKind,
    pub request: Value,
    pub response: Value,
}

/// Per-run log of exchanges and events; never shared between runs.
#[derive(Clone, Debug, Default)]
pub struct Journal {
    pub exchanges: Vec<Exchange>,
    pub events: Vec<TraceEvent>,
}

impl Journal {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn event(&mut self, event: TraceEvent) {
        self.events.push(event);
    }

    pub fn complete(
        &mut self,
        client: &dyn LanguageModel,
        kind: ClientKind,
        call_id: &str,
        request: LlmRequest,
    ) -> Result<String> {
        let text = client.complete(call_id, &request).map_err(|e| stage_error(kind, e))?;
        self.exchanges.push(Exchange {
            call_id: call_id.to_string(),
            client: kind,
            request: serde_json::to_value(&request)?,
            response: Value::String(text.clone()),
        });
        Ok(text)
    }

    pub fn search(&mut self, client: &dyn Retriever, call_id: &str, request: SearchRequest) -> Result<Vec<Document>> {
        let docs = client
            .search(call_id, &request)
            .map_err(|e| stage_error(ClientKind::Retrieval, e))?;
        self.exchanges.push(Exchange {
            call_id: call_id.to_string(),
            client: ClientKind::Retrieval,
            request: serde_json::to_value(&request)?,
            response: serde_json::to_value(&docs)?,
        });
        Ok(docs)
    }
}

fn stage_error(kind: ClientKind, err: ClientError) -> Error {
    match err {
        ClientError::MissingExchange(id) => Error::MissingExchange(id),
        ClientError::Failure(message) => Error::Client {
            stage: format!("{kind:?}").to_lowercase(),
            message,
        },
    }
}

/// System prompt plus a JSON user payload.
pub fn build_request(model: &str, temperature: f64, system: &str, payload: &Value) -> LlmRequest {
    LlmRequest {
        model: model.to_string(),
        temperature,
        messages: vec![
            Message {
                role: Role::System,
                content: system.to_string(),
            },
            Message {
                role: Role::User,
                content: payload.to_string(),
            },
        ],
    }
}

/// Extracts the first JSON object from model text, tolerating code fences
/// and surrounding prose.
pub fn parse_json_object(text: &str) -> Option<Value> {
    let trimmed = text.trim();
    if let Ok(v @ Value::Object(_)) = serde_json::from_str::<Value>(trimmed) {
        return Some(v);
    }
    let start = trimmed.find('{')?;
    let mut stream = serde_json::Deserializer::from_str(&trimmed[start..]).into_iter::<Value>();
    match stream.next() {
        Some(Ok(v @ Value::Object(_))) => Some(v),
        _ => None,
    }
}
