//! Clients that answer from the exchanges stored in a trace.

use std::collections::HashMap;
use std::sync::Arc;

use super::client::{
    ClientError, ClientMode, ClientSuite, Exchange, LanguageModel, LlmRequest, Retriever, SearchRequest,
};
use super::Document;

#[derive(Clone, Debug, Default)]
pub struct RecordedClient {
    responses: HashMap<String, serde_json::Value>,
}

impl RecordedClient {
    pub fn new(exchanges: &[Exchange]) -> Self {
        Self {
            responses: exchanges
                .iter()
                .map(|e| (e.call_id.clone(), e.response.clone()))
                .collect(),
        }
    }

    fn lookup(&self, call_id: &str) -> Result<&serde_json::Value, ClientError> {
        self.responses
            .get(call_id)
            .ok_or_else(|| ClientError::MissingExchange(call_id.to_string()))
    }

    pub fn suite(exchanges: &[Exchange]) -> ClientSuite {
        let client = Arc::new(Self::new(exchanges));
        ClientSuite::uniform(client.clone(), client, ClientMode::Recorded)
    }
}

impl LanguageModel for RecordedClient {
    fn complete(&self, call_id: &str, _request: &LlmRequest) -> Result<String, ClientError> {
        match self.lookup(call_id)? {
            serde_json::Value::String(text) => Ok(text.clone()),
            other => Err(ClientError::Failure(format!(
                "recorded response for `{call_id}` is not text: {other}"
            ))),
        }
    }
}

impl Retriever for RecordedClient {
    fn search(&self, call_id: &str, _request: &SearchRequest) -> Result<Vec<Document>, ClientError> {
        serde_json::from_value(self.lookup(call_id)?.clone())
            .map_err(|e| ClientError::Failure(format!("recorded documents for `{call_id}`: {e}")))
    }
}
