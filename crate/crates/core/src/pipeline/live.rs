//! Network clients: an OpenAI-compatible chat endpoint, OpenAlex works
//! search, and a DuckDuckGo fallback.

use std::sync::Arc;
use std::time::Duration;

use serde_json::Value;
use ureq::Agent;

use super::client::{ClientError, ClientMode, ClientSuite, LanguageModel, LlmRequest, Retriever, SearchRequest};
use super::{Document, DocumentSource};
use crate::error::{Error, Result};

pub const API_KEY_VAR: &str = "OPENAI_API_KEY";
pub const BASE_URL_VAR: &str = "OPENAI_BASE_URL";
pub const MAILTO_VAR: &str = "OPENALEX_MAILTO";

const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";
const OPENALEX_WORKS: &str = "https://api.openalex.org/works";
const DUCKDUCKGO: &str = "https://api.duckduckgo.com/";

fn agent() -> Agent {
    Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(120)))
        .build()
        .into()
}

fn failure(e: impl std::fmt::Display) -> ClientError {
    ClientError::Failure(e.to_string())
}

pub struct ChatClient {
    agent: Agent,
    base_url: String,
    api_key: String,
}

impl ChatClient {
    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>) -> Self {
        Self {
            agent: agent(),
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key: api_key.into(),
        }
    }
}

impl LanguageModel for ChatClient {
    fn complete(&self, _call_id: &str, request: &LlmRequest) -> std::result::Result<String, ClientError> {
        let body: Value = self
            .agent
            .post(format!("{}/chat/completions", self.base_url))
            .header("Authorization", format!("Bearer {}", self.api_key))
            .send_json(request)
            .map_err(failure)?
            .body_mut()
            .read_json()
            .map_err(failure)?;
        body["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| failure(format!("chat response without content: {body}")))
    }
}

/// OpenAlex works search, falling back to DuckDuckGo instant answers when
/// the scholarly index returns nothing.
pub struct ScholarlyRetriever {
    agent: Agent,
    mailto: Option<String>,
}

impl ScholarlyRetriever {
    pub fn new(mailto: Option<String>) -> Self {
        Self { agent: agent(), mailto }
    }

    fn openalex(&self, request: &SearchRequest) -> std::result::Result<Vec<Document>, ClientError> {
        let mut call = self
            .agent
            .get(OPENALEX_WORKS)
            .query("search", &request.expression)
            .query("per-page", request.limit.to_string());
        if let Some(mailto) = &self.mailto {
            call = call.query("mailto", mailto);
        }
        let body: Value = call.call().map_err(failure)?.body_mut().read_json().map_err(failure)?;
        Ok(body["results"]
            .as_array()
            .into_iter()
            .flatten()
            .filter_map(openalex_document)
            .take(request.limit)
            .collect())
    }

    fn duckduckgo(&self, request: &SearchRequest) -> std::result::Result<Vec<Document>, ClientError> {
        let body: Value = self
            .agent
            .get(DUCKDUCKGO)
            .query("q", &request.expression)
            .query("format", "json")
            .query("no_html", "1")
            .call()
            .map_err(failure)?
            .body_mut()
            .read_json()
            .map_err(failure)?;
        Ok(duckduckgo_documents(&body, request.limit))
    }
}

impl Retriever for ScholarlyRetriever {
    fn search(&self, _call_id: &str, request: &SearchRequest) -> std::result::Result<Vec<Document>, ClientError> {
        let docs = self.openalex(request)?;
        if docs.is_empty() {
            return self.duckduckgo(request);
        }
        Ok(docs)
    }
}

/// OpenAlex stores abstracts as a word → positions index.
pub fn rebuild_abstract(index: &Value) -> String {
    let Some(map) = index.as_object() else {
        return String::new();
    };
    let mut words: Vec<(u64, &str)> = map
        .iter()
        .flat_map(|(word, positions)| {
            positions
                .as_array()
                .into_iter()
                .flatten()
                .filter_map(Value::as_u64)
                .map(move |p| (p, word.as_str()))
        })
        .collect();
    words.sort();
    words.into_iter().map(|(_, w)| w).collect::<Vec<_>>().join(" ")
}

pub fn openalex_document(work: &Value) -> Option<Document> {
    let id = work["id"].as_str()?;
    let doc_id = id.rsplit('/').next().unwrap_or(id).to_string();
    let body = rebuild_abstract(&work["abstract_inverted_index"]);
    if body.is_empty() {
        return None;
    }
    Some(Document {
        doc_id,
        title: work["display_name"].as_str().or(work["title"].as_str()).unwrap_or_default().to_string(),
        abstract_or_body: body,
        source: DocumentSource::ScholarlyApi,
        retrieval_keywords: work["keywords"]
            .as_array()
            .into_iter()
            .flatten()
            .filter_map(|k| k["display_name"].as_str().map(str::to_string))
            .collect(),
    })
}

pub fn duckduckgo_documents(body: &Value, limit: usize) -> Vec<Document> {
    let mut docs = Vec::new();
    if let Some(text) = body["AbstractText"].as_str().filter(|t| !t.is_empty()) {
        docs.push(Document {
            doc_id: body["AbstractURL"].as_str().unwrap_or("ddg:abstract").to_string(),
            title: body["Heading"].as_str().unwrap_or_default().to_string(),
            abstract_or_body: text.to_string(),
            source: DocumentSource::WebSearch,
            retrieval_keywords: Vec::new(),
        });
    }
    for topic in body["RelatedTopics"].as_array().into_iter().flatten() {
        if let (Some(url), Some(text)) = (topic["FirstURL"].as_str(), topic["Text"].as_str()) {
            docs.push(Document {
                doc_id: url.to_string(),
                title: text.split(" - ").next().unwrap_or(text).to_string(),
                abstract_or_body: text.to_string(),
                source: DocumentSource::WebSearch,
                retrieval_keywords: Vec::new(),
            });
        }
    }
    docs.truncate(limit);
    docs
}

/// Reads credentials from the environment; fails before any network call.
pub fn live_suite() -> Result<ClientSuite> {
    let api_key = std::env::var(API_KEY_VAR)
        .ok()
        .filter(|k| !k.trim().is_empty())
        .ok_or_else(|| Error::MissingCredentials(format!("{API_KEY_VAR} is not set")))?;
    let base_url = std::env::var(BASE_URL_VAR).unwrap_or_else(|_| DEFAULT_BASE_URL.to_string());
    let chat = Arc::new(ChatClient::new(base_url, api_key));
    let retriever = Arc::new(ScholarlyRetriever::new(std::env::var(MAILTO_VAR).ok()));
    Ok(ClientSuite::uniform(chat, retriever, ClientMode::Live))
}
