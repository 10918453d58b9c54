//! Chat-completion client for the LLM reviser.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{
    extract_model, PromptBundle, Reviser, ReviserConfig, ReviserError, RevisionOutcome,
    RevisionStatus,
};

pub const API_KEY_ENV: &str = "ASMR_API_KEY";

#[derive(Debug, Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    top_p: f64,
}

#[derive(Debug, Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Debug, Deserialize)]
struct ChatChoice {
    message: ResponseMessage,
}

#[derive(Debug, Deserialize)]
struct ResponseMessage {
    content: Option<String>,
}

/// Resolves the request URL: a base URL gets `/v1/chat/completions` appended
/// unless it already names the completions route.
pub fn completions_url(endpoint: &str) -> String {
    let base = endpoint.trim_end_matches('/');
    if base.ends_with("/chat/completions") {
        base.to_owned()
    } else if base.ends_with("/v1") {
        format!("{base}/chat/completions")
    } else {
        format!("{base}/v1/chat/completions")
    }
}

pub struct ChatReviser {
    config: ReviserConfig,
    url: String,
    api_key: Option<String>,
    agent: ureq::Agent,
    num_features: usize,
}

impl ChatReviser {
    pub fn new(config: ReviserConfig, num_features: usize) -> Result<Self, ReviserError> {
        config.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(ChatReviser {
            url: completions_url(&config.endpoint_url),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            config,
            agent,
            num_features,
        })
    }

    fn request(&self, prompt: &PromptBundle) -> Result<String, String> {
        let mut messages = Vec::new();
        if let Some(system) = &prompt.system_text {
            messages.push(ChatMessage {
                role: "system",
                content: system,
            });
        }
        messages.push(ChatMessage {
            role: "user",
            content: &prompt.user_text,
        });
        let body = ChatRequest {
            model: &self.config.model_name,
            messages,
            temperature: self.config.temperature,
            top_p: self.config.top_p,
        };
        let mut req = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(&body)
            .map_err(|e| format!("request failed: {e}"))?;
        let status = resp.status();
        if !status.is_success() {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(format!(
                "HTTP {}: {}",
                status.as_u16(),
                text.chars().take(200).collect::<String>()
            ));
        }
        let parsed: ChatResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| format!("malformed completion response: {e}"))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| "completion response has no message content".to_owned())
    }
}

impl Reviser for ChatReviser {
    /// Up to `max_retries + 1` attempts with the same prompt. Network and HTTP
    /// failures and unusable responses share the attempt budget; the status on
    /// exhaustion reflects the last failure.
    fn revise(&mut self, prompt: &PromptBundle) -> RevisionOutcome {
        let mut outcome = RevisionOutcome {
            status: RevisionStatus::EndpointError,
            program: None,
            raw_response: String::new(),
            attempts: 0,
            rejected_responses: Vec::new(),
            errors: Vec::new(),
        };
        for _ in 0..=self.config.max_retries {
            outcome.attempts += 1;
            match self.request(prompt) {
                Err(e) => {
                    outcome.status = RevisionStatus::EndpointError;
                    outcome.errors.push(e);
                }
                Ok(text) => match extract_model(&text, self.num_features) {
                    Ok(program) => {
                        if !outcome.raw_response.is_empty() {
                            outcome
                                .rejected_responses
                                .push(std::mem::take(&mut outcome.raw_response));
                        }
                        outcome.status = RevisionStatus::Accepted;
                        outcome.program = Some(program);
                        outcome.raw_response = text;
                        return outcome;
                    }
                    Err(e) => {
                        outcome.status = RevisionStatus::ParseFailedExhausted;
                        outcome.errors.push(e.to_string());
                        if !outcome.raw_response.is_empty() {
                            outcome
                                .rejected_responses
                                .push(std::mem::take(&mut outcome.raw_response));
                        }
                        outcome.raw_response = text;
                    }
                },
            }
        }
        outcome
    }
}
