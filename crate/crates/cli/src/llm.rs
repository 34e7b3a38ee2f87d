//! Single-shot client for a chat-completion interpretation endpoint.

use std::time::Duration;

use alliance_core::topics::InterpretationRequest;
use anyhow::Context;

/// POST one prompt and return the parsed JSON response.
///
/// The bearer token is read from `token_env`. Failures are returned as-is;
/// the request is never retried.
pub fn interpret(endpoint: &str, model: &str, prompt: &str, token_env: &str) -> anyhow::Result<serde_json::Value> {
    let token = std::env::var(token_env)
        .ok()
        .filter(|t| !t.is_empty())
        .with_context(|| format!("environment variable {token_env} holding the API token is not set"))?;
    let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(120)).build();
    let request = InterpretationRequest::new(model, prompt);
    let response = agent
        .post(endpoint)
        .set("Authorization", &format!("Bearer {token}"))
        .send_json(&request)
        .with_context(|| format!("interpretation request to {endpoint} failed"))?;
    let body: serde_json::Value = response.into_json().context("interpretation response is not JSON")?;
    Ok(body)
}
