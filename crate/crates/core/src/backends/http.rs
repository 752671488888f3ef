use std::time::Duration;

use base64::Engine;
use serde_json::{json, Value};

use super::{BackendError, BackendProfile, ModelRequest, RequestBody, Transport, WireMode};

const BODY_EXCERPT: usize = 512;
const DESCRIBE_INSTRUCTION: &str = "Describe this video frame in one or two sentences.";

/// Chat-completion style JSON over HTTP.
pub struct HttpTransport {
    url: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(url: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            url: url.into(),
            api_key,
            agent,
        }
    }

    pub fn from_profile(profile: &BackendProfile) -> Result<Box<dyn Transport>, BackendError> {
        let api_key = std::env::var(profile.role.api_key_var()).ok();
        Ok(Box::new(HttpTransport::new(
            profile.endpoint.clone(),
            api_key,
            Duration::from_millis(profile.timeout_ms),
        )))
    }
}

/// Request body for `request`. Decoding fields are forwarded as configured.
pub(crate) fn request_json(request: &ModelRequest<'_>) -> Value {
    let p = request.params;
    let mut body = json!({
        "model": request.model,
        "max_tokens": p.max_new_tokens,
        "max_new_tokens": p.max_new_tokens,
        "do_sample": !p.greedy,
        "repetition_penalty": p.repetition_penalty,
        "temperature": p.temperature,
        "top_p": p.top_p,
        "stream": false,
    });
    let obj = body.as_object_mut().expect("object");
    match (&request.prompt, request.wire) {
        (RequestBody::Text(prompt), WireMode::Chat) => {
            obj.insert(
                "messages".into(),
                json!([
                    {"role": "system", "content": prompt.system_text},
                    {"role": "user", "content": prompt.user_text},
                ]),
            );
        }
        (RequestBody::Text(prompt), WireMode::Raw) => {
            obj.insert("prompt".into(), Value::String(prompt.render_raw()));
        }
        (RequestBody::Image { bytes, .. }, _) => {
            let data = base64::engine::general_purpose::STANDARD.encode(bytes);
            obj.insert(
                "messages".into(),
                json!([{
                    "role": "user",
                    "content": [
                        {"type": "text", "text": DESCRIBE_INSTRUCTION},
                        {"type": "image_url", "image_url": {"url": format!("data:image/jpeg;base64,{data}")}},
                    ],
                }]),
            );
        }
    }
    body
}

/// Assistant text from a chat (`choices[0].message.content`) or completion
/// (`choices[0].text`) response.
pub(crate) fn extract_text(response: &Value) -> Result<String, BackendError> {
    let choice = response
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| BackendError::Protocol("missing choices[0]".into()))?;
    choice
        .get("message")
        .and_then(|m| m.get("content"))
        .or_else(|| choice.get("text"))
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| BackendError::Protocol("choices[0] carries no text".into()))
}

fn excerpt(body: &str) -> String {
    body.chars().take(BODY_EXCERPT).collect()
}

impl Transport for HttpTransport {
    fn send(&self, request: &ModelRequest<'_>) -> Result<String, BackendError> {
        let body = request_json(request);
        let mut req = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = req
            .send_json(&body)
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(BackendError::Status {
                status,
                body: excerpt(&text),
            });
        }
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| BackendError::Protocol(format!("{e}: {}", excerpt(&text))))?;
        extract_text(&value)
    }
}
