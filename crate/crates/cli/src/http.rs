//! OpenAI-style chat completions adapter.

use std::time::Duration;

use longmm_core::annotator::{ClientError, LlmClient, LlmRequest, LlmResponse};
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::{json, Value};

pub struct ChatCompletions {
    http: Client,
    url: String,
    model: String,
    api_key: Option<String>,
}

impl ChatCompletions {
    pub fn new(url: &str, model: &str, api_key: Option<String>, timeout: Duration) -> anyhow::Result<Self> {
        Ok(Self {
            http: Client::builder().timeout(timeout).build()?,
            url: url.to_string(),
            model: model.to_string(),
            api_key,
        })
    }

    fn body(&self, req: &LlmRequest) -> Value {
        let mut content = vec![json!({"type": "text", "text": req.prompt})];
        content.extend(
            req.image_refs
                .iter()
                .map(|r| json!({"type": "image_url", "image_url": {"url": r}})),
        );
        json!({
            "model": self.model,
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
            "messages": [{"role": "user", "content": content}],
        })
    }
}

fn classify(status: StatusCode, body: &str) -> ClientError {
    let msg = format!("HTTP {status}: {}", body.chars().take(200).collect::<String>());
    if status == StatusCode::TOO_MANY_REQUESTS || status == StatusCode::REQUEST_TIMEOUT || status.is_server_error() {
        ClientError::Transient(msg)
    } else {
        ClientError::Permanent(msg)
    }
}

impl LlmClient for ChatCompletions {
    fn submit(&self, req: &LlmRequest) -> Result<LlmResponse, ClientError> {
        let mut call = self.http.post(&self.url).json(&self.body(req));
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let resp = call.send().map_err(|e| ClientError::Transient(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| ClientError::Transient(e.to_string()))?;
        if !status.is_success() {
            return Err(classify(status, &text));
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| ClientError::Transient(format!("bad JSON body: {e}")))?;
        let content = v["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| ClientError::Transient("response has no choices[0].message.content".into()))?;
        Ok(LlmResponse {
            text: content.to_string(),
            prompt_tokens: v["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
            completion_tokens: v["usage"]["completion_tokens"].as_u64().unwrap_or(0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_classes() {
        assert!(matches!(classify(StatusCode::TOO_MANY_REQUESTS, ""), ClientError::Transient(_)));
        assert!(matches!(classify(StatusCode::BAD_GATEWAY, ""), ClientError::Transient(_)));
        assert!(matches!(classify(StatusCode::UNAUTHORIZED, ""), ClientError::Permanent(_)));
    }

    #[test]
    fn request_body_lists_frames_after_text() {
        let c = ChatCompletions::new("http://localhost:1/v1/chat/completions", "m", None, Duration::from_secs(1)).unwrap();
        let b = c.body(&LlmRequest {
            prompt: "hi".into(),
            image_refs: vec!["a.mp4#t=0.5".into()],
            temperature: 0.2,
            max_output_tokens: 10,
        });
        assert_eq!(b["model"], "m");
        let content = b["messages"][0]["content"].as_array().unwrap();
        assert_eq!(content[0]["text"], "hi");
        assert_eq!(content[1]["image_url"]["url"], "a.mp4#t=0.5");
    }
}
