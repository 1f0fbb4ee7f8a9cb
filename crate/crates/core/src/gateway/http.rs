use std::time::Duration;

use serde_json::Value;

use super::{ChatBackend, ChatRequest, GeneratorConfig, TransportError};

/// OpenAI-compatible chat-completions client.
pub struct HttpBackend {
    agent: ureq::Agent,
    url: String,
    token: Option<String>,
}

impl HttpBackend {
    /// Reads the bearer token from `config.api_key_env` if set.
    pub fn from_config(config: &GeneratorConfig) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(config.request_timeout_ms))
            .build();
        let token = std::env::var(&config.api_key_env)
            .ok()
            .filter(|t| !t.is_empty());
        HttpBackend {
            agent,
            url: config.endpoint_url.clone(),
            token,
        }
    }
}

/// Pulls `choices[0].message.content` out of a completion response.
pub(crate) fn completion_text(body: &Value) -> Result<String, TransportError> {
    body.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| TransportError::BadResponse("missing choices[0].message.content".into()))
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let mut call = self.agent.post(&self.url);
        if let Some(token) = &self.token {
            call = call.set("Authorization", &format!("Bearer {token}"));
        }
        let response = match call.send_json(request) {
            Ok(r) => r,
            Err(ureq::Error::Status(status, r)) => {
                return Err(TransportError::Status {
                    status,
                    body: r.into_string().unwrap_or_default(),
                })
            }
            Err(e) => return Err(TransportError::Transport(e.to_string())),
        };
        let body: Value = response
            .into_json()
            .map_err(|e| TransportError::BadResponse(e.to_string()))?;
        completion_text(&body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn extracts_first_choice() {
        let body = json!({"choices":[{"message":{"role":"assistant","content":"\\boxed{2}"}}]});
        assert_eq!(completion_text(&body).unwrap(), "\\boxed{2}");
        assert!(matches!(
            completion_text(&json!({"choices":[]})),
            Err(TransportError::BadResponse(_))
        ));
    }
}
