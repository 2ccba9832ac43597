//! Concrete provider adapters and selection.
//!
//! The HTTPS adapter speaks JSON to completion-style endpoints: it POSTs
//! `{"model", "prompt", ...decoding options}` with a bearer token taken from
//! `TIMER_PROVIDER_<NAME>_KEY` and accepts the common response shapes
//! (`choices[0].text`, `choices[0].message.content`, `content[0].text`, or a
//! top-level `text`).

use std::time::Duration;

use timer_core::genpipe::{
    MockProvider, Provider, ProviderError, ProviderRequest, ProviderResponse, ProviderUsage,
};
use timer_core::judge::MockJudge;

use crate::CliError;

/// Environment variable carrying the API key for a named provider.
pub fn key_env_var(provider: &str) -> String {
    format!("TIMER_PROVIDER_{}_KEY", provider.to_uppercase().replace('-', "_"))
}

pub struct HttpProvider {
    name: String,
    endpoint: String,
    model: String,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    /// Reads the key from the provider's environment variable; credentials
    /// never come from config files.
    pub fn new(name: &str, endpoint: &str, model: &str) -> Result<HttpProvider, ProviderError> {
        let var = key_env_var(name);
        let api_key = std::env::var(&var).map_err(|_| ProviderError::MissingKey(var))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        Ok(HttpProvider {
            name: name.to_string(),
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            api_key,
            client,
        })
    }

    fn body_for(&self, request: &ProviderRequest) -> serde_json::Value {
        let mut body = serde_json::json!({
            "model": self.model,
            "prompt": request.prompt,
        });
        for (key, value) in &request.options {
            body[key] = parse_scalar(value);
        }
        body
    }
}

/// Decoding options arrive as strings; numbers and booleans are forwarded as
/// native JSON scalars.
fn parse_scalar(value: &str) -> serde_json::Value {
    if let Ok(b) = value.parse::<bool>() {
        return serde_json::Value::Bool(b);
    }
    if let Ok(i) = value.parse::<i64>() {
        return serde_json::Value::from(i);
    }
    if let Ok(f) = value.parse::<f64>() {
        if f.is_finite() {
            return serde_json::Value::from(f);
        }
    }
    serde_json::Value::String(value.to_string())
}

type TextPath = fn(&serde_json::Value) -> Option<&serde_json::Value>;

/// Pulls completion text out of the common response layouts.
pub fn extract_completion_text(value: &serde_json::Value) -> Option<String> {
    let paths: [TextPath; 4] = [
        |v| v.get("choices")?.get(0)?.get("text"),
        |v| v.get("choices")?.get(0)?.get("message")?.get("content"),
        |v| v.get("content")?.get(0)?.get("text"),
        |v| v.get("text"),
    ];
    paths.iter().find_map(|path| path(value).and_then(|t| t.as_str()).map(str::to_string))
}

impl Provider for HttpProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, request: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        let response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&self.body_for(request))
            .send()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = response.status();
        let body = response.text().map_err(|e| ProviderError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(ProviderError::Status { code: status.as_u16(), body });
        }
        let value: serde_json::Value = serde_json::from_str(&body)
            .map_err(|e| ProviderError::Transport(format!("non-JSON response: {e}")))?;
        let text = extract_completion_text(&value).ok_or_else(|| {
            ProviderError::Transport("response carries no completion text field".to_string())
        })?;
        let usage = ProviderUsage {
            prompt_tokens: value.get("usage").and_then(|u| u.get("prompt_tokens")).and_then(|v| v.as_u64()),
            completion_tokens: value
                .get("usage")
                .and_then(|u| u.get("completion_tokens"))
                .and_then(|v| v.as_u64()),
        };
        Ok(ProviderResponse { text, usage, status: status.as_u16().to_string() })
    }
}

/// Builds the generation provider named in the config; `force_mock` is the
/// `--mock` flag.
pub fn make_generation_provider(
    name: &str,
    endpoint: Option<&str>,
    model: &str,
    pairs_per_chunk: usize,
    force_mock: bool,
) -> Result<Box<dyn Provider>, CliError> {
    if force_mock || name == "mock" {
        return Ok(Box::new(MockProvider::new(pairs_per_chunk)));
    }
    let endpoint = endpoint.ok_or_else(|| {
        CliError::Config(format!("provider `{name}` needs an endpoint in [generation]"))
    })?;
    HttpProvider::new(name, endpoint, model)
        .map(|p| Box::new(p) as Box<dyn Provider>)
        .map_err(|e| CliError::Config(e.to_string()))
}

/// Builds the judge provider; mock rules select the deterministic judges.
pub fn make_judge_provider(
    name: &str,
    endpoint: Option<&str>,
    model: &str,
    mock_rule: &str,
    force_mock: bool,
) -> Result<Box<dyn Provider>, CliError> {
    if force_mock || name == "mock" {
        let judge = match mock_rule {
            "always-yes" => MockJudge::AlwaysYes,
            "echo-match" => MockJudge::EchoMatch,
            "pick-first" => MockJudge::PickFirst,
            "always-tie" => MockJudge::AlwaysTie,
            other => {
                return Err(CliError::Config(format!(
                    "unknown judge mock_rule `{other}` (expected echo-match, always-yes, pick-first, or always-tie)"
                )))
            }
        };
        return Ok(Box::new(judge));
    }
    let endpoint = endpoint.ok_or_else(|| {
        CliError::Config(format!("judge provider `{name}` needs an endpoint in [judge]"))
    })?;
    HttpProvider::new(name, endpoint, model)
        .map(|p| Box::new(p) as Box<dyn Provider>)
        .map_err(|e| CliError::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    #[test]
    fn key_env_var_naming() {
        assert_eq!(key_env_var("openai"), "TIMER_PROVIDER_OPENAI_KEY");
        assert_eq!(key_env_var("my-lab"), "TIMER_PROVIDER_MY_LAB_KEY");
    }

    #[test]
    fn scalar_forwarding() {
        assert_eq!(parse_scalar("0.2"), serde_json::json!(0.2));
        assert_eq!(parse_scalar("42"), serde_json::json!(42));
        assert_eq!(parse_scalar("true"), serde_json::json!(true));
        assert_eq!(parse_scalar("nucleus"), serde_json::json!("nucleus"));
    }

    #[test]
    fn completion_text_extraction_shapes() {
        let shapes = [
            serde_json::json!({"choices": [{"text": "alpha"}]}),
            serde_json::json!({"choices": [{"message": {"content": "alpha"}}]}),
            serde_json::json!({"content": [{"text": "alpha"}]}),
            serde_json::json!({"text": "alpha"}),
        ];
        for shape in &shapes {
            assert_eq!(extract_completion_text(shape).as_deref(), Some("alpha"));
        }
        assert_eq!(extract_completion_text(&serde_json::json!({"other": 1})), None);
    }

    #[test]
    fn missing_key_is_an_error() {
        std::env::remove_var("TIMER_PROVIDER_NOKEY_KEY");
        let Err(err) = HttpProvider::new("nokey", "http://127.0.0.1:1/v1", "m") else {
            panic!("expected a missing-key error");
        };
        assert!(matches!(err, ProviderError::MissingKey(_)));
    }

    /// Minimal one-shot HTTP server for loopback tests.
    fn serve_once(response_body: &'static str, status_line: &'static str) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind loopback");
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            if let Ok((mut stream, _)) = listener.accept() {
                let mut buf = [0u8; 65536];
                let mut read = 0;
                // read until the JSON body closes; requests here are small
                loop {
                    match stream.read(&mut buf[read..]) {
                        Ok(0) => break,
                        Ok(n) => {
                            read += n;
                            let text = String::from_utf8_lossy(&buf[..read]);
                            if let Some(header_end) = text.find("\r\n\r\n") {
                                let body = &text[header_end + 4..];
                                let expected = text
                                    .lines()
                                    .find_map(|l| l.strip_prefix("content-length: "))
                                    .or_else(|| {
                                        text.lines().find_map(|l| l.strip_prefix("Content-Length: "))
                                    })
                                    .and_then(|v| v.trim().parse::<usize>().ok())
                                    .unwrap_or(0);
                                if body.len() >= expected {
                                    break;
                                }
                            }
                        }
                        Err(_) => break,
                    }
                }
                let reply = format!(
                    "{status_line}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{response_body}",
                    response_body.len()
                );
                stream.write_all(reply.as_bytes()).ok();
            }
        });
        format!("http://{addr}/v1/complete")
    }

    #[test]
    fn loopback_completion_round_trip() {
        std::env::set_var("TIMER_PROVIDER_LOOP_KEY", "test-key");
        let endpoint =
            serve_once(r#"{"choices":[{"text":"pong"}],"usage":{"prompt_tokens":3}}"#, "HTTP/1.1 200 OK");
        let provider = HttpProvider::new("loop", &endpoint, "m1").unwrap();
        let response = provider.complete(&ProviderRequest::new("ping")).unwrap();
        assert_eq!(response.text, "pong");
        assert_eq!(response.usage.prompt_tokens, Some(3));
    }

    #[test]
    fn loopback_error_status_is_reported() {
        std::env::set_var("TIMER_PROVIDER_LOOP2_KEY", "test-key");
        let endpoint = serve_once(r#"{"error":"rate limited"}"#, "HTTP/1.1 429 Too Many Requests");
        let provider = HttpProvider::new("loop2", &endpoint, "m1").unwrap();
        let err = provider.complete(&ProviderRequest::new("ping")).unwrap_err();
        assert!(matches!(err, ProviderError::Status { code: 429, .. }));
    }
}
