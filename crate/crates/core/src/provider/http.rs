//! Wire adapters for hosted chat and embedding APIs. The only module that
//! performs network I/O.
//!
//! Each adapter makes exactly one attempt per call; wrap it in
//! [`Retrying`](super::Retrying) for backoff.

use std::fmt;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::{
    ChatProvider, Embedder, EmbeddingVector, PromptRequest, ProviderError, ProviderResponse, ResponseStatus,
};

/// Blocking JSON-over-HTTPS client with a global per-request timeout.
#[derive(Clone)]
pub struct HttpClient {
    agent: ureq::Agent,
}

impl fmt::Debug for HttpClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("HttpClient")
    }
}

fn snippet(body: &str) -> &str {
    let end = body.char_indices().nth(300).map_or(body.len(), |(i, _)| i);
    &body[..end]
}

/// Maps an HTTP error status onto a retryable or permanent failure.
fn status_error(code: u16, body: &str) -> ProviderError {
    let message = format!("HTTP {code}: {}", snippet(body));
    match code {
        // 503 is how several vendors signal overload; back off like a 429.
        429 | 503 => ProviderError::Transient {
            status: ResponseStatus::RateLimited,
            message,
        },
        408 | 504 => ProviderError::Transient {
            status: ResponseStatus::Timeout,
            message,
        },
        _ => ProviderError::Failed(message),
    }
}

fn transport_error(e: ureq::Error) -> ProviderError {
    let timed_out = match &e {
        ureq::Error::Timeout(_) => true,
        ureq::Error::Io(io) => io.kind() == std::io::ErrorKind::TimedOut,
        _ => false,
    };
    if timed_out {
        ProviderError::Transient {
            status: ResponseStatus::Timeout,
            message: e.to_string(),
        }
    } else {
        ProviderError::Failed(e.to_string())
    }
}

impl HttpClient {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { agent }
    }

    /// POSTs `body` and returns the parsed JSON reply and the elapsed time.
    pub fn post_json(
        &self,
        url: &str,
        headers: &[(&str, &str)],
        body: &Value,
    ) -> Result<(Value, u64), ProviderError> {
        let started = Instant::now();
        let mut req = self.agent.post(url);
        for (k, v) in headers {
            req = req.header(*k, *v);
        }
        let mut resp = req.send_json(body).map_err(transport_error)?;
        let code = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(transport_error)?;
        let latency_ms = started.elapsed().as_millis() as u64;
        if !(200..300).contains(&code) {
            return Err(status_error(code, &text));
        }
        let value = serde_json::from_str(&text)
            .map_err(|e| ProviderError::Failed(format!("malformed response body: {e}")))?;
        Ok((value, latency_ms))
    }
}

fn join_url(base: &str, path: &str) -> String {
    format!("{}/{}", base.trim_end_matches('/'), path.trim_start_matches('/'))
}

/// Request body for OpenAI-style `/chat/completions`. With `merge_system` the
/// system text is prepended to the user message, for chat templates that
/// reject a system role.
pub fn openai_chat_body(req: &PromptRequest, merge_system: bool) -> Value {
    let messages = if merge_system {
        let content = if req.system_text.is_empty() {
            req.user_text.clone()
        } else {
            format!("{}\n\n{}", req.system_text, req.user_text)
        };
        json!([{ "role": "user", "content": content }])
    } else {
        json!([
            { "role": "system", "content": req.system_text },
            { "role": "user", "content": req.user_text },
        ])
    };
    let mut body = json!({
        "model": req.params.model_name,
        "messages": messages,
        "max_tokens": req.params.max_new_tokens,
    });
    if let Some(t) = req.params.temperature {
        body["temperature"] = json!(t);
    }
    if let Some(p) = req.params.top_p {
        body["top_p"] = json!(p);
    }
    body
}

pub fn parse_openai_chat(value: &Value) -> Result<String, ProviderError> {
    let message = value
        .pointer("/choices/0/message")
        .ok_or_else(|| ProviderError::Failed("response has no choices".into()))?;
    // `content` is null when the model returns only a refusal or tool call.
    Ok(message
        .get("content")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_owned())
}

/// OpenAI chat completions, or any server speaking the same protocol (vLLM,
/// TGI, llama.cpp). The key is optional for self-hosted servers.
pub struct OpenAiChat {
    client: HttpClient,
    base_url: String,
    api_key: Option<String>,
    merge_system: bool,
    context_window: Option<usize>,
}

impl fmt::Debug for OpenAiChat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OpenAiChat")
            .field("base_url", &self.base_url)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("merge_system", &self.merge_system)
            .finish()
    }
}

impl OpenAiChat {
    pub fn new(client: HttpClient, base_url: impl Into<String>, api_key: Option<String>) -> Self {
        Self {
            client,
            base_url: base_url.into(),
            api_key,
            merge_system: false,
            context_window: None,
        }
    }

    pub fn merge_system(mut self, merge: bool) -> Self {
        self.merge_system = merge;
        self
    }

    pub fn with_context_window(mut self, tokens: Option<usize>) -> Self {
        self.context_window = tokens;
        self
    }
}

fn bearer(key: &Option<String>) -> Option<String> {
    key.as_ref().map(|k| format!("Bearer {k}"))
}

impl ChatProvider for OpenAiChat {
    fn complete(&self, req: &PromptRequest) -> Result<ProviderResponse, ProviderError> {
        let auth = bearer(&self.api_key);
        let headers: Vec<(&str, &str)> = auth
            .as_deref()
            .map(|a| ("Authorization", a))
            .into_iter()
            .collect();
        let (value, latency_ms) = self.client.post_json(
            &join_url(&self.base_url, "chat/completions"),
            &headers,
            &openai_chat_body(req, self.merge_system),
        )?;
        Ok(ProviderResponse::ok(parse_openai_chat(&value)?, latency_ms))
    }

    fn context_window(&self) -> Option<usize> {
        self.context_window
    }
}

/// Request body for Gemini `generateContent`.
pub fn gemini_body(req: &PromptRequest) -> Value {
    let mut config = json!({ "maxOutputTokens": req.params.max_new_tokens });
    if let Some(t) = req.params.temperature {
        config["temperature"] = json!(t);
    }
    if let Some(p) = req.params.top_p {
        config["topP"] = json!(p);
    }
    let mut body = json!({
        "contents": [{ "role": "user", "parts": [{ "text": req.user_text }] }],
        "generationConfig": config,
    });
    if !req.system_text.is_empty() {
        body["systemInstruction"] = json!({ "parts": [{ "text": req.system_text }] });
    }
    body
}

/// Concatenates the text parts of the first candidate. A blocked prompt has
/// no candidates and yields an empty answer, which the parser treats as
/// unclear.
pub fn parse_gemini(value: &Value) -> Result<String, ProviderError> {
    let Some(candidates) = value.get("candidates").and_then(Value::as_array) else {
        if value.get("promptFeedback").is_some() {
            return Ok(String::new());
        }
        return Err(ProviderError::Failed("response has no candidates".into()));
    };
    let parts = candidates
        .first()
        .and_then(|c| c.pointer("/content/parts"))
        .and_then(Value::as_array);
    Ok(parts
        .into_iter()
        .flatten()
        .filter_map(|p| p.get("text").and_then(Value::as_str))
        .collect())
}

pub struct GeminiChat {
    client: HttpClient,
    base_url: String,
    api_key: String,
    context_window: Option<usize>,
}

impl fmt::Debug for GeminiChat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeminiChat")
            .field("base_url", &self.base_url)
            .field("api_key", &"<redacted>")
            .finish()
    }
}

impl GeminiChat {
    pub fn new(client: HttpClient, base_url: impl Into<String>, api_key: String) -> Self {
        Self {
            client,
            base_url: base_url.into(),
            api_key,
            context_window: None,
        }
    }

    pub fn with_context_window(mut self, tokens: Option<usize>) -> Self {
        self.context_window = tokens;
        self
    }
}

impl ChatProvider for GeminiChat {
    fn complete(&self, req: &PromptRequest) -> Result<ProviderResponse, ProviderError> {
        let url = join_url(
            &self.base_url,
            &format!("models/{}:generateContent", req.params.model_name),
        );
        let (value, latency_ms) =
            self.client
                .post_json(&url, &[("x-goog-api-key", &self.api_key)], &gemini_body(req))?;
        Ok(ProviderResponse::ok(parse_gemini(&value)?, latency_ms))
    }

    fn context_window(&self) -> Option<usize> {
        self.context_window
    }
}

pub fn parse_openai_embedding(value: &Value, model_name: &str) -> Result<EmbeddingVector, ProviderError> {
    let values = value
        .pointer("/data/0/embedding")
        .and_then(Value::as_array)
        .ok_or_else(|| ProviderError::Failed("response has no embedding".into()))?
        .iter()
        .map(|v| {
            v.as_f64()
                .ok_or_else(|| ProviderError::Failed("non-numeric embedding entry".into()))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    EmbeddingVector::new(values, model_name)
}

/// OpenAI-style `/embeddings`.
pub struct OpenAiEmbedder {
    client: HttpClient,
    base_url: String,
    api_key: Option<String>,
    model_name: String,
}

impl fmt::Debug for OpenAiEmbedder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OpenAiEmbedder")
            .field("base_url", &self.base_url)
            .field("model_name", &self.model_name)
            .finish_non_exhaustive()
    }
}

impl OpenAiEmbedder {
    pub fn new(
        client: HttpClient,
        base_url: impl Into<String>,
        api_key: Option<String>,
        model_name: impl Into<String>,
    ) -> Self {
        Self {
            client,
            base_url: base_url.into(),
            api_key,
            model_name: model_name.into(),
        }
    }
}

impl Embedder for OpenAiEmbedder {
    fn model_name(&self) -> &str {
        &self.model_name
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        if text.is_empty() {
            return Err(ProviderError::EmptyText);
        }
        let auth = bearer(&self.api_key);
        let headers: Vec<(&str, &str)> = auth
            .as_deref()
            .map(|a| ("Authorization", a))
            .into_iter()
            .collect();
        let (value, _) = self.client.post_json(
            &join_url(&self.base_url, "embeddings"),
            &headers,
            &json!({ "model": self.model_name, "input": text }),
        )?;
        parse_openai_embedding(&value, &self.model_name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::{GenerationParams, ParamsPreset, RetryPolicy, Retrying};
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    fn req(preset: ParamsPreset) -> PromptRequest {
        PromptRequest {
            request_id: "r".into(),
            system_text: "sys".into(),
            user_text: "user".into(),
            params: GenerationParams::preset(preset, "model-x"),
        }
    }

    #[test]
    fn openai_body_shape() {
        let body = openai_chat_body(&req(ParamsPreset::Llama), false);
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][1]["content"], "user");
        assert_eq!(body["max_tokens"], 400);
        assert_eq!(body["temperature"], 0.6);
        let body = openai_chat_body(&req(ParamsPreset::ApiDefault), true);
        assert_eq!(body["messages"].as_array().unwrap().len(), 1);
        assert_eq!(body["messages"][0]["content"], "sys\n\nuser");
        assert!(body.get("temperature").is_none());
        assert!(body.get("top_p").is_none());
    }

    #[test]
    fn openai_reply_verbatim() {
        let v = json!({"choices": [{"message": {"role": "assistant", "content": " Yes.\n"}}]});
        assert_eq!(parse_openai_chat(&v).unwrap(), " Yes.\n");
        let v = json!({"choices": [{"message": {"content": null}}]});
        assert_eq!(parse_openai_chat(&v).unwrap(), "");
        assert!(parse_openai_chat(&json!({})).is_err());
    }

    #[test]
    fn gemini_shapes() {
        let body = gemini_body(&req(ParamsPreset::Llama));
        assert_eq!(body["systemInstruction"]["parts"][0]["text"], "sys");
        assert_eq!(body["generationConfig"]["topP"], 0.9);
        let v = json!({"candidates": [{"content": {"parts": [{"text": "No, "}, {"text": "different."}]}}]});
        assert_eq!(parse_gemini(&v).unwrap(), "No, different.");
        assert_eq!(
            parse_gemini(&json!({"promptFeedback": {"blockReason": "SAFETY"}})).unwrap(),
            ""
        );
        assert!(parse_gemini(&json!({})).is_err());
    }

    #[test]
    fn embedding_parse() {
        let v = json!({"data": [{"embedding": [0.5, -0.25]}]});
        assert_eq!(parse_openai_embedding(&v, "m").unwrap().values(), &[0.5, -0.25]);
        assert!(parse_openai_embedding(&json!({"data": []}), "m").is_err());
    }

    #[test]
    fn status_mapping() {
        assert!(status_error(429, "").is_retryable());
        assert_eq!(status_error(504, "").status(), ResponseStatus::Timeout);
        assert!(!status_error(400, "bad").is_retryable());
        assert!(!status_error(401, "").is_retryable());
    }

    /// Serves one canned response per connection.
    fn serve(responses: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let mut seen = Vec::new();
            for (code, body) in responses {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream);
                let mut len = 0;
                let mut head = String::new();
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    head.push_str(&line);
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                seen.push(format!("{head}{}", String::from_utf8(buf).unwrap()));
                let mut stream = reader.into_inner();
                write!(
                    stream,
                    "HTTP/1.1 {code} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
            seen
        });
        (format!("http://{addr}/v1"), handle)
    }

    #[test]
    fn openai_over_http_with_retries() {
        let ok = json!({"choices": [{"message": {"content": "Yes, they match."}}]}).to_string();
        let (url, server) = serve(vec![
            (429, "{\"error\":\"slow down\"}".into()),
            (429, "{\"error\":\"slow down\"}".into()),
            (200, ok),
        ]);
        let chat = OpenAiChat::new(
            HttpClient::new(Duration::from_secs(5)),
            url,
            Some("secret-key".into()),
        );
        let provider = Retrying::new(chat, RetryPolicy::immediate());
        let resp = provider.complete(&req(ParamsPreset::ApiDefault)).unwrap();
        assert_eq!(resp.raw_text, "Yes, they match.");
        assert_eq!((resp.status, resp.attempts), (ResponseStatus::Ok, 3));
        let seen = server.join().unwrap();
        assert!(seen[0].starts_with("POST /v1/chat/completions"));
        assert!(seen[0].contains("Bearer secret-key"));
        assert!(!format!("{provider:?}").contains("secret-key"));
    }

    #[test]
    fn gemini_over_http() {
        let ok = json!({"candidates": [{"content": {"parts": [{"text": "False"}]}}]}).to_string();
        let (url, server) = serve(vec![(200, ok)]);
        let chat = GeminiChat::new(HttpClient::new(Duration::from_secs(5)), url, "g-key".into());
        assert_eq!(
            chat.complete(&req(ParamsPreset::ApiDefault)).unwrap().raw_text,
            "False"
        );
        let seen = server.join().unwrap();
        assert!(seen[0].starts_with("POST /v1/models/model-x:generateContent"));
        assert!(seen[0].to_ascii_lowercase().contains("x-goog-api-key: g-key"));
    }

    #[test]
    fn permanent_http_error() {
        let (url, server) = serve(vec![(400, "{\"error\":\"bad\"}".into())]);
        let chat = OpenAiChat::new(HttpClient::new(Duration::from_secs(5)), url, None);
        let provider = Retrying::new(chat, RetryPolicy::immediate());
        assert!(matches!(
            provider.complete(&req(ParamsPreset::ApiDefault)),
            Err(ProviderError::Failed(_))
        ));
        server.join().unwrap();
    }
}
