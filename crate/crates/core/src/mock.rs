//! Deterministic in-process HTTP backend for tests and offline runs.
//!
//! Serves the same wire format as a real endpoint. Three modes:
//!
//! * `GoldEcho` replies `(k)` where `k` is the gold domain of the variable
//!   being queried, identified by a catalog name occurring in the prompt's
//!   query segment.
//! * `Scripted` replays recorded texts keyed by the SHA-256 of the prompt.
//! * `Fixed` always returns the same text.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::catalog::VariableCatalog;

#[derive(Debug, Clone)]
pub enum MockMode {
    GoldEcho(VariableCatalog),
    Scripted(HashMap<String, String>),
    Fixed(String),
}

/// Which reply envelope the server emits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockEnvelope {
    Chat,
    Completion,
}

pub struct MockServerBuilder {
    mode: MockMode,
    envelope: MockEnvelope,
    fail_first: Option<(usize, u16)>,
}

impl MockServerBuilder {
    pub fn envelope(mut self, envelope: MockEnvelope) -> MockServerBuilder {
        self.envelope = envelope;
        self
    }

    /// Respond to the first `n` requests with the given HTTP status before
    /// serving normally. Exercises the client retry path.
    pub fn fail_first(mut self, n: usize, status: u16) -> MockServerBuilder {
        self.fail_first = Some((n, status));
        self
    }

    pub fn spawn(self) -> std::io::Result<MockServer> {
        MockServer::start(self)
    }
}

/// A tiny single-purpose HTTP/1.1 responder bound to a loopback port. Shuts
/// down on drop.
pub struct MockServer {
    addr: SocketAddr,
    hits: Arc<AtomicUsize>,
    shutdown: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn builder(mode: MockMode) -> MockServerBuilder {
        MockServerBuilder {
            mode,
            envelope: MockEnvelope::Chat,
            fail_first: None,
        }
    }

    pub fn spawn(mode: MockMode) -> std::io::Result<MockServer> {
        MockServer::builder(mode).spawn()
    }

    fn start(builder: MockServerBuilder) -> std::io::Result<MockServer> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let hits = Arc::new(AtomicUsize::new(0));
        let shutdown = Arc::new(AtomicBool::new(false));
        let failures_left = Arc::new(AtomicUsize::new(
            builder.fail_first.map_or(0, |(n, _)| n),
        ));
        let fail_status = builder.fail_first.map_or(0, |(_, status)| status);
        let mode = Arc::new(builder.mode);
        let envelope = builder.envelope;

        let hits_in = Arc::clone(&hits);
        let shutdown_in = Arc::clone(&shutdown);
        let handle = std::thread::spawn(move || {
            while !shutdown_in.load(Ordering::SeqCst) {
                match listener.accept() {
                    Ok((stream, _)) => {
                        let mode = Arc::clone(&mode);
                        let hits = Arc::clone(&hits_in);
                        let failures_left = Arc::clone(&failures_left);
                        std::thread::spawn(move || {
                            let _ = handle_connection(
                                stream,
                                &mode,
                                envelope,
                                &hits,
                                &failures_left,
                                fail_status,
                            );
                        });
                    }
                    Err(err) if err.kind() == std::io::ErrorKind::WouldBlock => {
                        std::thread::sleep(std::time::Duration::from_millis(2));
                    }
                    Err(_) => break,
                }
            }
        });

        Ok(MockServer {
            addr,
            hits,
            shutdown,
            handle: Some(handle),
        })
    }

    /// URL to pass to the client as `--endpoint`.
    pub fn endpoint(&self) -> String {
        format!("http://{}/v1/completions", self.addr)
    }

    /// Number of HTTP requests served so far.
    pub fn request_count(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

#[derive(Deserialize)]
struct IncomingRequest {
    #[serde(default)]
    prompt: String,
}

fn handle_connection(
    stream: TcpStream,
    mode: &MockMode,
    envelope: MockEnvelope,
    hits: &AtomicUsize,
    failures_left: &AtomicUsize,
    fail_status: u16,
) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let mut content_length = 0usize;
    loop {
        let mut header = String::new();
        if reader.read_line(&mut header)? == 0 {
            break;
        }
        let header = header.trim_end();
        if header.is_empty() {
            break;
        }
        if let Some(value) = header.to_ascii_lowercase().strip_prefix("content-length:") {
            content_length = value.trim().parse().unwrap_or(0);
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    hits.fetch_add(1, Ordering::SeqCst);

    // Scripted failures are consumed before the mode logic runs.
    if failures_left
        .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
        .is_ok()
    {
        return write_response(reader.get_mut(), fail_status, "scripted failure");
    }

    let request: IncomingRequest = match serde_json::from_slice(&body) {
        Ok(request) => request,
        Err(_) => return write_response(reader.get_mut(), 400, "malformed request body"),
    };

    let reply = match mode {
        MockMode::Fixed(text) => text.clone(),
        MockMode::Scripted(script) => match script.get(&prompt_sha256(&request.prompt)) {
            Some(text) => text.clone(),
            None => return write_response(reader.get_mut(), 404, "prompt not in script"),
        },
        MockMode::GoldEcho(catalog) => match gold_echo_reply(catalog, &request.prompt) {
            Some(text) => text,
            None => return write_response(reader.get_mut(), 400, "unknown variable"),
        },
    };

    let payload = match envelope {
        MockEnvelope::Chat => serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": reply}}]
        }),
        MockEnvelope::Completion => serde_json::json!({
            "choices": [{"text": reply}]
        }),
    };
    write_json(reader.get_mut(), &payload.to_string())
}

/// Identify the queried variable by catalog-name match inside the query
/// segment (text after the last `[INST]`, or the whole prompt when absent)
/// and reply with its gold domain as `(k)`.
fn gold_echo_reply(catalog: &VariableCatalog, prompt: &str) -> Option<String> {
    let segment = match prompt.rfind("[INST]") {
        Some(pos) => &prompt[pos..],
        None => prompt,
    };
    let record = catalog
        .iter()
        .filter_map(|r| segment.find(&r.variable_name).map(|pos| (pos, r)))
        .min_by_key(|&(pos, _)| pos)
        .map(|(_, r)| r)?;
    let gold = record.gold_domain?;
    Some(format!("({})", gold.code()))
}

fn write_json(stream: &mut TcpStream, payload: &str) -> std::io::Result<()> {
    let response = format!(
        "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
        payload.len(),
        payload
    );
    stream.write_all(response.as_bytes())
}

fn write_response(stream: &mut TcpStream, status: u16, body: &str) -> std::io::Result<()> {
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        404 => "Not Found",
        429 => "Too Many Requests",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Error",
    };
    let response = format!(
        "HTTP/1.1 {status} {reason}\r\ncontent-type: text/plain\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
        body.len(),
        body
    );
    stream.write_all(response.as_bytes())
}

pub fn prompt_sha256(prompt: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(prompt.as_bytes());
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Deserialize)]
struct ScriptLine {
    prompt_sha256: Option<String>,
    prompt: Option<String>,
    text: String,
}

/// Load a scripted transcript from JSON Lines. Each line carries `text` plus
/// either `prompt_sha256` or the raw `prompt` (hashed on load).
pub fn load_script(path: impl AsRef<Path>) -> std::io::Result<HashMap<String, String>> {
    let contents = std::fs::read_to_string(path)?;
    let mut script = HashMap::new();
    for (i, line) in contents.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ScriptLine = serde_json::from_str(line).map_err(|err| {
            std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("script line {}: {err}", i + 1),
            )
        })?;
        let key = match (parsed.prompt_sha256, parsed.prompt) {
            (Some(key), _) => key,
            (None, Some(prompt)) => prompt_sha256(&prompt),
            (None, None) => {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("script line {}: needs prompt or prompt_sha256", i + 1),
                ))
            }
        };
        script.insert(key, parsed.text);
    }
    Ok(script)
}
