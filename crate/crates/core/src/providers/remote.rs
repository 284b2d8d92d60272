//! Client for model adapters speaking newline-delimited JSON.
//!
//! Every request is one line:
//!
//! ```text
//! {"id": 7, "op": "mask_fill", "payload": {...}}
//! ```
//!
//! and every response is one line carrying the same id:
//!
//! ```text
//! {"id": 7, "ok": true, "result": {...}}
//! {"id": 7, "ok": false, "error": "message"}
//! ```
//!
//! Payloads per op:
//!
//! | op            | payload                                              | result                               |
//! |---------------|------------------------------------------------------|--------------------------------------|
//! | `mask_fill`   | `text`, `tokens`, `mask_index`, `k`                   | `candidates`: `[[word, prob], ...]`  |
//! | `text_embed`  | `text`                                               | `embedding`: `[f, ...]`              |
//! | `image_embed` | `image_id`                                           | `embedding`: `[f, ...]`              |
//! | `pos_tag`     | `tokens`: word tokens                                | `tags`: `["noun" \| "other", ...]`   |
//!
//! The transport is chosen by URI: `stdio:<command> [args...]` spawns the
//! adapter and talks over its standard streams, `tcp:<host>:<port>` connects
//! to a listening adapter.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};

use super::{
    check_candidates, ImageEmbedder, MaskFillCandidate, MaskFillQuery, MaskFiller, PosTag,
    PosTagger, ProviderError, TextEmbedder,
};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

/// One open connection to an adapter. Calls are strictly request/response.
pub struct RemoteConnection {
    writer: Box<dyn Write + Send>,
    lines: Receiver<std::io::Result<String>>,
    child: Option<Child>,
    next_id: u64,
    timeout: Duration,
}

impl std::fmt::Debug for RemoteConnection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteConnection")
            .field("next_id", &self.next_id)
            .field("timeout", &self.timeout)
            .finish_non_exhaustive()
    }
}

impl RemoteConnection {
    pub fn connect(uri: &str, timeout: Duration) -> Result<Self, ProviderError> {
        if let Some(command) = uri.strip_prefix("stdio:") {
            let mut parts = command.split_whitespace();
            let program = parts
                .next()
                .ok_or_else(|| ProviderError::Transport("empty stdio command".into()))?;
            let mut child = Command::new(program)
                .args(parts)
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .stderr(Stdio::inherit())
                .spawn()
                .map_err(|e| ProviderError::Transport(format!("spawn {program}: {e}")))?;
            let stdin = child.stdin.take().expect("piped stdin");
            let stdout = child.stdout.take().expect("piped stdout");
            let mut conn = Self::from_streams(stdout, stdin, timeout);
            conn.child = Some(child);
            Ok(conn)
        } else if let Some(addr) = uri.strip_prefix("tcp:") {
            let stream = TcpStream::connect(addr)
                .map_err(|e| ProviderError::Transport(format!("connect {addr}: {e}")))?;
            let reader = stream
                .try_clone()
                .map_err(|e| ProviderError::Transport(e.to_string()))?;
            Ok(Self::from_streams(reader, stream, timeout))
        } else {
            Err(ProviderError::Transport(format!(
                "unsupported provider uri {uri:?}; expected stdio:<cmd> or tcp:<host>:<port>"
            )))
        }
    }

    /// Wraps an arbitrary byte stream pair.
    pub fn from_streams(
        reader: impl Read + Send + 'static,
        writer: impl Write + Send + 'static,
        timeout: Duration,
    ) -> Self {
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(reader).lines() {
                let failed = line.is_err();
                if tx.send(line).is_err() || failed {
                    break;
                }
            }
        });
        RemoteConnection {
            writer: Box::new(writer),
            lines: rx,
            child: None,
            next_id: 1,
            timeout,
        }
    }

    /// Sends one request and waits for its response.
    pub fn call(&mut self, op: &str, payload: Value) -> Result<Value, ProviderError> {
        let id = self.next_id;
        self.next_id += 1;
        let request = json!({"id": id, "op": op, "payload": payload});
        let mut line = serde_json::to_string(&request).expect("json value serializes");
        line.push('\n');
        self.writer
            .write_all(line.as_bytes())
            .and_then(|_| self.writer.flush())
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::BrokenPipe => ProviderError::Closed,
                _ => ProviderError::Transport(e.to_string()),
            })?;

        let response = match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(ProviderError::Transport(e.to_string())),
            Err(RecvTimeoutError::Timeout) => return Err(ProviderError::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => return Err(ProviderError::Closed),
        };
        parse_response(id, &response)
    }
}

impl Drop for RemoteConnection {
    fn drop(&mut self) {
        if let Some(child) = self.child.as_mut() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

fn parse_response(expected: u64, line: &str) -> Result<Value, ProviderError> {
    let value: Value =
        serde_json::from_str(line).map_err(|e| ProviderError::Malformed(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| ProviderError::Malformed("response is not an object".into()))?;
    let got = obj
        .get("id")
        .and_then(Value::as_u64)
        .ok_or_else(|| ProviderError::Malformed("missing integer id".into()))?;
    if got != expected {
        return Err(ProviderError::IdMismatch { expected, got });
    }
    match obj.get("ok").and_then(Value::as_bool) {
        Some(true) => obj
            .get("result")
            .cloned()
            .ok_or_else(|| ProviderError::Malformed("ok response without result".into())),
        Some(false) => Err(ProviderError::Remote(
            obj.get("error")
                .and_then(Value::as_str)
                .unwrap_or("unspecified error")
                .to_string(),
        )),
        None => Err(ProviderError::Malformed("missing boolean ok".into())),
    }
}

fn field<T: for<'de> Deserialize<'de>>(result: Value, name: &str) -> Result<T, ProviderError> {
    let mut result = result;
    let inner = result
        .get_mut(name)
        .map(Value::take)
        .ok_or_else(|| ProviderError::Malformed(format!("result lacks {name:?}")))?;
    serde_json::from_value(inner).map_err(|e| ProviderError::Malformed(format!("{name}: {e}")))
}

/// A remote adapter exposed through every provider trait. Calls on one client
/// are serialized.
#[derive(Debug)]
pub struct RemoteClient {
    conn: Mutex<RemoteConnection>,
}

impl RemoteClient {
    pub fn connect(uri: &str) -> Result<Self, ProviderError> {
        Self::connect_with_timeout(uri, DEFAULT_TIMEOUT)
    }

    pub fn connect_with_timeout(uri: &str, timeout: Duration) -> Result<Self, ProviderError> {
        Ok(Self::new(RemoteConnection::connect(uri, timeout)?))
    }

    pub fn new(conn: RemoteConnection) -> Self {
        RemoteClient {
            conn: Mutex::new(conn),
        }
    }

    pub fn call(&self, op: &str, payload: Value) -> Result<Value, ProviderError> {
        self.conn
            .lock()
            .map_err(|_| ProviderError::Other("connection lock poisoned".into()))?
            .call(op, payload)
    }
}

impl MaskFiller for RemoteClient {
    fn mask_fill(&self, query: &MaskFillQuery) -> Result<Vec<MaskFillCandidate>, ProviderError> {
        let result = self.call(
            "mask_fill",
            json!({
                "text": query.text,
                "tokens": query.tokens,
                "mask_index": query.mask_index,
                "k": query.k,
            }),
        )?;
        let pairs: Vec<(String, f64)> = field(result, "candidates")?;
        let candidates: Vec<MaskFillCandidate> = pairs
            .into_iter()
            .map(|(w, p)| MaskFillCandidate::new(w, p))
            .collect();
        check_candidates(&candidates, query.k)?;
        Ok(candidates)
    }
}

impl TextEmbedder for RemoteClient {
    fn embed_text(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        field(self.call("text_embed", json!({ "text": text }))?, "embedding")
    }
}

impl ImageEmbedder for RemoteClient {
    fn embed_image(&self, image_id: &str) -> Result<Vec<f64>, ProviderError> {
        field(self.call("image_embed", json!({ "image_id": image_id }))?, "embedding")
    }
}

impl PosTagger for RemoteClient {
    fn tag(&self, words: &[String]) -> Result<Vec<PosTag>, ProviderError> {
        let tags: Vec<PosTag> = field(self.call("pos_tag", json!({ "tokens": words }))?, "tags")?;
        if tags.len() != words.len() {
            return Err(ProviderError::Malformed(format!(
                "{} tags for {} tokens",
                tags.len(),
                words.len()
            )));
        }
        Ok(tags)
    }
}
