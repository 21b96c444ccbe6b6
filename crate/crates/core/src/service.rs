//! Line-delimited JSON service answering trie queries, so generation loops
//! in other processes or languages can mask their logits.
//!
//! Each request is one JSON object per line:
//!
//! ```text
//! {"op": "open",    "request_id": 1, "payload": {"group": "DISO", "fingerprint": "char:..."}}
//! {"op": "allowed", "request_id": 2, "session": "s1", "payload": {"prefix": [5, 9]}}
//! {"op": "resolve", "request_id": 3, "session": "s1", "payload": {"tokens": [5, 9, 4]}}
//! {"op": "close",   "request_id": 4, "session": "s1"}
//! ```
//!
//! Every response echoes `request_id` and carries either `"ok": true` with a
//! `result`, or `"ok": false` with `error: {code, message}`. `allowed` and
//! `resolve` accept an optional `fingerprint` in the payload, checked
//! against the session's trie.

use std::collections::HashMap;
use std::io::{self, BufRead, BufReader, ErrorKind, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::tokenizer::TokenId;
use crate::trie::SynonymTrie;

pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(600);
pub const DEFAULT_LISTEN: &str = "127.0.0.1:7878";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    SessionUnknown,
    BadPrefix,
    /// `resolve` on a path that is not a complete synonym.
    NotTerminal,
    FingerprintMismatch,
    UnknownGroup,
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: ErrorCode,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub request_id: Value,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

impl Response {
    fn ok(request_id: Value, result: Value) -> Self {
        Self {
            request_id,
            ok: true,
            result: Some(result),
            error: None,
        }
    }

    fn err(request_id: Value, code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            request_id,
            ok: false,
            result: None,
            error: Some(ErrorBody {
                code,
                message: message.into(),
            }),
        }
    }

    pub fn error_code(&self) -> Option<ErrorCode> {
        self.error.as_ref().map(|e| e.code)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub op: String,
    #[serde(default)]
    pub session: Option<String>,
    #[serde(default)]
    pub payload: Value,
    #[serde(default)]
    pub request_id: Value,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OpenPayload {
    group: String,
    fingerprint: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AllowedPayload {
    prefix: Vec<TokenId>,
    #[serde(default)]
    fingerprint: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ResolvePayload {
    tokens: Vec<TokenId>,
    #[serde(default)]
    fingerprint: Option<String>,
}

/// Immutable tries keyed by `(group, tokenizer fingerprint)`.
#[derive(Debug, Default, Clone)]
pub struct TrieRegistry {
    tries: HashMap<(String, String), Arc<SynonymTrie>>,
}

impl TrieRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `trie`, replacing any trie with the same group and fingerprint.
    pub fn insert(&mut self, trie: SynonymTrie) {
        let key = (trie.group().to_owned(), trie.fingerprint().to_owned());
        self.tries.insert(key, Arc::new(trie));
    }

    pub fn load(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        self.insert(SynonymTrie::read_unchecked(BufReader::new(f))?);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tries.is_empty()
    }

    pub fn get(&self, group: &str, fingerprint: &str) -> Option<&Arc<SynonymTrie>> {
        self.tries.get(&(group.to_owned(), fingerprint.to_owned()))
    }

    fn has_group(&self, group: &str) -> bool {
        self.tries.keys().any(|(g, _)| g == group)
    }
}

struct Session {
    trie: Arc<SynonymTrie>,
    created_at: Instant,
    last_used: Instant,
}

/// Request handler shared by all connections. Tries are read-only; the
/// session table is the only lock.
pub struct MaskService {
    registry: TrieRegistry,
    sessions: Mutex<HashMap<String, Session>>,
    next_id: AtomicU64,
    idle_timeout: Duration,
}

impl MaskService {
    pub fn new(registry: TrieRegistry, idle_timeout: Duration) -> Result<Self> {
        if registry.is_empty() {
            return Err(Error::InvalidArgument("the service needs at least one trie".into()));
        }
        Ok(Self {
            registry,
            sessions: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
            idle_timeout,
        })
    }

    pub fn registry(&self) -> &TrieRegistry {
        &self.registry
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("session table poisoned").len()
    }

    /// Time since session `id` was opened.
    pub fn session_age(&self, id: &str) -> Option<Duration> {
        let sessions = self.sessions.lock().expect("session table poisoned");
        sessions.get(id).map(|s| s.created_at.elapsed())
    }

    /// Drops sessions idle for longer than the timeout; returns how many.
    pub fn expire_idle(&self) -> usize {
        let now = Instant::now();
        let mut sessions = self.sessions.lock().expect("session table poisoned");
        let before = sessions.len();
        sessions.retain(|_, s| now.duration_since(s.last_used) <= self.idle_timeout);
        before - sessions.len()
    }

    fn session_trie(&self, id: Option<&str>) -> std::result::Result<Arc<SynonymTrie>, String> {
        let id = id.ok_or("request has no session")?;
        let now = Instant::now();
        let mut sessions = self.sessions.lock().expect("session table poisoned");
        match sessions.get_mut(id) {
            Some(s) if now.duration_since(s.last_used) <= self.idle_timeout => {
                s.last_used = now;
                Ok(Arc::clone(&s.trie))
            }
            Some(_) => {
                sessions.remove(id);
                Err(format!("session `{id}` expired"))
            }
            None => Err(format!("unknown session `{id}`")),
        }
    }

    pub fn handle(&self, req: Request) -> Response {
        let rid = req.request_id.clone();
        let malformed = |e: serde_json::Error| Response::err(rid.clone(), ErrorCode::Malformed, e.to_string());
        let check_fp = |trie: &SynonymTrie, fp: &Option<String>| match fp {
            Some(fp) if fp != trie.fingerprint() => Some(Response::err(
                rid.clone(),
                ErrorCode::FingerprintMismatch,
                format!("session trie uses {}, request has {fp}", trie.fingerprint()),
            )),
            _ => None,
        };
        match req.op.as_str() {
            "open" => {
                let p: OpenPayload = match serde_json::from_value(req.payload) {
                    Ok(p) => p,
                    Err(e) => return malformed(e),
                };
                let Some(trie) = self.registry.get(&p.group, &p.fingerprint) else {
                    return if self.registry.has_group(&p.group) {
                        Response::err(
                            rid,
                            ErrorCode::FingerprintMismatch,
                            format!("no trie for group `{}` with fingerprint {}", p.group, p.fingerprint),
                        )
                    } else {
                        Response::err(rid, ErrorCode::UnknownGroup, format!("no trie for group `{}`", p.group))
                    };
                };
                self.expire_idle();
                let id = format!("s{}", self.next_id.fetch_add(1, Ordering::Relaxed));
                let now = Instant::now();
                self.sessions.lock().expect("session table poisoned").insert(
                    id.clone(),
                    Session {
                        trie: Arc::clone(trie),
                        created_at: now,
                        last_used: now,
                    },
                );
                Response::ok(
                    rid,
                    json!({
                        "session": id,
                        "group": trie.group(),
                        "fingerprint": trie.fingerprint(),
                        "eos": trie.eos_id(),
                        "max_depth": trie.max_depth(),
                    }),
                )
            }
            "allowed" => {
                let trie = match self.session_trie(req.session.as_deref()) {
                    Ok(t) => t,
                    Err(m) => return Response::err(rid, ErrorCode::SessionUnknown, m),
                };
                let p: AllowedPayload = match serde_json::from_value(req.payload) {
                    Ok(p) => p,
                    Err(e) => return malformed(e),
                };
                if let Some(r) = check_fp(&trie, &p.fingerprint) {
                    return r;
                }
                match trie.allowed_next(&p.prefix) {
                    Ok(a) => Response::ok(rid, json!({"tokens": a.tokens, "eos": a.eos})),
                    Err(e) => Response::err(rid, ErrorCode::BadPrefix, e.to_string()),
                }
            }
            "resolve" => {
                let trie = match self.session_trie(req.session.as_deref()) {
                    Ok(t) => t,
                    Err(m) => return Response::err(rid, ErrorCode::SessionUnknown, m),
                };
                let p: ResolvePayload = match serde_json::from_value(req.payload) {
                    Ok(p) => p,
                    Err(e) => return malformed(e),
                };
                if let Some(r) = check_fp(&trie, &p.fingerprint) {
                    return r;
                }
                match trie.resolve(&p.tokens) {
                    Ok(t) => Response::ok(rid, json!({"concept": t.concept, "surface": t.surface})),
                    Err(Error::NotTerminal) => {
                        Response::err(rid, ErrorCode::NotTerminal, Error::NotTerminal.to_string())
                    }
                    Err(e) => Response::err(rid, ErrorCode::BadPrefix, e.to_string()),
                }
            }
            "close" => {
                let removed = req
                    .session
                    .as_deref()
                    .and_then(|id| self.sessions.lock().expect("session table poisoned").remove(id));
                match removed {
                    Some(_) => Response::ok(rid, json!({"closed": true})),
                    None => Response::err(rid, ErrorCode::SessionUnknown, "unknown session"),
                }
            }
            other => Response::err(rid, ErrorCode::Malformed, format!("unknown op `{other}`")),
        }
    }

    /// Handles one request line and returns one response line (no newline).
    pub fn handle_line(&self, line: &str) -> String {
        let resp = match serde_json::from_str::<Value>(line) {
            Err(e) => Response::err(Value::Null, ErrorCode::Malformed, e.to_string()),
            Ok(v) => {
                let rid = v.get("request_id").cloned().unwrap_or(Value::Null);
                match serde_json::from_value::<Request>(v) {
                    Ok(req) => self.handle(req),
                    Err(e) => Response::err(rid, ErrorCode::Malformed, e.to_string()),
                }
            }
        };
        serde_json::to_string(&resp).expect("responses serialize")
    }

    /// Serves requests from `input` until end of stream.
    pub fn serve_stream(&self, input: impl BufRead, mut output: impl Write) -> io::Result<()> {
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            writeln!(output, "{}", self.handle_line(&line))?;
            output.flush()?;
        }
        Ok(())
    }
}

/// How often blocked accepts and reads wake up to check for shutdown.
const POLL: Duration = Duration::from_millis(50);

fn serve_connection(service: &MaskService, stream: TcpStream, shutdown: &AtomicBool) -> io::Result<()> {
    stream.set_read_timeout(Some(POLL))?;
    let mut writer = io::BufWriter::new(stream.try_clone()?);
    let mut reader = BufReader::new(stream);
    let mut buf = Vec::new();
    loop {
        match reader.read_until(b'\n', &mut buf) {
            Ok(0) => return Ok(()),
            Ok(_) => {
                let eof = buf.last() != Some(&b'\n');
                let line = String::from_utf8_lossy(&buf);
                if !line.trim().is_empty() {
                    writeln!(writer, "{}", service.handle_line(line.trim_end()))?;
                    writer.flush()?;
                }
                buf.clear();
                if eof {
                    return Ok(());
                }
            }
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                if shutdown.load(Ordering::SeqCst) && buf.is_empty() {
                    return Ok(());
                }
            }
            Err(e) => return Err(e),
        }
    }
}

/// Accepts connections on `listener`, one thread each, until `shutdown` is
/// set. Requests already received are answered before returning.
pub fn serve_tcp(service: Arc<MaskService>, listener: TcpListener, shutdown: Arc<AtomicBool>) -> io::Result<()> {
    listener.set_nonblocking(true)?;
    let mut workers = Vec::new();
    while !shutdown.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                stream.set_nonblocking(false)?;
                let service = Arc::clone(&service);
                let shutdown = Arc::clone(&shutdown);
                workers.push(thread::spawn(move || {
                    if let Err(e) = serve_connection(&service, stream, &shutdown) {
                        log::warn!("connection {peer}: {e}");
                    }
                }));
                workers.retain(|w| !w.is_finished());
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(e) => return Err(e),
        }
    }
    for w in workers {
        let _ = w.join();
    }
    Ok(())
}
