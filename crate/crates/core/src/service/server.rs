//! Newline-delimited JSON over TCP on a local address.
//!
//! Each request is one JSON object on one line; each gets exactly one
//! response line, in order.
//!
//! ```text
//! {"op":"query","query":{"analyst_id":"a","table":"events","k":10}}
//! {"op":"budget","analyst_id":"a"}
//! {"op":"ping"}
//! ```
//!
//! Success: `{"ok":true,"result":<QueryResponse | BudgetRecord | "pong">}`.
//! Failure: `{"ok":false,"error":{"kind":K,"message":M}}` where `K` is
//! `protocol`, `rejected`, `invalid_query`, `store`, `mechanism` or `budget`.
//! Rejections also carry `"reason"`: `budget_exhausted` or
//! `insufficient_for_query`.

use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{QueryEngine, QueryError, QuerySpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Request {
    Query { query: QuerySpec },
    Budget { analyst_id: String },
    Ping,
}

const POLL: Duration = Duration::from_millis(50);

fn error_value(kind: &str, message: String, reason: Option<&str>) -> Value {
    let mut err = json!({ "kind": kind, "message": message });
    if let Some(r) = reason {
        err["reason"] = json!(r);
    }
    json!({ "ok": false, "error": err })
}

/// Handles one request line.
pub fn handle_line(engine: &QueryEngine, line: &str) -> Value {
    let request: Request = match serde_json::from_str(line) {
        Ok(r) => r,
        Err(e) => return error_value("protocol", e.to_string(), None),
    };
    match request {
        Request::Ping => json!({ "ok": true, "result": "pong" }),
        Request::Budget { analyst_id } => match engine.ledger().get_budget(&analyst_id) {
            Ok(r) => json!({ "ok": true, "result": r }),
            Err(e) => error_value("budget", e.to_string(), None),
        },
        Request::Query { query } => match engine.execute(&query) {
            Ok(r) => json!({ "ok": true, "result": r }),
            Err(e) => {
                let reason = match &e {
                    QueryError::Rejected(a) => Some(a.reason()),
                    _ => None,
                };
                error_value(e.kind(), e.to_string(), reason)
            }
        },
    }
}

fn serve_connection(engine: &QueryEngine, stream: TcpStream, stop: &AtomicBool) -> std::io::Result<()> {
    stream.set_read_timeout(Some(POLL))?;
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    let mut line = Vec::new();
    loop {
        match reader.read_until(b'\n', &mut line) {
            Ok(0) => return Ok(()),
            Ok(_) => {
                let text = String::from_utf8_lossy(&line);
                if !text.trim().is_empty() {
                    let mut out = serde_json::to_vec(&handle_line(engine, text.trim())).expect("json");
                    out.push(b'\n');
                    writer.write_all(&out)?;
                    writer.flush()?;
                }
                line.clear();
            }
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                // Partial input stays in `line`; keep reading unless stopping.
                if stop.load(Ordering::SeqCst) {
                    return Ok(());
                }
            }
            Err(e) => return Err(e),
        }
    }
}

/// Running server. Dropping it shuts it down.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
    workers: Arc<Mutex<Vec<JoinHandle<()>>>>,
    engine: Arc<QueryEngine>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting, waits for open connections to finish their current
    /// request, and syncs the budget journal.
    pub fn shutdown(mut self) -> std::io::Result<()> {
        self.stop_and_join()
    }

    /// Blocks until another thread stops the server.
    pub fn wait(mut self) -> std::io::Result<()> {
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
        self.stop_and_join()
    }

    pub fn stop_flag(&self) -> Arc<AtomicBool> {
        self.stop.clone()
    }

    fn stop_and_join(&mut self) -> std::io::Result<()> {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
        let workers: Vec<_> = std::mem::take(&mut *self.workers.lock().unwrap());
        for w in workers {
            let _ = w.join();
        }
        self.engine.ledger().sync().map_err(std::io::Error::other)
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if self.acceptor.is_some() {
            let _ = self.stop_and_join();
        }
    }
}

/// Binds `addr` and serves `engine` on background threads, one per
/// connection.
pub fn serve(engine: Arc<QueryEngine>, addr: impl ToSocketAddrs) -> std::io::Result<ServerHandle> {
    let listener = TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    let local = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let workers: Arc<Mutex<Vec<JoinHandle<()>>>> = Arc::default();

    let acceptor = {
        let (stop, workers, engine) = (stop.clone(), workers.clone(), engine.clone());
        std::thread::Builder::new().name("dpolap-accept".into()).spawn(move || {
            while !stop.load(Ordering::SeqCst) {
                match listener.accept() {
                    Ok((stream, peer)) => {
                        let _ = stream.set_nonblocking(false);
                        let (stop, engine) = (stop.clone(), engine.clone());
                        let spawned = std::thread::Builder::new().name(format!("dpolap-conn-{peer}")).spawn(move || {
                            if let Err(e) = serve_connection(&engine, stream, &stop) {
                                log::debug!("connection {peer} closed: {e}");
                            }
                        });
                        match spawned {
                            Ok(h) => {
                                let mut ws = workers.lock().unwrap();
                                ws.retain(|w| !w.is_finished());
                                ws.push(h);
                            }
                            Err(e) => log::error!("cannot spawn connection thread: {e}"),
                        }
                    }
                    Err(e) if e.kind() == ErrorKind::WouldBlock => std::thread::sleep(Duration::from_millis(5)),
                    Err(e) => {
                        log::error!("accept failed: {e}");
                        std::thread::sleep(POLL);
                    }
                }
            }
        })?
    };
    log::info!("listening on {local}");
    Ok(ServerHandle { addr: local, stop, acceptor: Some(acceptor), workers, engine })
}
