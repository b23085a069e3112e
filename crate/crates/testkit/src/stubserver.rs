//! A tiny recording HTTP stub: serves canned responses and logs every
//! request path, so tests can assert exactly which outbound calls were made.

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

/// What the stub returns for one request.
#[derive(Debug, Clone)]
pub struct StubResponse {
    pub status: u16,
    pub content_type: String,
    pub body: String,
    /// Artificial service delay before the response bytes are written.
    pub delay: Duration,
}

impl StubResponse {
    pub fn json(body: impl Into<String>) -> StubResponse {
        StubResponse {
            status: 200,
            content_type: "application/json".into(),
            body: body.into(),
            delay: Duration::ZERO,
        }
    }

    pub fn not_found() -> StubResponse {
        StubResponse {
            status: 404,
            content_type: "text/plain".into(),
            body: "not found".into(),
            delay: Duration::ZERO,
        }
    }

    pub fn with_delay(mut self, delay: Duration) -> StubResponse {
        self.delay = delay;
        self
    }
}

type Responder = dyn Fn(&str) -> StubResponse + Send + Sync;

/// Running stub; shuts down on drop.
pub struct StubServer {
    addr: SocketAddr,
    log: Arc<Mutex<Vec<String>>>,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl StubServer {
    /// Starts the stub on an ephemeral localhost port. The responder maps a
    /// request path (e.g. `/works/10.1/x`) to a response.
    pub fn start<F>(responder: F) -> StubServer
    where
        F: Fn(&str) -> StubResponse + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub listener");
        listener.set_nonblocking(true).expect("nonblocking listener");
        let addr = listener.local_addr().unwrap();
        let log: Arc<Mutex<Vec<String>>> = Arc::default();
        let stop = Arc::new(AtomicBool::new(false));
        let responder: Arc<Responder> = Arc::new(responder);

        let (log2, stop2) = (log.clone(), stop.clone());
        let handle = thread::spawn(move || {
            while !stop2.load(Ordering::Relaxed) {
                match listener.accept() {
                    Ok((stream, _)) => {
                        let (log3, responder3) = (log2.clone(), responder.clone());
                        thread::spawn(move || handle_connection(stream, log3, responder3));
                    }
                    Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                        thread::sleep(Duration::from_millis(5));
                    }
                    Err(_) => break,
                }
            }
        });
        StubServer { addr, log, stop, handle: Some(handle) }
    }

    /// Base URL, no trailing slash.
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Paths of every request received so far, in arrival order.
    pub fn requests(&self) -> Vec<String> {
        self.log.lock().unwrap().clone()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn handle_connection(mut stream: TcpStream, log: Arc<Mutex<Vec<String>>>, responder: Arc<Responder>) {
    let _ = stream.set_read_timeout(Some(Duration::from_secs(5)));
    let mut buf = Vec::new();
    let mut chunk = [0u8; 1024];
    // GET requests only: read until the end of the header block
    while !buf.windows(4).any(|w| w == b"\r\n\r\n") {
        match stream.read(&mut chunk) {
            Ok(0) => break,
            Ok(n) => buf.extend_from_slice(&chunk[..n]),
            Err(_) => return,
        }
        if buf.len() > 64 * 1024 {
            return;
        }
    }
    let head = String::from_utf8_lossy(&buf);
    let Some(request_line) = head.lines().next() else { return };
    let mut parts = request_line.split_whitespace();
    let (_method, path) = (parts.next(), parts.next());
    let Some(path) = path else { return };
    log.lock().unwrap().push(path.to_string());

    let resp = responder(path);
    if !resp.delay.is_zero() {
        thread::sleep(resp.delay);
    }
    let reason = match resp.status {
        200 => "OK",
        404 => "Not Found",
        500 => "Internal Server Error",
        _ => "Status",
    };
    let payload = format!(
        "HTTP/1.1 {} {}\r\nContent-Type: {}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        resp.status,
        reason,
        resp.content_type,
        resp.body.len(),
        resp.body
    );
    let _ = stream.write_all(payload.as_bytes());
}
