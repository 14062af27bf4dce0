//! A minimal HTTP/1.1 server standing in for a model endpoint in tests.
//! It records how many requests it has seen and the peak number handled
//! at the same time.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use serde_json::Value;

#[derive(Clone, Debug)]
pub struct StubReply {
    pub status: u16,
    pub body: String,
    pub delay: Duration,
    /// Close the connection without answering.
    pub hang_up: bool,
}

impl StubReply {
    /// A 200 OpenAI-style chat reply carrying `text`.
    pub fn chat(text: &str) -> Self {
        StubReply {
            status: 200,
            body: serde_json::json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": text}}]}).to_string(),
            delay: Duration::ZERO,
            hang_up: false,
        }
    }

    pub fn status(status: u16) -> Self {
        StubReply {
            status,
            body: "{\"error\":\"stub\"}".to_owned(),
            delay: Duration::ZERO,
            hang_up: false,
        }
    }

    pub fn delayed(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }

    pub fn hang_up() -> Self {
        StubReply {
            hang_up: true,
            ..StubReply::status(500)
        }
    }
}

/// The prompt inside a request body of either dialect.
pub fn prompt_of(body: &Value) -> Option<&str> {
    body["messages"][0]["content"].as_str().or_else(|| body["inputs"].as_str())
}

pub type Handler = Arc<dyn Fn(&Value) -> StubReply + Send + Sync>;

#[derive(Debug, Default)]
pub struct StubStats {
    pub requests: AtomicUsize,
    pub in_flight: AtomicUsize,
    pub peak_in_flight: AtomicUsize,
}

pub struct StubServer {
    pub addr: SocketAddr,
    pub stats: Arc<StubStats>,
}

impl StubServer {
    /// Binds an ephemeral local port and serves until the process exits.
    pub fn start(handler: impl Fn(&Value) -> StubReply + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub server");
        let addr = listener.local_addr().unwrap();
        let stats = Arc::new(StubStats::default());
        let handler: Handler = Arc::new(handler);
        let s = stats.clone();
        thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let (h, s) = (handler.clone(), s.clone());
                thread::spawn(move || {
                    let _ = serve(stream, &h, &s);
                });
            }
        });
        StubServer { addr, stats }
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    pub fn requests(&self) -> usize {
        self.stats.requests.load(Ordering::SeqCst)
    }

    pub fn peak_in_flight(&self) -> usize {
        self.stats.peak_in_flight.load(Ordering::SeqCst)
    }
}

fn serve(stream: TcpStream, handler: &Handler, stats: &StubStats) -> std::io::Result<()> {
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    loop {
        let mut content_length = 0usize;
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Ok(());
        }
        loop {
            line.clear();
            if reader.read_line(&mut line)? == 0 {
                return Ok(());
            }
            let l = line.trim_end();
            if l.is_empty() {
                break;
            }
            if let Some((name, value)) = l.split_once(':') {
                if name.eq_ignore_ascii_case("content-length") {
                    content_length = value.trim().parse().unwrap_or(0);
                }
            }
        }
        let mut body = vec![0u8; content_length];
        reader.read_exact(&mut body)?;
        let json: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);

        stats.requests.fetch_add(1, Ordering::SeqCst);
        let now = stats.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        stats.peak_in_flight.fetch_max(now, Ordering::SeqCst);
        let reply = handler(&json);
        thread::sleep(reply.delay);
        stats.in_flight.fetch_sub(1, Ordering::SeqCst);

        if reply.hang_up {
            return Ok(());
        }
        write!(
            writer,
            "HTTP/1.1 {} STUB\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{}",
            reply.status,
            reply.body.len(),
            reply.body
        )?;
        writer.flush()?;
    }
}
