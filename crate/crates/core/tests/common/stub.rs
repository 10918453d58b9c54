//! Minimal chat-completions endpoint serving canned replies in order.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

pub enum Reply {
    /// 200 with the given assistant message content.
    Content(String),
    Status(u16),
}

pub struct StubServer {
    pub url: String,
    requests: Arc<Mutex<Vec<String>>>,
    authorization: Arc<Mutex<Option<String>>>,
}

impl StubServer {
    /// Serves `replies` one per request; the last one repeats.
    pub fn start(replies: Vec<Reply>) -> StubServer {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let seen = Arc::clone(&requests);
        let authorization = Arc::new(Mutex::new(None));
        let auth = Arc::clone(&authorization);
        thread::spawn(move || {
            for (n, stream) in listener.incoming().enumerate() {
                let Ok(mut stream) = stream else { continue };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut length = 0;
                loop {
                    let mut line = String::new();
                    if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                        break;
                    }
                    if let Some((k, v)) = line.split_once(':') {
                        if k.eq_ignore_ascii_case("content-length") {
                            length = v.trim().parse().unwrap_or(0);
                        } else if k.eq_ignore_ascii_case("authorization") {
                            *auth.lock().unwrap() = Some(v.trim().to_owned());
                        }
                    }
                }
                let mut body = vec![0; length];
                let _ = reader.read_exact(&mut body);
                seen.lock()
                    .unwrap()
                    .push(String::from_utf8_lossy(&body).into_owned());

                let (code, payload) = match &replies[n.min(replies.len() - 1)] {
                    Reply::Content(text) => (
                        200,
                        serde_json::json!({
                            "choices": [{"index": 0, "message": {"role": "assistant", "content": text}}]
                        })
                        .to_string(),
                    ),
                    Reply::Status(code) => (*code, "{\"error\":\"unavailable\"}".to_owned()),
                };
                let _ = write!(
                    stream,
                    "HTTP/1.1 {code} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                    payload.len()
                );
            }
        });
        StubServer {
            url,
            requests,
            authorization,
        }
    }

    pub fn requests(&self) -> Vec<String> {
        self.requests.lock().unwrap().clone()
    }

    /// Last `Authorization` header received.
    pub fn authorization(&self) -> Option<String> {
        self.authorization.lock().unwrap().clone()
    }
}
