//! Remote clients against a minimal in-process HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use cpc::providers::{
    ContextEncoder, GenerationProvider, HttpConfig, RemoteEncoder, RemoteGenerator, SentenceEmbedder,
};
use cpc::Error;

#[derive(Debug, Clone)]
struct Seen {
    auth: Option<String>,
    body: serde_json::Value,
}

/// Serves `replies` (status, body) in order, one per connection.
fn serve(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Seen>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    std::thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            let mut auth = None;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                let (name, value) = line.split_once(':').unwrap_or((line, ""));
                match name.to_ascii_lowercase().as_str() {
                    "content-length" => len = value.trim().parse().unwrap(),
                    "authorization" => auth = Some(value.trim().to_string()),
                    _ => {}
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(Seen {
                auth,
                body: serde_json::from_slice(&buf).unwrap(),
            });
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, seen)
}

fn cfg(url: &str) -> HttpConfig {
    HttpConfig {
        api_key: Some("sekret".into()),
        initial_backoff: Duration::from_millis(1),
        ..HttpConfig::new(url)
    }
}

#[test]
fn encoder_wire_format() {
    let (url, seen) = serve(vec![(200, r#"{"vectors": [[1, 0], [0, 1], [1, 1]]}"#.into())]);
    let enc = RemoteEncoder::new(cfg(&url)).unwrap();
    let toks: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
    let emb = enc.embed_document(&toks).unwrap();
    assert_eq!((emb.len(), emb.dim()), (3, 2));
    let seen = seen.lock().unwrap();
    assert_eq!(seen[0].body, serde_json::json!({"tokens": ["a", "b", "c"]}));
    assert_eq!(seen[0].auth.as_deref(), Some("Bearer sekret"));
}

#[test]
fn text_embedding_and_generation() {
    let (url, seen) = serve(vec![(200, r#"{"vectors": [[3, 4]]}"#.into())]);
    let e = RemoteEncoder::new(cfg(&url)).unwrap().embed_text("hello").unwrap();
    assert_eq!(e.values(), [0.6, 0.8]);
    assert_eq!(seen.lock().unwrap()[0].body, serde_json::json!({"text": "hello"}));

    let (url, seen) = serve(vec![(200, r#"{"text": "Q: a\nA: b"}"#.into())]);
    let out = RemoteGenerator::new(cfg(&url)).unwrap().generate("prompt").unwrap();
    assert_eq!(out, "Q: a\nA: b");
    assert_eq!(seen.lock().unwrap()[0].body, serde_json::json!({"prompt": "prompt", "max_tokens": 512}));
}

#[test]
fn retries_rate_limits_then_succeeds() {
    let (url, seen) = serve(vec![
        (429, "{}".into()),
        (503, "{}".into()),
        (200, r#"{"text": "ok"}"#.into()),
    ]);
    let out = RemoteGenerator::new(cfg(&url)).unwrap().generate("p").unwrap();
    assert_eq!(out, "ok");
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn gives_up_after_max_retries() {
    let (url, _) = serve(vec![(429, "{}".into()); 3]);
    let c = HttpConfig { max_retries: 2, ..cfg(&url) };
    let err = RemoteGenerator::new(c).unwrap().generate("p").unwrap_err();
    assert!(matches!(err, Error::RateLimited { attempts: 3 }), "{err:?}");
}

#[test]
fn client_errors_are_not_retried() {
    let (url, seen) = serve(vec![(400, r#"{"error": "bad"}"#.into())]);
    let err = RemoteGenerator::new(cfg(&url)).unwrap().generate("p").unwrap_err();
    assert!(matches!(err, Error::BadResponse(_)));
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn wrong_vector_count_is_rejected() {
    let (url, _) = serve(vec![(200, r#"{"vectors": [[1, 0]]}"#.into())]);
    let toks: Vec<String> = vec!["a".into(), "b".into()];
    let err = RemoteEncoder::new(cfg(&url)).unwrap().embed_document(&toks).unwrap_err();
    assert!(matches!(err, Error::BadResponse(_)));
}
