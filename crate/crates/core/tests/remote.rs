//! Remote classifier protocol tests against a minimal in-process HTTP stub.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use textsentry::classifier::ClassifierError;
use textsentry::{
    wir_deletion, RemoteClassifier, RemoteConfig, Sampler, TextClassifier, TokenizedText,
};

/// Serves canned HTTP responses; one response spec per incoming request,
/// cycling on the last one. Returns (base_url, request_counter).
fn spawn_stub(responses: Vec<StubResponse>) -> (String, Arc<AtomicU64>) {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub");
    let addr = listener.local_addr().expect("stub addr");
    let counter = Arc::new(AtomicU64::new(0));
    let seen = Arc::clone(&counter);
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { break };
            let n = seen.fetch_add(1, Ordering::SeqCst) as usize;
            let spec = responses
                .get(n)
                .or_else(|| responses.last())
                .cloned()
                .expect("at least one response");
            handle(stream, spec);
        }
    });
    (format!("http://{addr}"), counter)
}

#[derive(Clone)]
enum StubResponse {
    Json(&'static str),
    Status(u16),
    EchoConfidence,
}

fn handle(mut stream: TcpStream, spec: StubResponse) {
    let mut reader = BufReader::new(stream.try_clone().expect("clone stream"));
    let mut content_length = 0usize;
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line).is_err() || line.trim().is_empty() {
            break;
        }
        if let Some(rest) = line.to_ascii_lowercase().strip_prefix("content-length:") {
            content_length = rest.trim().parse().unwrap_or(0);
        }
    }
    let mut body = vec![0u8; content_length];
    let _ = reader.read_exact(&mut body);

    let (status, payload) = match spec {
        StubResponse::Json(json) => ("200 OK", json.to_owned()),
        StubResponse::Status(code) => {
            let status = match code {
                429 => "429 Too Many Requests",
                500 => "500 Internal Server Error",
                _ => "503 Service Unavailable",
            };
            (status, "{}".to_owned())
        }
        StubResponse::EchoConfidence => {
            // Confidence for label 1 scales with the number of times "good"
            // appears in the text, so deletions actually move the score.
            let body = String::from_utf8_lossy(&body);
            let goods = body.matches("good").count() as f64;
            let c1 = (0.2 + 0.2 * goods).min(0.9);
            (
                "200 OK",
                format!(
                    "{{\"labels\": [\"neg\", \"pos\"], \"confidences\": [{}, {}]}}",
                    1.0 - c1,
                    c1
                ),
            )
        }
    };
    let response = format!(
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    );
    let _ = stream.write_all(response.as_bytes());
}

fn client(base_url: &str) -> RemoteClassifier {
    let mut config = RemoteConfig::new(base_url);
    config.timeout_ms = 2_000;
    config.retries = 1;
    RemoteClassifier::new(config).expect("client")
}

#[test]
fn well_formed_response_parses() {
    let (url, _) = spawn_stub(vec![StubResponse::Json(
        r#"{"labels": ["neg", "pos"], "confidences": [0.25, 0.75]}"#,
    )]);
    let dist = client(&url)
        .classify(&TokenizedText::tokenize("nice film"))
        .unwrap();
    assert_eq!(dist.k(), 2);
    assert_eq!(dist.argmax(), 1);
}

#[test]
fn confidences_not_summing_to_one_are_a_protocol_error() {
    let (url, _) = spawn_stub(vec![StubResponse::Json(
        r#"{"labels": ["neg", "pos"], "confidences": [0.3, 0.5]}"#,
    )]);
    let err = client(&url)
        .classify(&TokenizedText::tokenize("x"))
        .unwrap_err();
    assert!(matches!(err, ClassifierError::Protocol(_)), "{err}");
}

#[test]
fn unparseable_body_is_a_protocol_error() {
    let (url, _) = spawn_stub(vec![StubResponse::Json("not json at all")]);
    let err = client(&url)
        .classify(&TokenizedText::tokenize("x"))
        .unwrap_err();
    assert!(matches!(err, ClassifierError::Protocol(_)));
}

#[test]
fn non_200_is_retried_then_reported_with_attempt_count() {
    let (url, counter) = spawn_stub(vec![StubResponse::Status(500)]);
    let err = client(&url)
        .classify(&TokenizedText::tokenize("x"))
        .unwrap_err();
    match err {
        ClassifierError::Query { attempts, reason } => {
            assert_eq!(attempts, 2); // retries = 1
            assert!(reason.contains("500"), "{reason}");
        }
        other => panic!("expected Query, got {other}"),
    }
    assert_eq!(counter.load(Ordering::SeqCst), 2);
}

#[test]
fn transient_failure_recovers_on_retry() {
    let (url, counter) = spawn_stub(vec![
        StubResponse::Status(500),
        StubResponse::Json(r#"{"labels": ["a", "b"], "confidences": [0.6, 0.4]}"#),
    ]);
    let dist = client(&url)
        .classify(&TokenizedText::tokenize("x"))
        .unwrap();
    assert_eq!(dist.argmax(), 0);
    assert_eq!(counter.load(Ordering::SeqCst), 2);
}

#[test]
fn unreachable_endpoint_is_a_query_error() {
    // Bind-then-drop to get a port with nothing listening.
    let port = {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        listener.local_addr().unwrap().port()
    };
    let err = client(&format!("http://127.0.0.1:{port}"))
        .classify(&TokenizedText::tokenize("x"))
        .unwrap_err();
    assert!(matches!(err, ClassifierError::Query { attempts: 2, .. }));
}

#[test]
fn deletion_scoring_works_over_the_wire() {
    let (url, counter) = spawn_stub(vec![StubResponse::EchoConfidence]);
    let remote = client(&url);
    let text = TokenizedText::tokenize("good good movie");
    let profile = wir_deletion(&remote, &text, 1, &Sampler::All).unwrap();
    assert_eq!(profile.sample_size(), 3);
    assert_eq!(counter.load(Ordering::SeqCst), 4); // baseline + 3 deletions
    // Deleting a "good" lowers confidence 1 by 0.2; deleting "movie" by 0.
    let scores: Vec<f64> = profile.scores().iter().map(|&(_, s)| s).collect();
    assert!((scores[0] - 0.2).abs() < 1e-9);
    assert!((scores[1] - 0.2).abs() < 1e-9);
    assert!(scores[2].abs() < 1e-9);
}
