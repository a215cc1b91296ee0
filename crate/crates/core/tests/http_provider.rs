use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use engage_core::config::ProviderKind;
use engage_core::content::{build_prompt, ContentProvider, HttpProvider, PromptTemplates, ProviderError};
use engage_core::{Catalog, ContentCache, EngagementState, EngineConfig, Provenance, Session, TelemetryFrame};

struct Captured {
    head: String,
    body: serde_json::Value,
}

/// Serves `responses.len()` connections in order, each with one canned reply.
/// `None` accepts the connection and never answers.
fn serve(responses: Vec<Option<(u16, String)>>) -> (String, mpsc::Receiver<Captured>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/generate", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for reply in responses {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut head = String::new();
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if line == "\r\n" {
                    break;
                }
                head.push_str(&line);
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            let _ = tx.send(Captured {
                head,
                body: serde_json::from_slice(&body).unwrap(),
            });
            match reply {
                Some((status, payload)) => {
                    let resp = format!(
                        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                        payload.len()
                    );
                    stream.write_all(resp.as_bytes()).unwrap();
                }
                None => thread::sleep(Duration::from_secs(3)),
            }
        }
    });
    (url, rx)
}

fn spec_for(level: EngagementState) -> (engage_core::content::PromptSpec, engage_core::Exhibit) {
    let ex = Catalog::builtin().get("ex-01").unwrap().clone();
    (build_prompt(&ex, level, &PromptTemplates::default()).unwrap(), ex)
}

#[test]
fn sends_prompt_and_budget_with_bearer_credential() {
    let (url, rx) = serve(vec![Some((200, r#"{"text":"A brazier kept the room warm."}"#.into()))]);
    let p = HttpProvider::new(url, Some("secret-token".into()), Duration::from_secs(2));
    let (spec, ex) = spec_for(EngagementState::Neutral);
    assert_eq!(p.generate(&spec, &ex).unwrap(), "A brazier kept the room warm.");
    let got = rx.recv().unwrap();
    assert!(got.head.starts_with("POST /generate "));
    assert!(got.head.lines().any(|l| l.eq_ignore_ascii_case("authorization: Bearer secret-token")));
    assert_eq!(got.body["system_instruction"], spec.system_instruction.as_str());
    assert_eq!(got.body["user_prompt"], spec.user_prompt.as_str());
    assert_eq!(got.body["min_words"], spec.word_budget.min);
    assert_eq!(got.body["max_words"], spec.word_budget.max);
}

#[test]
fn omits_authorization_without_credential() {
    let (url, rx) = serve(vec![Some((200, r#"{"text":"ok then"}"#.into()))]);
    let p = HttpProvider::new(url, None, Duration::from_secs(2));
    let (spec, ex) = spec_for(EngagementState::Engaged);
    p.generate(&spec, &ex).unwrap();
    assert!(!rx.recv().unwrap().head.to_ascii_lowercase().contains("authorization"));
}

#[test]
fn classifies_failures() {
    let (url, _rx) = serve(vec![
        Some((500, r#"{"error":"overloaded"}"#.into())),
        Some((200, "not json".into())),
        Some((200, r#"{"text":"  - "}"#.into())),
        None,
    ]);
    let p = HttpProvider::new(url, None, Duration::from_millis(500));
    let (spec, ex) = spec_for(EngagementState::Disengaged);
    assert!(matches!(p.generate(&spec, &ex), Err(ProviderError::Transport(_))));
    assert!(matches!(p.generate(&spec, &ex), Err(ProviderError::Malformed(_))));
    assert!(matches!(p.generate(&spec, &ex), Err(ProviderError::Malformed(_))));
    assert!(matches!(p.generate(&spec, &ex), Err(ProviderError::Timeout)));
}

#[test]
fn remote_session_displays_served_text() {
    let text = "Hammered copper, riveted handles, and a pierced lid for coals.";
    let (url, _rx) = serve(vec![Some((200, format!(r#"{{"text":"{text}"}}"#)))]);
    let mut cfg = EngineConfig::default();
    cfg.provider.kind = ProviderKind::Remote;
    cfg.provider.endpoint = Some(url);
    cfg.provider.credential_env = "ENGAGE_TEST_UNSET_TOKEN".into();
    cfg.validate().unwrap();
    let mut s = Session::from_config(&cfg, Catalog::builtin(), ContentCache::new()).unwrap();
    let mut shown = Vec::new();
    // Frames are paced in real time once content is requested so the worker can answer.
    for i in 0..(8 * 90) {
        let f = TelemetryFrame::new(i as f64 / 90.0, 1.0, 0.0).gazing("ex-01", true);
        shown.extend(s.step(&f).unwrap().displays);
        if s.content().in_flight() > 0 {
            thread::sleep(Duration::from_millis(2));
        }
        if !shown.is_empty() {
            break;
        }
    }
    assert_eq!(shown.len(), 1);
    assert_eq!(shown[0].record.text, text);
    assert_eq!(shown[0].record.provenance, Provenance::Remote);
}
