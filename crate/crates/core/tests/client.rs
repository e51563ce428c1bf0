use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use vplan_core::nl::prompt;
use vplan_core::pddl::parse_problem;
use vplan_core::proposer::{ChatClient, ChatTurn, ClientConfig, Part, ProposerError, TemplateSet};
use vplan_core::sim::DomainId;

struct Reply {
    status: u16,
    body: String,
    delay: Duration,
}

fn ok(content: &str) -> Reply {
    let body = serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]});
    Reply {
        status: 200,
        body: body.to_string(),
        delay: Duration::ZERO,
    }
}

fn status(code: u16) -> Reply {
    Reply {
        status: code,
        body: "{}".into(),
        delay: Duration::ZERO,
    }
}

/// Serve the scripted replies in order, one connection each; returns the
/// base URL and the request bodies received.
fn stub(replies: Vec<Reply>) -> (String, Arc<Mutex<Vec<serde_json::Value>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for reply in replies {
            let Ok((mut stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            log.lock().unwrap().push(serde_json::from_slice(&body).unwrap());
            thread::sleep(reply.delay);
            let _ = write!(
                stream,
                "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                reply.status,
                reply.body.len(),
                reply.body
            );
        }
    });
    (url, seen)
}

fn client(url: &str, timeout_ms: u64) -> ChatClient {
    ChatClient::new(ClientConfig {
        endpoint: url.to_string(),
        model: "stub-model".into(),
        api_key: Some("k".into()),
        timeout: Duration::from_millis(timeout_ms),
        max_retries: 3,
        backoff: Duration::from_millis(10),
        max_in_flight: 2,
        transcript_dir: None,
    })
}

fn hello() -> Vec<ChatTurn> {
    vec![ChatTurn::user(vec![Part::Text("hello".into()), Part::Svg("<svg/>".into())])]
}

#[test]
fn returns_the_completion_and_sends_images() {
    let (url, seen) = stub(vec![ok("hi there")]);
    let c = client(&url, 5000);
    assert_eq!(c.call_model(&hello(), 0.7, "t").unwrap(), "hi there");
    let req = &seen.lock().unwrap()[0];
    assert_eq!(req["model"], "stub-model");
    assert_eq!(req["temperature"], 0.7);
    let url = req["messages"][0]["content"][1]["image_url"]["url"].as_str().unwrap();
    assert!(url.starts_with("data:image/svg+xml;base64,"));
}

#[test]
fn server_errors_are_retried() {
    let (url, seen) = stub(vec![status(500), status(503), ok("third time")]);
    assert_eq!(client(&url, 5000).call_model(&hello(), 0.0, "t").unwrap(), "third time");
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, seen) = stub(vec![status(400), ok("never")]);
    let err = client(&url, 5000).call_model(&hello(), 0.0, "t").unwrap_err();
    assert!(matches!(err, ProposerError::Status { status: 400, .. }));
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn slow_replies_time_out() {
    let slow = || Reply {
        delay: Duration::from_millis(600),
        ..ok("late")
    };
    let (url, _) = stub(vec![slow(), slow(), slow(), slow()]);
    let start = Instant::now();
    let err = client(&url, 150).call_model(&hello(), 0.0, "t").unwrap_err();
    assert!(matches!(err, ProposerError::Timeout), "{err}");
    assert!(start.elapsed() < Duration::from_secs(5));
}

#[test]
fn transcripts_are_written() {
    let (url, _) = stub(vec![ok("noted")]);
    let dir = tempfile::tempdir().unwrap();
    let mut c = client(&url, 5000).config().clone();
    c.transcript_dir = Some(dir.path().to_path_buf());
    ChatClient::new(c).call_model(&hello(), 0.0, "probe").unwrap();
    let names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names, vec!["00000-probe.json"]);
}

#[test]
fn prompt_mode_translation() {
    let templates = TemplateSet::builtin();
    let (url, seen) = stub(vec![ok("Rules, verbatim.")]);
    let text = prompt::domain_to_nl(&client(&url, 5000), &templates, "(define (domain d))").unwrap();
    assert_eq!(text, "Rules, verbatim.");
    let sent = seen.lock().unwrap()[0]["messages"][0]["content"][0]["text"].as_str().unwrap().to_string();
    assert!(sent.contains("(define (domain d))"));
    assert!(sent.contains("Domain rules in English:"));

    let domain = DomainId::Blocksworld.domain();
    let problem = parse_problem(
        "(define (problem t) (:domain blocksworld) (:objects a b - block)
         (:init (ontable a) (ontable b) (clear a) (clear b) (handempty)) (:goal (and (on a b))))",
        &domain,
    )
    .unwrap();
    let texts = vec!["pick up block a".to_string(), "stack block a on block b".to_string()];
    let (url, _) = stub(vec![ok("Here is the plan:\n(pick-up a)\n(stack a b)\n")]);
    let plan = prompt::plan_to_pddl(&client(&url, 5000), &templates, &texts, &domain, &problem).unwrap();
    assert_eq!(plan.steps.len(), 2);
    assert_eq!(plan.steps[1].to_string(), "(stack a b)");

    let (url, _) = stub(vec![ok("(teleport a)")]);
    assert!(prompt::plan_to_pddl(&client(&url, 5000), &templates, &texts, &domain, &problem).is_err());
}

#[test]
fn live_proposals_are_reasked_until_parseable() {
    use vplan_core::proposer::{Bundle, DiagramPayload, LiveProposer, Proposer, ProposerConfig};

    let (url, seen) = stub(vec![
        ok("I think we should move something."),
        ok("ACTION: pick up block a\nNEXT STATE: block b is clear.\nthe hand holds block a.\nRATIONALE: a goes on b."),
    ]);
    let cfg = ProposerConfig {
        endpoint: url.clone(),
        ..ProposerConfig::default()
    };
    let p = LiveProposer::new(client(&url, 5000), TemplateSet::builtin(), cfg, "rules".into(), "instance".into());
    let ctx = Bundle {
        state_text: "block a is clear.".into(),
        diagram: Some(DiagramPayload::Image("<svg/>".into())),
        ..Bundle::default()
    };
    let prop = p.propose_action(&ctx, &Bundle::default(), 2).unwrap();
    assert_eq!(prop.action_text, "pick up block a");
    assert!(prop.next_state_text.contains("the hand holds block a"));
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 2);
    assert_eq!(seen[1]["temperature"], 0.7);
}
