//! Remote client against a local HTTP server: retries, token accounting,
//! audit log and offline purity of the oracle path.

mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use fa11y::agent::{Action, AgentBackend, RemoteAgent, RemoteClient, RemoteConfig, RemoteError, Transport, TransportFailure};
use fa11y::executor::{execute_task, ExecutorConfig, Terminal};
use fa11y::harness::{run_corpus, synth_corpus, CorpusSpec, RunConfig};
use fa11y::taskgen::DetectorConfig;
use serde_json::{json, Value};

/// Serves `replies` in order, one connection each, and returns the request bodies.
fn serve(replies: Vec<(u16, String)>) -> (String, thread::JoinHandle<Vec<Value>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let mut bodies = Vec::new();
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            bodies.push(serde_json::from_slice(&buf).unwrap());
            let mut stream = stream;
            let response = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(response.as_bytes()).unwrap();
        }
        bodies
    });
    (url, handle)
}

fn completion(content: &str) -> String {
    json!({"choices": [{"message": {"content": content}}], "usage": {"prompt_tokens": 120, "completion_tokens": 30}}).to_string()
}

fn config(url: &str) -> RemoteConfig {
    let mut c = RemoteConfig::new(url, "test-model");
    c.backoff = Duration::from_millis(5);
    c.timeout = Duration::from_secs(5);
    c.api_key = Some("secret".into());
    c
}

#[test]
fn retries_two_server_errors_then_succeeds() {
    let (url, server) = serve(vec![(500, "{}".into()), (500, "{}".into()), (200, completion("A. It worked."))]);
    let client = RemoteClient::new(config(&url));
    assert_eq!(client.invoke("hello").unwrap(), "A. It worked.");
    let bodies = server.join().unwrap();
    assert_eq!(bodies.len(), 3);
    assert_eq!(bodies[0]["model"], "test-model");
    assert_eq!(bodies[0]["temperature"], 0.0);
    assert_eq!(bodies[2]["messages"][0]["content"], "hello");
    let usage = client.usage();
    assert_eq!((usage.input, usage.output), (120, 30));
}

#[test]
fn client_errors_are_not_retried() {
    let (url, server) = serve(vec![(401, "{\"error\":\"denied\"}".into())]);
    let client = RemoteClient::new(config(&url));
    assert!(matches!(client.invoke("x"), Err(RemoteError::Status { status: 401, .. })));
    assert_eq!(server.join().unwrap().len(), 1);
}

#[test]
fn remote_agent_drives_a_task_and_keeps_an_audit_log() {
    let decide = "<|begin_think|>Find it.<|end_think|>\n<|begin_action|>[{\"action\": {\"action_type\": \"SWIPE_RIGHT\", \"repetitions\": \"2\", \"stop_at\": \"Search, button\", \"stop_at_occurrence\": \"1\"}, \"description\": \"go\"}]<|end_action|>";
    let tap = "<|begin_think|>Tap.<|end_think|>\n<|begin_action|>[{\"action\": {\"action_type\": \"DOUBLE_TAP\"}, \"description\": \"tap\"}]<|end_action|>";
    let reflect = "<|begin_think|>Progress.<|end_think|><|begin_answer|>A<|end_answer|>";
    let (url, server) = serve(vec![
        (200, completion(decide)),
        (200, completion(reflect)),
        (200, completion(tap)),
        (200, completion(reflect)),
    ]);
    let app = Arc::new(common::app(vec![
        common::screen(
            "home",
            vec![
                common::text("t", "Home"),
                common::button("go", "Search", fa11y::app_model::ActivationEffect::Navigate { target: "results".into() }),
            ],
        ),
        common::titled("results", "Results"),
    ]));
    let task = fa11y::taskgen::TaskSpecification {
        desc: "Open search".into(),
        prereq: vec![],
        elem: fa11y::taskgen::ElemRef { name: "Search".into(), index: 1 },
        crit: "announced~\"Results\"".into(),
    };
    let mut agent = RemoteAgent::new(Arc::new(RemoteClient::new(config(&url))));
    let trace = execute_task(app, &task, &mut agent as &mut dyn AgentBackend, &ExecutorConfig::default());
    assert_eq!(trace.terminal, Terminal::Complete);
    assert_eq!(trace.steps[1].action, Action::DoubleTap);
    assert_eq!(agent.exchanges.len(), 4);
    assert!(agent.exchanges.iter().all(|e| e.response.is_some()));
    server.join().unwrap();
}

struct Denying(AtomicUsize);

impl Transport for Denying {
    fn post(&self, _: &str, _: Option<&str>, _: &Value, _: Duration) -> Result<(u16, String), TransportFailure> {
        self.0.fetch_add(1, Ordering::SeqCst);
        Err(TransportFailure::Io("network access denied".into()))
    }
}

#[test]
fn oracle_runs_never_touch_the_network() {
    let denying = Arc::new(Denying(AtomicUsize::new(0)));
    let client = Arc::new(RemoteClient::with_transport(RemoteConfig::new("http://unreachable", "m"), denying.clone()));
    let apps = synth_corpus(&CorpusSpec::new(6, "1,1,1,1,1".parse().unwrap(), 3)).unwrap();
    let mut cfg = RunConfig::oracle(DetectorConfig::noiseless(3));
    cfg.remote = Some(client);
    let out = run_corpus(&apps, &cfg).unwrap();
    assert!(out.result.tasks > 0);
    assert_eq!(denying.0.load(Ordering::SeqCst), 0);
}
