//! The review loop against a live local service.

mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use tracelink::gateway::{FailingProvider, Gateway, MessageCoverageOracle, ProviderConfig};
use tracelink::interface::{AppConfig, Engine, ExampleStore, ServerHandle};
use tracelink::retrieval::{Embedder, LexicalEmbedder};

struct Client {
    agent: ureq::Agent,
    server: ServerHandle,
    token: Option<&'static str>,
}

impl Client {
    fn new(server: ServerHandle, token: Option<&'static str>) -> Self {
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Self { agent, server, token }
    }

    fn auth<B>(&self, req: ureq::RequestBuilder<B>) -> ureq::RequestBuilder<B> {
        match self.token {
            Some(t) => req.header("Authorization", &format!("Bearer {t}")),
            None => req,
        }
    }

    fn get(&self, path: &str) -> (u16, Value) {
        let mut r = self.auth(self.agent.get(&self.server.url(path))).call().unwrap();
        (r.status().as_u16(), r.body_mut().read_json().unwrap_or(Value::Null))
    }

    fn post(&self, path: &str, body: Value) -> (u16, Value) {
        let mut r = self.auth(self.agent.post(&self.server.url(path))).send_json(&body).unwrap();
        (r.status().as_u16(), r.body_mut().read_json().unwrap_or(Value::Null))
    }
}

fn engine_with(provider: Arc<dyn tracelink::gateway::CompletionProvider>, reports: Option<std::path::PathBuf>) -> Arc<Engine> {
    let synth = common::synthetic_corpus();
    let mut config = AppConfig::default();
    if let Some(p) = reports {
        config.reports_path = p;
    }
    let gateway = Gateway::new(provider, ProviderConfig::default()).unwrap();
    let embedder: Arc<dyn Embedder> = Arc::new(LexicalEmbedder::default());
    Arc::new(
        Engine::new(config, Arc::new(synth.corpus), Arc::new(ExampleStore::in_memory()), Arc::new(gateway), embedder)
            .unwrap(),
    )
}

fn encode(id: &str) -> String {
    id.replace('|', "%7C")
}

fn wait_for_job(c: &Client, job: &str) -> Value {
    let start = Instant::now();
    loop {
        let (code, body) = c.get(&format!("/recover/{job}"));
        assert_eq!(code, 200, "{body}");
        if body["state"] != "running" {
            return body;
        }
        assert!(start.elapsed() < Duration::from_secs(60), "recovery job did not finish");
        std::thread::sleep(Duration::from_millis(20));
    }
}

#[test]
fn accept_makes_the_pair_retrievable_and_second_decision_conflicts() {
    let engine = engine_with(Arc::new(MessageCoverageOracle::default()), None);
    let c = Client::new(ServerHandle::start(engine.clone(), "127.0.0.1:0", None).unwrap(), None);

    assert_eq!(c.get("/health").0, 200);
    let (code, body) = c.post("/recover", json!({}));
    assert_eq!(code, 202);
    let job = wait_for_job(&c, body["job_id"].as_str().unwrap());
    assert_eq!(job["state"], "done", "{job}");
    assert!(job["enqueued"].as_u64().unwrap() > 0);
    assert!(job["funnel"]["after_stage3"].as_u64().unwrap() >= job["recovered"].as_u64().unwrap());

    let (code, queue) = c.get("/review/queue?status=pending&limit=5");
    assert_eq!(code, 200, "{queue}");
    let item = &queue["items"][0];
    let item_id = item["item_id"].as_str().unwrap().to_string();
    let stake_text = item["stakeholder"]["text"].as_str().unwrap().to_string();
    let sys_id = item["system"]["id"].as_str().unwrap().to_string();
    let before = c.get("/health").1["store_version"].as_u64().unwrap();

    let (code, receipt) = c.post(&format!("/review/{}/decision", encode(&item_id)), json!({"decision": "accept", "reviewer": "ana"}));
    assert_eq!(code, 200, "{receipt}");
    let version = receipt["store_version"].as_u64().unwrap();
    assert!(version > before);
    assert_eq!(receipt["item"]["status"], "accepted");

    // same text under a fresh id: the accepted example is the nearest valid one
    let (code, v) = c.post("/validate", json!({"stake_text": stake_text, "sys_id": sys_id}));
    assert_eq!(code, 200, "{v}");
    assert!(v["store_version"].as_u64().unwrap() >= version);
    let ids: Vec<&str> = v["retrieved_example_ids"].as_array().unwrap().iter().map(|x| x.as_str().unwrap()).collect();
    assert!(ids.contains(&item_id.as_str()), "{ids:?} lacks {item_id}");
    assert_eq!(v["verdict"], "Yes");

    let (code, err) = c.post(&format!("/review/{}/decision", encode(&item_id)), json!({"decision": "reject", "reviewer": "bo"}));
    assert_eq!(code, 409, "{err}");
    assert_eq!(err["error"], "conflict");

    let (code, _) = c.get("/review/queue?status=accepted");
    assert_eq!(code, 200);
    let (_, accepted) = c.get("/review/queue?status=accepted");
    assert_eq!(accepted["total"], 1);
}

#[test]
fn request_errors_map_to_status_codes() {
    let dir = tempfile::tempdir().unwrap();
    let reports = dir.path().join("reports.jsonl");
    let engine = engine_with(Arc::new(MessageCoverageOracle::default()), Some(reports.clone()));
    let c = Client::new(ServerHandle::start(engine, "127.0.0.1:0", None).unwrap(), None);

    let (code, e) = c.post("/validate", json!({"stake_id": "STK-0001"}));
    assert_eq!(code, 400);
    assert!(e["message"].as_str().unwrap().contains("sys_id"), "{e}");
    let (code, e) = c.post("/validate", json!({"stake_id": "nope", "sys_id": "nope"}));
    assert_eq!((code, e["error"].as_str()), (404, Some("not_found")));
    let (code, _) = c.post("/validate", json!({"stake_id": "x", "bogus": 1}));
    assert_eq!(code, 400);
    let (code, _) = c.post("/review/nope/decision", json!({"decision": "accept", "reviewer": "r"}));
    assert_eq!(code, 404);
    assert_eq!(c.get("/review/queue?min_vote_share=2").0, 400);
    assert_eq!(c.get("/review/queue?variation=V9").0, 400);
    assert_eq!(c.get("/recover/job-99").0, 404);

    assert_eq!(c.get("/metrics/latest").0, 404);
    let report = tracelink::evaluation::MetricsReport::from_confusion(tracelink::model::ConfusionCounts { tp: 3, fp: 1, fn_: 0, tn: 4 });
    tracelink::evaluation::append_report(&reports, &[tracelink::evaluation::ReportRecord::Metrics { name: "loocv/rag".into(), report }])
        .unwrap();
    let (code, m) = c.get("/metrics/latest");
    assert_eq!(code, 200);
    assert_eq!(m["name"], "loocv/rag");
}

#[test]
fn provider_failure_is_a_bad_gateway() {
    let engine = engine_with(Arc::new(FailingProvider::permanent()), None);
    let c = Client::new(ServerHandle::start(engine.clone(), "127.0.0.1:0", None).unwrap(), None);
    let link = &engine.corpus().links()[0];
    let (code, e) = c.post("/validate", json!({"stake_id": link.stake_id, "sys_id": link.sys_id}));
    assert_eq!(code, 502, "{e}");
    assert_eq!(e["error"], "upstream_error");
}

#[test]
fn bearer_token_is_enforced_except_on_health() {
    let engine = engine_with(Arc::new(MessageCoverageOracle::default()), None);
    let server = ServerHandle::start(engine.clone(), "127.0.0.1:0", Some("s3cret".into())).unwrap();
    let anon = Client::new(server, None);
    assert_eq!(anon.get("/health").0, 200);
    assert_eq!(anon.get("/review/queue").0, 401);
    let server = ServerHandle::start(engine, "127.0.0.1:0", Some("s3cret".into())).unwrap();
    let authed = Client::new(server, Some("s3cret"));
    assert_eq!(authed.get("/review/queue").0, 200);
}
