mod common;

use common::*;
use csa_core::planner::RunLog;
use serde_json::{json, Value};

#[tokio::test]
async fn presets_are_listed_with_version() {
    let addr = start(manual()).await;
    let (status, body) = http(addr, "GET", "/scenes/presets", None).await;
    assert_eq!(status, 200);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["v"], 1);
    let names: Vec<&str> = v["presets"].as_array().unwrap().iter().map(|p| p["name"].as_str().unwrap()).collect();
    for want in ["lab-4x3", "lab-20x20", "hint-empty", "nfc-villa"] {
        assert!(names.contains(&want), "{names:?}");
    }
}

#[tokio::test]
async fn create_session_returns_id_and_snapshot() {
    let addr = start(manual()).await;
    let (status, body) =
        http(addr, "POST", "/sessions", Some(r#"{"v":1,"scene":{"kind":"preset","name":"lab-4x3"}}"#)).await;
    assert_eq!(status, 201);
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["v"], 1);
    let id = v["id"].as_str().unwrap();
    assert_eq!(v["ws"], format!("/session/{id}"));
    assert_eq!(v["snapshot"]["recording"], false);

    let (status, snap) = http(addr, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, 200);
    assert_eq!(serde_json::from_str::<Value>(&snap).unwrap()["id"], id);
}

#[tokio::test]
async fn bad_requests_get_versioned_errors() {
    let addr = start(manual()).await;
    for body in [
        "not json",
        r#"{"scene":{"kind":"preset","name":"moon"}}"#,
        r#"{"scene":{"kind":"inline","scene":{"schema_version":1}}}"#,
        r#"{"v":2,"scene":{"kind":"preset","name":"lab-4x3"}}"#,
        r#"{"scene":{"kind":"preset","name":"lab-4x3"},"extra":1}"#,
    ] {
        let (status, text) = http(addr, "POST", "/sessions", Some(body)).await;
        assert_eq!(status, 400, "{body}");
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["v"], 1);
        assert!(v["error"].is_string());
    }
}

#[tokio::test]
async fn unknown_session_is_404() {
    let addr = start(manual()).await;
    let (status, text) = http(addr, "GET", "/sessions/nope/log", None).await;
    assert_eq!(status, 404);
    assert_eq!(serde_json::from_str::<Value>(&text).unwrap()["v"], 1);
}

#[tokio::test]
async fn recorded_log_downloads_as_jsonl() {
    let addr = start(manual()).await;
    let id = create(addr, r#"{"scene":{"kind":"generate","crime":"burglary","plan":"hint-empty","seed":3}}"#).await;
    let (status, _) = http(addr, "GET", &format!("/sessions/{id}/log"), None).await;
    assert_eq!(status, 404, "nothing recorded yet");

    let mut ws = connect(addr, &id).await;
    send(&mut ws, json!({"v":1,"type":"record","on":true,"request_id":1})).await;
    send(&mut ws, json!({"v":1,"type":"burst","dir":"forward","request_id":2})).await;
    send(&mut ws, json!({"v":1,"type":"tick","steps":25,"request_id":3})).await;
    send(&mut ws, json!({"v":1,"type":"record","on":false,"request_id":4})).await;
    let (reply, _) = until_reply(&mut ws, &json!(4)).await;
    assert_eq!(reply["type"], "ack");

    let (status, text) = http(addr, "GET", &format!("/sessions/{id}/log"), None).await;
    assert_eq!(status, 200);
    let log = RunLog::from_jsonl(&text).unwrap();
    assert_eq!(log.records.len(), 25);
    assert_eq!(log.header.source, "manual");
    let (_, metrics) = csa_service::replay(&log).unwrap();
    assert_eq!(Some(metrics), log.metrics);
}
