use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use petlp_core::questionnaire::CaseService;
use petlp_server::router;

fn app() -> Router {
    router(Arc::new(CaseService::in_memory()))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, v)
}

async fn answer(app: &Router, id: &str, tree: &str, node: &str, choice: &str) -> (StatusCode, Value) {
    call(
        app,
        "POST",
        &format!("/cases/{id}/answer"),
        Some(json!({"tree": tree, "node_id": node, "choice": choice})),
    )
    .await
}

#[tokio::test]
async fn trees_lists_ten_trees_with_citations() {
    let (s, v) = call(&app(), "GET", "/trees", None).await;
    assert_eq!(s, StatusCode::OK);
    let trees = v.as_array().unwrap();
    assert_eq!(trees.len(), 10);
    for t in trees {
        for n in t["nodes"].as_array().unwrap() {
            assert!(!n["citation"].as_str().unwrap().is_empty());
        }
    }
}

#[tokio::test]
async fn case_lifecycle() {
    let app = app();
    let (s, v) = call(&app, "POST", "/cases", Some(json!({"case_id": "study"}))).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(v["case_id"], "study");
    assert_eq!(v["trees"][0]["current"]["id"], "F2.purposes");

    for (n, c) in [("F5.lawful_access", "yes")] {
        let (s, v) = answer(&app, "study", "platform_terms", n, c).await;
        assert_eq!(s, StatusCode::OK, "{v}");
        assert_eq!(v["current"]["id"], "F5.purpose");
    }
    answer(&app, "study", "platform_terms", "F5.purpose", "scientific_research").await;
    let (_, v) = answer(&app, "study", "platform_terms", "F5.reservation", "robots_disallow").await;
    assert_eq!(v["endpoint"]["state"], "pending");
    assert_eq!(v["endpoint"]["missing"], json!(["research_organisation"]));

    for (n, c) in [
        ("F4.primary_goal", "yes"),
        ("F4.profit_handling", "not_for_profit"),
        ("F4.public_mission", "yes"),
        ("F4.decisive_influence", "no"),
    ] {
        answer(&app, "study", "research_organisation", n, c).await;
    }
    answer(&app, "study", "extraction", "F6.channel", "platform_authorised").await;
    let (_, v) = answer(&app, "study", "extraction", "F6.public_data", "yes").await;
    assert_eq!(v["endpoint"]["state"], "decided");
    assert_eq!(v["endpoint"]["verdict"], "permitted");
    assert!(v["endpoint"]["trace"].as_array().unwrap().iter().all(|e| e["citation"] != ""));

    let (s, v) = call(
        &app,
        "POST",
        "/cases/study/whatif",
        Some(json!({"node_id": "F5.purpose", "choice": "commercial"})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    let x = v["trees"].as_array().unwrap().iter().find(|t| t["tree"] == "extraction").unwrap();
    assert_eq!(x["actual"]["verdict"], "permitted");
    assert_eq!(x["hypothetical"]["verdict"], "blocked");
    assert_eq!(x["changed"], true);

    let (_, v) = call(&app, "GET", "/cases/study", None).await;
    assert_eq!(v["answers"]["F5.purpose"], "scientific_research");

    let (s, v) = call(&app, "GET", "/cases/study/dpia", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["initialised"], false);
    assert_eq!(v["stage_status"]["extract"], "missing");
}

#[tokio::test]
async fn dpia_initialised_at_creation_opens_extract_gate() {
    let app = app();
    let pre = json!({
        "hypotheses": "Discourse differs across communities",
        "study_design": "Comparative content analysis",
        "data_plan": "Reddit API, three subreddits, 2024",
        "model_design": "Topic model",
        "expected_outputs": "Aggregate statistics",
    });
    let (s, v) = call(&app, "POST", "/cases", Some(json!({"case_id": "d", "pre_registration": pre}))).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    let (_, v) = call(&app, "GET", "/cases/d/dpia", None).await;
    assert_eq!(v["initialised"], true);
    assert_eq!(v["stage_status"]["pre_registration"], "complete");
    let (s, v) = call(
        &app,
        "POST",
        "/cases/d/dpia",
        Some(json!({"stage": "present", "fields": {}})),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "missing_field");
    let present: serde_json::Map<String, Value> = ["reidentification", "model_privacy", "copyright", "dissemination", "transparency"]
        .iter()
        .map(|f| (f.to_string(), json!("recorded")))
        .collect();
    let (s, v) = call(
        &app,
        "POST",
        "/cases/d/dpia",
        Some(json!({"stage": "present", "fields": present})),
    )
    .await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["code"], "out_of_order_stage");
    let (_, v) = call(&app, "GET", "/cases/d/dpia", None).await;
    let extract = v["gates"].as_array().unwrap().iter().find(|g| g["stage"] == "extract").unwrap();
    assert_eq!(extract["allowed"], true, "{extract}");
}

#[tokio::test]
async fn errors_are_json_with_codes() {
    let app = app();
    call(&app, "POST", "/cases", Some(json!({"case_id": "c"}))).await;

    let (s, v) = answer(&app, "c", "legal_basis", "F3.nope", "yes").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "unknown_node");
    assert!(v["message"].as_str().unwrap().contains("F3.nope"));

    let (s, v) = answer(&app, "c", "controllership", "F2.purposes", "perhaps").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "invalid_choice");

    let (s, v) = answer(&app, "missing", "controllership", "F2.purposes", "yes").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "case_not_found");

    let (s, v) = call(&app, "POST", "/cases", Some(json!({"case_id": "c"}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["code"], "case_exists");

    let (s, v) = call(&app, "POST", "/cases/c/whatif", Some(json!({"node": 1}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "invalid_request");

    let (s, v) = call(&app, "POST", "/cases", Some(json!({"case_id": "../x"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "invalid_case_id");

    let (s, v) = call(&app, "GET", "/nowhere", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "not_found");
}

#[tokio::test]
async fn assess_endpoint_matches_library() {
    let s = petlp_core::pipeline::GoldenScenario::bundled();
    let (status, v) = call(&app(), "POST", "/assess", Some(serde_json::to_value(&s.inputs).unwrap())).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["legal_basis"]["decided"]["basis"], "public_task_6_1_e");
    assert_eq!(v["dpia"]["status"], "required");
}
