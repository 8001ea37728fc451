use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use tower::ServiceExt;

use dpnav_core::advisor::{privacy_first, PrivacyFirstRequest};
use dpnav_core::api::{self, envelope, render_json, Params, RiskRequest, SimulateRequest, TradeoffRequest};
use dpnav_service::{router, AppState, ScenarioStore};

struct Harness {
    app: axum::Router,
    _dir: tempfile::TempDir,
}

impl Harness {
    fn new() -> Self {
        Self::with_static(None)
    }

    fn with_static(static_dir: Option<std::path::PathBuf>) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let store = ScenarioStore::open(dir.path().join("store")).unwrap();
        let app = router(AppState { store: Arc::new(store) }, static_dir);
        Harness { app, _dir: dir }
    }

    async fn call(&self, req: Request<Body>) -> (StatusCode, String, String) {
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let ctype = resp
            .headers()
            .get("content-type")
            .map(|v| v.to_str().unwrap().to_string())
            .unwrap_or_default();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        (status, ctype, String::from_utf8(bytes.to_vec()).unwrap())
    }

    async fn get(&self, uri: &str) -> (StatusCode, String, String) {
        self.call(Request::get(uri).body(Body::empty()).unwrap()).await
    }

    async fn post(&self, uri: &str, body: &str) -> (StatusCode, String) {
        let req = Request::post(uri)
            .header("content-type", "application/json")
            .body(Body::from(body.to_string()))
            .unwrap();
        let (s, _, b) = self.call(req).await;
        (s, b)
    }
}

fn params(pairs: &[(&str, &str)]) -> Params {
    Params::new(pairs.iter().copied()).unwrap()
}

#[tokio::test]
async fn tradeoff_matches_in_process_result() {
    let h = Harness::new();
    let (status, ctype, body) = h.get("/api/tradeoff?kind=gaussian&mu=1&alpha=0.05").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ctype, "application/json");
    let req = TradeoffRequest::from_params(params(&[("kind", "gaussian"), ("mu", "1"), ("alpha", "0.05")])).unwrap();
    assert_eq!(body, render_json(&envelope(&req, &req.run().unwrap())));
    let v: serde_json::Value = serde_json::from_str(&body).unwrap();
    let beta = v["points"][0][1].as_f64().unwrap();
    assert!((beta - 0.740_488_977_158_556).abs() < 1e-13);
    assert!(v["inputs_echo"].is_object());
    assert!(v["engine_version"].is_string());
}

#[tokio::test]
async fn tradeoff_csv_format() {
    let h = Harness::new();
    let (status, ctype, body) = h.get("/api/tradeoff?kind=laplace&mu=1&grid=0:1:0.5&format=csv").await;
    assert_eq!(status, StatusCode::OK);
    assert!(ctype.starts_with("text/csv"));
    assert!(body.starts_with("alpha,beta\n0,1\n0.5,"));
}

#[tokio::test]
async fn risk_endpoint() {
    let h = Harness::new();
    let (status, _, body) = h.get("/api/risk?kind=laplace&mu=1").await;
    assert_eq!(status, StatusCode::OK);
    let v: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["failure_class"], "none");
    assert!((v["rho"].as_f64().unwrap() - std::f64::consts::E).abs() < 1e-12);
    let req = RiskRequest::from_params(params(&[("kind", "laplace"), ("mu", "1")])).unwrap();
    assert_eq!(body, render_json(&envelope(&req, &req.run().unwrap())));

    let (_, _, body) = h.get("/api/risk?kind=gaussian&mu=1").await;
    let v: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["rho"], "unbounded");
    assert_eq!(v["failure_class"], "graceful");
}

#[tokio::test]
async fn posterior_and_power_endpoints() {
    let h = Harness::new();
    let (status, _, body) = h.get("/api/posterior?kind=laplace&mu=1&prior=0.1,0.5&alpha=0.05").await;
    assert_eq!(status, StatusCode::OK);
    let v: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["series"].as_array().unwrap().len(), 2);

    let (status, _, body) = h
        .get("/api/utility/power?n=15&sigma=0.25&data_range=0,1&m=0.2&alpha0=0.01&mu=1&view=roc&grid=0.01")
        .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let v: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert!((v["power_at"].as_f64().unwrap() - 0.432_078_760_092_458).abs() < 1e-12);
    assert_eq!(v["points"][0][1], v["power_at"]);
}

#[tokio::test]
async fn validation_errors_are_structured_400() {
    let h = Harness::new();
    for uri in [
        "/api/tradeoff?kind=laplace&mu=1&alpha=2",
        "/api/tradeoff?kind=warp&mu=1",
        "/api/tradeoff?kind=laplace&mu=1&extra=3",
        "/api/tradeoff?kind=laplace&mu=abc",
        "/api/tradeoff?kind=laplace&mu=1&format=xml",
        "/api/posterior?kind=gaussian&mu=1&prior=1.5&alpha=0.1",
    ] {
        let (status, ctype, body) = h.get(uri).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri}: {body}");
        assert_eq!(ctype, "application/json");
        let v: serde_json::Value = serde_json::from_str(&body).unwrap();
        assert!(v["error"].is_string() && v["detail"].is_string(), "{uri}");
    }
    let (status, body) = h.post("/api/advise/privacy-first", "{not json").await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
}

#[tokio::test]
async fn advisor_endpoints() {
    let h = Harness::new();
    let body = r#"{"answers":{"allow_blatant":false,"allow_arbitrary_confidence":false,
        "risk_target":{"max_relative_risk":1}}}"#;
    let (status, resp) = h.post("/api/advise/privacy-first", body).await;
    assert_eq!(status, StatusCode::OK);
    let v: serde_json::Value = serde_json::from_str(&resp).unwrap();
    assert!(!v["warnings"].as_array().unwrap().is_empty());
    let req: PrivacyFirstRequest = serde_json::from_str(body).unwrap();
    assert_eq!(resp, render_json(&envelope(&req, &privacy_first(&req).unwrap())));

    let infeasible = r#"{"setting":{"n":15,"sigma":0.25,"data_range":[0,1],"m":0.2,"alpha0":0.01},
        "reliability":{"power_floor":0.99}}"#;
    let (status, resp) = h.post("/api/advise/utility-first", infeasible).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(resp.contains("\"error\": \"infeasible\""));

    let ok = r#"{"setting":{"n":100,"sigma":0.25,"data_range":[0,1],"m":0.2,"alpha0":0.05},
        "reliability":{"rel_beta_tol":0.01}}"#;
    let (status, resp) = h.post("/api/advise/utility-first", ok).await;
    assert_eq!(status, StatusCode::OK, "{resp}");
    let v: serde_json::Value = serde_json::from_str(&resp).unwrap();
    assert_eq!(v["chosen"]["kind"], "gaussian");
}

#[tokio::test]
async fn simulate_is_reproducible_and_bounded() {
    let h = Harness::new();
    let body = r#"{"scenario":{"query_value_without":0,"query_value_with":1,
        "mech":{"kind":"gaussian","mu":1}},"trials":5000,"seed":7}"#;
    let (s1, a) = h.post("/api/simulate", body).await;
    let (s2, b) = h.post("/api/simulate", body).await;
    assert_eq!(s1, StatusCode::OK, "{a}");
    assert_eq!(s2, StatusCode::OK);
    assert_eq!(a, b);
    let req: SimulateRequest = serde_json::from_str(body).unwrap();
    assert_eq!(a, render_json(&envelope(&req, &req.run().unwrap())));

    let big = r#"{"scenario":{"query_value_without":0,"query_value_with":1,
        "mech":{"kind":"gaussian","mu":1}},"trials":1500000,"seed":7}"#;
    let (status, resp) = h.post("/api/simulate", big).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(resp.contains("dpnav simulate"));
}

#[tokio::test]
async fn scenario_round_trip_and_404() {
    let h = Harness::new();
    let (status, resp) = h
        .post("/api/scenario", r#"{"id":"demo","payload":{"mech":{"kind":"laplace","mu":1}}}"#)
        .await;
    assert_eq!(status, StatusCode::OK, "{resp}");
    let (status, _, body) = h.get("/api/scenario/demo").await;
    assert_eq!(status, StatusCode::OK);
    let v: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["payload"]["mech"]["mu"], 1);
    assert_eq!(v["id"], "demo");

    // last write wins
    h.post("/api/scenario", r#"{"id":"demo","payload":{"v":2}}"#).await;
    let (_, _, body) = h.get("/api/scenario/demo").await;
    let v: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["payload"]["v"], 2);

    let (status, resp) = h.post("/api/scenario", r#"{"payload":{"x":1}}"#).await;
    assert_eq!(status, StatusCode::OK);
    let id = serde_json::from_str::<serde_json::Value>(&resp).unwrap()["id"].as_str().unwrap().to_string();
    assert_eq!(id, dpnav_service::derived_id(&serde_json::json!({"x": 1})));

    let (status, _, _) = h.get("/api/scenario/missing").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = h.post("/api/scenario", r#"{"id":"../etc","payload":{}}"#).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[test]
fn store_survives_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let first = ScenarioStore::open(dir.path()).unwrap();
    first.put(Some("keep"), serde_json::json!({"a": 1})).unwrap();
    drop(first);
    let again = ScenarioStore::open(dir.path()).unwrap();
    assert_eq!(again.get("keep").unwrap().payload, serde_json::json!({"a": 1}));
}

#[tokio::test]
async fn static_files_and_unknown_routes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<h1>navigator</h1>").unwrap();
    let h = Harness::with_static(Some(dir.path().to_path_buf()));
    let (status, _, body) = h.get("/").await;
    assert_eq!(status, StatusCode::OK);
    assert!(body.contains("navigator"));

    let bare = Harness::new();
    let (status, _, body) = bare.get("/nope").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(body.contains("not_found"));
}

#[tokio::test]
async fn csv_endpoints_match_core_writers() {
    let h = Harness::new();
    let (_, _, body) = h.get("/api/risk?kind=gaussian&mu_grid=0.5,1&alpha0=0.01&format=csv").await;
    let req = RiskRequest::from_params(params(&[("kind", "gaussian"), ("mu_grid", "0.5,1"), ("alpha0", "0.01")])).unwrap();
    assert_eq!(body, api::risk_csv(&req, &req.run().unwrap()));
}
