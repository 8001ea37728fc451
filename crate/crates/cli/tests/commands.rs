use std::process::{Command, Output};
use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use tower::ServiceExt;

fn dpnav(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpnav")).args(args).output().unwrap()
}

fn stdout(args: &[&str]) -> String {
    let out = dpnav(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

async fn service(method: &str, uri: &str, body: &str) -> String {
    let dir = tempfile::tempdir().unwrap();
    let store = dpnav_service::ScenarioStore::open(dir.path()).unwrap();
    let app = dpnav_service::router(dpnav_service::AppState { store: Arc::new(store) }, None);
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert!(resp.status().is_success(), "{uri}: {}", resp.status());
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    String::from_utf8(bytes.to_vec()).unwrap()
}

#[test]
fn laplace_curve_row() {
    let out = stdout(&["curve", "--kind", "laplace", "--mu", "1", "--grid", "0.1"]);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("alpha,beta"));
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row[0], 0.1);
    assert!((row[1] - 0.72817).abs() < 1e-5);
}

#[test]
fn uniform_sampling_is_catastrophic() {
    let out = stdout(&["risk", "--kind", "uniform-sampling", "--mu", "1", "--n", "100"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["failure_class"], "catastrophic");
    assert_eq!(v["rho"], "unbounded");
}

#[test]
fn advise_max_rho_gives_log() {
    let out = stdout(&["advise", "privacy-first", "--max-rho", "10"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["chosen"]["kind"], "laplace");
    assert!((v["chosen"]["mu"].as_f64().unwrap() - 10f64.ln()).abs() < 1e-9);
}

#[test]
fn exit_codes() {
    assert_eq!(dpnav(&["curve", "--kind", "laplace", "--mu", "1", "--grid", "1.5"]).status.code(), Some(2));
    assert_eq!(dpnav(&["curve", "--kind", "warp", "--mu", "1"]).status.code(), Some(2));
    assert_eq!(dpnav(&["curve"]).status.code(), Some(2));
    assert_eq!(dpnav(&["simulate", "--input", "/nonexistent/req.json"]).status.code(), Some(2));
    let infeasible = dpnav(&[
        "advise", "utility-first", "--n", "15", "--sigma", "0.25", "--data-range", "0,1",
        "--m", "0.2", "--alpha0", "0.01", "--power-floor", "0.99",
    ]);
    assert_eq!(infeasible.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(&infeasible.stderr).unwrap();
    assert_eq!(err["error"], "infeasible");
    assert_eq!(dpnav(&["--version"]).status.code(), Some(0));
}

#[test]
fn output_file_and_formats() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.json");
    let out = dpnav(&[
        "curve", "--kind", "gaussian", "--mu", "1", "--grid", "0.05", "--format", "json",
        "--output", path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert!((v["points"][0][1].as_f64().unwrap() - 0.740_489).abs() < 1e-6);

    let csv = stdout(&["risk", "--kind", "gaussian", "--mu-grid", "0.5:1.5:0.5", "--alpha0", "0.01", "--format", "csv"]);
    assert_eq!(csv.lines().next(), Some("mu,alpha0,rho_at,attack_power"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn simulate_from_file_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("req.json");
    std::fs::write(
        &path,
        r#"{"scenario":{"query_value_without":0,"query_value_with":1,"mech":{"kind":"laplace","mu":1}},
            "trials":2000,"seed":3}"#,
    )
    .unwrap();
    let p = path.to_str().unwrap();
    let a = stdout(&["simulate", "--input", p]);
    let b = stdout(&["simulate", "--input", p]);
    assert_eq!(a, b);
    let c = stdout(&["simulate", "--input", p, "--seed", "4"]);
    assert_ne!(a, c);
}

#[tokio::test]
async fn byte_identical_to_service() {
    let cases: [(&[&str], &str); 4] = [
        (
            &["curve", "--kind", "laplace", "--mu", "1", "--grid", "0:1:0.25", "--format", "json"],
            "/api/tradeoff?kind=laplace&mu=1&grid=0:1:0.25",
        ),
        (&["risk", "--kind", "gaussian", "--mu", "2"], "/api/risk?kind=gaussian&mu=2"),
        (
            &["posterior", "--kind", "gaussian", "--mu", "1", "--prior", "0.1,0.5", "--grid", "0.01,0.1"],
            "/api/posterior?kind=gaussian&mu=1&prior=0.1,0.5&grid=0.01,0.1&format=csv",
        ),
        (
            &[
                "power", "--n", "100", "--sigma", "0.25", "--data-range", "0,1", "--m", "0.2",
                "--alpha0", "0.05", "--mu", "0.5", "--view", "power",
            ],
            "/api/utility/power?n=100&sigma=0.25&data_range=0,1&m=0.2&alpha0=0.05&mu=0.5&view=power&format=csv",
        ),
    ];
    for (args, uri) in cases {
        assert_eq!(stdout(args), service("GET", uri, "").await, "{uri}");
    }

    let body = r#"{"answers":{"allow_blatant":false,"allow_arbitrary_confidence":true,"risk_target":{"max_power":0.2,"at_alpha0":0.05}}}"#;
    let cli = stdout(&["advise", "privacy-first", "--allow-arbitrary", "--max-power", "0.2", "--at-alpha0", "0.05"]);
    assert_eq!(cli, service("POST", "/api/advise/privacy-first", body).await);
}
