use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use otseg::labels::RleLabels;
use otseg_cli::service::{router, AppState, DEFAULT_IDLE};
use otseg_eval::scenes::generate_disks;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const BOUNDARY: &str = "otseg-test-boundary";

fn png_bytes(seed: u64) -> Vec<u8> {
    let scene = generate_disks(seed, 4, 96, 96, 0.05, false).unwrap();
    let dir = tempfile::tempdir().unwrap();
    scene.save(dir.path()).unwrap();
    std::fs::read(dir.path().join("image.png")).unwrap()
}

fn multipart(image: Option<&[u8]>, fields: &[(&str, &str)]) -> Request<Body> {
    let mut body = Vec::new();
    if let Some(bytes) = image {
        body.extend(format!(
            "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"image\"; filename=\"i.png\"\r\nContent-Type: image/png\r\n\r\n"
        ).bytes());
        body.extend(bytes);
        body.extend(b"\r\n");
    }
    for (name, value) in fields {
        body.extend(
            format!("--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"{name}\"\r\n\r\n{value}\r\n")
                .bytes(),
        );
    }
    body.extend(format!("--{BOUNDARY}--\r\n").bytes());
    Request::builder()
        .method(Method::POST)
        .uri("/sessions")
        .header(
            "content-type",
            format!("multipart/form-data; boundary={BOUNDARY}"),
        )
        .body(Body::from(body))
        .unwrap()
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    use tower::ServiceExt;
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp
        .into_body()
        .collect()
        .await
        .unwrap()
        .to_bytes()
        .to_vec();
    (status, bytes)
}

fn json_of(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

fn plain(method: Method, uri: String) -> Request<Body> {
    Request::builder()
        .method(method)
        .uri(uri)
        .body(Body::empty())
        .unwrap()
}

fn marker_req(id: &str, body: String) -> Request<Body> {
    Request::builder()
        .method(Method::POST)
        .uri(format!("/sessions/{id}/markers"))
        .header("content-type", "application/json")
        .body(Body::from(body))
        .unwrap()
}

async fn create(app: &Router, seed: u64) -> Value {
    let (status, body) = send(
        app,
        multipart(
            Some(&png_bytes(seed)),
            &[("m", "60"), ("k", "15"), ("alpha", "20")],
        ),
    )
    .await;
    assert_eq!(
        status,
        StatusCode::CREATED,
        "{}",
        String::from_utf8_lossy(&body)
    );
    json_of(&body)
}

fn app() -> Router {
    router(AppState::new(DEFAULT_IDLE))
}

#[tokio::test]
async fn new_session_labels_are_the_superpixels() {
    let app = app();
    let created = create(&app, 0).await;
    let id = created["id"].as_str().unwrap();
    assert_eq!(created["width"], 96);
    let sp: RleLabels = serde_json::from_value(created["superpixels"].clone()).unwrap();
    let sp = sp.decode().unwrap();
    assert!(sp.region_count() > 1);
    assert!(!created["boundaries"].as_array().unwrap().is_empty());

    let (status, body) = send(&app, plain(Method::GET, format!("/sessions/{id}/labels"))).await;
    assert_eq!(status, StatusCode::OK);
    let v = json_of(&body);
    assert_eq!(v["kind"], "superpixels");
    assert_eq!(v["labels"], created["superpixels"]);
    assert_eq!(v["boundaries"], created["boundaries"]);
    assert_eq!(v["markers"], json!([]));
}

#[tokio::test]
async fn add_then_undo_restores_identical_bytes() {
    let app = app();
    let created = create(&app, 1).await;
    let id = created["id"].as_str().unwrap();
    let labels = format!("/sessions/{id}/labels");
    let (_, first) = send(
        &app,
        marker_req(id, json!({"x": 5, "y": 5, "class": "b"}).to_string()),
    )
    .await;
    let (_, before) = send(&app, plain(Method::GET, labels.clone())).await;
    assert_eq!(before, first);

    let (status, added) = send(
        &app,
        marker_req(id, json!({"x": 60, "y": 40, "class": "f"}).to_string()),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let v = json_of(&added);
    assert_eq!(v["kind"], "classes");
    assert_eq!(v["class_names"], json!(["b", "f"]));
    assert_eq!(v["markers"].as_array().unwrap().len(), 2);

    let (status, undone) = send(
        &app,
        plain(Method::DELETE, format!("/sessions/{id}/markers/last")),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(undone, before);
    let (_, after) = send(&app, plain(Method::GET, labels)).await;
    assert_eq!(after, before);

    // Undoing the last marker returns to the bare superpixels.
    let (_, bare) = send(
        &app,
        plain(Method::DELETE, format!("/sessions/{id}/markers/last")),
    )
    .await;
    let bare = json_of(&bare);
    assert_eq!(bare["kind"], "superpixels");
    assert_eq!(bare["labels"], created["superpixels"]);
    let (status, _) = send(
        &app,
        plain(Method::DELETE, format!("/sessions/{id}/markers/last")),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn marker_order_does_not_matter() {
    let app = app();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for round in 0..4u64 {
        let created = create(&app, 10 + round).await;
        let sp: RleLabels = serde_json::from_value(created["superpixels"].clone()).unwrap();
        let sp = sp.decode().unwrap();
        // Random markers, at most one class per superpixel.
        let mut owner = std::collections::HashMap::new();
        let mut markers = Vec::new();
        while markers.len() < 6 {
            let (x, y) = (rng.random_range(0..96usize), rng.random_range(0..96usize));
            let class = ["f", "b", "c"][rng.random_range(0..3)];
            if *owner.entry(sp.get(x, y)).or_insert(class) == class {
                markers.push(json!({"x": x, "y": y, "class": class}));
            }
        }
        let mut finals = Vec::new();
        for _ in 0..2 {
            let id = create(&app, 10 + round).await["id"]
                .as_str()
                .unwrap()
                .to_string();
            markers.shuffle(&mut rng);
            let mut last = Vec::new();
            for m in &markers {
                let (status, body) = send(&app, marker_req(&id, m.to_string())).await;
                assert_eq!(status, StatusCode::OK);
                last = body;
            }
            let v = json_of(&last);
            finals.push((
                v["labels"].clone(),
                v["class_names"].clone(),
                v["boundaries"].clone(),
            ));
        }
        assert_eq!(finals[0], finals[1], "round {round}");
    }
}

#[tokio::test]
async fn errors_use_documented_statuses() {
    let app = app();
    let created = create(&app, 2).await;
    let id = created["id"].as_str().unwrap();

    let (status, body) = send(&app, plain(Method::GET, "/sessions/nope/labels".into())).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(json_of(&body)["error"].is_string());
    let (status, _) = send(
        &app,
        marker_req("nope", json!({"x": 1, "y": 1, "class": "f"}).to_string()),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    for bad in [
        "not json".to_string(),
        json!({"x": 1, "y": 1}).to_string(),
        json!({"x": "a", "y": 1, "class": "f"}).to_string(),
        json!({"x": -1, "y": 0, "class": "f"}).to_string(),
        json!({"x": 96, "y": 0, "class": "f"}).to_string(),
        json!({"x": 1, "y": 1, "class": ""}).to_string(),
    ] {
        let (status, _) = send(&app, marker_req(id, bad.clone())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{bad}");
    }

    let (status, _) = send(
        &app,
        marker_req(id, json!({"x": 30, "y": 30, "class": "f"}).to_string()),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let (_, before) = send(&app, plain(Method::GET, format!("/sessions/{id}/labels"))).await;
    let (status, _) = send(
        &app,
        marker_req(id, json!({"x": 30, "y": 30, "class": "b"}).to_string()),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (_, after) = send(&app, plain(Method::GET, format!("/sessions/{id}/labels"))).await;
    assert_eq!(before, after, "rejected marker must not be kept");

    let (status, _) = send(&app, plain(Method::DELETE, format!("/sessions/{id}"))).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, _) = send(&app, plain(Method::GET, format!("/sessions/{id}/labels"))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn malformed_uploads_are_rejected() {
    let app = app();
    let (status, _) = send(&app, multipart(None, &[("m", "60")])).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let png = png_bytes(0);
    for fields in [
        [("m", "lots")],
        [("alpha", "-")],
        [("m", "0")],
        [("color", "red")],
    ] {
        let (status, _) = send(&app, multipart(Some(&png), &fields)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{fields:?}");
    }
    let (status, _) = send(&app, multipart(Some(b"garbage"), &[])).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn idle_sessions_expire() {
    let state = AppState::new(Duration::ZERO);
    let app = router(state.clone());
    let created = create(&app, 3).await;
    let id = created["id"].as_str().unwrap();
    let (status, _) = send(&app, plain(Method::GET, format!("/sessions/{id}/labels"))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let state = AppState::new(Duration::ZERO);
    let app = router(state.clone());
    create(&app, 3).await;
    assert_eq!(state.len(), 1);
    assert_eq!(state.sweep(), 1);
    assert!(state.is_empty());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_markers_on_one_session_are_all_kept() {
    let app = app();
    let created = create(&app, 4).await;
    let id = Arc::new(created["id"].as_str().unwrap().to_string());
    let mut tasks = Vec::new();
    for k in 0..8i64 {
        let (app, id) = (app.clone(), id.clone());
        tasks.push(tokio::spawn(async move {
            let m = json!({"x": 2 + 11 * k, "y": 2 + 11 * k, "class": "f"});
            send(&app, marker_req(&id, m.to_string())).await.0
        }));
    }
    for t in tasks {
        assert_eq!(t.await.unwrap(), StatusCode::OK);
    }
    let (_, body) = send(&app, plain(Method::GET, format!("/sessions/{id}/labels"))).await;
    assert_eq!(json_of(&body)["markers"].as_array().unwrap().len(), 8);
}
