use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use cnr_core::filter::{filter_comments, FilterQuery};
use cnr_core::gateway::{
    Backend, Gateway, GatewayConfig, ResponderBackend, ScriptedBackend, TemplateSet,
};
use cnr_core::ingest::load_article;
use cnr_core::model::ProcessedArticle;
use cnr_core::pipeline::{Pipeline, ProducedAt};
use cnr_core::store::Store;
use reqwest::StatusCode;
use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn article_body(id: &str) -> String {
    std::fs::read_to_string(fixtures().join(format!("articles/{id}.json"))).unwrap()
}

struct Server {
    base: String,
    _dir: tempfile::TempDir,
    store: Arc<Store>,
}

/// Golden script replay, optionally slowed down to keep jobs running.
async fn start(delay: Duration) -> Server {
    let scripted =
        ScriptedBackend::from_file(fixtures().join("golden/golden.script.json")).unwrap();
    let backend = ResponderBackend::new("slow-script", move |call| {
        std::thread::sleep(delay);
        scripted.complete(call)
    });
    start_with(Gateway::new(
        Arc::new(backend),
        TemplateSet::builtin(),
        GatewayConfig::default(),
    ))
    .await
}

async fn start_with(gateway: Gateway) -> Server {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(Store::open(dir.path()).unwrap());
    let app = cnr_service::router(
        store.clone(),
        Arc::new(Pipeline::new(gateway)),
        cnr_service::ServiceConfig {
            produced_at: ProducedAt::ArticleCreated,
            ..Default::default()
        },
    );
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    Server {
        base,
        _dir: dir,
        store,
    }
}

impl Server {
    async fn get(&self, path: &str) -> (StatusCode, Value) {
        let r = reqwest::get(format!("{}{path}", self.base)).await.unwrap();
        let status = r.status();
        (status, r.json().await.unwrap_or(Value::Null))
    }

    async fn post(&self, path: &str, body: String) -> (StatusCode, Value) {
        let r = reqwest::Client::new()
            .post(format!("{}{path}", self.base))
            .header("content-type", "application/json")
            .body(body)
            .send()
            .await
            .unwrap();
        let status = r.status();
        (status, r.json().await.unwrap_or(Value::Null))
    }

    async fn wait_done(&self, id: &str) -> Value {
        for _ in 0..500 {
            let (_, s) = self.get(&format!("/v1/articles/{id}/status")).await;
            if s["state"] == "done" || s["state"] == "failed" {
                return s;
            }
            tokio::time::sleep(Duration::from_millis(10)).await;
        }
        panic!("job for {id} did not finish");
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn create_and_gate() {
    let s = start(Duration::ZERO).await;
    let (st, v) = s
        .post("/v1/articles", article_body("gym-locker-policy"))
        .await;
    assert_eq!(st, StatusCode::CREATED);
    assert_eq!(v["id"], "gym-locker-policy");

    let (st, _) = s
        .post("/v1/articles", article_body("gym-locker-policy"))
        .await;
    assert_eq!(st, StatusCode::CONFLICT);
    let (st, v) = s.post("/v1/articles", "{\"format_version\":".into()).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "invalid_body");
    let dangling = article_body("school-phone-ban").replace(
        "\"parent_id\": \"school-phone-ban\"",
        "\"parent_id\": \"elsewhere\"",
    );
    let (st, v) = s.post("/v1/articles", dangling).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "validation");

    let (st, v) = s.get("/v1/articles/gym-locker-policy").await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["job"]["state"], "pending");
    assert_eq!(v["article"]["first_level_count"], 8);

    for path in ["main-points", "hints", "comments"] {
        let (st, v) = s
            .get(&format!("/v1/articles/gym-locker-policy/{path}"))
            .await;
        assert_eq!(st, StatusCode::CONFLICT, "{path}");
        assert_eq!(v["error"]["code"], "not_processed");
    }
    let (st, v) = s.get("/v1/articles/gym-locker-policy/comments?raw=1").await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["comments"].as_array().unwrap().len(), 10);

    for path in ["", "/main-points", "/hints", "/comments", "/status"] {
        let (st, _) = s.get(&format!("/v1/articles/nope{path}")).await;
        assert_eq!(st, StatusCode::NOT_FOUND, "{path}");
    }
    let (st, _) = s.post("/v1/articles/nope/process", String::new()).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn process_is_idempotent_while_running() {
    let s = start(Duration::from_millis(2)).await;
    s.post("/v1/articles", article_body("river-bridge-closure"))
        .await;
    let (st, first) = s
        .post("/v1/articles/river-bridge-closure/process", String::new())
        .await;
    assert_eq!(st, StatusCode::ACCEPTED);
    assert_eq!(first["state"], "classifying");
    let (st, second) = s
        .post("/v1/articles/river-bridge-closure/process", String::new())
        .await;
    assert_eq!(st, StatusCode::ACCEPTED);
    assert_ne!(second["state"], "pending");

    let done = s.wait_done("river-bridge-closure").await;
    assert_eq!(done["state"], "done");
    assert_eq!(done["progress"]["processed"], 6);
    let (_, again) = s
        .post("/v1/articles/river-bridge-closure/process", String::new())
        .await;
    assert_eq!(again["state"], "done");
    let (_, health) = s.get("/v1/health").await;
    assert_eq!(health["pipeline_runs"], 1);

    // the stored output is the committed golden document
    let expected =
        std::fs::read_to_string(fixtures().join("golden/expected/river-bridge-closure.json"))
            .unwrap();
    let stored = std::fs::read_to_string(s.store.processed_path("river-bridge-closure")).unwrap();
    assert_eq!(stored, expected);
}

#[tokio::test(flavor = "multi_thread")]
async fn comments_endpoint_matches_filter() {
    let s = start(Duration::ZERO).await;
    let id = "gym-locker-policy";
    s.post("/v1/articles", article_body(id)).await;
    s.post(&format!("/v1/articles/{id}/process"), String::new())
        .await;
    assert_eq!(s.wait_done(id).await["state"], "done");

    let article = load_article(fixtures().join(format!("articles/{id}.json"))).unwrap();
    let pa: ProcessedArticle = s.store.processed(id).unwrap().unwrap();
    let queries = [
        ("", FilterQuery::default()),
        (
            "content=others",
            FilterQuery::from_params(Some("others"), None, None).unwrap(),
        ),
        (
            "content=analysis,skepticism&sentiment=negative",
            FilterQuery::from_params(Some("analysis,skepticism"), Some("negative"), None).unwrap(),
        ),
        ("point=2", FilterQuery::default().point(2)),
        (
            "content=all&sentiment=neutral,positive&point=4",
            FilterQuery::from_params(Some("all"), Some("neutral,positive"), Some("4")).unwrap(),
        ),
    ];
    for (qs, q) in queries {
        let (st, v) = s.get(&format!("/v1/articles/{id}/comments?{qs}")).await;
        assert_eq!(st, StatusCode::OK, "{qs}");
        let got: Vec<&str> = v["comments"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c["id"].as_str().unwrap())
            .collect();
        let want: Vec<&str> = filter_comments(&pa, &article, &q)
            .unwrap()
            .into_iter()
            .map(|c| c.id.as_str())
            .collect();
        assert_eq!(got, want, "{qs}");
    }

    // the Others option yields exactly the peripheral-only comments of the fixture
    let (_, v) = s
        .get(&format!("/v1/articles/{id}/comments?content=others"))
        .await;
    let others: Vec<&str> = v["comments"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["id"].as_str().unwrap())
        .collect();
    assert_eq!(others, ["c7", "c8"]);
    assert_eq!(v["comments"][0]["categories"][0], "entertainment");

    for bad in [
        "content=bogus",
        "sentiment=angry",
        "point=x",
        "point=99",
        "raw=maybe",
    ] {
        let (st, v) = s.get(&format!("/v1/articles/{id}/comments?{bad}")).await;
        assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY, "{bad}");
        assert_eq!(v["error"]["code"], "invalid_query");
    }

    let (st, v) = s.get(&format!("/v1/articles/{id}/main-points")).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(
        v["main_points"].as_array().unwrap().len(),
        pa.main_points.len()
    );
    let (st, v) = s.get(&format!("/v1/articles/{id}/hints")).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["hints"][0]["keyword"], "source verification");

    let (_, v) = s.get("/v1/articles").await;
    assert_eq!(v["articles"][0]["state"], "done");
}

#[tokio::test(flavor = "multi_thread")]
async fn failed_job_reports_reason() {
    let gateway = Gateway::with_backend(ResponderBackend::new("down", |_| {
        Err(cnr_core::gateway::BackendError::Unavailable(
            "offline".into(),
        ))
    }));
    let s = start_with(gateway).await;
    s.post("/v1/articles", article_body("school-phone-ban"))
        .await;
    s.post("/v1/articles/school-phone-ban/process", String::new())
        .await;
    let status = s.wait_done("school-phone-ban").await;
    assert_eq!(status["state"], "failed");
    assert!(status["reason"].as_str().unwrap().contains("offline"));
    let (st, _) = s.get("/v1/articles/school-phone-ban/main-points").await;
    assert_eq!(st, StatusCode::CONFLICT);
}
