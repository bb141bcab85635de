//! Wire-level tests against a local mock chat-completions server.

mod common;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use claimmatch::agents::{
    AgentError, BackendConfig, ChatBackend, ChatMessage, ChatRequest, HttpBackend, RetryPolicy,
};
use serde_json::{json, Value};
use std::sync::{Arc, Mutex};
use std::time::Duration;

#[derive(Clone, Default)]
struct Seen {
    bodies: Arc<Mutex<Vec<Value>>>,
    auth_headers: Arc<Mutex<Vec<Option<String>>>>,
    fail_with_500: Arc<Mutex<u32>>, // number of requests to fail before succeeding
}

async fn handler(
    State(seen): State<Seen>,
    headers: HeaderMap,
    Json(body): Json<Value>,
) -> (StatusCode, Json<Value>) {
    seen.bodies.lock().unwrap().push(body);
    seen.auth_headers.lock().unwrap().push(
        headers
            .get("authorization")
            .map(|v| v.to_str().unwrap_or_default().to_string()),
    );
    {
        let mut remaining = seen.fail_with_500.lock().unwrap();
        if *remaining > 0 {
            *remaining -= 1;
            return (
                StatusCode::INTERNAL_SERVER_ERROR,
                Json(json!({"error": "overloaded"})),
            );
        }
    }
    (
        StatusCode::OK,
        Json(json!({"choices": [{"message": {"role": "assistant", "content": "Yes."}}]})),
    )
}

async fn spawn_server(seen: Seen) -> String {
    let app = Router::new()
        .route("/v1/chat/completions", post(handler))
        .with_state(seen);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    format!("http://{addr}/v1/chat/completions")
}

fn backend_config(endpoint: String) -> BackendConfig {
    BackendConfig {
        name: "mock".into(),
        endpoint,
        model_id: "mock-model".into(),
        max_new_tokens: 400,
        temperature: Some(0.25),
        request_seed: Some(11),
        auth_env: Some("CLAIMMATCH_TEST_TOKEN".into()),
    }
}

fn request() -> ChatRequest {
    ChatRequest {
        model: "mock-model".into(),
        messages: vec![ChatMessage::user("Statement 1: a\nStatement 2: b\nAnswer:")],
        temperature: 0.25,
        max_tokens: 400,
        seed: Some(11),
    }
}

#[tokio::test]
async fn request_body_carries_all_settings_verbatim() {
    let seen = Seen::default();
    let endpoint = spawn_server(seen.clone()).await;
    std::env::set_var("CLAIMMATCH_TEST_TOKEN", "sekrit");
    let backend = HttpBackend::new(backend_config(endpoint)).unwrap();
    let response = backend.complete(&request()).await.unwrap();
    assert_eq!(response.content, "Yes.");

    let bodies = seen.bodies.lock().unwrap();
    assert_eq!(bodies.len(), 1);
    let body = &bodies[0];
    assert_eq!(body["model"], "mock-model");
    assert_eq!(body["temperature"], 0.25);
    assert_eq!(body["max_tokens"], 400);
    assert_eq!(body["seed"], 11);
    assert_eq!(body["messages"][0]["role"], "user");
    assert_eq!(
        body["messages"][0]["content"],
        "Statement 1: a\nStatement 2: b\nAnswer:"
    );

    let auth = seen.auth_headers.lock().unwrap();
    assert_eq!(auth[0].as_deref(), Some("Bearer sekrit"));
}

#[tokio::test]
async fn five_hundreds_are_retried_then_succeed() {
    let seen = Seen::default();
    *seen.fail_with_500.lock().unwrap() = 2;
    let endpoint = spawn_server(seen.clone()).await;
    let backend = HttpBackend::new(backend_config(endpoint))
        .unwrap()
        .with_retry(RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(5),
        });
    let response = backend.complete(&request()).await.unwrap();
    assert_eq!(response.content, "Yes.");
    assert_eq!(
        seen.bodies.lock().unwrap().len(),
        3,
        "two failures then one success"
    );
}

#[tokio::test]
async fn persistent_five_hundred_surfaces_attempt_count() {
    let seen = Seen::default();
    *seen.fail_with_500.lock().unwrap() = 99;
    let endpoint = spawn_server(seen.clone()).await;
    let backend = HttpBackend::new(backend_config(endpoint))
        .unwrap()
        .with_retry(RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(5),
        });
    match backend.complete(&request()).await {
        Err(AgentError::Backend {
            status, attempts, ..
        }) => {
            assert_eq!(status, Some(500));
            assert_eq!(attempts, 3);
        }
        other => panic!("expected Backend error, got {other:?}"),
    }
    assert_eq!(seen.bodies.lock().unwrap().len(), 3);
}

mod remote_embeddings {
    use axum::extract::State;
    use axum::routing::post;
    use axum::{Json, Router};
    use claimmatch::embeddings::{
        score_pairs, EmbeddingCache, EmbeddingError, EmbeddingProvider, RemoteEmbedder,
        RemoteEmbedderConfig,
    };
    use serde_json::{json, Value};
    use std::sync::{Arc, Mutex};

    #[derive(Clone, Default)]
    struct Seen {
        bodies: Arc<Mutex<Vec<Value>>>,
    }

    // toy embedder: 3 dims from byte statistics, deterministic
    fn toy_vector(text: &str) -> Vec<f64> {
        let bytes = text.as_bytes();
        let sum: u64 = bytes.iter().map(|b| *b as u64).sum();
        vec![
            bytes.len() as f64,
            (sum % 97) as f64,
            bytes.first().copied().unwrap_or(1) as f64,
        ]
    }

    async fn handler(State(seen): State<Seen>, Json(body): Json<Value>) -> Json<Value> {
        seen.bodies.lock().unwrap().push(body.clone());
        let data: Vec<Value> = body["input"]
            .as_array()
            .unwrap()
            .iter()
            .map(|t| json!({"embedding": toy_vector(t.as_str().unwrap())}))
            .collect();
        Json(json!({ "data": data }))
    }

    async fn spawn(seen: Seen) -> String {
        let app = Router::new()
            .route("/embed", post(handler))
            .with_state(seen);
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(async move {
            axum::serve(listener, app).await.unwrap();
        });
        format!("http://{addr}/embed")
    }

    #[tokio::test]
    async fn batches_score_and_cache_through_the_remote_provider() {
        let seen = Seen::default();
        let endpoint = spawn(seen.clone()).await;
        let dir = tempfile::tempdir().unwrap();
        let remote = RemoteEmbedder::new(RemoteEmbedderConfig {
            endpoint,
            model_id: "All-MiniLM-L6-v2".into(),
            auth_env: None,
        });
        let cached = claimmatch::embeddings::CachedEmbedder::new(
            Box::new(remote),
            EmbeddingCache::open(dir.path()).unwrap(),
        );

        let dataset = crate::common::synthetic_dataset(20, 70, "r");
        let scores = score_pairs(&dataset, &cached, 4).await.unwrap();
        assert_eq!(scores.len(), 20);
        assert!(scores.iter().all(|s| (-1.0..=1.0).contains(&s.score)));

        // wire shape: model id + batched input
        {
            let bodies = seen.bodies.lock().unwrap();
            assert!(!bodies.is_empty());
            assert_eq!(bodies[0]["model"], "All-MiniLM-L6-v2");
            assert!(bodies[0]["input"].is_array());
        }
        let requests_before = seen.bodies.lock().unwrap().len();

        // scores agree with an independent recomputation of the toy vectors
        for (pair, scored) in dataset.pairs().iter().zip(&scores) {
            let a = toy_vector(&pair.claim_a);
            let b = toy_vector(&pair.claim_b);
            let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            let expected = (dot / (na * nb)).clamp(-1.0, 1.0);
            assert!((scored.score - expected).abs() < 1e-12, "{}", pair.id);
        }

        // warm cache: rescoring makes no further requests
        let again = score_pairs(&dataset, &cached, 4).await.unwrap();
        assert_eq!(scores, again);
        assert_eq!(seen.bodies.lock().unwrap().len(), requests_before);
    }

    #[tokio::test]
    async fn unreachable_embedding_endpoint_is_provider_unavailable() {
        let remote = RemoteEmbedder::new(RemoteEmbedderConfig {
            endpoint: "http://127.0.0.1:9/embed".into(),
            model_id: "All-MiniLM-L6-v2".into(),
            auth_env: None,
        });
        match remote.embed("some text").await {
            Err(EmbeddingError::ProviderUnavailable(_)) => {}
            other => panic!("expected ProviderUnavailable, got {other:?}"),
        }
    }
}

#[tokio::test]
async fn unreachable_endpoint_is_a_transport_error() {
    // reserved port with nothing listening
    let backend = HttpBackend::new(backend_config(
        "http://127.0.0.1:9/v1/chat/completions".into(),
    ))
    .unwrap()
    .with_retry(RetryPolicy {
        max_attempts: 2,
        base_delay: Duration::from_millis(1),
    });
    match backend.complete(&request()).await {
        Err(AgentError::Backend {
            status, attempts, ..
        }) => {
            assert_eq!(status, None);
            assert_eq!(attempts, 2);
        }
        other => panic!("expected Backend error, got {other:?}"),
    }
}
