//! Live-server harness: a temporary data directory, the API bound to an
//! ephemeral port, and a small JSON client.
#![allow(dead_code)]

pub mod contract;

use std::sync::Arc;

use cardiolabel_core::analysis::DiagnosisThresholds;
use cardiolabel_core::annotation::{default_vocabulary, Dataset};
use cardiolabel_core::auth::{AuthConfig, HashCost, Identity, Role};
use cardiolabel_core::catalog::import_dataset;
use cardiolabel_core::storage::{Store, StoreOptions};
use cardiolabel_core::wfdb::{assemble_manifest, EcgRecord};
use cardiolabel_server::AppState;
use reqwest::{Method, StatusCode};
use serde_json::Value;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub struct TestServer {
    pub base: String,
    pub state: AppState,
    pub dir: tempfile::TempDir,
    shutdown: Option<oneshot::Sender<()>>,
    handle: Option<JoinHandle<std::io::Result<()>>>,
}

impl TestServer {
    pub async fn start(hash_cost: HashCost, durable: bool) -> TestServer {
        let dir = tempfile::tempdir().unwrap();
        let store = Arc::new(Store::create(dir.path(), StoreOptions { durable }).unwrap());
        let state = AppState::new(
            store,
            AuthConfig {
                hash_cost,
                ..AuthConfig::default()
            },
        );
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (tx, rx) = oneshot::channel();
        let handle = tokio::spawn(cardiolabel_server::serve(listener, state.clone(), async {
            let _ = rx.await;
        }));
        TestServer {
            base,
            state,
            dir,
            shutdown: Some(tx),
            handle: Some(handle),
        }
    }

    pub async fn stop(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(h) = self.handle.take() {
            h.await.unwrap().unwrap();
        }
    }

    pub fn client(&self) -> Client {
        Client {
            http: reqwest::Client::new(),
            base: self.base.clone(),
            token: None,
        }
    }

    /// Creates the admin account directly in storage.
    pub fn bootstrap_admin(&self) -> Identity {
        self.state.auth.create_admin("admin", "admin-password").unwrap();
        self.state.auth.identity_of("admin").unwrap()
    }

    /// Registers through storage, skipping HTTP.
    pub fn add_user(&self, admin: &Identity, name: &str, role: Role) -> Identity {
        let code = self.state.auth.issue_code(admin, role).unwrap().code;
        self.state.auth.register(&code, name, "password1").unwrap();
        self.state.auth.identity_of(name).unwrap()
    }

    pub fn import(&self, name: &str, records: Vec<EcgRecord>) -> Dataset {
        let manifest = assemble_manifest(name, records).unwrap();
        import_dataset(
            &self.state.store,
            &manifest,
            default_vocabulary(),
            &DiagnosisThresholds::default(),
        )
        .unwrap()
    }

    pub fn grant(&self, dataset: &str, user: &str, expert: bool) {
        self.state.campaign.grant(dataset, user, expert).unwrap();
    }
}

#[derive(Clone)]
pub struct Client {
    pub http: reqwest::Client,
    pub base: String,
    pub token: Option<String>,
}

impl Client {
    pub fn with_token(&self, token: &str) -> Client {
        Client {
            token: Some(token.to_string()),
            ..self.clone()
        }
    }

    pub fn anonymous(&self) -> Client {
        Client {
            token: None,
            ..self.clone()
        }
    }

    pub async fn call(&self, method: Method, path: &str, body: Option<Value>) -> (StatusCode, Value) {
        let mut req = self.http.request(method, format!("{}{}", self.base, path));
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        if let Some(b) = body {
            req = req.json(&b);
        }
        let resp = req.send().await.unwrap();
        let status = resp.status();
        let text = resp.text().await.unwrap();
        let value = if text.is_empty() {
            Value::Null
        } else {
            serde_json::from_str(&text).unwrap_or(Value::String(text))
        };
        (status, value)
    }

    pub async fn raw(&self, method: Method, path: &str, body: &str) -> (StatusCode, Value) {
        let mut req = self
            .http
            .request(method, format!("{}{}", self.base, path))
            .header("content-type", "application/json")
            .body(body.to_string());
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        let resp = req.send().await.unwrap();
        let status = resp.status();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    pub async fn get(&self, path: &str) -> (StatusCode, Value) {
        self.call(Method::GET, path, None).await
    }

    pub async fn post(&self, path: &str, body: Value) -> (StatusCode, Value) {
        self.call(Method::POST, path, Some(body)).await
    }

    pub async fn put(&self, path: &str, body: Value) -> (StatusCode, Value) {
        self.call(Method::PUT, path, Some(body)).await
    }

    /// Logs in and returns a client carrying the session token.
    pub async fn login(&self, username: &str, password: &str) -> Client {
        let (status, body) = self
            .anonymous()
            .post(
                "/api/login",
                serde_json::json!({ "username": username, "password": password }),
            )
            .await;
        assert_eq!(status, StatusCode::OK, "login {username}: {body}");
        self.with_token(body["token"].as_str().unwrap())
    }
}
