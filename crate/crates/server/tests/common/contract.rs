//! Drives each (endpoint, error case) of the frozen error fixture against a
//! live server.

use std::collections::BTreeSet;
use std::path::PathBuf;

use cardiolabel_core::auth::{Auth, AuthConfig, HashCost, Role};
use cardiolabel_core::synth::{synthetic_record, SynthSpec};
use reqwest::Method;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{Client, TestServer};

#[derive(Debug, Clone, Deserialize)]
pub struct ContractCase {
    pub endpoint: String,
    pub case: String,
    pub status: u16,
    pub code: String,
}

pub fn load_fixture() -> Vec<ContractCase> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/error_contract.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Codes that only operator commands can produce, plus the catch-all.
pub const NOT_REACHABLE_OVER_HTTP: [&str; 5] = [
    "internal",
    "duplicate_dataset",
    "invalid_vocabulary",
    "not_expert_role",
    "unknown_user",
];

pub struct Ctx {
    pub anon: Client,
    pub admin: Client,
    /// annotator, member of alpha
    pub a: Client,
    /// second annotator, member of alpha
    pub a2: Client,
    /// expert of alpha
    pub e: Client,
    /// annotator, member of beta only
    pub b: Client,
    pub alpha: String,
    pub beta: String,
    pub rec: String,
    pub beta_rec: String,
    pub expired: String,
}

const TWELVE: [&str; 12] = ["I", "II", "III", "aVR", "aVL", "aVF", "V1", "V2", "V3", "V4", "V5", "V6"];

pub async fn setup(server: &TestServer) -> Ctx {
    let admin = server.bootstrap_admin();
    server.add_user(&admin, "ann-a", Role::Annotator);
    server.add_user(&admin, "ann-a2", Role::Annotator);
    server.add_user(&admin, "exp-e", Role::Expert);
    server.add_user(&admin, "ann-b", Role::Annotator);
    let spec = SynthSpec {
        fs: 360.0,
        seconds: 30.0,
        lead_names: TWELVE.iter().map(|s| s.to_string()).collect(),
        ..SynthSpec::default()
    };
    let alpha = server.import(
        "alpha",
        (0..3)
            .map(|i| synthetic_record("alpha", &format!("a{i}"), &SynthSpec { seed: i, ..spec.clone() }))
            .collect(),
    );
    let beta = server.import("beta", vec![synthetic_record("beta", "b0", &spec)]);
    server.grant("alpha", "ann-a", false);
    server.grant("alpha", "ann-a2", false);
    server.grant("alpha", "exp-e", true);
    server.grant("beta", "ann-b", false);

    let stale = Auth::new(
        server.state.store.clone(),
        AuthConfig {
            session_lifetime: chrono::Duration::zero(),
            hash_cost: HashCost::minimal(),
        },
    );
    let expired = stale.login("ann-a", "password1").unwrap().token;

    let c = server.client();
    Ctx {
        admin: c.login("admin", "admin-password").await,
        a: c.login("ann-a", "password1").await,
        a2: c.login("ann-a2", "password1").await,
        e: c.login("exp-e", "password1").await,
        b: c.login("ann-b", "password1").await,
        anon: c,
        rec: alpha.record_ids[0].clone(),
        alpha: alpha.dataset_id,
        beta: beta.dataset_id,
        beta_rec: beta.record_ids[0].clone(),
        expired,
    }
}

fn code_of(v: &Value) -> String {
    v["code"].as_str().unwrap_or("<no code>").to_string()
}

fn af() -> Value {
    json!({ "labels": ["AF"], "comment": "", "status": "confirmed" })
}

impl Ctx {
    async fn fresh_code(&self, role: &str) -> String {
        let (s, v) = self.admin.post("/api/admin/codes", json!({ "role": role })).await;
        assert_eq!(s.as_u16(), 201, "{v}");
        v["code"].as_str().unwrap().to_string()
    }

    /// A current head annotation by `ann-a` on the first alpha record.
    async fn head(&self) -> (String, u64) {
        let (s, v) = self.a.post(&format!("/api/records/{}/annotation", self.rec), af()).await;
        assert_eq!(s.as_u16(), 201, "{v}");
        let a = &v["annotation"];
        (a["annotation_id"].as_str().unwrap().to_string(), a["revision"].as_u64().unwrap())
    }

    fn expired_client(&self) -> Client {
        self.anon.with_token(&self.expired)
    }
}

/// Performs one fixture case and returns the observed `(status, code)`.
pub async fn run_case(ctx: &Ctx, endpoint: &str, case: &str) -> (u16, String) {
    let anon = &ctx.anon;
    let (alpha, beta, rec, brec) = (&ctx.alpha, &ctx.beta, &ctx.rec, &ctx.beta_rec);
    let (s, v) = match (endpoint, case) {
        ("POST /api/register", "invalid_code") => {
            anon.post("/api/register", json!({"code": "0000", "username": "zed", "password": "password1"})).await
        }
        ("POST /api/register", "reused_code") => {
            let code = ctx.fresh_code("annotator").await;
            let body = json!({"code": code, "username": "reuser1", "password": "password1"});
            let (first, _) = anon.post("/api/register", body).await;
            assert_eq!(first.as_u16(), 201);
            anon.post("/api/register", json!({"code": code, "username": "reuser2", "password": "password1"})).await
        }
        ("POST /api/register", "username_taken") => {
            let code = ctx.fresh_code("annotator").await;
            anon.post("/api/register", json!({"code": code, "username": "ann-a", "password": "password1"})).await
        }
        ("POST /api/register", "weak_password") => {
            let code = ctx.fresh_code("annotator").await;
            anon.post("/api/register", json!({"code": code, "username": "shorty", "password": "abc"})).await
        }
        ("POST /api/register", "invalid_username") => {
            let code = ctx.fresh_code("annotator").await;
            anon.post("/api/register", json!({"code": code, "username": "has space", "password": "password1"})).await
        }
        ("POST /api/register", "malformed_body") => anon.raw(Method::POST, "/api/register", "{\"code\":").await,
        ("POST /api/login", "wrong_password") => {
            anon.post("/api/login", json!({"username": "ann-a", "password": "not-it-at-all"})).await
        }
        ("POST /api/login", "unknown_user") => {
            anon.post("/api/login", json!({"username": "nobody", "password": "password1"})).await
        }
        ("POST /api/logout", "no_token") => anon.post("/api/logout", json!({})).await,
        ("POST /api/logout", "garbage_token") => anon.with_token("garbage").post("/api/logout", json!({})).await,
        ("GET /api/me", "after_logout") => {
            let c = anon.login("ann-b", "password1").await;
            let (s, _) = c.post("/api/logout", json!({})).await;
            assert_eq!(s.as_u16(), 204);
            c.get("/api/me").await
        }
        ("GET /api/me", "expired_token") => ctx.expired_client().get("/api/me").await,
        ("GET /api/me", "non_bearer_scheme") => {
            let resp = anon
                .http
                .get(format!("{}/api/me", anon.base))
                .basic_auth("ann-a", Some("password1"))
                .send()
                .await
                .unwrap();
            (resp.status(), resp.json().await.unwrap())
        }
        ("POST /api/admin/codes", "no_token") => anon.post("/api/admin/codes", json!({"role": "annotator"})).await,
        ("POST /api/admin/codes", "non_admin") => ctx.a.post("/api/admin/codes", json!({"role": "annotator"})).await,
        ("POST /api/admin/codes", "admin_role") => ctx.admin.post("/api/admin/codes", json!({"role": "admin"})).await,
        ("POST /api/admin/codes", "unknown_role") => {
            ctx.admin.post("/api/admin/codes", json!({"role": "overlord"})).await
        }
        ("GET /api/datasets", "no_token") => anon.get("/api/datasets").await,
        ("GET /api/datasets", "expired_token") => ctx.expired_client().get("/api/datasets").await,
        ("GET /api/datasets", "zero_limit") => ctx.a.get("/api/datasets?limit=0").await,
        ("GET /api/datasets/{id}/resume", "no_token_unknown_id") => anon.get("/api/datasets/ds_x/resume").await,
        ("GET /api/datasets/{id}/resume", "unknown_dataset") => ctx.a.get("/api/datasets/ds_x/resume").await,
        ("GET /api/datasets/{id}/resume", "non_member") => ctx.b.get(&format!("/api/datasets/{alpha}/resume")).await,
        ("GET /api/datasets/{id}/navigate", "no_token") => {
            anon.get(&format!("/api/datasets/{alpha}/navigate?position=0&direction=next")).await
        }
        ("GET /api/datasets/{id}/navigate", "before_first") => {
            ctx.a.get(&format!("/api/datasets/{alpha}/navigate?position=0&direction=previous")).await
        }
        ("GET /api/datasets/{id}/navigate", "position_out_of_range") => {
            ctx.a.get(&format!("/api/datasets/{alpha}/navigate?position=99&direction=next")).await
        }
        ("GET /api/datasets/{id}/navigate", "missing_direction") => {
            ctx.a.get(&format!("/api/datasets/{alpha}/navigate?position=0")).await
        }
        ("GET /api/datasets/{id}/navigate", "non_member") => {
            ctx.b.get(&format!("/api/datasets/{alpha}/navigate?position=0&direction=next")).await
        }
        ("GET /api/datasets/{id}/unsure", "no_token") => anon.get(&format!("/api/datasets/{alpha}/unsure")).await,
        ("GET /api/datasets/{id}/unsure", "non_member") => ctx.a.get(&format!("/api/datasets/{beta}/unsure")).await,
        ("GET /api/datasets/{id}/unsure", "unknown_dataset") => ctx.a.get("/api/datasets/ds_x/unsure").await,
        ("GET /api/datasets/{id}/review", "no_token") => anon.get(&format!("/api/datasets/{alpha}/review")).await,
        ("GET /api/datasets/{id}/review", "non_expert") => ctx.a.get(&format!("/api/datasets/{alpha}/review")).await,
        ("GET /api/datasets/{id}/review", "unknown_dataset") => ctx.e.get("/api/datasets/ds_x/review").await,
        ("GET /api/records/{id}", "no_token") => anon.get(&format!("/api/records/{rec}")).await,
        ("GET /api/records/{id}", "unknown_record") => ctx.a.get("/api/records/rec_x").await,
        ("GET /api/records/{id}", "non_member") => ctx.a.get(&format!("/api/records/{brec}")).await,
        ("GET /api/records/{id}/segment", "no_token_unknown_id") => anon.get("/api/records/rec_x/segment").await,
        ("GET /api/records/{id}/segment", "expired_token") => {
            ctx.expired_client().get(&format!("/api/records/{rec}/segment")).await
        }
        ("GET /api/records/{id}/segment", "negative_start") => {
            ctx.a.get(&format!("/api/records/{rec}/segment?start=-1")).await
        }
        ("GET /api/records/{id}/segment", "end_past_record") => {
            ctx.a.get(&format!("/api/records/{rec}/segment?start=25&end=40")).await
        }
        ("GET /api/records/{id}/segment", "unknown_lead") => {
            ctx.a.get(&format!("/api/records/{rec}/segment?leads=II,V9")).await
        }
        ("GET /api/records/{id}/segment", "zero_buckets") => {
            ctx.a.get(&format!("/api/records/{rec}/segment?max_buckets=0")).await
        }
        ("GET /api/records/{id}/segment", "too_many_buckets") => {
            ctx.a.get(&format!("/api/records/{rec}/segment?max_buckets=10001")).await
        }
        ("GET /api/records/{id}/segment", "non_numeric_start") => {
            ctx.a.get(&format!("/api/records/{rec}/segment?start=soon")).await
        }
        ("GET /api/records/{id}/segment", "unknown_record") => ctx.a.get("/api/records/rec_x/segment").await,
        ("GET /api/records/{id}/segment", "non_member") => ctx.a.get(&format!("/api/records/{brec}/segment")).await,
        ("GET /api/records/{id}/analysis", "no_token") => anon.get(&format!("/api/records/{rec}/analysis")).await,
        ("GET /api/records/{id}/analysis", "unknown_record") => ctx.a.get("/api/records/rec_x/analysis").await,
        ("GET /api/records/{id}/analysis", "non_member") => {
            ctx.a.get(&format!("/api/records/{brec}/analysis")).await
        }
        ("POST /api/records/{id}/annotation", "no_token") => {
            anon.post(&format!("/api/records/{rec}/annotation"), af()).await
        }
        ("POST /api/records/{id}/annotation", "empty_confirmed") => {
            let body = json!({"labels": [], "comment": "", "status": "confirmed"});
            ctx.a.post(&format!("/api/records/{rec}/annotation"), body).await
        }
        ("POST /api/records/{id}/annotation", "unknown_label") => {
            let body = json!({"labels": ["AF", "ZZZ"], "status": "confirmed"});
            ctx.a.post(&format!("/api/records/{rec}/annotation"), body).await
        }
        ("POST /api/records/{id}/annotation", "bad_status") => {
            let body = json!({"labels": ["AF"], "status": "maybe"});
            ctx.a.post(&format!("/api/records/{rec}/annotation"), body).await
        }
        ("POST /api/records/{id}/annotation", "unknown_record") => {
            ctx.a.post("/api/records/rec_x/annotation", af()).await
        }
        ("POST /api/records/{id}/annotation", "non_member") => {
            ctx.b.post(&format!("/api/records/{rec}/annotation"), af()).await
        }
        ("GET /api/me/annotations", "no_token") => anon.get(&format!("/api/me/annotations?dataset={alpha}")).await,
        ("GET /api/me/annotations", "missing_dataset") => ctx.a.get("/api/me/annotations").await,
        ("GET /api/me/annotations", "unknown_dataset") => ctx.a.get("/api/me/annotations?dataset=ds_x").await,
        ("GET /api/me/annotations", "non_member") => ctx.a.get(&format!("/api/me/annotations?dataset={beta}")).await,
        ("PUT /api/annotations/{id}", "no_token") => {
            let (id, _) = ctx.head().await;
            anon.put(&format!("/api/annotations/{id}"), af()).await
        }
        ("PUT /api/annotations/{id}", "replayed_revision") => {
            let (id, rev) = ctx.head().await;
            let body = json!({"labels": ["ER"], "status": "confirmed", "expected_revision": rev});
            let (first, _) = ctx.a.put(&format!("/api/annotations/{id}"), body.clone()).await;
            assert_eq!(first.as_u16(), 200);
            ctx.a.put(&format!("/api/annotations/{id}"), body).await
        }
        ("PUT /api/annotations/{id}", "stale_expected_revision") => {
            let (id, rev) = ctx.head().await;
            let body = json!({"labels": ["ER"], "status": "confirmed", "expected_revision": rev + 1});
            ctx.a.put(&format!("/api/annotations/{id}"), body).await
        }
        ("PUT /api/annotations/{id}", "not_owner") => {
            let (id, _) = ctx.head().await;
            ctx.a2.put(&format!("/api/annotations/{id}"), af()).await
        }
        ("PUT /api/annotations/{id}", "unknown_annotation") => ctx.a.put("/api/annotations/ann_x", af()).await,
        ("PUT /api/annotations/{id}", "empty_confirmed") => {
            let (id, _) = ctx.head().await;
            let body = json!({"labels": [], "comment": " ", "status": "confirmed"});
            ctx.a.put(&format!("/api/annotations/{id}"), body).await
        }
        ("POST /api/annotations/{id}/decision", "no_token") => {
            let (id, _) = ctx.head().await;
            anon.post(&format!("/api/annotations/{id}/decision"), json!({"action": "approve"})).await
        }
        ("POST /api/annotations/{id}/decision", "non_expert") => {
            let (id, _) = ctx.head().await;
            ctx.a2.post(&format!("/api/annotations/{id}/decision"), json!({"action": "approve"})).await
        }
        ("POST /api/annotations/{id}/decision", "override_without_labels") => {
            let (id, _) = ctx.head().await;
            let body = json!({"action": "override", "override_labels": []});
            ctx.e.post(&format!("/api/annotations/{id}/decision"), body).await
        }
        ("POST /api/annotations/{id}/decision", "superseded_target") => {
            let (old, _) = ctx.head().await;
            ctx.head().await;
            ctx.e.post(&format!("/api/annotations/{old}/decision"), json!({"action": "approve"})).await
        }
        ("POST /api/annotations/{id}/decision", "unknown_annotation") => {
            ctx.e.post("/api/annotations/ann_x/decision", json!({"action": "approve"})).await
        }
        ("GET /api/nowhere", "unknown_route") => ctx.a.get("/api/nowhere").await,
        other => panic!("no scenario for {other:?}"),
    };
    (s.as_u16(), code_of(&v))
}

/// Runs the whole fixture; returns the mismatches as readable lines.
pub async fn check_all(ctx: &Ctx) -> (usize, Vec<String>) {
    let cases = load_fixture();
    let mut failures = Vec::new();
    for c in &cases {
        let got = run_case(ctx, &c.endpoint, &c.case).await;
        if got != (c.status, c.code.clone()) {
            failures.push(format!(
                "{} [{}]: expected {} {}, got {} {}",
                c.endpoint, c.case, c.status, c.code, got.0, got.1
            ));
        }
    }
    let covered: BTreeSet<&str> = cases.iter().map(|c| c.code.as_str()).collect();
    for code in cardiolabel_server::error::ERROR_CODES {
        if !covered.contains(code) && !NOT_REACHABLE_OVER_HTTP.contains(code) {
            failures.push(format!("error code {code} has no fixture case"));
        }
    }
    (cases.len(), failures)
}
