use std::collections::BTreeSet;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::routing::{get, post, put};
use axum::{Json, Router};
use cardiolabel_core::analysis::{AutoSuggestion, RhythmFeatures};
use cardiolabel_core::annotation::{
    Annotation, AnnotationStatus, Direction, Draft, LabelCode, ReviewAction, ReviewDecision, ReviewItem,
};
use cardiolabel_core::auth::Role;
use cardiolabel_core::catalog::{read_segment, SegmentRequest, SegmentResponse};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use tokio::sync::OwnedSemaphorePermit;

use crate::error::ApiError;
use crate::extract::{ApiJson, ApiQuery, Caller};
use crate::{blocking, AppState};

pub const DEFAULT_PAGE_LIMIT: usize = 200;
pub const MAX_PAGE_LIMIT: usize = 1000;

pub fn api_routes() -> Router<AppState> {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/register", post(register))
        .route("/api/login", post(login))
        .route("/api/logout", post(logout))
        .route("/api/me", get(me))
        .route("/api/admin/codes", post(issue_code))
        .route("/api/datasets", get(list_datasets))
        .route("/api/datasets/{id}/resume", get(resume))
        .route("/api/datasets/{id}/navigate", get(navigate))
        .route("/api/datasets/{id}/unsure", get(unsure))
        .route("/api/datasets/{id}/review", get(review))
        .route("/api/records/{id}", get(record_info))
        .route("/api/records/{id}/segment", get(segment))
        .route("/api/records/{id}/analysis", get(analysis))
        .route("/api/records/{id}/annotation", post(submit))
        .route("/api/me/annotations", get(my_annotations))
        .route("/api/annotations/{id}", put(revise))
        .route("/api/annotations/{id}/decision", post(decide))
}

#[derive(Debug, Deserialize)]
pub struct PageQuery {
    offset: Option<usize>,
    limit: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Page<T> {
    pub items: Vec<T>,
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
}

fn paginate<T>(all: Vec<T>, offset: Option<usize>, limit: Option<usize>) -> Result<Page<T>, ApiError> {
    let limit = limit.unwrap_or(DEFAULT_PAGE_LIMIT);
    if limit == 0 || limit > MAX_PAGE_LIMIT {
        return Err(ApiError::new(
            422,
            "invalid_query",
            format!("limit must be between 1 and {MAX_PAGE_LIMIT}"),
        ));
    }
    let offset = offset.unwrap_or(0);
    let total = all.len();
    let items = all.into_iter().skip(offset).take(limit).collect();
    Ok(Page {
        items,
        total,
        offset,
        limit,
    })
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

// ---- accounts ----

async fn password_slot(st: &AppState) -> Result<OwnedSemaphorePermit, ApiError> {
    st.password_slots
        .clone()
        .acquire_owned()
        .await
        .map_err(|e| ApiError::internal(e.to_string()))
}

#[derive(Deserialize)]
struct RegisterBody {
    code: String,
    username: String,
    password: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AccountView {
    pub user_id: String,
    pub username: String,
    pub role: Role,
}

async fn register(
    State(st): State<AppState>,
    ApiJson(body): ApiJson<RegisterBody>,
) -> Result<(StatusCode, Json<AccountView>), ApiError> {
    let permit = password_slot(&st).await?;
    let account = blocking(move || {
        let _permit = permit;
        Ok(st.auth.register(&body.code, &body.username, &body.password)?)
    })
    .await?;
    Ok((
        StatusCode::CREATED,
        Json(AccountView {
            user_id: account.user_id,
            username: account.username,
            role: account.role,
        }),
    ))
}

#[derive(Deserialize)]
struct LoginBody {
    username: String,
    password: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LoginView {
    pub token: String,
    pub user_id: String,
    pub role: Role,
    pub expires_at: DateTime<Utc>,
}

async fn login(State(st): State<AppState>, ApiJson(body): ApiJson<LoginBody>) -> Result<Json<LoginView>, ApiError> {
    let permit = password_slot(&st).await?;
    blocking(move || {
        let _permit = permit;
        let session = st.auth.login(&body.username, &body.password)?;
        let who = st.auth.authenticate(&session.token)?;
        Ok(Json(LoginView {
            token: session.token,
            user_id: session.user_id,
            role: who.role,
            expires_at: session.expires_at,
        }))
    })
    .await
}

async fn logout(caller: Caller, State(st): State<AppState>) -> Result<StatusCode, ApiError> {
    blocking(move || Ok(st.auth.logout(&caller.token)?)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn me(caller: Caller) -> Json<AccountView> {
    Json(AccountView {
        user_id: caller.identity.user_id,
        username: caller.identity.username,
        role: caller.identity.role,
    })
}

#[derive(Deserialize)]
struct CodeBody {
    role: Role,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CodeView {
    pub code: String,
    pub granted_role: Role,
    pub issued_at: DateTime<Utc>,
}

async fn issue_code(
    caller: Caller,
    State(st): State<AppState>,
    ApiJson(body): ApiJson<CodeBody>,
) -> Result<(StatusCode, Json<CodeView>), ApiError> {
    let code = blocking(move || Ok(st.auth.issue_code(&caller.identity, body.role)?)).await?;
    Ok((
        StatusCode::CREATED,
        Json(CodeView {
            code: code.code,
            granted_role: code.granted_role,
            issued_at: code.issued_at,
        }),
    ))
}

// ---- datasets ----

#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetView {
    pub dataset_id: String,
    pub name: String,
    pub record_count: usize,
    pub label_vocabulary: Vec<LabelCode>,
    pub is_expert: bool,
}

async fn list_datasets(
    caller: Caller,
    State(st): State<AppState>,
    ApiQuery(q): ApiQuery<PageQuery>,
) -> Result<Json<Page<DatasetView>>, ApiError> {
    let user = caller.identity.user_id;
    let all = blocking(move || Ok(st.campaign.datasets_for(&user)?.into_iter().map(|d| DatasetView {
        is_expert: d.is_expert(&user),
        dataset_id: d.dataset_id,
        name: d.name,
        record_count: d.record_ids.len(),
        label_vocabulary: d.label_vocabulary,
    }).collect::<Vec<_>>()))
    .await?;
    Ok(Json(paginate(all, q.offset, q.limit)?))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ResumeView {
    pub complete: bool,
    pub record_id: Option<String>,
    pub position: usize,
    pub total: usize,
    pub annotated_count: usize,
}

async fn resume(
    caller: Caller,
    State(st): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<ResumeView>, ApiError> {
    blocking(move || {
        let user = &caller.identity.user_id;
        let r = st.campaign.open_dataset(user, &id)?;
        let annotated_count = st.campaign.annotated_count(user, &id)?;
        let total = st.campaign.dataset(&id)?.record_ids.len();
        Ok(Json(ResumeView {
            complete: r.is_complete(),
            record_id: r.record_id().map(str::to_string),
            position: r.position(),
            total,
            annotated_count,
        }))
    })
    .await
}

#[derive(Debug, Deserialize)]
struct NavigateQuery {
    position: usize,
    direction: Direction,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NavigateView {
    pub record_id: String,
    pub position: usize,
}

async fn navigate(
    caller: Caller,
    State(st): State<AppState>,
    Path(id): Path<String>,
    ApiQuery(q): ApiQuery<NavigateQuery>,
) -> Result<Json<NavigateView>, ApiError> {
    blocking(move || {
        let (record_id, position) = st
            .campaign
            .navigate(&caller.identity.user_id, &id, q.position, q.direction)?;
        Ok(Json(NavigateView { record_id, position }))
    })
    .await
}

async fn unsure(
    caller: Caller,
    State(st): State<AppState>,
    Path(id): Path<String>,
    ApiQuery(q): ApiQuery<PageQuery>,
) -> Result<Json<Page<Annotation>>, ApiError> {
    let all = blocking(move || Ok(st.campaign.list_unsure(&caller.identity.user_id, &id)?)).await?;
    Ok(Json(paginate(all, q.offset, q.limit)?))
}

async fn review(
    caller: Caller,
    State(st): State<AppState>,
    Path(id): Path<String>,
    ApiQuery(q): ApiQuery<PageQuery>,
) -> Result<Json<Page<ReviewItem>>, ApiError> {
    let all = blocking(move || Ok(st.campaign.expert_review(&caller.identity.user_id, &id)?)).await?;
    Ok(Json(paginate(all, q.offset, q.limit)?))
}

// ---- records ----

#[derive(Debug, Serialize, Deserialize)]
pub struct RecordView {
    pub record_id: String,
    pub dataset_id: String,
    pub name: String,
    pub position: usize,
    pub sampling_frequency: f64,
    pub duration: f64,
    pub n_samples: usize,
    pub lead_names: Vec<String>,
}

async fn record_info(
    caller: Caller,
    State(st): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<RecordView>, ApiError> {
    blocking(move || {
        let m = st.campaign.record_for_member(&caller.identity.user_id, &id)?;
        Ok(Json(RecordView {
            lead_names: m.lead_names(),
            record_id: m.record_id,
            dataset_id: m.dataset_id,
            name: m.name,
            position: m.position,
            sampling_frequency: m.sampling_frequency,
            duration: m.duration,
            n_samples: m.n_samples,
        }))
    })
    .await
}

#[derive(Debug, Deserialize)]
struct SegmentQuery {
    start: Option<f64>,
    end: Option<f64>,
    leads: Option<String>,
    max_buckets: Option<usize>,
}

async fn segment(
    caller: Caller,
    State(st): State<AppState>,
    Path(id): Path<String>,
    ApiQuery(q): ApiQuery<SegmentQuery>,
) -> Result<Json<SegmentResponse>, ApiError> {
    blocking(move || {
        let meta = st.campaign.record_for_member(&caller.identity.user_id, &id)?;
        let req = SegmentRequest {
            start: q.start,
            end: q.end,
            leads: q.leads.map(|s| {
                s.split(',')
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .map(str::to_string)
                    .collect()
            }),
            max_buckets: q.max_buckets,
        };
        Ok(Json(read_segment(&st.store, &meta, &req)?))
    })
    .await
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnalysisView {
    pub record_id: String,
    pub analyzed_lead: Option<String>,
    pub features: Option<RhythmFeatures>,
    pub suggestions: Vec<AutoSuggestion>,
}

async fn analysis(
    caller: Caller,
    State(st): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<AnalysisView>, ApiError> {
    blocking(move || {
        let m = st.campaign.record_for_member(&caller.identity.user_id, &id)?;
        Ok(Json(AnalysisView {
            record_id: m.record_id,
            analyzed_lead: m.analysis.analyzed_lead,
            features: m.analysis.features,
            suggestions: m.analysis.suggestions,
        }))
    })
    .await
}

// ---- annotations ----

#[derive(Debug, Deserialize)]
struct AnnotationBody {
    #[serde(default)]
    labels: BTreeSet<String>,
    #[serde(default)]
    comment: String,
    status: AnnotationStatus,
    expected_revision: Option<u32>,
}

impl AnnotationBody {
    fn draft(self) -> (Draft, Option<u32>) {
        (
            Draft {
                labels: self.labels,
                comment: self.comment,
                status: self.status,
            },
            self.expected_revision,
        )
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SubmitView {
    pub annotation: Annotation,
    pub complete: bool,
    pub next_record_id: Option<String>,
    pub next_position: usize,
}

async fn submit(
    caller: Caller,
    State(st): State<AppState>,
    Path(id): Path<String>,
    ApiJson(body): ApiJson<AnnotationBody>,
) -> Result<(StatusCode, Json<SubmitView>), ApiError> {
    let (draft, _) = body.draft();
    let s = blocking(move || Ok(st.campaign.submit(&caller.identity.user_id, &id, draft)?)).await?;
    Ok((
        StatusCode::CREATED,
        Json(SubmitView {
            complete: s.next.is_complete(),
            next_record_id: s.next.record_id().map(str::to_string),
            next_position: s.next.position(),
            annotation: s.annotation,
        }),
    ))
}

#[derive(Debug, Deserialize)]
struct MineQuery {
    dataset: String,
    offset: Option<usize>,
    limit: Option<usize>,
}

async fn my_annotations(
    caller: Caller,
    State(st): State<AppState>,
    ApiQuery(q): ApiQuery<MineQuery>,
) -> Result<Json<Page<Annotation>>, ApiError> {
    let dataset = q.dataset.clone();
    let all = blocking(move || Ok(st.campaign.list_my_annotations(&caller.identity.user_id, &dataset)?)).await?;
    Ok(Json(paginate(all, q.offset, q.limit)?))
}

async fn revise(
    caller: Caller,
    State(st): State<AppState>,
    Path(id): Path<String>,
    ApiJson(body): ApiJson<AnnotationBody>,
) -> Result<Json<Annotation>, ApiError> {
    let (draft, expected) = body.draft();
    blocking(move || Ok(Json(st.campaign.revise(&caller.identity.user_id, &id, draft, expected)?))).await
}

#[derive(Debug, Deserialize)]
struct DecisionBody {
    action: ReviewAction,
    #[serde(default)]
    override_labels: BTreeSet<String>,
    #[serde(default)]
    comment: String,
}

async fn decide(
    caller: Caller,
    State(st): State<AppState>,
    Path(id): Path<String>,
    ApiJson(body): ApiJson<DecisionBody>,
) -> Result<(StatusCode, Json<ReviewDecision>), ApiError> {
    let d = blocking(move || {
        Ok(st.campaign.expert_decide(
            &caller.identity.user_id,
            &id,
            body.action,
            body.override_labels,
            &body.comment,
        )?)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(d)))
}
