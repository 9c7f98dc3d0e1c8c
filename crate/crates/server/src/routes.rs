use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, HeaderValue};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use earmark_core::gallery::rank_sighting;
use earmark_core::index::snapshot::write_snapshot;
use earmark_core::seek::{format_code, parse_code, SlotAlphabet, WILDCARD};
use earmark_core::{IndividualId, RegistryDump, SeekSchema, SeekWeights};
use earmark_ingest::{ingest_events, IngestEvent, IngestReport};
use earmark_registry::{
    AssignTarget, BoundingBox, GroupSighting, ImportSummary, Individual, IndividualSighting, JournalRecord,
    Location, NewBox, NewGroupSighting, Photo, Rect, RegistryError, SightingContour, SightingStatus,
};
use serde::{Deserialize, Serialize};

use crate::auth::ApiSession;
use crate::error::ApiError;
use crate::state::AppState;

type AppResult<T> = Result<Json<Envelope<T>>, ApiError>;
type Shared = State<Arc<AppState>>;

/// Every response body: the payload and the registry version it reflects.
#[derive(Debug, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub data: T,
    pub registry_version: u64,
}

fn reply<T>(data: T, registry_version: u64) -> AppResult<T> {
    Ok(Json(Envelope {
        data,
        registry_version,
    }))
}

/// Shown when there is nobody to match against.
pub const EMPTY_GALLERY_SIGNAL: &str = "gallery empty - create new individual";

pub fn router(state: Arc<AppState>) -> Router {
    let upload_limit = state.config.max_upload_bytes;
    let api = Router::new()
        .route("/health", get(health))
        .route("/schema", get(schema))
        .route("/seek/parse", post(parse_seek))
        .route("/events", get(list_events))
        .route("/events/ingest", post(ingest))
        .route("/group-sightings", get(list_groups).post(create_group))
        .route("/group-sightings/{id}", get(get_group))
        .route(
            "/group-sightings/{id}/photos",
            post(upload_photo).layer(DefaultBodyLimit::max(upload_limit)),
        )
        .route("/group-sightings/{id}/derive", post(derive))
        .route("/photos/{id}", get(get_photo))
        .route("/photos/{id}/preview", get(photo_preview))
        .route("/photos/{id}/original", get(photo_original))
        .route("/photos/{id}/boxes", put(put_boxes))
        .route("/sightings", get(list_sightings))
        .route("/sightings/{id}", get(get_sighting))
        .route("/sightings/{id}/seek", put(put_seek))
        .route("/sightings/{id}/contours", put(put_contours))
        .route("/sightings/{id}/matches", get(matches))
        .route("/sightings/{id}/assign", post(assign))
        .route("/sightings/{id}/reassign", post(reassign))
        .route("/sightings/{id}/audit", get(audit))
        .route("/individuals", get(list_individuals))
        .route("/individuals/{id}", get(get_individual))
        .route("/export", get(export))
        .route("/import", post(import).layer(DefaultBodyLimit::max(upload_limit)))
        .route("/index", get(index_info))
        .route("/index/snapshot", get(index_snapshot))
        .route("/index/rebuild", post(index_rebuild));
    Router::new().nest("/api/v1", api).with_state(state)
}

// ---- paging ----

#[derive(Debug, Deserialize)]
pub struct PageParams {
    pub page: Option<usize>,
    pub page_size: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Page<T> {
    pub items: Vec<T>,
    pub page: usize,
    pub page_size: usize,
    pub total: usize,
    pub next: Option<usize>,
}

fn paginate<T: Clone>(
    state: &AppState,
    params: &PageParams,
    items: impl ExactSizeIterator<Item = T>,
) -> Result<Page<T>, ApiError> {
    let page = params.page.unwrap_or(1);
    let page_size = params.page_size.unwrap_or(state.config.default_page_size);
    if page == 0 || page_size == 0 || page_size > state.config.max_page_size {
        return Err(ApiError::BadRequest(format!(
            "page must be positive and page_size in 1..={}",
            state.config.max_page_size
        )));
    }
    let total = items.len();
    let start = (page - 1).saturating_mul(page_size);
    let items: Vec<T> = items.skip(start).take(page_size).collect();
    let next = (start.saturating_add(page_size) < total).then_some(page + 1);
    Ok(Page {
        items,
        page,
        page_size,
        total,
        next,
    })
}

// ---- schema and codes ----

#[derive(Debug, Serialize, Deserialize)]
pub struct SchemaView {
    pub version: u32,
    pub wildcard: String,
    pub slots: Vec<SlotAlphabet>,
    pub weights: SeekWeights,
    /// The schema file itself.
    pub source: Option<String>,
}

async fn health(State(state): Shared) -> AppResult<&'static str> {
    let v = state.registry().version();
    reply("ok", v)
}

async fn schema(State(state): Shared, _s: ApiSession) -> AppResult<SchemaView> {
    let s: &SeekSchema = state.schema();
    let source = match &state.config.schema_path {
        Some(p) => std::fs::read_to_string(p).ok(),
        None => Some(SeekSchema::default_toml().to_string()),
    };
    let view = SchemaView {
        version: s.version,
        wildcard: WILDCARD.to_string(),
        slots: s.slots.clone(),
        weights: state.config.seek.clone(),
        source,
    };
    reply(view, state.registry().version())
}

#[derive(Debug, Deserialize)]
struct CodeBody {
    code: String,
    #[serde(default)]
    version: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ParsedCode {
    pub canonical: String,
    pub values: Vec<String>,
}

async fn parse_seek(
    State(state): Shared,
    _s: ApiSession,
    body: Result<Json<CodeBody>, JsonRejection>,
) -> AppResult<ParsedCode> {
    let Json(body) = body?;
    let code = parse_code(state.schema(), &body.code).map_err(RegistryError::from)?;
    let parsed = ParsedCode {
        canonical: format_code(&code),
        values: code.values().iter().map(|v| v.as_str().to_string()).collect(),
    };
    reply(parsed, state.registry().version())
}

// ---- feed ----

#[derive(Debug, Deserialize)]
struct SinceParams {
    since: Option<DateTime<Utc>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FeedEventView {
    pub event: IngestEvent,
    /// Group sighting already opened for the event.
    pub group_sighting: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FeedListing {
    pub events: Vec<FeedEventView>,
    pub skipped: usize,
}

async fn list_events(
    State(state): Shared,
    _s: ApiSession,
    params: Result<Query<SinceParams>, QueryRejection>,
) -> AppResult<FeedListing> {
    let Query(params) = params?;
    let out = state.feed()?.fetch(params.since).await?;
    let reg = state.registry();
    let events = out
        .events
        .into_iter()
        .map(|event| FeedEventView {
            group_sighting: reg.state().event_refs.get(&event.id).cloned(),
            event,
        })
        .collect();
    reply(
        FeedListing {
            events,
            skipped: out.skipped.len(),
        },
        reg.version(),
    )
}

#[derive(Debug, Default, Deserialize)]
struct IngestBody {
    since: Option<DateTime<Utc>>,
}

async fn ingest(
    State(state): Shared,
    session: ApiSession,
    body: Result<Json<IngestBody>, JsonRejection>,
) -> AppResult<IngestReport> {
    let Json(body) = body?;
    let events = state.feed()?.fetch_active_events(body.since).await?;
    let mut reg = state.registry();
    let report = ingest_events(&mut reg, &session.user, &events)?;
    reply(report, reg.version())
}

// ---- group sightings ----

#[derive(Debug, Deserialize)]
struct NewGroupBody {
    event_ref: String,
    timestamp: DateTime<Utc>,
    location: Option<Location>,
    #[serde(default)]
    notes: String,
}

async fn create_group(
    State(state): Shared,
    session: ApiSession,
    body: Result<Json<NewGroupBody>, JsonRejection>,
) -> AppResult<GroupSighting> {
    let Json(b) = body?;
    let mut reg = state.registry();
    let group = reg.create_group_sighting(
        &session.user,
        NewGroupSighting {
            event_ref: b.event_ref,
            timestamp: b.timestamp,
            location: b.location,
            notes: b.notes,
        },
    )?;
    reply(group, reg.version())
}

async fn list_groups(
    State(state): Shared,
    _s: ApiSession,
    params: Result<Query<PageParams>, QueryRejection>,
) -> AppResult<Page<GroupSighting>> {
    let Query(params) = params?;
    let reg = state.registry();
    let page = paginate(&state, &params, reg.state().groups.values().cloned())?;
    reply(page, reg.version())
}

async fn get_group(State(state): Shared, _s: ApiSession, Path(id): Path<String>) -> AppResult<GroupSighting> {
    let reg = state.registry();
    let group = reg.state().group(&id)?.clone();
    reply(group, reg.version())
}

async fn derive(
    State(state): Shared,
    session: ApiSession,
    Path(id): Path<String>,
) -> AppResult<Vec<SightingView>> {
    let mut reg = state.registry();
    let sightings = reg.derive_individual_sightings(&session.user, &id)?;
    reply(sightings.into_iter().map(SightingView::from).collect(), reg.version())
}

// ---- photos ----

#[derive(Debug, Serialize, Deserialize)]
pub struct PhotoView {
    #[serde(flatten)]
    pub photo: Photo,
    pub box_records: Vec<BoundingBox>,
    pub preview_url: String,
    pub original_url: String,
}

fn photo_view(reg: &earmark_registry::Registry, photo: Photo) -> PhotoView {
    let box_records = photo
        .boxes
        .iter()
        .filter_map(|b| reg.state().boxes.get(b).cloned())
        .collect();
    PhotoView {
        preview_url: format!("/api/v1/photos/{}/preview", photo.id),
        original_url: format!("/api/v1/photos/{}/original", photo.id),
        box_records,
        photo,
    }
}

async fn upload_photo(
    State(state): Shared,
    session: ApiSession,
    Path(group): Path<String>,
    multipart: Result<Multipart, axum::extract::multipart::MultipartRejection>,
) -> AppResult<PhotoView> {
    let mut multipart = multipart.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    state.registry().state().group(&group)?;
    let mut file: Option<(String, Bytes)> = None;
    while let Some(field) = multipart.next_field().await? {
        if field.name() == Some("file") {
            let name = field.file_name().unwrap_or("photo").to_string();
            file = Some((name, field.bytes().await?));
        }
    }
    let (name, bytes) = file.ok_or_else(|| ApiError::BadRequest("multipart field \"file\" is missing".into()))?;
    let photos = state.photos().clone();
    let stored = tokio::task::spawn_blocking(move || photos.store(&bytes))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    let mut reg = state.registry();
    let photo = reg.add_photo(&session.user, &group, stored.into_new_photo(name))?;
    let view = photo_view(&reg, photo);
    reply(view, reg.version())
}

async fn get_photo(State(state): Shared, _s: ApiSession, Path(id): Path<String>) -> AppResult<PhotoView> {
    let reg = state.registry();
    let photo = reg.state().photo(&id)?.clone();
    let view = photo_view(&reg, photo);
    reply(view, reg.version())
}

async fn photo_bytes(state: &AppState, id: &str, original: bool) -> Result<Response, ApiError> {
    let (hash, version) = {
        let reg = state.registry();
        (reg.state().photo(id)?.content_hash.clone(), reg.version())
    };
    let photos = state.photos().clone();
    let bytes = tokio::task::spawn_blocking(move || {
        if original {
            photos.read_original(&hash)
        } else {
            photos.read_preview(&hash)
        }
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    let mime = if original {
        image_mime(&bytes)
    } else {
        "image/jpeg"
    };
    let mut resp = bytes.into_response();
    let headers = resp.headers_mut();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static(mime));
    headers.insert("x-registry-version", HeaderValue::from(version));
    Ok(resp)
}

fn image_mime(bytes: &[u8]) -> &'static str {
    if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        "image/png"
    } else if bytes.starts_with(&[0xff, 0xd8]) {
        "image/jpeg"
    } else {
        "application/octet-stream"
    }
}

async fn photo_preview(State(state): Shared, _s: ApiSession, Path(id): Path<String>) -> Result<Response, ApiError> {
    photo_bytes(&state, &id, false).await
}

async fn photo_original(State(state): Shared, _s: ApiSession, Path(id): Path<String>) -> Result<Response, ApiError> {
    photo_bytes(&state, &id, true).await
}

#[derive(Debug, Deserialize)]
struct BoxInput {
    x: u32,
    y: u32,
    w: u32,
    h: u32,
    subgroup_index: u32,
}

#[derive(Debug, Deserialize)]
struct BoxesBody {
    version: Option<u64>,
    boxes: Vec<BoxInput>,
}

async fn put_boxes(
    State(state): Shared,
    session: ApiSession,
    Path(id): Path<String>,
    body: Result<Json<BoxesBody>, JsonRejection>,
) -> AppResult<PhotoView> {
    let Json(b) = body?;
    let boxes = b
        .boxes
        .into_iter()
        .map(|b| NewBox {
            rect: Rect {
                x: b.x,
                y: b.y,
                w: b.w,
                h: b.h,
            },
            subgroup_index: b.subgroup_index,
        })
        .collect();
    let mut reg = state.registry();
    let photo = reg.set_boxes(&session.user, &id, boxes, b.version)?;
    let view = photo_view(&reg, photo);
    reply(view, reg.version())
}

// ---- individual sightings ----

#[derive(Debug, Serialize, Deserialize)]
pub struct SightingView {
    #[serde(flatten)]
    pub sighting: IndividualSighting,
    pub status: SightingStatus,
}

impl From<IndividualSighting> for SightingView {
    fn from(sighting: IndividualSighting) -> Self {
        SightingView {
            status: sighting.status(),
            sighting,
        }
    }
}

async fn list_sightings(
    State(state): Shared,
    _s: ApiSession,
    params: Result<Query<PageParams>, QueryRejection>,
) -> AppResult<Page<SightingView>> {
    let Query(params) = params?;
    let reg = state.registry();
    let page = paginate(&state, &params, reg.state().sightings.values().cloned())?;
    let page = Page {
        items: page.items.into_iter().map(SightingView::from).collect(),
        page: page.page,
        page_size: page.page_size,
        total: page.total,
        next: page.next,
    };
    reply(page, reg.version())
}

async fn get_sighting(State(state): Shared, _s: ApiSession, Path(id): Path<String>) -> AppResult<SightingView> {
    let reg = state.registry();
    let s = reg.state().sighting(&id)?.clone();
    reply(s.into(), reg.version())
}

async fn put_seek(
    State(state): Shared,
    session: ApiSession,
    Path(id): Path<String>,
    body: Result<Json<CodeBody>, JsonRejection>,
) -> AppResult<SightingView> {
    let Json(b) = body?;
    let mut reg = state.registry();
    let s = reg.set_seek_code(&session.user, &id, &b.code, b.version)?;
    reply(s.into(), reg.version())
}

#[derive(Debug, Deserialize)]
struct ContoursBody {
    version: Option<u64>,
    contours: Vec<SightingContour>,
}

async fn put_contours(
    State(state): Shared,
    session: ApiSession,
    Path(id): Path<String>,
    body: Result<Json<ContoursBody>, JsonRejection>,
) -> AppResult<SightingView> {
    let Json(b) = body?;
    let mut reg = state.registry();
    let s = reg.set_contours(&session.user, &id, b.contours, b.version)?;
    reply(s.into(), reg.version())
}

#[derive(Debug, Deserialize)]
struct MatchParams {
    top_k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchView {
    pub rank: usize,
    pub individual: IndividualId,
    pub name: String,
    pub seek_distance: f64,
    pub contour_score: f64,
    pub fused_score: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MatchPage {
    pub sighting: String,
    /// Index generation the scores come from.
    pub generation: u64,
    pub gallery_size: usize,
    pub top_k: usize,
    pub gallery_empty: bool,
    pub message: Option<String>,
    pub matches: Vec<MatchView>,
}

async fn matches(
    State(state): Shared,
    _s: ApiSession,
    Path(id): Path<String>,
    params: Result<Query<MatchParams>, QueryRejection>,
) -> AppResult<MatchPage> {
    let Query(params) = params?;
    let top_k = params.top_k.unwrap_or(state.config.default_top_k);
    if top_k == 0 {
        return Err(ApiError::BadRequest("top_k must be positive".into()));
    }
    let (sighting, version) = {
        let reg = state.registry();
        (reg.sighting_dump(&id)?, reg.version())
    };
    if sighting.seek.is_none() {
        return Err(RegistryError::NotCoded(id).into());
    }
    let snap = state.match_snapshot().await?;
    let gallery_size = snap.build.gallery.individuals.len();
    if gallery_size == 0 {
        let page = MatchPage {
            sighting: id,
            generation: snap.generation,
            gallery_size,
            top_k,
            gallery_empty: true,
            message: Some(EMPTY_GALLERY_SIGNAL.into()),
            matches: Vec::new(),
        };
        return reply(page, version);
    }
    let job = {
        let snap = snap.clone();
        let state = state.clone();
        move || {
            rank_sighting(
                &sighting,
                &snap.build.gallery,
                snap.index.as_ref(),
                state.schema(),
                state.engine(),
                &state.config.seek,
                &state.config.fusion,
            )
        }
    };
    let ranked = tokio::task::spawn_blocking(job)
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    let names = {
        let reg = state.registry();
        ranked
            .iter()
            .take(top_k)
            .map(|m| reg.state().individuals.get(&m.individual).map(|i| i.name.clone()).unwrap_or_default())
            .collect::<Vec<_>>()
    };
    let matches = ranked
        .into_iter()
        .zip(names)
        .map(|(m, name)| MatchView {
            rank: m.rank,
            individual: m.individual,
            name,
            seek_distance: m.seek_distance,
            contour_score: m.contour_score,
            fused_score: m.fused_score,
        })
        .collect();
    let page = MatchPage {
        sighting: id,
        generation: snap.generation,
        gallery_size,
        top_k,
        gallery_empty: false,
        message: None,
        matches,
    };
    reply(page, version)
}

#[derive(Debug, Deserialize)]
struct AssignBody {
    target: AssignTarget,
    version: Option<u64>,
}

async fn assign(
    State(state): Shared,
    session: ApiSession,
    Path(id): Path<String>,
    body: Result<Json<AssignBody>, JsonRejection>,
) -> AppResult<Individual> {
    session.require(session.role.can_assign(), "assign sightings")?;
    let Json(b) = body?;
    let mut reg = state.registry();
    let ind = reg.assign(&session.user, &id, b.target, b.version)?;
    reply(ind, reg.version())
}

#[derive(Debug, Deserialize)]
struct ReassignBody {
    target: AssignTarget,
    reason: String,
    version: Option<u64>,
}

async fn reassign(
    State(state): Shared,
    session: ApiSession,
    Path(id): Path<String>,
    body: Result<Json<ReassignBody>, JsonRejection>,
) -> AppResult<Individual> {
    session.require(session.role.can_assign(), "reassign sightings")?;
    let Json(b) = body?;
    if b.reason.trim().is_empty() {
        return Err(ApiError::BadRequest("a reassignment needs a reason".into()));
    }
    let mut reg = state.registry();
    let ind = reg.reassign(&session.user, &id, b.target, &b.reason, b.version)?;
    reply(ind, reg.version())
}

async fn audit(State(state): Shared, _s: ApiSession, Path(id): Path<String>) -> AppResult<Vec<JournalRecord>> {
    let reg = state.registry();
    let trail = reg.audit_trail(&id)?.into_iter().cloned().collect();
    reply(trail, reg.version())
}

// ---- individuals ----

#[derive(Debug, Serialize, Deserialize)]
pub struct IndividualView {
    #[serde(flatten)]
    pub individual: Individual,
    pub latest_code: Option<String>,
}

fn individual_view(reg: &earmark_registry::Registry, ind: Individual) -> IndividualView {
    IndividualView {
        latest_code: reg.state().latest_code(&ind.id).map(str::to_string),
        individual: ind,
    }
}

async fn list_individuals(
    State(state): Shared,
    _s: ApiSession,
    params: Result<Query<PageParams>, QueryRejection>,
) -> AppResult<Page<IndividualView>> {
    let Query(params) = params?;
    let reg = state.registry();
    let page = paginate(&state, &params, reg.state().individuals.values().cloned())?;
    let page = Page {
        items: page.items.into_iter().map(|i| individual_view(&reg, i)).collect(),
        page: page.page,
        page_size: page.page_size,
        total: page.total,
        next: page.next,
    };
    reply(page, reg.version())
}

async fn get_individual(State(state): Shared, _s: ApiSession, Path(id): Path<String>) -> AppResult<IndividualView> {
    let reg = state.registry();
    let ind = reg.state().individual(&IndividualId::new(id))?.clone();
    let view = individual_view(&reg, ind);
    reply(view, reg.version())
}

// ---- dumps and index ----

#[derive(Debug, Deserialize)]
struct ExportParams {
    #[serde(default)]
    journal: bool,
}

async fn export(
    State(state): Shared,
    _s: ApiSession,
    params: Result<Query<ExportParams>, QueryRejection>,
) -> AppResult<RegistryDump> {
    let Query(params) = params?;
    let reg = state.registry();
    reply(reg.export_dump(params.journal), reg.version())
}

async fn import(
    State(state): Shared,
    session: ApiSession,
    body: Result<Json<RegistryDump>, JsonRejection>,
) -> AppResult<ImportSummary> {
    session.require(session.role.is_admin(), "import dumps")?;
    let Json(dump) = body?;
    let mut reg = state.registry();
    let summary = reg.import_dump(&session.user, &dump)?;
    reply(summary, reg.version())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct IndexInfo {
    pub generation: u64,
    pub gallery_version: u64,
    pub individuals: usize,
    pub descriptors: usize,
    pub dimension: Option<usize>,
}

fn index_info_of(snap: &crate::state::MatchSnapshot) -> IndexInfo {
    IndexInfo {
        generation: snap.generation,
        gallery_version: snap.gallery_version,
        individuals: snap.build.gallery.individuals.len(),
        descriptors: snap.index.as_ref().map_or(0, |i| i.len()),
        dimension: snap.index.as_ref().map(|i| i.dim()),
    }
}

async fn index_info(State(state): Shared, _s: ApiSession) -> AppResult<IndexInfo> {
    let snap = state.match_snapshot().await?;
    reply(index_info_of(&snap), state.registry().version())
}

async fn index_snapshot(State(state): Shared, _s: ApiSession) -> Result<Response, ApiError> {
    let snap = state.match_snapshot().await?;
    let index = snap
        .index
        .as_ref()
        .ok_or_else(|| ApiError::NotFound("descriptor index (no gallery contours yet)".into()))?;
    let text = write_snapshot(index).map_err(|e| ApiError::Internal(e.to_string()))?;
    let version = state.registry().version();
    let mut resp = text.into_response();
    let headers = resp.headers_mut();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("text/plain; charset=utf-8"));
    headers.insert("x-registry-version", HeaderValue::from(version));
    headers.insert("x-index-generation", HeaderValue::from(snap.generation));
    Ok(resp)
}

async fn index_rebuild(State(state): Shared, session: ApiSession) -> AppResult<IndexInfo> {
    session.require(session.role.is_admin(), "rebuild the index")?;
    let snap = state.rebuild_snapshot(true).await?;
    reply(index_info_of(&snap), state.registry().version())
}
