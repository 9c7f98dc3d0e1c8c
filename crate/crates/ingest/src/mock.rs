use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use chrono::{DateTime, SecondsFormat, Utc};
use serde_json::json;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use crate::wire::{EventPage, DEFAULT_PAGE_SIZE, MAX_PAGE_SIZE};
use crate::EVENTS_PATH;

/// Fixture-backed event feed. Fixtures are served verbatim, including ones
/// the client will reject.
#[derive(Debug, Default)]
pub struct MockFeed {
    fixtures: Vec<serde_json::Value>,
    token: Option<String>,
    fail_next: AtomicU32,
    requests: AtomicU32,
}

impl MockFeed {
    pub fn new(fixtures: Vec<serde_json::Value>) -> MockFeed {
        MockFeed {
            fixtures,
            ..MockFeed::default()
        }
    }

    /// Requires `Authorization: Bearer <token>`.
    pub fn with_token(mut self, token: impl Into<String>) -> MockFeed {
        self.token = Some(token.into());
        self
    }

    /// The next `n` requests get `503 Service Unavailable`.
    pub fn fail_next(&self, n: u32) {
        self.fail_next.store(n, Ordering::SeqCst);
    }

    pub fn requests(&self) -> u32 {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn router(self: Arc<Self>) -> Router {
        Router::new().route(EVENTS_PATH, get(list_events)).with_state(self)
    }

    fn page(&self, since: Option<DateTime<Utc>>, page: u32, page_size: u32) -> EventPage {
        // Records whose time cannot be read are never filtered out.
        let visible: Vec<&serde_json::Value> = self
            .fixtures
            .iter()
            .filter(|v| match (since, fixture_time(v)) {
                (Some(s), Some(t)) => t > s,
                _ => true,
            })
            .collect();
        let start = (page as usize - 1).saturating_mul(page_size as usize);
        let results: Vec<serde_json::Value> = visible
            .iter()
            .skip(start)
            .take(page_size as usize)
            .map(|v| (*v).clone())
            .collect();
        let more = start.saturating_add(page_size as usize) < visible.len();
        let next = more.then(|| {
            let mut url = format!("{EVENTS_PATH}?page={}&page_size={page_size}", page + 1);
            if let Some(s) = since {
                url.push_str("&since=");
                url.push_str(&s.to_rfc3339_opts(SecondsFormat::AutoSi, true).replace('+', "%2B"));
            }
            url
        });
        EventPage {
            count: visible.len() as u64,
            page,
            page_size,
            next,
            results,
        }
    }
}

fn fixture_time(v: &serde_json::Value) -> Option<DateTime<Utc>> {
    let t = v.get("time")?.as_str()?;
    DateTime::parse_from_rfc3339(t).ok().map(|t| t.with_timezone(&Utc))
}

fn bad_request(detail: String) -> Response {
    (StatusCode::BAD_REQUEST, Json(json!({ "detail": detail }))).into_response()
}

async fn list_events(
    State(feed): State<Arc<MockFeed>>,
    headers: HeaderMap,
    Query(params): Query<HashMap<String, String>>,
) -> Response {
    feed.requests.fetch_add(1, Ordering::SeqCst);
    let failing = feed
        .fail_next
        .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
        .is_ok();
    if failing {
        return (StatusCode::SERVICE_UNAVAILABLE, "try again").into_response();
    }
    if let Some(token) = &feed.token {
        let expected = format!("Bearer {token}");
        let given = headers.get(header::AUTHORIZATION).and_then(|v| v.to_str().ok());
        if given != Some(expected.as_str()) {
            return (StatusCode::UNAUTHORIZED, Json(json!({ "detail": "invalid token" }))).into_response();
        }
    }
    let page = match params.get("page").map(|p| p.parse::<u32>()) {
        None => 1,
        Some(Ok(p)) if p >= 1 => p,
        Some(_) => return bad_request("page must be a positive integer".into()),
    };
    let page_size = match params.get("page_size").map(|p| p.parse::<u32>()) {
        None => DEFAULT_PAGE_SIZE,
        Some(Ok(p)) if (1..=MAX_PAGE_SIZE).contains(&p) => p,
        Some(_) => return bad_request(format!("page_size must be in 1..={MAX_PAGE_SIZE}")),
    };
    let since = match params.get("since") {
        None => None,
        Some(s) => match DateTime::parse_from_rfc3339(s) {
            Ok(t) => Some(t.with_timezone(&Utc)),
            Err(e) => return bad_request(format!("since: {e}")),
        },
    };
    Json(feed.page(since, page, page_size)).into_response()
}

/// A mock feed listening on a local port.
pub struct RunningFeed {
    pub addr: SocketAddr,
    pub feed: Arc<MockFeed>,
    shutdown: Option<oneshot::Sender<()>>,
    handle: JoinHandle<()>,
}

impl RunningFeed {
    pub async fn start(feed: MockFeed) -> std::io::Result<RunningFeed> {
        let listener = tokio::net::TcpListener::bind(("127.0.0.1", 0)).await?;
        let addr = listener.local_addr()?;
        let feed = Arc::new(feed);
        let app = feed.clone().router();
        let (tx, rx) = oneshot::channel();
        let handle = tokio::spawn(async move {
            let serve = axum::serve(listener, app).with_graceful_shutdown(async {
                let _ = rx.await;
            });
            if let Err(e) = serve.await {
                tracing::error!(error = %e, "mock feed stopped");
            }
        });
        Ok(RunningFeed {
            addr,
            feed,
            shutdown: Some(tx),
            handle,
        })
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub async fn stop(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        let _ = (&mut self.handle).await;
    }
}

impl Drop for RunningFeed {
    fn drop(&mut self) {
        self.handle.abort();
    }
}

/// Serves `fixtures` on a free local port.
pub async fn mock_server(fixtures: Vec<serde_json::Value>) -> std::io::Result<RunningFeed> {
    RunningFeed::start(MockFeed::new(fixtures)).await
}
