use std::collections::HashSet;
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, SecondsFormat, TimeDelta, Utc};
use reqwest::StatusCode;

use crate::config::FeedConfig;
use crate::wire::{parse_record, EventPage, MalformedEvent};
use crate::{IngestEvent, ELEPHANT_SIGHTING};

/// Events up to this far ahead of the local clock are kept (with a warning).
pub const MAX_FUTURE_SKEW_SECS: i64 = 300;

/// Upper bound on pages walked in one fetch.
const MAX_PAGES: u32 = 100_000;

#[derive(Debug, thiserror::Error)]
pub enum FeedError {
    #[error("event feed unreachable after {attempts} attempts: {last}")]
    Unreachable { attempts: u32, last: String },
    #[error("event feed refused the request ({status}): {body}")]
    Rejected { status: u16, body: String },
    #[error("event feed returned an unreadable page: {0}")]
    BadPage(String),
    #[error("feed client: {0}")]
    Client(String),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FetchOutcome {
    pub events: Vec<IngestEvent>,
    pub skipped: Vec<MalformedEvent>,
    /// Ids of kept events stamped ahead of the local clock.
    pub future: Vec<String>,
    pub pages: u32,
}

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

#[derive(Clone)]
pub struct FeedClient {
    http: reqwest::Client,
    config: FeedConfig,
    clock: Clock,
}

impl FeedClient {
    pub fn new(config: FeedConfig) -> Result<FeedClient, FeedError> {
        config.validate().map_err(|e| FeedError::Client(e.to_string()))?;
        let http = reqwest::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| FeedError::Client(e.to_string()))?;
        Ok(FeedClient {
            http,
            config,
            clock: Arc::new(Utc::now),
        })
    }

    pub fn with_clock(mut self, clock: Clock) -> FeedClient {
        self.clock = clock;
        self
    }

    pub fn config(&self) -> &FeedConfig {
        &self.config
    }

    /// Elephant sighting events newer than `since`, deduplicated by id.
    pub async fn fetch_active_events(&self, since: Option<DateTime<Utc>>) -> Result<Vec<IngestEvent>, FeedError> {
        Ok(self.fetch(since).await?.events)
    }

    /// Walks every page. The first record with a given id wins.
    pub async fn fetch(&self, since: Option<DateTime<Utc>>) -> Result<FetchOutcome, FeedError> {
        let now = (self.clock)();
        let horizon = now + TimeDelta::seconds(MAX_FUTURE_SKEW_SECS);
        let mut out = FetchOutcome::default();
        let mut seen = HashSet::new();
        let mut page = 1;
        loop {
            let body = self.get_page(since, page).await?;
            out.pages += 1;
            let done = body.next.is_none() || body.results.is_empty();
            for raw in &body.results {
                let event = match parse_record(raw) {
                    Ok(e) => e,
                    Err(m) => {
                        tracing::warn!(id = ?m.id, reason = %m.reason, "skipping malformed feed record");
                        out.skipped.push(m);
                        continue;
                    }
                };
                if event.event_type != ELEPHANT_SIGHTING {
                    continue;
                }
                if since.is_some_and(|s| event.time <= s) {
                    continue;
                }
                if event.time > horizon {
                    let m = MalformedEvent {
                        id: Some(event.id.clone()),
                        reason: format!("time {} is more than {MAX_FUTURE_SKEW_SECS}s ahead of {now}", event.time),
                    };
                    tracing::warn!(id = %event.id, reason = %m.reason, "skipping malformed feed record");
                    out.skipped.push(m);
                    continue;
                }
                if !seen.insert(event.id.clone()) {
                    continue;
                }
                if event.time > now {
                    tracing::warn!(id = %event.id, time = %event.time, "feed event is stamped in the future");
                    out.future.push(event.id.clone());
                }
                out.events.push(event);
            }
            if done || page >= MAX_PAGES {
                return Ok(out);
            }
            page += 1;
        }
    }

    async fn get_page(&self, since: Option<DateTime<Utc>>, page: u32) -> Result<EventPage, FeedError> {
        let mut query = vec![
            ("page", page.to_string()),
            ("page_size", self.config.page_size.to_string()),
        ];
        if let Some(s) = since {
            query.push(("since", s.to_rfc3339_opts(SecondsFormat::AutoSi, true)));
        }
        let url = self.config.events_url();
        let attempts = self.config.max_retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                tokio::time::sleep(self.backoff(attempt - 1)).await;
            }
            let mut req = self.http.get(&url).query(&query);
            if let Some(token) = &self.config.token {
                req = req.bearer_auth(token);
            }
            let resp = match req.send().await {
                Ok(r) => r,
                Err(e) => {
                    last = e.to_string();
                    tracing::debug!(attempt, error = %last, "feed request failed");
                    continue;
                }
            };
            let status = resp.status();
            if status.is_server_error() || status == StatusCode::TOO_MANY_REQUESTS {
                last = format!("status {status}");
                tracing::debug!(attempt, %status, "feed request failed");
                continue;
            }
            if !status.is_success() {
                let body = resp.text().await.unwrap_or_default();
                return Err(FeedError::Rejected {
                    status: status.as_u16(),
                    body,
                });
            }
            return match resp.bytes().await {
                Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| FeedError::BadPage(e.to_string())),
                Err(e) => {
                    last = e.to_string();
                    continue;
                }
            };
        }
        Err(FeedError::Unreachable { attempts, last })
    }

    fn backoff(&self, retry: u32) -> Duration {
        let ms = self
            .config
            .initial_backoff_ms
            .saturating_mul(1u64 << retry.min(32))
            .min(self.config.max_backoff_ms);
        Duration::from_millis(ms)
    }
}
