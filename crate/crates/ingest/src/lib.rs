//! Ingestion of group sighting events from an EarthRanger-style event feed.
//!
//! # Wire format
//!
//! ```text
//! GET {base_url}/api/v1/events?since=<RFC 3339 instant>&page=<n>&page_size=<m>
//! Authorization: Bearer <token>
//! ```
//!
//! `page` is 1-based (default 1), `page_size` defaults to 100 and must be in
//! 1..=500, `since` is optional. A `200` response body is
//!
//! ```json
//! {
//!   "count": 250,
//!   "page": 1,
//!   "page_size": 100,
//!   "next": "/api/v1/events?page=2&page_size=100",
//!   "results": [
//!     {
//!       "id": "evt-001",
//!       "event_type": "elephant_sighting",
//!       "time": "2024-03-01T07:45:00Z",
//!       "location": { "latitude": -1.5, "longitude": 35.1 },
//!       "reported_by": "ranger-4",
//!       "event_details": { "group_size": 12, "composition": "3 adult females, 2 calves" }
//!     }
//!   ]
//! }
//! ```
//!
//! `next` is `null` on the last page. `location` may be `null` and
//! `event_details` may be missing. Records of other `event_type`s are ignored
//! by the client; records that cannot be read are skipped and logged.

mod client;
mod config;
mod mock;
mod wire;

use chrono::{DateTime, Utc};
use earmark_registry::{Location, NewGroupSighting, Registry, RegistryError};
use serde::{Deserialize, Serialize};

pub use client::{FeedClient, FeedError, FetchOutcome, MAX_FUTURE_SKEW_SECS};
pub use config::{ConfigError, FeedConfig, ENV_FEED_TOKEN, ENV_FEED_URL};
pub use mock::{mock_server, MockFeed, RunningFeed};
pub use wire::{parse_record, EventPage, MalformedEvent, DEFAULT_PAGE_SIZE, MAX_PAGE_SIZE};

pub const EVENTS_PATH: &str = "/api/v1/events";
pub const ELEPHANT_SIGHTING: &str = "elephant_sighting";

/// One feed event, as read from the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestEvent {
    pub id: String,
    pub event_type: String,
    pub time: DateTime<Utc>,
    pub location: Option<Location>,
    pub reported_by: String,
    pub group_size: Option<u32>,
    pub composition: String,
}

impl IngestEvent {
    /// Registry request for the group sighting this event opens.
    pub fn new_group_sighting(&self) -> NewGroupSighting {
        let mut notes = Vec::new();
        if !self.reported_by.is_empty() {
            notes.push(format!("reported by {}", self.reported_by));
        }
        if let Some(n) = self.group_size {
            notes.push(format!("group size {n}"));
        }
        if !self.composition.is_empty() {
            notes.push(self.composition.clone());
        }
        NewGroupSighting {
            event_ref: self.id.clone(),
            timestamp: self.time,
            location: self.location,
            notes: notes.join("; "),
        }
    }

    /// Wire record for this event.
    pub fn to_wire(&self) -> serde_json::Value {
        serde_json::to_value(wire::WireEvent::from(self)).expect("wire events serialize")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestReport {
    /// Group sightings created, as (event id, group sighting id).
    pub created: Vec<(String, String)>,
    /// Events already linked to a group sighting.
    pub already_linked: Vec<String>,
    /// Events the registry refused, with the reason.
    pub rejected: Vec<(String, String)>,
}

/// Opens a group sighting for every event not yet linked. Running it again on
/// the same events creates nothing.
pub fn ingest_events(
    registry: &mut Registry,
    actor: &str,
    events: &[IngestEvent],
) -> Result<IngestReport, RegistryError> {
    let mut report = IngestReport::default();
    for event in events {
        match registry.create_group_sighting(actor, event.new_group_sighting()) {
            Ok(group) => report.created.push((event.id.clone(), group.id)),
            Err(RegistryError::DuplicateEvent(_)) => report.already_linked.push(event.id.clone()),
            Err(RegistryError::Validation(reason)) => {
                tracing::warn!(event = %event.id, %reason, "event rejected by registry");
                report.rejected.push((event.id.clone(), reason));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}
