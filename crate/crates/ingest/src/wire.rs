use chrono::{DateTime, SecondsFormat, Utc};
use earmark_registry::Location;
use serde::{Deserialize, Serialize};

use crate::IngestEvent;

pub const DEFAULT_PAGE_SIZE: u32 = 100;
pub const MAX_PAGE_SIZE: u32 = 500;

/// One page of the event list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventPage {
    pub count: u64,
    pub page: u32,
    pub page_size: u32,
    pub next: Option<String>,
    /// Records are kept raw so one bad record does not sink the page.
    pub results: Vec<serde_json::Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct WireEvent {
    id: String,
    event_type: String,
    time: String,
    #[serde(default)]
    location: Option<WireLocation>,
    #[serde(default)]
    reported_by: String,
    #[serde(default)]
    event_details: WireDetails,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct WireLocation {
    latitude: f64,
    longitude: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct WireDetails {
    #[serde(default)]
    group_size: Option<u32>,
    #[serde(default)]
    composition: String,
}

impl From<&IngestEvent> for WireEvent {
    fn from(e: &IngestEvent) -> WireEvent {
        WireEvent {
            id: e.id.clone(),
            event_type: e.event_type.clone(),
            time: e.time.to_rfc3339_opts(SecondsFormat::AutoSi, true),
            location: e.location.map(|l| WireLocation {
                latitude: l.latitude,
                longitude: l.longitude,
            }),
            reported_by: e.reported_by.clone(),
            event_details: WireDetails {
                group_size: e.group_size,
                composition: e.composition.clone(),
            },
        }
    }
}

/// A record that could not be read.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MalformedEvent {
    pub id: Option<String>,
    pub reason: String,
}

pub fn parse_record(value: &serde_json::Value) -> Result<IngestEvent, MalformedEvent> {
    let id = value.get("id").and_then(|v| v.as_str()).map(str::to_string);
    let bad = |reason: String| MalformedEvent {
        id: id.clone(),
        reason,
    };
    let wire: WireEvent = serde_json::from_value(value.clone()).map_err(|e| bad(e.to_string()))?;
    if wire.id.is_empty() {
        return Err(bad("empty id".into()));
    }
    let time: DateTime<Utc> = DateTime::parse_from_rfc3339(&wire.time)
        .map_err(|e| bad(format!("time {:?}: {e}", wire.time)))?
        .with_timezone(&Utc);
    let location = match wire.location {
        Some(l) if l.latitude.is_finite() && l.longitude.is_finite() => Some(Location {
            latitude: l.latitude,
            longitude: l.longitude,
        }),
        Some(_) => return Err(bad("non-finite coordinates".into())),
        None => None,
    };
    Ok(IngestEvent {
        id: wire.id,
        event_type: wire.event_type,
        time,
        location,
        reported_by: wire.reported_by,
        group_size: wire.event_details.group_size,
        composition: wire.event_details.composition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn round_trips_through_wire() {
        let e = IngestEvent {
            id: "evt-1".into(),
            event_type: "elephant_sighting".into(),
            time: "2024-03-01T07:45:00Z".parse().unwrap(),
            location: Some(Location {
                latitude: -1.5,
                longitude: 35.1,
            }),
            reported_by: "ranger-4".into(),
            group_size: Some(12),
            composition: "3 adult females".into(),
        };
        let wire = e.to_wire();
        assert_eq!(wire["time"], "2024-03-01T07:45:00Z");
        assert_eq!(wire["event_details"]["group_size"], 12);
        assert_eq!(parse_record(&wire).unwrap(), e);
    }

    #[test]
    fn offsets_normalize_to_utc() {
        let v = json!({"id": "a", "event_type": "elephant_sighting", "time": "2024-03-01T10:45:00+03:00"});
        let e = parse_record(&v).unwrap();
        assert_eq!(e.time, "2024-03-01T07:45:00Z".parse::<DateTime<Utc>>().unwrap());
        assert_eq!(e.location, None);
        assert_eq!(e.group_size, None);
    }

    #[test]
    fn malformed_records_keep_their_id() {
        let v = json!({"id": "b", "event_type": "elephant_sighting", "time": "yesterday"});
        let err = parse_record(&v).unwrap_err();
        assert_eq!(err.id.as_deref(), Some("b"));
        assert!(parse_record(&json!("just a string")).unwrap_err().id.is_none());
        assert!(parse_record(&json!({"event_type": "x", "time": "2024-03-01T00:00:00Z"})).is_err());
    }
}
