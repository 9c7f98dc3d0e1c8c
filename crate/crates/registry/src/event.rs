use chrono::{DateTime, Utc};
use earmark_core::IndividualId;
use serde::{Deserialize, Serialize};

use crate::model::{Location, NewBox, PreviewInfo, SightingContour};

pub const JOURNAL_FORMAT: &str = "earmark-journal";
pub const JOURNAL_VERSION: u32 = 1;

/// One state change. Events carry everything needed to replay them; ids of
/// created entities are allocated deterministically during replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    GroupSightingCreated {
        event_ref: String,
        timestamp: DateTime<Utc>,
        location: Location,
        notes: String,
    },
    PhotoAdded {
        group_sighting: String,
        content_hash: String,
        file_name: String,
        width: u32,
        height: u32,
        preview: Option<PreviewInfo>,
    },
    /// Replaces every box of one photo.
    BoxesSet { photo: String, boxes: Vec<NewBox> },
    /// Creates one sighting per listed subgroup index.
    SightingsDerived {
        group_sighting: String,
        subgroup_indices: Vec<u32>,
    },
    SeekCoded { sighting: String, code: String },
    ContoursSet {
        sighting: String,
        contours: Vec<SightingContour>,
    },
    Assigned {
        sighting: String,
        individual: IndividualId,
        /// Display name when this decision creates the individual.
        new_individual: Option<String>,
    },
    Reassigned {
        sighting: String,
        from: IndividualId,
        to: IndividualId,
        new_individual: Option<String>,
        reason: String,
    },
    /// A sighting brought in from a dump without a journal.
    SightingImported {
        id: String,
        timestamp: DateTime<Utc>,
        seek: Option<String>,
        contours: Vec<SightingContour>,
        individual: Option<ImportedOwner>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportedOwner {
    pub id: IndividualId,
    pub name: String,
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::GroupSightingCreated { .. } => "group_sighting_created",
            Event::PhotoAdded { .. } => "photo_added",
            Event::BoxesSet { .. } => "boxes_set",
            Event::SightingsDerived { .. } => "sightings_derived",
            Event::SeekCoded { .. } => "seek_coded",
            Event::ContoursSet { .. } => "contours_set",
            Event::Assigned { .. } => "assigned",
            Event::Reassigned { .. } => "reassigned",
            Event::SightingImported { .. } => "sighting_imported",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalRecord {
    pub seq: u64,
    pub at: DateTime<Utc>,
    pub actor: String,
    pub event: Event,
}
