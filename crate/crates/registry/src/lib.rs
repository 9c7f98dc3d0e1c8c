//! Registry of group sightings, photos, bounding boxes, individual sightings
//! and confirmed individuals.
//!
//! State is event sourced: each mutation appends one [`JournalRecord`] to an
//! append-only journal kept in a single SQLite file, and the in-memory
//! [`RegistryState`] is whatever replaying the journal produces. The journal
//! doubles as the audit log.

pub mod event;
mod journal;
pub mod model;
pub mod photos;
mod state;
mod store;

use earmark_core::dump::DumpError;
use earmark_core::seek::SeekError;

pub use event::{Event, ImportedOwner, JournalRecord};
pub use model::*;
pub use photos::{PhotoError, PhotoStore, StoredPhoto};
pub use state::RegistryState;
pub use store::{replay, Clock, ImportSummary, Registry};

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("event {0} is already linked to a group sighting")]
    DuplicateEvent(String),
    #[error("{0}")]
    Validation(String),
    #[error("{kind} {id} not found")]
    NotFound { kind: &'static str, id: String },
    #[error("unknown individual {0}")]
    UnknownIndividual(String),
    #[error("box outside photo {photo} ({width}x{height})")]
    OutOfBounds { photo: String, width: u32, height: u32 },
    #[error("group sighting {0} is resolved")]
    SightingResolved(String),
    #[error("group sighting {0} has no boxes")]
    NoBoxes(String),
    #[error("photo with hash {0} already uploaded to this group sighting")]
    DuplicatePhoto(String),
    #[error("sighting {0} already exists")]
    DuplicateSighting(String),
    #[error("sighting {0} has no SEEK code")]
    NotCoded(String),
    #[error("sighting {sighting} is already assigned to {individual}")]
    AlreadyAssigned { sighting: String, individual: String },
    #[error("sighting {0} is not assigned")]
    NotAssigned(String),
    #[error("individual {individual} already has a sighting in group {group_sighting}")]
    SameGroup {
        individual: String,
        group_sighting: String,
    },
    #[error("contours must be traced on originals, photo {0} was given as a preview")]
    PreviewAsset(String),
    #[error("{entity} changed: expected version {expected}, found {actual}")]
    VersionConflict {
        entity: String,
        expected: u64,
        actual: u64,
    },
    #[error(transparent)]
    Seek(#[from] SeekError),
    #[error(transparent)]
    Dump(#[from] DumpError),
    #[error("registry file uses schema version {stored}, active schema is {active}")]
    SchemaMismatch { stored: u32, active: u32 },
    #[error("journal record {seq}: {reason}")]
    CorruptJournal { seq: u64, reason: String },
    #[error("integrity violations: {0:?}")]
    Integrity(Vec<String>),
    #[error("storage: {0}")]
    Storage(String),
}
