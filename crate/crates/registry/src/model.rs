use chrono::{DateTime, Utc};
use earmark_core::contour::{EarSide, Point};
use earmark_core::IndividualId;
use serde::{Deserialize, Serialize};

use crate::RegistryError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub latitude: f64,
    pub longitude: f64,
}

impl Location {
    pub fn new(latitude: f64, longitude: f64) -> Result<Location, RegistryError> {
        let loc = Location {
            latitude,
            longitude,
        };
        loc.validate()?;
        Ok(loc)
    }

    pub fn validate(&self) -> Result<(), RegistryError> {
        if !(-90.0..=90.0).contains(&self.latitude) {
            return Err(RegistryError::Validation(format!(
                "latitude {} outside [-90, 90]",
                self.latitude
            )));
        }
        if !(-180.0..=180.0).contains(&self.longitude) {
            return Err(RegistryError::Validation(format!(
                "longitude {} outside [-180, 180]",
                self.longitude
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupStatus {
    Open,
    Annotated,
    Resolved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSighting {
    pub id: String,
    pub event_ref: String,
    pub timestamp: DateTime<Utc>,
    pub location: Location,
    pub notes: String,
    pub status: GroupStatus,
    pub photos: Vec<String>,
    /// Individual sightings derived from the boxes, by subgroup index.
    pub sightings: Vec<String>,
    pub version: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreviewInfo {
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Photo {
    pub id: String,
    pub group_sighting: String,
    pub content_hash: String,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
    pub preview: Option<PreviewInfo>,
    pub boxes: Vec<String>,
    pub version: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub id: String,
    pub photo: String,
    pub rect: Rect,
    /// Number of the elephant within its group sighting, from 1.
    pub subgroup_index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Asset {
    Original,
    Preview,
}

/// The image a contour was traced on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetRef {
    pub photo: String,
    pub asset: Asset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SightingContour {
    pub side: EarSide,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<AssetRef>,
    pub points: Vec<Point>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SightingStatus {
    Derived,
    Coded,
    Assigned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualSighting {
    pub id: String,
    /// Absent for sightings imported from a dump.
    pub group_sighting: Option<String>,
    pub subgroup_index: Option<u32>,
    pub timestamp: DateTime<Utc>,
    pub seek: Option<String>,
    pub contours: Vec<SightingContour>,
    pub individual: Option<IndividualId>,
    /// Journal sequence numbers of every change to this sighting.
    pub audit: Vec<u64>,
    pub version: u64,
}

impl IndividualSighting {
    pub fn status(&self) -> SightingStatus {
        if self.individual.is_some() {
            SightingStatus::Assigned
        } else if self.seek.is_some() {
            SightingStatus::Coded
        } else {
            SightingStatus::Derived
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub id: IndividualId,
    pub name: String,
    /// Sighting ids ordered by (timestamp, id).
    pub sightings: Vec<String>,
    pub version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewGroupSighting {
    pub event_ref: String,
    pub timestamp: DateTime<Utc>,
    pub location: Option<Location>,
    #[serde(default)]
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewPhoto {
    pub content_hash: String,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
    pub preview: Option<PreviewInfo>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewBox {
    pub rect: Rect,
    pub subgroup_index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AssignTarget {
    Existing { individual: IndividualId },
    New { name: String },
}
