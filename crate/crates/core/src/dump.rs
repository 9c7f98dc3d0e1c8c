//! Registry dump: the JSON archive shared by the registry export, the
//! synthetic population generator and the evaluation commands.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::contour::{Contour, EarSide, Point};
use crate::index::IndividualId;
use crate::seek::{parse_code, SeekCode, SeekError, SeekSchema};

pub const DUMP_FORMAT: &str = "earmark-dump";
pub const DUMP_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryDump {
    pub format: String,
    pub format_version: u32,
    pub schema_version: u32,
    pub individuals: Vec<DumpIndividual>,
    /// Sightings not yet assigned to an individual.
    #[serde(default)]
    pub unassigned: Vec<DumpSighting>,
    /// Full registry journal, when the dump came from a registry. Entries are
    /// opaque here; the registry replays them on import.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub journal: Vec<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpIndividual {
    pub id: IndividualId,
    pub name: String,
    pub sightings: Vec<DumpSighting>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpSighting {
    pub id: String,
    pub timestamp: DateTime<Utc>,
    #[serde(default)]
    pub seek: Option<String>,
    #[serde(default)]
    pub contours: Vec<DumpContour>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpContour {
    pub side: EarSide,
    /// Photo the contour was traced on, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub photo: Option<String>,
    pub points: Vec<Point>,
}

#[derive(Debug, thiserror::Error)]
pub enum DumpError {
    #[error("dump json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("not a registry dump (format {0:?})")]
    WrongFormat(String),
    #[error("unsupported dump version {0}")]
    UnsupportedVersion(u32),
    #[error("sighting {sighting}: {source}")]
    Code {
        sighting: String,
        #[source]
        source: SeekError,
    },
    #[error("dump uses schema version {dump}, active schema is {active}")]
    SchemaMismatch { dump: u32, active: u32 },
}

impl RegistryDump {
    pub fn new(schema_version: u32) -> RegistryDump {
        RegistryDump {
            format: DUMP_FORMAT.to_string(),
            format_version: DUMP_VERSION,
            schema_version,
            individuals: Vec::new(),
            unassigned: Vec::new(),
            journal: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<RegistryDump, DumpError> {
        let dump: RegistryDump = serde_json::from_str(text)?;
        if dump.format != DUMP_FORMAT {
            return Err(DumpError::WrongFormat(dump.format));
        }
        if dump.format_version != DUMP_VERSION {
            return Err(DumpError::UnsupportedVersion(dump.format_version));
        }
        Ok(dump)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dump serializes")
    }

    pub fn check_schema(&self, schema: &SeekSchema) -> Result<(), DumpError> {
        if self.schema_version == schema.version {
            Ok(())
        } else {
            Err(DumpError::SchemaMismatch {
                dump: self.schema_version,
                active: schema.version,
            })
        }
    }

    pub fn sighting_count(&self) -> usize {
        self.individuals.iter().map(|i| i.sightings.len()).sum::<usize>() + self.unassigned.len()
    }

    /// Every code in the dump, parsed.
    pub fn all_codes(&self, schema: &SeekSchema) -> Result<Vec<SeekCode>, DumpError> {
        let mut out = Vec::new();
        let all = self
            .individuals
            .iter()
            .flat_map(|i| &i.sightings)
            .chain(&self.unassigned);
        for s in all {
            if let Some(code) = s.code(schema)? {
                out.push(code);
            }
        }
        Ok(out)
    }
}

impl DumpSighting {
    pub fn code(&self, schema: &SeekSchema) -> Result<Option<SeekCode>, DumpError> {
        self.seek
            .as_deref()
            .map(|text| parse_code(schema, text))
            .transpose()
            .map_err(|source| DumpError::Code {
                sighting: self.id.clone(),
                source,
            })
    }

    pub fn contours(&self) -> Vec<Contour> {
        self.contours
            .iter()
            .map(|c| Contour::new(c.points.clone(), c.side, self.id.clone()))
            .collect()
    }
}
