use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use earmark_core::dump::{DumpContour, DumpIndividual, DumpSighting, RegistryDump};
use earmark_core::seek::SeekSchema;
use earmark_core::IndividualId;

use crate::event::{Event, ImportedOwner, JournalRecord};
use crate::journal::SqliteJournal;
use crate::model::{
    Asset, AssetRef, AssignTarget, GroupSighting, Individual, IndividualSighting, NewBox,
    NewGroupSighting, NewPhoto, Photo, SightingContour,
};
use crate::state::RegistryState;
use crate::RegistryError;

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

/// The registry: current state, its journal, and optional file storage.
///
/// Every mutation validates against the current state, appends one journal
/// record (durably, when file-backed) and then applies it.
pub struct Registry {
    schema: SeekSchema,
    state: RegistryState,
    journal: Vec<JournalRecord>,
    storage: Option<SqliteJournal>,
    clock: Clock,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ImportSummary {
    pub individuals: usize,
    pub sightings: usize,
    pub replayed: bool,
}

impl Registry {
    pub fn in_memory(schema: SeekSchema) -> Registry {
        Registry {
            schema,
            state: RegistryState::default(),
            journal: Vec::new(),
            storage: None,
            clock: Arc::new(Utc::now),
        }
    }

    /// Opens or creates a registry file and replays its journal.
    pub fn open(path: impl AsRef<Path>, schema: SeekSchema) -> Result<Registry, RegistryError> {
        let storage = SqliteJournal::open(path.as_ref(), schema.version)?;
        let journal = storage.load()?;
        let state = replay(&schema, &journal)?;
        Ok(Registry {
            schema,
            state,
            journal,
            storage: Some(storage),
            clock: Arc::new(Utc::now),
        })
    }

    pub fn with_clock(mut self, clock: Clock) -> Registry {
        self.clock = clock;
        self
    }

    pub fn schema(&self) -> &SeekSchema {
        &self.schema
    }

    pub fn state(&self) -> &RegistryState {
        &self.state
    }

    pub fn journal(&self) -> &[JournalRecord] {
        &self.journal
    }

    pub fn version(&self) -> u64 {
        self.state.version
    }

    fn commit(&mut self, actor: &str, events: Vec<Event>) -> Result<u64, RegistryError> {
        // Validate the whole batch on a scratch copy so a failure leaves
        // nothing behind.
        let mut next = self.state.clone();
        let at = (self.clock)();
        let mut records = Vec::with_capacity(events.len());
        for event in events {
            let record = JournalRecord {
                seq: next.version + 1,
                at,
                actor: actor.to_string(),
                event,
            };
            next.apply(&record, &self.schema)?;
            records.push(record);
        }
        if let Some(storage) = self.storage.as_mut() {
            storage.append(&records)?;
        }
        self.journal.extend(records);
        self.state = next;
        Ok(self.state.version)
    }

    fn check_version(entity: &str, expected: Option<u64>, actual: u64) -> Result<(), RegistryError> {
        match expected {
            Some(e) if e != actual => Err(RegistryError::VersionConflict {
                entity: entity.to_string(),
                expected: e,
                actual,
            }),
            _ => Ok(()),
        }
    }

    pub fn create_group_sighting(
        &mut self,
        actor: &str,
        req: NewGroupSighting,
    ) -> Result<GroupSighting, RegistryError> {
        let location = req.location.ok_or_else(|| {
            RegistryError::Validation(format!("event {} has no coordinates", req.event_ref))
        })?;
        let event_ref = req.event_ref.clone();
        self.commit(
            actor,
            vec![Event::GroupSightingCreated {
                event_ref: req.event_ref,
                timestamp: req.timestamp,
                location,
                notes: req.notes,
            }],
        )?;
        let id = &self.state.event_refs[&event_ref];
        Ok(self.state.groups[id].clone())
    }

    pub fn add_photo(&mut self, actor: &str, group: &str, photo: NewPhoto) -> Result<Photo, RegistryError> {
        self.commit(
            actor,
            vec![Event::PhotoAdded {
                group_sighting: group.to_string(),
                content_hash: photo.content_hash,
                file_name: photo.file_name,
                width: photo.width,
                height: photo.height,
                preview: photo.preview,
            }],
        )?;
        let id = self.state.groups[group].photos.last().expect("just added");
        Ok(self.state.photos[id].clone())
    }

    /// Replaces the boxes of one photo.
    pub fn set_boxes(
        &mut self,
        actor: &str,
        photo: &str,
        boxes: Vec<NewBox>,
        expected_version: Option<u64>,
    ) -> Result<Photo, RegistryError> {
        let current = self.state.photo(photo)?;
        Self::check_version(photo, expected_version, current.version)?;
        self.commit(
            actor,
            vec![Event::BoxesSet {
                photo: photo.to_string(),
                boxes,
            }],
        )?;
        Ok(self.state.photos[photo].clone())
    }

    /// One sighting per distinct boxed subgroup index. Indices already
    /// derived keep their sighting, so repeating the call changes nothing.
    pub fn derive_individual_sightings(
        &mut self,
        actor: &str,
        group: &str,
    ) -> Result<Vec<IndividualSighting>, RegistryError> {
        let g = self.state.group(group)?;
        let boxed = self.state.boxed_indices(g);
        if boxed.is_empty() {
            return Err(RegistryError::NoBoxes(group.to_string()));
        }
        let derived = self.state.derived_indices(g);
        let fresh: Vec<u32> = boxed.difference(&derived).copied().collect();
        if !fresh.is_empty() {
            self.commit(
                actor,
                vec![Event::SightingsDerived {
                    group_sighting: group.to_string(),
                    subgroup_indices: fresh,
                }],
            )?;
        }
        let g = &self.state.groups[group];
        let mut out: Vec<IndividualSighting> = g
            .sightings
            .iter()
            .map(|s| self.state.sightings[s].clone())
            .collect();
        out.sort_by_key(|s| s.subgroup_index);
        Ok(out)
    }

    pub fn set_seek_code(
        &mut self,
        actor: &str,
        sighting: &str,
        code: &str,
        expected_version: Option<u64>,
    ) -> Result<IndividualSighting, RegistryError> {
        let current = self.state.sighting(sighting)?;
        Self::check_version(sighting, expected_version, current.version)?;
        let canonical = earmark_core::seek::parse_code(&self.schema, code)?.to_string();
        self.commit(
            actor,
            vec![Event::SeekCoded {
                sighting: sighting.to_string(),
                code: canonical,
            }],
        )?;
        Ok(self.state.sightings[sighting].clone())
    }

    pub fn set_contours(
        &mut self,
        actor: &str,
        sighting: &str,
        contours: Vec<SightingContour>,
        expected_version: Option<u64>,
    ) -> Result<IndividualSighting, RegistryError> {
        let current = self.state.sighting(sighting)?;
        Self::check_version(sighting, expected_version, current.version)?;
        self.commit(
            actor,
            vec![Event::ContoursSet {
                sighting: sighting.to_string(),
                contours,
            }],
        )?;
        Ok(self.state.sightings[sighting].clone())
    }

    /// Confirms a sighting as an existing individual or as a new one. New
    /// individuals appear only through this call, `reassign`, or import.
    pub fn assign(
        &mut self,
        actor: &str,
        sighting: &str,
        target: AssignTarget,
        expected_version: Option<u64>,
    ) -> Result<Individual, RegistryError> {
        let current = self.state.sighting(sighting)?;
        Self::check_version(sighting, expected_version, current.version)?;
        let (individual, new_individual) = self.resolve_target(target);
        self.commit(
            actor,
            vec![Event::Assigned {
                sighting: sighting.to_string(),
                individual: individual.clone(),
                new_individual,
            }],
        )?;
        Ok(self.state.individuals[&individual].clone())
    }

    /// Moves a confirmed sighting to another individual, recording why.
    pub fn reassign(
        &mut self,
        actor: &str,
        sighting: &str,
        target: AssignTarget,
        reason: &str,
        expected_version: Option<u64>,
    ) -> Result<Individual, RegistryError> {
        let current = self.state.sighting(sighting)?;
        Self::check_version(sighting, expected_version, current.version)?;
        let from = current
            .individual
            .clone()
            .ok_or_else(|| RegistryError::NotAssigned(sighting.to_string()))?;
        let (to, new_individual) = self.resolve_target(target);
        self.commit(
            actor,
            vec![Event::Reassigned {
                sighting: sighting.to_string(),
                from,
                to: to.clone(),
                new_individual,
                reason: reason.to_string(),
            }],
        )?;
        Ok(self.state.individuals[&to].clone())
    }

    fn resolve_target(&self, target: AssignTarget) -> (IndividualId, Option<String>) {
        match target {
            AssignTarget::Existing { individual } => (individual, None),
            AssignTarget::New { name } => (self.state.next_individual_id(), Some(name)),
        }
    }

    /// Journal records that touched one sighting, in order.
    pub fn audit_trail(&self, sighting: &str) -> Result<Vec<&JournalRecord>, RegistryError> {
        let s = self.state.sighting(sighting)?;
        Ok(s.audit
            .iter()
            .map(|&seq| &self.journal[(seq - 1) as usize])
            .collect())
    }

    pub fn check_integrity(&self) -> Result<(), RegistryError> {
        let violations = self.state.integrity_violations();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(RegistryError::Integrity(violations))
        }
    }

    /// Dump of every sighting, grouped by individual. Sightings appear in
    /// history order; unassigned ones follow in id order.
    pub fn export_dump(&self, include_journal: bool) -> RegistryDump {
        let mut dump = RegistryDump::new(self.schema.version);
        let sighting = |id: &String| dump_sighting(&self.state.sightings[id]);
        for ind in self.state.individuals.values() {
            dump.individuals.push(DumpIndividual {
                id: ind.id.clone(),
                name: ind.name.clone(),
                sightings: ind.sightings.iter().map(sighting).collect(),
            });
        }
        dump.unassigned = self
            .state
            .sightings
            .values()
            .filter(|s| s.individual.is_none())
            .map(dump_sighting)
            .collect();
        if include_journal {
            dump.journal = self
                .journal
                .iter()
                .map(|r| serde_json::to_value(r).expect("record serializes"))
                .collect();
        }
        dump
    }

    /// One sighting in dump form.
    pub fn sighting_dump(&self, id: &str) -> Result<DumpSighting, RegistryError> {
        self.state.sighting(id).map(dump_sighting)
    }

    /// Loads a dump. An empty registry replays a dump's journal when it has
    /// one, reproducing the exporting registry exactly; otherwise each
    /// sighting is imported as a journal record of its own.
    pub fn import_dump(&mut self, actor: &str, dump: &RegistryDump) -> Result<ImportSummary, RegistryError> {
        dump.check_schema(&self.schema)?;
        let summary = ImportSummary {
            individuals: dump.individuals.len(),
            sightings: dump.sighting_count(),
            replayed: false,
        };
        if self.state.is_empty() && !dump.journal.is_empty() {
            let records = dump
                .journal
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    serde_json::from_value::<JournalRecord>(v.clone()).map_err(|e| {
                        RegistryError::CorruptJournal {
                            seq: i as u64 + 1,
                            reason: e.to_string(),
                        }
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let state = replay(&self.schema, &records)?;
            let mut probe = Registry::in_memory(self.schema.clone());
            probe.state = state.clone();
            let mut expected = dump.clone();
            expected.journal.clear();
            if probe.export_dump(false) != expected {
                return Err(RegistryError::Validation(
                    "dump journal does not reproduce its own records".into(),
                ));
            }
            if let Some(storage) = self.storage.as_mut() {
                storage.append(&records)?;
            }
            self.journal = records;
            self.state = state;
            return Ok(ImportSummary {
                replayed: true,
                ..summary
            });
        }

        let mut events = Vec::with_capacity(dump.sighting_count());
        // Photo references only survive when the photo is held here.
        let photos = &self.state.photos;
        let imported = |s: &DumpSighting, owner: Option<ImportedOwner>| Event::SightingImported {
            id: s.id.clone(),
            timestamp: s.timestamp,
            seek: s.seek.clone(),
            contours: s
                .contours
                .iter()
                .map(|c| sighting_contour(c, |p| photos.contains_key(p)))
                .collect(),
            individual: owner,
        };
        for ind in &dump.individuals {
            for s in &ind.sightings {
                let owner = ImportedOwner {
                    id: ind.id.clone(),
                    name: ind.name.clone(),
                };
                events.push(imported(s, Some(owner)));
            }
        }
        for s in &dump.unassigned {
            events.push(imported(s, None));
        }
        self.commit(actor, events)?;
        Ok(summary)
    }
}

fn dump_sighting(s: &IndividualSighting) -> DumpSighting {
    DumpSighting {
        id: s.id.clone(),
        timestamp: s.timestamp,
        seek: s.seek.clone(),
        contours: s
            .contours
            .iter()
            .map(|c| DumpContour {
                side: c.side,
                photo: c.source.as_ref().map(|a| a.photo.clone()),
                points: c.points.clone(),
            })
            .collect(),
    }
}

fn sighting_contour(c: &DumpContour, known: impl Fn(&str) -> bool) -> SightingContour {
    SightingContour {
        side: c.side,
        source: c.photo.as_ref().filter(|p| known(p)).map(|p| AssetRef {
            photo: p.clone(),
            asset: Asset::Original,
        }),
        points: c.points.clone(),
    }
}

/// Rebuilds state from journal records.
pub fn replay(schema: &SeekSchema, records: &[JournalRecord]) -> Result<RegistryState, RegistryError> {
    let mut state = RegistryState::default();
    for r in records {
        state.apply(r, schema).map_err(|e| match e {
            RegistryError::CorruptJournal { .. } => e,
            other => RegistryError::CorruptJournal {
                seq: r.seq,
                reason: other.to_string(),
            },
        })?;
    }
    Ok(state)
}
