use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use earmark_core::contour::MIN_CONTOUR_POINTS;
use earmark_core::seek::{parse_code, SeekSchema};
use earmark_core::IndividualId;
use serde::Serialize;

use crate::event::{Event, JournalRecord};
use crate::model::{
    Asset, BoundingBox, GroupSighting, GroupStatus, Individual, IndividualSighting, Photo,
    SightingContour,
};
use crate::RegistryError;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
struct Counters {
    group: u64,
    photo: u64,
    bbox: u64,
    sighting: u64,
    individual: u64,
}

/// Everything the journal describes. Rebuilt from scratch by replay.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RegistryState {
    /// Sequence number of the last applied record.
    pub version: u64,
    /// Sequence number of the last record that changed the confirmed gallery.
    pub gallery_version: u64,
    pub groups: BTreeMap<String, GroupSighting>,
    pub photos: BTreeMap<String, Photo>,
    pub boxes: BTreeMap<String, BoundingBox>,
    pub sightings: BTreeMap<String, IndividualSighting>,
    pub individuals: BTreeMap<IndividualId, Individual>,
    /// External event id -> group sighting id.
    pub event_refs: BTreeMap<String, String>,
    counters: Counters,
}

fn peek(counter: u64, prefix: &str, taken: impl Fn(&str) -> bool) -> (u64, String) {
    let mut n = counter;
    loop {
        n += 1;
        let id = format!("{prefix}-{n:06}");
        if !taken(&id) {
            return (n, id);
        }
    }
}

fn not_found(kind: &'static str, id: &str) -> RegistryError {
    RegistryError::NotFound {
        kind,
        id: id.to_string(),
    }
}

impl RegistryState {
    pub fn is_empty(&self) -> bool {
        self.version == 0
    }

    pub fn group(&self, id: &str) -> Result<&GroupSighting, RegistryError> {
        self.groups.get(id).ok_or_else(|| not_found("group sighting", id))
    }

    pub fn photo(&self, id: &str) -> Result<&Photo, RegistryError> {
        self.photos.get(id).ok_or_else(|| not_found("photo", id))
    }

    pub fn sighting(&self, id: &str) -> Result<&IndividualSighting, RegistryError> {
        self.sightings.get(id).ok_or_else(|| not_found("individual sighting", id))
    }

    pub fn individual(&self, id: &IndividualId) -> Result<&Individual, RegistryError> {
        self.individuals
            .get(id)
            .ok_or_else(|| RegistryError::UnknownIndividual(id.to_string()))
    }

    /// Id the next newly created individual will get.
    pub fn next_individual_id(&self) -> IndividualId {
        let (_, id) = peek(self.counters.individual, "ind", |s| {
            self.individuals.contains_key(&IndividualId::from(s))
        });
        IndividualId(id)
    }

    /// Subgroup indices boxed anywhere in a group sighting.
    pub fn boxed_indices(&self, group: &GroupSighting) -> BTreeSet<u32> {
        group
            .photos
            .iter()
            .filter_map(|p| self.photos.get(p))
            .flat_map(|p| &p.boxes)
            .filter_map(|b| self.boxes.get(b))
            .map(|b| b.subgroup_index)
            .collect()
    }

    pub fn derived_indices(&self, group: &GroupSighting) -> BTreeSet<u32> {
        group
            .sightings
            .iter()
            .filter_map(|s| self.sightings.get(s))
            .filter_map(|s| s.subgroup_index)
            .collect()
    }

    /// Latest code among an individual's sightings, by sighting time.
    pub fn latest_code(&self, id: &IndividualId) -> Option<&str> {
        let ind = self.individuals.get(id)?;
        ind.sightings
            .iter()
            .rev()
            .filter_map(|s| self.sightings.get(s))
            .find_map(|s| s.seek.as_deref())
    }

    /// Validates an event against the current state without applying it.
    pub fn check(&self, event: &Event, schema: &SeekSchema) -> Result<(), RegistryError> {
        match event {
            Event::GroupSightingCreated {
                event_ref,
                location,
                ..
            } => {
                if event_ref.trim().is_empty() {
                    return Err(RegistryError::Validation("event reference is empty".into()));
                }
                if self.event_refs.contains_key(event_ref) {
                    return Err(RegistryError::DuplicateEvent(event_ref.clone()));
                }
                location.validate()
            }
            Event::PhotoAdded {
                group_sighting,
                content_hash,
                width,
                height,
                ..
            } => {
                let group = self.group(group_sighting)?;
                if group.status == GroupStatus::Resolved {
                    return Err(RegistryError::SightingResolved(group.id.clone()));
                }
                if content_hash.is_empty() {
                    return Err(RegistryError::Validation("photo content hash is empty".into()));
                }
                if *width == 0 || *height == 0 {
                    return Err(RegistryError::Validation("photo has zero size".into()));
                }
                let duplicate = group
                    .photos
                    .iter()
                    .filter_map(|p| self.photos.get(p))
                    .any(|p| &p.content_hash == content_hash);
                if duplicate {
                    return Err(RegistryError::DuplicatePhoto(content_hash.clone()));
                }
                Ok(())
            }
            Event::BoxesSet { photo, boxes } => {
                let photo = self.photo(photo)?;
                let group = self.group(&photo.group_sighting)?;
                if group.status == GroupStatus::Resolved {
                    return Err(RegistryError::SightingResolved(group.id.clone()));
                }
                let mut seen = BTreeSet::new();
                for b in boxes {
                    let r = b.rect;
                    let inside = u64::from(r.x) + u64::from(r.w) <= u64::from(photo.width)
                        && u64::from(r.y) + u64::from(r.h) <= u64::from(photo.height);
                    if r.w == 0 || r.h == 0 || !inside {
                        return Err(RegistryError::OutOfBounds {
                            photo: photo.id.clone(),
                            width: photo.width,
                            height: photo.height,
                        });
                    }
                    if b.subgroup_index == 0 {
                        return Err(RegistryError::Validation("subgroup index starts at 1".into()));
                    }
                    if !seen.insert(b.subgroup_index) {
                        return Err(RegistryError::Validation(format!(
                            "subgroup index {} boxed twice in one photo",
                            b.subgroup_index
                        )));
                    }
                }
                Ok(())
            }
            Event::SightingsDerived {
                group_sighting,
                subgroup_indices,
            } => {
                let group = self.group(group_sighting)?;
                match group.status {
                    GroupStatus::Open => return Err(RegistryError::NoBoxes(group.id.clone())),
                    GroupStatus::Resolved => {
                        return Err(RegistryError::SightingResolved(group.id.clone()))
                    }
                    GroupStatus::Annotated => {}
                }
                let boxed = self.boxed_indices(group);
                let derived = self.derived_indices(group);
                let unique: BTreeSet<&u32> = subgroup_indices.iter().collect();
                if subgroup_indices.is_empty() || unique.len() != subgroup_indices.len() {
                    return Err(RegistryError::Validation("invalid subgroup index list".into()));
                }
                for i in subgroup_indices {
                    if !boxed.contains(i) || derived.contains(i) {
                        return Err(RegistryError::Validation(format!(
                            "subgroup index {i} is not boxed or already derived"
                        )));
                    }
                }
                Ok(())
            }
            Event::SeekCoded { sighting, code } => {
                self.sighting(sighting)?;
                parse_code(schema, code)?;
                Ok(())
            }
            Event::ContoursSet { sighting, contours } => {
                self.sighting(sighting)?;
                self.check_contours(contours)
            }
            Event::Assigned {
                sighting,
                individual,
                new_individual,
            } => {
                let s = self.sighting(sighting)?;
                if s.seek.is_none() {
                    return Err(RegistryError::NotCoded(s.id.clone()));
                }
                if let Some(current) = &s.individual {
                    return Err(RegistryError::AlreadyAssigned {
                        sighting: s.id.clone(),
                        individual: current.to_string(),
                    });
                }
                self.check_target(s, individual, new_individual.is_some())
            }
            Event::Reassigned {
                sighting,
                from,
                to,
                new_individual,
                ..
            } => {
                let s = self.sighting(sighting)?;
                match &s.individual {
                    Some(current) if current == from => {}
                    Some(current) => {
                        return Err(RegistryError::Validation(format!(
                            "sighting {} belongs to {current}, not {from}",
                            s.id
                        )))
                    }
                    None => return Err(RegistryError::NotAssigned(s.id.clone())),
                }
                if from == to {
                    return Err(RegistryError::Validation("reassignment to the same individual".into()));
                }
                self.check_target(s, to, new_individual.is_some())
            }
            Event::SightingImported {
                id,
                seek,
                contours,
                individual,
                ..
            } => {
                if id.trim().is_empty() {
                    return Err(RegistryError::Validation("sighting id is empty".into()));
                }
                if self.sightings.contains_key(id) {
                    return Err(RegistryError::DuplicateSighting(id.clone()));
                }
                if let Some(code) = seek {
                    parse_code(schema, code)?;
                } else if individual.is_some() {
                    return Err(RegistryError::NotCoded(id.clone()));
                }
                self.check_contours(contours)
            }
        }
    }

    fn check_target(
        &self,
        sighting: &IndividualSighting,
        target: &IndividualId,
        create: bool,
    ) -> Result<(), RegistryError> {
        if create {
            if self.individuals.contains_key(target) {
                return Err(RegistryError::Validation(format!("individual {target} already exists")));
            }
            return Ok(());
        }
        let ind = self.individual(target)?;
        if let Some(group) = &sighting.group_sighting {
            let clash = ind
                .sightings
                .iter()
                .filter_map(|s| self.sightings.get(s))
                .any(|other| other.group_sighting.as_ref() == Some(group));
            if clash {
                return Err(RegistryError::SameGroup {
                    individual: target.to_string(),
                    group_sighting: group.clone(),
                });
            }
        }
        Ok(())
    }

    fn check_contours(&self, contours: &[SightingContour]) -> Result<(), RegistryError> {
        for c in contours {
            if let Some(source) = &c.source {
                if source.asset == Asset::Preview {
                    return Err(RegistryError::PreviewAsset(source.photo.clone()));
                }
                self.photo(&source.photo)?;
            }
            if c.points.len() < MIN_CONTOUR_POINTS {
                return Err(RegistryError::Validation(format!(
                    "contour has {} points, need at least {MIN_CONTOUR_POINTS}",
                    c.points.len()
                )));
            }
            if c.points.iter().flatten().any(|v| !v.is_finite()) {
                return Err(RegistryError::Validation("contour point is not finite".into()));
            }
        }
        Ok(())
    }

    /// Checks and applies one journal record.
    pub fn apply(&mut self, record: &JournalRecord, schema: &SeekSchema) -> Result<(), RegistryError> {
        if record.seq != self.version + 1 {
            return Err(RegistryError::CorruptJournal {
                seq: record.seq,
                reason: format!("expected sequence number {}", self.version + 1),
            });
        }
        self.check(&record.event, schema)?;
        let seq = record.seq;
        self.version = seq;
        match &record.event {
            Event::GroupSightingCreated {
                event_ref,
                timestamp,
                location,
                notes,
            } => {
                let (n, id) = peek(self.counters.group, "gs", |s| self.groups.contains_key(s));
                self.counters.group = n;
                self.event_refs.insert(event_ref.clone(), id.clone());
                self.groups.insert(
                    id.clone(),
                    GroupSighting {
                        id,
                        event_ref: event_ref.clone(),
                        timestamp: *timestamp,
                        location: *location,
                        notes: notes.clone(),
                        status: GroupStatus::Open,
                        photos: Vec::new(),
                        sightings: Vec::new(),
                        version: seq,
                    },
                );
            }
            Event::PhotoAdded {
                group_sighting,
                content_hash,
                file_name,
                width,
                height,
                preview,
            } => {
                let (n, id) = peek(self.counters.photo, "ph", |s| self.photos.contains_key(s));
                self.counters.photo = n;
                self.photos.insert(
                    id.clone(),
                    Photo {
                        id: id.clone(),
                        group_sighting: group_sighting.clone(),
                        content_hash: content_hash.clone(),
                        file_name: file_name.clone(),
                        width: *width,
                        height: *height,
                        preview: *preview,
                        boxes: Vec::new(),
                        version: seq,
                    },
                );
                let group = self.groups.get_mut(group_sighting).expect("checked");
                group.photos.push(id);
                group.version = seq;
            }
            Event::BoxesSet { photo, boxes } => {
                let old = std::mem::take(&mut self.photos.get_mut(photo).expect("checked").boxes);
                for b in &old {
                    self.boxes.remove(b);
                }
                let mut ids = Vec::with_capacity(boxes.len());
                for b in boxes {
                    let (n, id) = peek(self.counters.bbox, "bx", |s| self.boxes.contains_key(s));
                    self.counters.bbox = n;
                    self.boxes.insert(
                        id.clone(),
                        BoundingBox {
                            id: id.clone(),
                            photo: photo.clone(),
                            rect: b.rect,
                            subgroup_index: b.subgroup_index,
                        },
                    );
                    ids.push(id);
                }
                let p = self.photos.get_mut(photo).expect("checked");
                p.boxes = ids;
                p.version = seq;
                let group = p.group_sighting.clone();
                self.refresh_group(&group, seq);
            }
            Event::SightingsDerived {
                group_sighting,
                subgroup_indices,
            } => {
                let timestamp = self.groups[group_sighting].timestamp;
                for &index in subgroup_indices {
                    let (n, id) = peek(self.counters.sighting, "is", |s| self.sightings.contains_key(s));
                    self.counters.sighting = n;
                    self.sightings.insert(
                        id.clone(),
                        IndividualSighting {
                            id: id.clone(),
                            group_sighting: Some(group_sighting.clone()),
                            subgroup_index: Some(index),
                            timestamp,
                            seek: None,
                            contours: Vec::new(),
                            individual: None,
                            audit: vec![seq],
                            version: seq,
                        },
                    );
                    self.groups.get_mut(group_sighting).expect("checked").sightings.push(id);
                }
                self.refresh_group(group_sighting, seq);
            }
            Event::SeekCoded { sighting, code } => {
                let s = self.touch_sighting(sighting, seq);
                s.seek = Some(code.clone());
                if s.individual.is_some() {
                    self.gallery_version = seq;
                }
            }
            Event::ContoursSet { sighting, contours } => {
                let s = self.touch_sighting(sighting, seq);
                s.contours = contours.clone();
                if s.individual.is_some() {
                    self.gallery_version = seq;
                }
            }
            Event::Assigned {
                sighting,
                individual,
                new_individual,
            } => {
                if let Some(name) = new_individual {
                    self.create_individual(individual, name, seq);
                }
                self.touch_sighting(sighting, seq).individual = Some(individual.clone());
                self.attach(sighting, individual, seq);
                self.gallery_version = seq;
            }
            Event::Reassigned {
                sighting,
                from,
                to,
                new_individual,
                ..
            } => {
                if let Some(name) = new_individual {
                    self.create_individual(to, name, seq);
                }
                let old = self.individuals.get_mut(from).expect("checked");
                old.sightings.retain(|s| s != sighting);
                old.version = seq;
                self.touch_sighting(sighting, seq).individual = Some(to.clone());
                self.attach(sighting, to, seq);
                self.gallery_version = seq;
            }
            Event::SightingImported {
                id,
                timestamp,
                seek,
                contours,
                individual,
            } => {
                self.sightings.insert(
                    id.clone(),
                    IndividualSighting {
                        id: id.clone(),
                        group_sighting: None,
                        subgroup_index: None,
                        timestamp: *timestamp,
                        seek: seek.clone(),
                        contours: contours.clone(),
                        individual: individual.as_ref().map(|o| o.id.clone()),
                        audit: vec![seq],
                        version: seq,
                    },
                );
                if let Some(owner) = individual {
                    if !self.individuals.contains_key(&owner.id) {
                        self.create_individual(&owner.id, &owner.name, seq);
                    }
                    self.attach(id, &owner.id, seq);
                    self.gallery_version = seq;
                }
            }
        }
        Ok(())
    }

    fn touch_sighting(&mut self, id: &str, seq: u64) -> &mut IndividualSighting {
        let s = self.sightings.get_mut(id).expect("checked");
        s.audit.push(seq);
        s.version = seq;
        s
    }

    fn create_individual(&mut self, id: &IndividualId, name: &str, seq: u64) {
        // Keep the counter past generated-looking ids so later allocations
        // stay unique.
        if let Some(n) = id
            .as_str()
            .strip_prefix("ind-")
            .and_then(|d| d.parse::<u64>().ok())
        {
            self.counters.individual = self.counters.individual.max(n);
        }
        self.individuals.insert(
            id.clone(),
            Individual {
                id: id.clone(),
                name: name.to_string(),
                sightings: Vec::new(),
                version: seq,
            },
        );
    }

    fn attach(&mut self, sighting: &str, individual: &IndividualId, seq: u64) {
        let key = {
            let s = &self.sightings[sighting];
            (s.timestamp, s.id.clone())
        };
        let sightings = &self.sightings;
        let ind = self.individuals.get_mut(individual).expect("checked");
        let pos = ind
            .sightings
            .partition_point(|other| {
                let o = &sightings[other];
                (o.timestamp, o.id.clone()) < key
            });
        ind.sightings.insert(pos, sighting.to_string());
        ind.version = seq;
        if let Some(group) = self.sightings[sighting].group_sighting.clone() {
            self.refresh_group(&group, seq);
        }
    }

    fn refresh_group(&mut self, id: &str, seq: u64) {
        let group = &self.groups[id];
        let any_boxes = group
            .photos
            .iter()
            .any(|p| self.photos.get(p).is_some_and(|p| !p.boxes.is_empty()));
        let resolved = !group.sightings.is_empty()
            && group
                .sightings
                .iter()
                .all(|s| self.sightings.get(s).is_some_and(|s| s.individual.is_some()));
        let status = if resolved {
            GroupStatus::Resolved
        } else if any_boxes {
            GroupStatus::Annotated
        } else {
            GroupStatus::Open
        };
        let group = self.groups.get_mut(id).expect("exists");
        group.status = status;
        group.version = seq;
    }

    /// Every referential-integrity violation in the state.
    pub fn integrity_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (ext, gid) in &self.event_refs {
            if self.groups.get(gid).is_none_or(|g| &g.event_ref != ext) {
                out.push(format!("event {ext} links missing group {gid}"));
            }
        }
        if self.event_refs.len() != self.groups.len() {
            out.push("event link count differs from group count".into());
        }
        for g in self.groups.values() {
            for p in &g.photos {
                if self.photos.get(p).is_none_or(|p| p.group_sighting != g.id) {
                    out.push(format!("group {} lists foreign photo {p}", g.id));
                }
            }
            for s in &g.sightings {
                if self.sightings.get(s).is_none_or(|s| s.group_sighting.as_ref() != Some(&g.id)) {
                    out.push(format!("group {} lists foreign sighting {s}", g.id));
                }
            }
            let derived: Vec<u32> = g
                .sightings
                .iter()
                .filter_map(|s| self.sightings.get(s)?.subgroup_index)
                .collect();
            if derived.iter().collect::<BTreeSet<_>>().len() != derived.len() {
                out.push(format!("group {} derived one subgroup twice", g.id));
            }
        }
        for p in self.photos.values() {
            if self.groups.get(&p.group_sighting).is_none_or(|g| !g.photos.contains(&p.id)) {
                out.push(format!("orphan photo {}", p.id));
            }
            for b in &p.boxes {
                if self.boxes.get(b).is_none_or(|b| b.photo != p.id) {
                    out.push(format!("photo {} lists foreign box {b}", p.id));
                }
            }
        }
        for b in self.boxes.values() {
            if self.photos.get(&b.photo).is_none_or(|p| !p.boxes.contains(&b.id)) {
                out.push(format!("orphan box {}", b.id));
            }
        }
        for s in self.sightings.values() {
            if let Some(g) = &s.group_sighting {
                if self.groups.get(g).is_none_or(|g| !g.sightings.contains(&s.id)) {
                    out.push(format!("orphan sighting {}", s.id));
                }
            }
            if let Some(i) = &s.individual {
                if self.individuals.get(i).is_none_or(|i| !i.sightings.contains(&s.id)) {
                    out.push(format!("sighting {} points at individual {i} which does not list it", s.id));
                }
            }
            for c in &s.contours {
                if let Some(src) = &c.source {
                    if !self.photos.contains_key(&src.photo) {
                        out.push(format!("sighting {} contour cites missing photo {}", s.id, src.photo));
                    }
                }
            }
        }
        for ind in self.individuals.values() {
            let mut prev: Option<(DateTime<Utc>, &str)> = None;
            for sid in &ind.sightings {
                let Some(s) = self.sightings.get(sid) else {
                    out.push(format!("individual {} lists missing sighting {sid}", ind.id));
                    continue;
                };
                if s.individual.as_ref() != Some(&ind.id) {
                    out.push(format!("individual {} lists sighting {sid} owned elsewhere", ind.id));
                }
                let key = (s.timestamp, s.id.as_str());
                if prev.is_some_and(|p| p >= key) {
                    out.push(format!("individual {} history out of order at {sid}", ind.id));
                }
                prev = Some(key);
            }
        }
        out
    }
}
