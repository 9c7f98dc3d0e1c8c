//! Exact descriptor index over confirmed individuals, LNBNN scoring, and
//! fusion of contour evidence with attribute-code distance.

mod fusion;
mod lnbnn;
pub mod snapshot;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::contour::{Descriptor, EarSide};

pub use fusion::{
    fuse, rank_candidates, rank_query, Candidate, FusionConfig, Gallery, GalleryIndividual, Query,
    RankError, RankedMatch, SidePolicy,
};
pub use lnbnn::{
    lnbnn_score, lnbnn_score_with_policy, nearest_neighbors, nearest_neighbors_batch, Neighbor,
};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndividualId(pub String);

impl IndividualId {
    pub fn new(id: impl Into<String>) -> IndividualId {
        IndividualId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for IndividualId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for IndividualId {
    fn from(s: &str) -> Self {
        IndividualId(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IndexError {
    #[error("gallery is empty")]
    EmptyGallery,
    #[error("index holds {entries} descriptors, need more than k = {k}")]
    IndexTooSmall { entries: usize, k: usize },
    #[error("descriptor dimension {found} does not match index dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("index snapshot: {0}")]
    Snapshot(String),
}

/// Labels of one indexed descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub individual: IndividualId,
    pub side: EarSide,
    pub scale: f64,
    pub span: (usize, usize),
}

/// Immutable exact-search store of gallery descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorIndex {
    generation: u64,
    schema_version: u32,
    dim: usize,
    entries: Vec<IndexEntry>,
    /// Row-major, `entries.len() * dim` values.
    vectors: Vec<f64>,
}

impl DescriptorIndex {
    /// Builds generation 1 from each individual's descriptors. Individuals
    /// are indexed in the order given; each one's descriptors keep their order.
    pub fn build(
        individuals: &[(IndividualId, Vec<Descriptor>)],
        schema_version: u32,
    ) -> Result<DescriptorIndex, IndexError> {
        DescriptorIndex::build_generation(individuals, schema_version, 1)
    }

    /// Builds a new index one generation past `self`.
    pub fn rebuild(
        &self,
        individuals: &[(IndividualId, Vec<Descriptor>)],
    ) -> Result<DescriptorIndex, IndexError> {
        DescriptorIndex::build_generation(individuals, self.schema_version, self.generation + 1)
    }

    pub fn build_generation(
        individuals: &[(IndividualId, Vec<Descriptor>)],
        schema_version: u32,
        generation: u64,
    ) -> Result<DescriptorIndex, IndexError> {
        let dim = individuals
            .iter()
            .flat_map(|(_, ds)| ds.first())
            .map(|d| d.vector.len())
            .next()
            .ok_or(IndexError::EmptyGallery)?;
        let total: usize = individuals.iter().map(|(_, ds)| ds.len()).sum();
        let mut entries = Vec::with_capacity(total);
        let mut vectors = Vec::with_capacity(total * dim);
        for (id, descriptors) in individuals {
            for d in descriptors {
                if d.vector.len() != dim {
                    return Err(IndexError::DimensionMismatch {
                        expected: dim,
                        found: d.vector.len(),
                    });
                }
                entries.push(IndexEntry {
                    individual: id.clone(),
                    side: d.side,
                    scale: d.scale,
                    span: d.span,
                });
                vectors.extend_from_slice(&d.vector);
            }
        }
        Ok(DescriptorIndex::from_parts(generation, schema_version, dim, entries, vectors))
    }

    pub(crate) fn from_parts(
        generation: u64,
        schema_version: u32,
        dim: usize,
        entries: Vec<IndexEntry>,
        vectors: Vec<f64>,
    ) -> DescriptorIndex {
        debug_assert_eq!(entries.len() * dim, vectors.len());
        DescriptorIndex {
            generation,
            schema_version,
            dim,
            entries,
            vectors,
        }
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn schema_version(&self) -> u32 {
        self.schema_version
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn individuals(&self) -> BTreeSet<&IndividualId> {
        self.entries.iter().map(|e| &e.individual).collect()
    }
}

/// Squared Euclidean distance. Terms are accumulated in eight interleaved
/// lanes (component `i` into lane `i % 8`) that are then added pairwise,
/// `((l0 + l1) + (l2 + l3)) + ((l4 + l5) + (l6 + l7))`. Every search path
/// uses this exact order.
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut l = [0.0f64; LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        let x: &[f64; LANES] = x.try_into().expect("exact chunk");
        let y: &[f64; LANES] = y.try_into().expect("exact chunk");
        for i in 0..LANES {
            let d = x[i] - y[i];
            l[i] += d * d;
        }
    }
    for (i, (x, y)) in ra.iter().zip(rb).enumerate() {
        let d = x - y;
        l[i] += d * d;
    }
    ((l[0] + l[1]) + (l[2] + l[3])) + ((l[4] + l[5]) + (l[6] + l[7]))
}

const LANES: usize = 8;
