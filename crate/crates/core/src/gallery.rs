//! Matching gallery of confirmed individuals, assembled from a registry dump.
//!
//! The service and the offline tools both go through [`GalleryBuild`], so a
//! query scored online and offline against the same dump sees the same
//! descriptors in the same order.

use crate::contour::{ContourEngine, ContourError, Descriptor};
use crate::dump::{DumpError, DumpSighting, RegistryDump};
use crate::index::{
    rank_query, DescriptorIndex, FusionConfig, Gallery, GalleryIndividual, IndexError, IndividualId, Query,
    RankError, RankedMatch,
};
use crate::par::par_map;
use crate::seek::{SeekSchema, SeekWeights};

#[derive(Debug, thiserror::Error)]
pub enum GalleryError {
    #[error(transparent)]
    Dump(#[from] DumpError),
    #[error("sighting {sighting}: {source}")]
    Contour {
        sighting: String,
        #[source]
        source: ContourError,
    },
    #[error("sighting {0} has no SEEK code")]
    NotCoded(String),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Rank(#[from] RankError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GalleryBuild {
    pub gallery: Gallery,
    /// Per individual, the descriptors of all its sightings in history order.
    pub descriptors: Vec<(IndividualId, Vec<Descriptor>)>,
}

impl GalleryBuild {
    /// Every individual of the dump, in dump order. Uncoded sightings add no
    /// code; sightings without contours add no descriptors.
    pub fn from_dump(
        dump: &RegistryDump,
        schema: &SeekSchema,
        engine: &ContourEngine,
    ) -> Result<GalleryBuild, GalleryError> {
        dump.check_schema(schema)?;
        let mut individuals = Vec::with_capacity(dump.individuals.len());
        for ind in &dump.individuals {
            let mut codes = Vec::new();
            for s in &ind.sightings {
                codes.extend(s.code(schema)?);
            }
            individuals.push(GalleryIndividual {
                id: ind.id.clone(),
                codes,
            });
        }
        let described = par_map(&dump.individuals, |ind| {
            let mut all = Vec::new();
            for s in &ind.sightings {
                all.extend(describe(s, engine)?);
            }
            Ok((ind.id.clone(), all))
        });
        Ok(GalleryBuild {
            gallery: Gallery { individuals },
            descriptors: described.into_iter().collect::<Result<_, GalleryError>>()?,
        })
    }

    pub fn descriptor_count(&self) -> usize {
        self.descriptors.iter().map(|(_, d)| d.len()).sum()
    }

    /// Index over the gallery descriptors, or `None` when nobody has any.
    pub fn index(&self, schema_version: u32, generation: u64) -> Result<Option<DescriptorIndex>, IndexError> {
        if self.descriptor_count() == 0 {
            return Ok(None);
        }
        DescriptorIndex::build_generation(&self.descriptors, schema_version, generation).map(Some)
    }
}

pub fn describe(s: &DumpSighting, engine: &ContourEngine) -> Result<Vec<Descriptor>, GalleryError> {
    engine.describe_all(&s.contours()).map_err(|source| GalleryError::Contour {
        sighting: s.id.clone(),
        source,
    })
}

/// Query for a coded sighting.
pub fn query_for(s: &DumpSighting, schema: &SeekSchema, engine: &ContourEngine) -> Result<Query, GalleryError> {
    let code = s.code(schema)?.ok_or_else(|| GalleryError::NotCoded(s.id.clone()))?;
    Ok(Query {
        code,
        descriptors: describe(s, engine)?,
    })
}

/// Ranks a sighting against a gallery and its index.
pub fn rank_sighting(
    s: &DumpSighting,
    gallery: &Gallery,
    index: Option<&DescriptorIndex>,
    schema: &SeekSchema,
    engine: &ContourEngine,
    weights: &SeekWeights,
    fusion: &FusionConfig,
) -> Result<Vec<RankedMatch>, GalleryError> {
    let query = query_for(s, schema, engine)?;
    Ok(rank_query(&query, gallery, index, weights, fusion)?)
}
