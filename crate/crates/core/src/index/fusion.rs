use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{lnbnn_score_with_policy, DescriptorIndex, IndexError, IndividualId};
use crate::contour::Descriptor;
use crate::seek::{seek_distance, SeekCode, SeekError, SeekWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SidePolicy {
    /// Mirrored left ears share one descriptor space with right ears.
    #[default]
    Merged,
    /// Each side is scored against its own side only; scores are summed.
    PerSide,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub curv_coefficient: f64,
    pub lnbnn_k: usize,
    pub side_policy: SidePolicy,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            curv_coefficient: 0.1,
            lnbnn_k: 5,
            side_policy: SidePolicy::Merged,
        }
    }
}

/// Combined score, lower is better: the code distance minus the scaled
/// contour evidence.
pub fn fuse(seek_distance: f64, contour_score: f64, cfg: &FusionConfig) -> f64 {
    seek_distance - cfg.curv_coefficient * contour_score
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub individual: IndividualId,
    pub seek_distance: f64,
    pub contour_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedMatch {
    pub individual: IndividualId,
    pub seek_distance: f64,
    pub contour_score: f64,
    pub fused_score: f64,
    pub rank: usize,
}

/// Sorts candidates by fused score, ascending. Ties go to the larger
/// weighted contour term, then the smaller code distance, then the
/// lexicographically smaller id.
pub fn rank_candidates(
    candidates: Vec<Candidate>,
    cfg: &FusionConfig,
) -> Result<Vec<RankedMatch>, IndexError> {
    if candidates.is_empty() {
        return Err(IndexError::EmptyGallery);
    }
    let mut scored: Vec<(f64, f64, Candidate)> = candidates
        .into_iter()
        .map(|c| {
            let fused = fuse(c.seek_distance, c.contour_score, cfg);
            let weighted = cfg.curv_coefficient * c.contour_score;
            (fused, weighted, c)
        })
        .collect();
    scored.sort_by(|(fa, wa, a), (fb, wb, b)| {
        fa.total_cmp(fb)
            .then_with(|| wb.total_cmp(wa))
            .then_with(|| a.seek_distance.total_cmp(&b.seek_distance))
            .then_with(|| a.individual.cmp(&b.individual))
    });
    Ok(scored
        .into_iter()
        .enumerate()
        .map(|(i, (fused, _, c))| RankedMatch {
            individual: c.individual,
            seek_distance: c.seek_distance,
            contour_score: c.contour_score,
            fused_score: fused,
            rank: i + 1,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GalleryIndividual {
    pub id: IndividualId,
    /// Codes of the individual's confirmed sightings. The code distance to
    /// the individual is the smallest distance to any of them.
    pub codes: Vec<SeekCode>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Gallery {
    pub individuals: Vec<GalleryIndividual>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub code: SeekCode,
    pub descriptors: Vec<Descriptor>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RankError {
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Seek(#[from] SeekError),
}

/// Scores one query against every gallery individual.
///
/// Contour evidence is zero when the query has no descriptors, when there is
/// no index, or when the index is too small for the configured `k`.
pub fn rank_query(
    query: &Query,
    gallery: &Gallery,
    index: Option<&DescriptorIndex>,
    weights: &SeekWeights,
    cfg: &FusionConfig,
) -> Result<Vec<RankedMatch>, RankError> {
    if gallery.individuals.is_empty() {
        return Err(IndexError::EmptyGallery.into());
    }
    let contour = match index {
        Some(idx) if !query.descriptors.is_empty() => {
            match lnbnn_score_with_policy(&query.descriptors, idx, cfg.lnbnn_k, cfg.side_policy) {
                Ok(scores) => scores,
                Err(IndexError::IndexTooSmall { .. }) => Default::default(),
                Err(e) => return Err(e.into()),
            }
        }
        _ => Default::default(),
    };
    let mut candidates = Vec::with_capacity(gallery.individuals.len());
    for ind in &gallery.individuals {
        let mut best: Option<f64> = None;
        for code in &ind.codes {
            let d = seek_distance(&query.code, code, weights)?;
            best = Some(best.map_or(d, |b: f64| match d.total_cmp(&b) {
                Ordering::Less => d,
                _ => b,
            }));
        }
        candidates.push(Candidate {
            individual: ind.id.clone(),
            seek_distance: best.unwrap_or_else(|| weights.max_distance()),
            contour_score: contour.get(&ind.id).copied().unwrap_or(0.0),
        });
    }
    Ok(rank_candidates(candidates, cfg)?)
}
