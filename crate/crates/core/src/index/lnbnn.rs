use std::collections::BTreeMap;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::{squared_distance, DescriptorIndex, IndexError, IndividualId, SidePolicy};
use crate::contour::{Descriptor, EarSide};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub entry: usize,
    pub sq_dist: f64,
}

fn before(a: &Neighbor, b: &Neighbor) -> bool {
    a.sq_dist
        .total_cmp(&b.sq_dist)
        .then(a.entry.cmp(&b.entry))
        .is_lt()
}

/// The `count` nearest entries passing `keep`, ordered by squared distance
/// and then by entry position.
pub fn nearest_neighbors(
    idx: &DescriptorIndex,
    query: &[f64],
    count: usize,
    keep: impl Fn(usize) -> bool,
) -> Vec<Neighbor> {
    nearest_neighbors_batch(idx, &[query], count, keep)
        .pop()
        .expect("one result per query")
}

/// Entries per tile; a tile of 32-dimensional vectors stays in cache while
/// a batch of queries is scanned against it.
const TILE: usize = 1024;
const QUERY_BATCH: usize = 64;

/// [`nearest_neighbors`] for several queries at once. Each query still sees
/// the entries in ascending order, so results are identical.
pub fn nearest_neighbors_batch(
    idx: &DescriptorIndex,
    queries: &[&[f64]],
    count: usize,
    keep: impl Fn(usize) -> bool,
) -> Vec<Vec<Neighbor>> {
    let mut best: Vec<Vec<Neighbor>> = vec![Vec::with_capacity(count + 1); queries.len()];
    if count == 0 {
        return best;
    }
    let kept: Vec<usize> = (0..idx.len()).filter(|&e| keep(e)).collect();
    for tile in kept.chunks(TILE) {
        for (query, best) in queries.iter().zip(best.iter_mut()) {
            for &entry in tile {
                let candidate = Neighbor {
                    entry,
                    sq_dist: squared_distance(query, idx.vector(entry)),
                };
                if best.len() == count && !before(&candidate, &best[count - 1]) {
                    continue;
                }
                let pos = best.partition_point(|n| before(n, &candidate));
                best.insert(pos, candidate);
                best.truncate(count);
            }
        }
    }
    best
}

/// LNBNN evidence per individual with all descriptors in one space.
///
/// For each query descriptor the `k + 1` nearest gallery descriptors are
/// found; every individual owning one of the first `k` gains the squared
/// distance to neighbour `k + 1` minus the squared distance to its own
/// nearest descriptor. Every indexed individual appears in the result,
/// with 0 when it never gained evidence.
pub fn lnbnn_score(
    query: &[Descriptor],
    idx: &DescriptorIndex,
    k: usize,
) -> Result<BTreeMap<IndividualId, f64>, IndexError> {
    lnbnn_score_with_policy(query, idx, k, SidePolicy::Merged)
}

pub fn lnbnn_score_with_policy(
    query: &[Descriptor],
    idx: &DescriptorIndex,
    k: usize,
    policy: SidePolicy,
) -> Result<BTreeMap<IndividualId, f64>, IndexError> {
    if k == 0 {
        return Err(IndexError::InvalidK);
    }
    if idx.len() <= k {
        return Err(IndexError::IndexTooSmall {
            entries: idx.len(),
            k,
        });
    }
    if let Some(d) = query.iter().find(|d| d.vector.len() != idx.dim()) {
        return Err(IndexError::DimensionMismatch {
            expected: idx.dim(),
            found: d.vector.len(),
        });
    }
    let mut scores: BTreeMap<IndividualId, f64> = idx
        .individuals()
        .into_iter()
        .map(|id| (id.clone(), 0.0))
        .collect();

    match policy {
        SidePolicy::Merged => accumulate(query, idx, k, None, &mut scores)?,
        SidePolicy::PerSide => {
            for side in [EarSide::Left, EarSide::Right] {
                let part: Vec<Descriptor> =
                    query.iter().filter(|d| d.side == side).cloned().collect();
                if part.is_empty() {
                    continue;
                }
                accumulate(&part, idx, k, Some(side), &mut scores)?;
            }
        }
    }
    Ok(scores)
}

fn accumulate(
    query: &[Descriptor],
    idx: &DescriptorIndex,
    k: usize,
    side: Option<EarSide>,
    scores: &mut BTreeMap<IndividualId, f64>,
) -> Result<(), IndexError> {
    let keep = |e: usize| side.is_none_or(|s| idx.entries()[e].side == s);
    if side.is_some() {
        let available = (0..idx.len()).filter(|&e| keep(e)).count();
        if available <= k {
            return Err(IndexError::IndexTooSmall {
                entries: available,
                k,
            });
        }
    }
    let per_batch = |batch: &[Descriptor]| -> Vec<(usize, f64)> {
        let vectors: Vec<&[f64]> = batch.iter().map(|d| d.vector.as_slice()).collect();
        let mut out: Vec<(usize, f64)> = Vec::new();
        for neighbors in nearest_neighbors_batch(idx, &vectors, k + 1, keep) {
            let bound = neighbors[k].sq_dist;
            let first = out.len();
            for n in &neighbors[..k] {
                let owner = &idx.entries()[n.entry].individual;
                if out[first..].iter().any(|(e, _)| &idx.entries()[*e].individual == owner) {
                    continue;
                }
                out.push((n.entry, bound - n.sq_dist));
            }
        }
        out
    };

    // Contributions are summed in query order whatever the batching.
    #[cfg(feature = "parallel")]
    let contributions: Vec<Vec<(usize, f64)>> = query.par_chunks(QUERY_BATCH).map(per_batch).collect();
    #[cfg(not(feature = "parallel"))]
    let contributions: Vec<Vec<(usize, f64)>> = query.chunks(QUERY_BATCH).map(per_batch).collect();

    for (entry, gain) in contributions.into_iter().flatten() {
        *scores
            .get_mut(&idx.entries()[entry].individual)
            .expect("indexed individual") += gain;
    }
    Ok(())
}
