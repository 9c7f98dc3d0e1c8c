use serde::{Deserialize, Serialize};

use super::code::{SeekCode, SlotValue};
use super::schema::Slot;
use super::SeekError;

/// How the weighted per-slot differences are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide the weighted sum by the number of slots.
    #[default]
    SlotCount,
    /// Divide the weighted sum by the sum of the weights.
    TotalWeight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeekWeights {
    pub slot_weights: [f64; Slot::COUNT],
    /// Per-slot difference when either side is a wildcard.
    pub wildcard_penalty: f64,
    #[serde(default)]
    pub normalization: Normalization,
}

impl Default for SeekWeights {
    fn default() -> Self {
        let mut slot_weights = [1.0; Slot::COUNT];
        slot_weights[Slot::Age.index()] = 0.4;
        SeekWeights {
            slot_weights,
            wildcard_penalty: 0.6,
            normalization: Normalization::SlotCount,
        }
    }
}

impl SeekWeights {
    pub fn validate(&self) -> Result<(), SeekError> {
        if self.slot_weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(SeekError::InvalidWeights("slot weights must be finite and nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.wildcard_penalty) {
            return Err(SeekError::InvalidWeights("wildcard penalty must lie in [0, 1]"));
        }
        if self.normalization == Normalization::TotalWeight && self.total_weight() == 0.0 {
            return Err(SeekError::InvalidWeights("total weight is zero"));
        }
        Ok(())
    }

    pub fn total_weight(&self) -> f64 {
        self.slot_weights.iter().sum()
    }

    fn denominator(&self) -> f64 {
        match self.normalization {
            Normalization::SlotCount => Slot::COUNT as f64,
            Normalization::TotalWeight => self.total_weight(),
        }
    }

    /// Largest distance two codes can have under these weights.
    pub fn max_distance(&self) -> f64 {
        self.total_weight() / self.denominator()
    }
}

/// Unweighted difference of one slot: 0 for equal symbols, 1 for different
/// symbols, `wildcard_penalty` when either side is a wildcard.
pub fn slot_difference(a: &SlotValue, b: &SlotValue, wildcard_penalty: f64) -> f64 {
    match (a, b) {
        (SlotValue::Wildcard, _) | (_, SlotValue::Wildcard) => wildcard_penalty,
        (SlotValue::Symbol(x), SlotValue::Symbol(y)) if x == y => 0.0,
        _ => 1.0,
    }
}

pub fn seek_distance(a: &SeekCode, b: &SeekCode, weights: &SeekWeights) -> Result<f64, SeekError> {
    if a.schema_version() != b.schema_version() {
        return Err(SeekError::SchemaMismatch {
            left: a.schema_version(),
            right: b.schema_version(),
        });
    }
    let sum: f64 = Slot::ALL
        .into_iter()
        .map(|slot| {
            weights.slot_weights[slot.index()]
                * slot_difference(a.get(slot), b.get(slot), weights.wildcard_penalty)
        })
        .sum();
    Ok(sum / weights.denominator())
}

/// Per-slot fraction table, indexed by [`Slot::index`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotAgreement {
    pub per_slot: [f64; Slot::COUNT],
    /// Number of within-group pairs the fractions were computed over.
    pub pairs: usize,
}

impl SlotAgreement {
    pub fn get(&self, slot: Slot) -> f64 {
        self.per_slot[slot.index()]
    }
}

/// Fraction of within-group code pairs that agree on each slot. Pairs are
/// pooled over all groups. A wildcard agrees only with another wildcard.
pub fn attribute_agreement(groups: &[Vec<SeekCode>]) -> Result<SlotAgreement, SeekError> {
    if groups.is_empty() {
        return Err(SeekError::EmptyInput);
    }
    let mut agree = [0usize; Slot::COUNT];
    let mut pairs = 0usize;
    for group in groups {
        if group.len() < 2 {
            return Err(SeekError::GroupTooSmall(group.len()));
        }
        for (i, a) in group.iter().enumerate() {
            for b in &group[i + 1..] {
                if a.schema_version() != b.schema_version() {
                    return Err(SeekError::SchemaMismatch {
                        left: a.schema_version(),
                        right: b.schema_version(),
                    });
                }
                pairs += 1;
                for slot in Slot::ALL {
                    if a.get(slot) == b.get(slot) {
                        agree[slot.index()] += 1;
                    }
                }
            }
        }
    }
    Ok(SlotAgreement {
        per_slot: agree.map(|n| n as f64 / pairs as f64),
        pairs,
    })
}
