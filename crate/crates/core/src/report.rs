//! Attribute frequency and annotator agreement tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dump::{DumpError, RegistryDump};
use crate::seek::{attribute_agreement, SeekCode, SeekError, SeekSchema, Slot, SlotAgreement};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotFrequency {
    pub slot: Slot,
    /// Canonical value text -> share of codes.
    pub fractions: BTreeMap<String, f64>,
    pub counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeekReport {
    pub codes: usize,
    pub frequencies: Vec<SlotFrequency>,
    /// Pairwise agreement within individuals; absent when no individual has
    /// two codes.
    pub agreement: Option<SlotAgreement>,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("dump holds no codes")]
    EmptyInput,
    #[error(transparent)]
    Dump(#[from] DumpError),
    #[error(transparent)]
    Seek(#[from] SeekError),
}

pub fn slot_frequencies(codes: &[SeekCode]) -> Vec<SlotFrequency> {
    Slot::ALL
        .into_iter()
        .map(|slot| {
            let mut counts: BTreeMap<String, usize> = BTreeMap::new();
            for c in codes {
                *counts.entry(c.get(slot).as_str().to_string()).or_default() += 1;
            }
            let fractions = counts
                .iter()
                .map(|(k, n)| (k.clone(), *n as f64 / codes.len() as f64))
                .collect();
            SlotFrequency {
                slot,
                fractions,
                counts,
            }
        })
        .collect()
}

pub fn seek_reports(dump: &RegistryDump, schema: &SeekSchema) -> Result<SeekReport, ReportError> {
    dump.check_schema(schema)?;
    let codes = dump.all_codes(schema)?;
    if codes.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    let mut groups = Vec::new();
    for ind in &dump.individuals {
        let mut group = Vec::new();
        for s in &ind.sightings {
            if let Some(code) = s.code(schema)? {
                group.push(code);
            }
        }
        if group.len() >= 2 {
            groups.push(group);
        }
    }
    let agreement = if groups.is_empty() {
        None
    } else {
        Some(attribute_agreement(&groups)?)
    };
    Ok(SeekReport {
        codes: codes.len(),
        frequencies: slot_frequencies(&codes),
        agreement,
    })
}
