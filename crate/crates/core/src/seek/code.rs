use std::fmt;

use super::schema::{SeekSchema, Slot};
use super::SeekError;

pub const WILDCARD: &str = "*";

/// Value held by one slot of a code.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SlotValue {
    Wildcard,
    /// Canonical symbol text. Ear slots holding several features store the
    /// sorted, de-duplicated feature list joined with `+`.
    Symbol(String),
}

impl SlotValue {
    pub fn is_wildcard(&self) -> bool {
        matches!(self, SlotValue::Wildcard)
    }

    pub fn as_str(&self) -> &str {
        match self {
            SlotValue::Wildcard => WILDCARD,
            SlotValue::Symbol(s) => s,
        }
    }
}

/// A slot paired with its value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SeekAttribute {
    pub slot: Slot,
    pub value: SlotValue,
}

/// A complete attribute code: one value per slot, tied to the schema
/// version it was parsed under.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SeekCode {
    schema_version: u32,
    values: [SlotValue; Slot::COUNT],
}

impl SeekCode {
    pub fn schema_version(&self) -> u32 {
        self.schema_version
    }

    pub fn get(&self, slot: Slot) -> &SlotValue {
        &self.values[slot.index()]
    }

    pub fn values(&self) -> &[SlotValue; Slot::COUNT] {
        &self.values
    }

    pub fn attributes(&self) -> impl Iterator<Item = SeekAttribute> + '_ {
        Slot::ALL.into_iter().map(|slot| SeekAttribute {
            slot,
            value: self.get(slot).clone(),
        })
    }

    pub fn all_wildcard(schema: &SeekSchema) -> SeekCode {
        SeekCode {
            schema_version: schema.version,
            values: std::array::from_fn(|_| SlotValue::Wildcard),
        }
    }

    /// Returns a copy with one slot replaced. The value is validated against
    /// `schema`.
    pub fn with(&self, schema: &SeekSchema, slot: Slot, value: &str) -> Result<SeekCode, SeekError> {
        if schema.version != self.schema_version {
            return Err(SeekError::SchemaMismatch {
                left: self.schema_version,
                right: schema.version,
            });
        }
        let mut out = self.clone();
        out.values[slot.index()] = parse_slot(schema, slot, value)?;
        Ok(out)
    }

    pub fn has_wildcard(&self) -> bool {
        self.values.iter().any(SlotValue::is_wildcard)
    }
}

/// Canonical string form.
impl fmt::Display for SeekCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, value) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(":")?;
            }
            f.write_str(value.as_str())?;
        }
        Ok(())
    }
}

pub fn parse_code(schema: &SeekSchema, text: &str) -> Result<SeekCode, SeekError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(SeekError::MalformedCode("empty code".into()));
    }
    let segments: Vec<&str> = text.split(':').collect();
    if segments.len() != Slot::COUNT {
        return Err(SeekError::MalformedCode(format!(
            "expected {} segments, found {}",
            Slot::COUNT,
            segments.len()
        )));
    }
    let mut values: [SlotValue; Slot::COUNT] = std::array::from_fn(|_| SlotValue::Wildcard);
    for (slot, segment) in Slot::ALL.into_iter().zip(segments) {
        values[slot.index()] = parse_slot(schema, slot, segment)?;
    }
    Ok(SeekCode {
        schema_version: schema.version,
        values,
    })
}

pub fn format_code(code: &SeekCode) -> String {
    code.to_string()
}

fn parse_slot(schema: &SeekSchema, slot: Slot, segment: &str) -> Result<SlotValue, SeekError> {
    let segment = segment.trim();
    if segment == WILDCARD {
        return Ok(SlotValue::Wildcard);
    }
    if segment.is_empty() {
        return Err(SeekError::MalformedCode(format!("slot {slot} is empty")));
    }
    let alphabet = schema.alphabet(slot);
    if !alphabet.multi {
        return if alphabet.contains(segment) {
            Ok(SlotValue::Symbol(segment.to_string()))
        } else {
            Err(SeekError::UnknownSymbol {
                slot,
                symbol: segment.to_string(),
            })
        };
    }

    let mut tokens: Vec<&str> = segment.split('+').map(str::trim).collect();
    for token in &tokens {
        if token.is_empty() {
            return Err(SeekError::MalformedCode(format!(
                "slot {slot} has an empty feature in {segment:?}"
            )));
        }
        if !alphabet.contains(token) {
            return Err(SeekError::UnknownSymbol {
                slot,
                symbol: token.to_string(),
            });
        }
    }
    tokens.sort_unstable();
    tokens.dedup();
    if tokens.len() > 1 {
        if let Some(unmarked) = alphabet.unmarked.as_deref() {
            if tokens.contains(&unmarked) {
                return Err(SeekError::MalformedCode(format!(
                    "slot {slot} combines {unmarked} with features"
                )));
            }
        }
    }
    Ok(SlotValue::Symbol(tokens.join("+")))
}
