use serde::{Deserialize, Serialize};

use super::SeekError;

const DEFAULT_SCHEMA: &str = include_str!("../../schema/seek-v1.toml");

/// The eight attribute slots, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Sex,
    Age,
    Tusks,
    RightEarProminent,
    RightEarSecondary,
    LeftEarProminent,
    LeftEarSecondary,
    Extreme,
}

impl Slot {
    pub const COUNT: usize = 8;

    pub const ALL: [Slot; Slot::COUNT] = [
        Slot::Sex,
        Slot::Age,
        Slot::Tusks,
        Slot::RightEarProminent,
        Slot::RightEarSecondary,
        Slot::LeftEarProminent,
        Slot::LeftEarSecondary,
        Slot::Extreme,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Slot::Sex => "sex",
            Slot::Age => "age",
            Slot::Tusks => "tusks",
            Slot::RightEarProminent => "right_ear_prominent",
            Slot::RightEarSecondary => "right_ear_secondary",
            Slot::LeftEarProminent => "left_ear_prominent",
            Slot::LeftEarSecondary => "left_ear_secondary",
            Slot::Extreme => "extreme",
        }
    }

    pub fn is_ear(self) -> bool {
        matches!(
            self,
            Slot::RightEarProminent
                | Slot::RightEarSecondary
                | Slot::LeftEarProminent
                | Slot::LeftEarSecondary
        )
    }

    fn from_name(name: &str) -> Option<Slot> {
        Slot::ALL.into_iter().find(|s| s.name() == name)
    }
}

impl std::fmt::Display for Slot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Alphabet of one slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotAlphabet {
    pub slot: Slot,
    /// Closed list of symbols accepted in this slot (wildcard excluded).
    pub symbols: Vec<String>,
    /// Ear slots accept several feature symbols joined with `+`.
    pub multi: bool,
    /// Token meaning "no feature"; only meaningful for ear slots and never
    /// combined with other symbols.
    pub unmarked: Option<String>,
}

impl SlotAlphabet {
    pub fn contains(&self, symbol: &str) -> bool {
        self.symbols.iter().any(|s| s == symbol)
    }
}

/// Versioned attribute code schema. Every code is parsed against one schema
/// and remembers its version.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeekSchema {
    pub version: u32,
    pub slots: Vec<SlotAlphabet>,
}

#[derive(Deserialize)]
struct SchemaFile {
    version: u32,
    ear_vocabulary: Option<EarVocabulary>,
    slot: Vec<SlotEntry>,
}

#[derive(Deserialize)]
struct EarVocabulary {
    unmarked: String,
    feature_types: Vec<String>,
    positions: u32,
}

#[derive(Deserialize)]
struct SlotEntry {
    name: String,
    #[serde(default)]
    symbols: Vec<String>,
    #[serde(default)]
    ear: bool,
}

impl SeekSchema {
    /// The bundled version-1 schema.
    pub fn default_v1() -> SeekSchema {
        SeekSchema::from_toml(DEFAULT_SCHEMA).expect("bundled schema is valid")
    }

    pub fn default_toml() -> &'static str {
        DEFAULT_SCHEMA
    }

    pub fn from_toml(text: &str) -> Result<SeekSchema, SeekError> {
        let file: SchemaFile =
            toml::from_str(text).map_err(|e| SeekError::InvalidSchema(e.to_string()))?;
        if file.slot.len() != Slot::COUNT {
            return Err(SeekError::InvalidSchema(format!(
                "expected {} slots, found {}",
                Slot::COUNT,
                file.slot.len()
            )));
        }
        let mut slots = Vec::with_capacity(Slot::COUNT);
        for (expected, entry) in Slot::ALL.into_iter().zip(file.slot) {
            let slot = Slot::from_name(&entry.name)
                .ok_or_else(|| SeekError::InvalidSchema(format!("unknown slot {}", entry.name)))?;
            if slot != expected {
                return Err(SeekError::InvalidSchema(format!(
                    "slot {} out of order, expected {}",
                    entry.name, expected
                )));
            }
            if slot.is_ear() != entry.ear {
                return Err(SeekError::InvalidSchema(format!(
                    "slot {} must{} be an ear slot",
                    slot,
                    if slot.is_ear() { "" } else { " not" }
                )));
            }
            let alphabet = if entry.ear {
                let vocab = file.ear_vocabulary.as_ref().ok_or_else(|| {
                    SeekError::InvalidSchema("ear slot without [ear_vocabulary]".into())
                })?;
                let mut symbols = vec![vocab.unmarked.clone()];
                for ty in &vocab.feature_types {
                    for pos in 1..=vocab.positions {
                        symbols.push(format!("{ty}{pos}"));
                    }
                }
                SlotAlphabet {
                    slot,
                    symbols,
                    multi: true,
                    unmarked: Some(vocab.unmarked.clone()),
                }
            } else {
                SlotAlphabet {
                    slot,
                    symbols: entry.symbols,
                    multi: false,
                    unmarked: None,
                }
            };
            validate_alphabet(&alphabet)?;
            slots.push(alphabet);
        }
        Ok(SeekSchema {
            version: file.version,
            slots,
        })
    }

    pub fn alphabet(&self, slot: Slot) -> &SlotAlphabet {
        &self.slots[slot.index()]
    }
}

fn validate_alphabet(alphabet: &SlotAlphabet) -> Result<(), SeekError> {
    if alphabet.symbols.is_empty() {
        return Err(SeekError::InvalidSchema(format!(
            "slot {} has an empty alphabet",
            alphabet.slot
        )));
    }
    for (i, symbol) in alphabet.symbols.iter().enumerate() {
        let reserved = symbol.is_empty()
            || symbol == "*"
            || symbol.contains([':', '+'])
            || symbol.chars().any(char::is_whitespace);
        if reserved {
            return Err(SeekError::InvalidSchema(format!(
                "slot {} has reserved symbol {:?}",
                alphabet.slot, symbol
            )));
        }
        if alphabet.symbols[..i].contains(symbol) {
            return Err(SeekError::InvalidSchema(format!(
                "slot {} lists {symbol} twice",
                alphabet.slot
            )));
        }
    }
    Ok(())
}
