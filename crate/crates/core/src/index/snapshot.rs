//! Text snapshot of a descriptor index.
//!
//! ```text
//! earmark-index 1
//! generation <u64>
//! schema_version <u32>
//! dimension <usize>
//! entries <usize>
//! <individual-id> <L|R> <scale> <span-start> <span-end> <v1> ... <v_dimension>
//! ...
//! ```
//!
//! Reals use the shortest representation that reads back to the same bits,
//! so scores computed from a reloaded snapshot are identical.

use std::fmt::Write as _;

use super::{DescriptorIndex, IndexEntry, IndexError, IndividualId};
use crate::contour::io::parse_side;

pub const FORMAT_TAG: &str = "earmark-index";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_snapshot(idx: &DescriptorIndex) -> Result<String, IndexError> {
    let mut out = String::new();
    writeln!(out, "{FORMAT_TAG} {FORMAT_VERSION}").unwrap();
    writeln!(out, "generation {}", idx.generation()).unwrap();
    writeln!(out, "schema_version {}", idx.schema_version()).unwrap();
    writeln!(out, "dimension {}", idx.dim()).unwrap();
    writeln!(out, "entries {}", idx.len()).unwrap();
    for (i, e) in idx.entries().iter().enumerate() {
        let id = e.individual.as_str();
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(IndexError::Snapshot(format!("individual id {id:?} cannot be written")));
        }
        write!(out, "{id} {} {} {} {}", e.side.code(), e.scale, e.span.0, e.span.1).unwrap();
        for v in idx.vector(i) {
            write!(out, " {v}").unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn read_snapshot(text: &str) -> Result<DescriptorIndex, IndexError> {
    let bad = |msg: String| IndexError::Snapshot(msg);
    let mut lines = text.lines().map(str::trim_end).filter(|l| !l.is_empty());
    let mut header = |key: &str| -> Result<String, IndexError> {
        let line = lines.next().ok_or_else(|| bad(format!("missing {key} line")))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(bad(format!("expected {key}, found {line:?}")));
        }
        let value = parts.next().ok_or_else(|| bad(format!("{key} has no value")))?;
        Ok(value.to_string())
    };
    let version: u32 = header(FORMAT_TAG)?
        .parse()
        .map_err(|_| bad("bad format version".into()))?;
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported format version {version}")));
    }
    let num = |v: String, key: &str| -> Result<u64, IndexError> {
        v.parse().map_err(|_| bad(format!("bad {key} {v:?}")))
    };
    let generation = num(header("generation")?, "generation")?;
    let schema_version = num(header("schema_version")?, "schema_version")? as u32;
    let dim = num(header("dimension")?, "dimension")? as usize;
    let count = num(header("entries")?, "entries")? as usize;
    if dim == 0 {
        return Err(bad("dimension is zero".into()));
    }

    let mut entries = Vec::with_capacity(count);
    let mut vectors = Vec::with_capacity(count * dim);
    for line in lines {
        let n = entries.len() + 1;
        let mut parts = line.split_whitespace();
        let mut next = |what: &str| {
            parts
                .next()
                .ok_or_else(|| bad(format!("entry {n}: missing {what}")))
        };
        let individual = IndividualId::new(next("individual")?);
        let side_token = next("side")?;
        let side = parse_side(side_token).ok_or_else(|| bad(format!("entry {n}: bad side")))?;
        let real = |t: &str| t.parse::<f64>().map_err(|_| bad(format!("entry {n}: bad real {t:?}")));
        let int = |t: &str| t.parse::<usize>().map_err(|_| bad(format!("entry {n}: bad index {t:?}")));
        let scale = real(next("scale")?)?;
        let a = int(next("span start")?)?;
        let b = int(next("span end")?)?;
        for _ in 0..dim {
            vectors.push(real(next("vector component")?)?);
        }
        if parts.next().is_some() {
            return Err(bad(format!("entry {n}: too many values")));
        }
        entries.push(IndexEntry {
            individual,
            side,
            scale,
            span: (a, b),
        });
    }
    if entries.len() != count {
        return Err(bad(format!("header says {count} entries, found {}", entries.len())));
    }
    Ok(DescriptorIndex::from_parts(generation, schema_version, dim, entries, vectors))
}
