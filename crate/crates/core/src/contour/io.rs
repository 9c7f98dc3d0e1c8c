//! Whitespace-delimited contour text format.
//!
//! Each record is `<sighting-id> <L|R> <point-count>` followed by that many
//! `x y` pairs as decimal reals. Records may span lines; the writer puts one
//! record per line. CRLF line endings are accepted.

use std::fmt::Write as _;

use super::{Contour, ContourError, EarSide};

pub fn parse_side(token: &str) -> Option<EarSide> {
    match token {
        "L" | "l" | "left" | "Left" => Some(EarSide::Left),
        "R" | "r" | "right" | "Right" => Some(EarSide::Right),
        _ => None,
    }
}

pub fn read_contours(text: &str) -> Result<Vec<Contour>, ContourError> {
    let mut tokens = text.split_whitespace();
    let mut out = Vec::new();
    while let Some(id) = tokens.next() {
        let record = out.len() + 1;
        let err = |msg: String| ContourError::Parse(format!("record {record} ({id}): {msg}"));
        let side_token = tokens.next().ok_or_else(|| err("missing side".into()))?;
        let side = parse_side(side_token).ok_or_else(|| err(format!("bad side {side_token:?}")))?;
        let count_token = tokens.next().ok_or_else(|| err("missing point count".into()))?;
        let count: usize = count_token
            .parse()
            .map_err(|_| err(format!("bad point count {count_token:?}")))?;
        let mut points = Vec::with_capacity(count);
        for i in 0..count {
            let mut coord = || -> Result<f64, ContourError> {
                let t = tokens
                    .next()
                    .ok_or_else(|| err(format!("expected {count} points, found {i}")))?;
                let v: f64 = t.parse().map_err(|_| err(format!("bad coordinate {t:?}")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(err(format!("non-finite coordinate {t:?}")))
                }
            };
            let x = coord()?;
            let y = coord()?;
            points.push([x, y]);
        }
        out.push(Contour::new(points, side, id));
    }
    Ok(out)
}

pub fn write_contours(contours: &[Contour]) -> String {
    let mut out = String::new();
    for c in contours {
        write!(out, "{} {} {}", c.source, c.side.code(), c.points.len()).unwrap();
        for p in &c.points {
            write!(out, " {} {}", p[0], p[1]).unwrap();
        }
        out.push('\n');
    }
    out
}
