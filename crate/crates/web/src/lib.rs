//! Browser bindings for three core operations. Each takes and returns JSON
//! text so the page needs no generated type glue beyond strings and numbers.
//!
//! The `*_json` functions are plain Rust and are what the native tests
//! exercise; the exported wrappers only translate errors.

use earmark_core::contour::{integral_curvature, normalize_contour, CurveSide, Point};
use earmark_core::index::{rank_candidates, Candidate, FusionConfig};
use earmark_core::seek::{parse_code, seek_distance, slot_difference, Slot};
use earmark_core::{Contour, ContourConfig, EarSide, SeekSchema, SeekWeights};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct ProfileView {
    /// Resampled, unit-length contour for drawing.
    pub points: Vec<Point>,
    pub scales: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub interior: CurveSide,
}

#[derive(Debug, Serialize)]
pub struct SlotView {
    pub slot: &'static str,
    pub a: String,
    pub b: String,
    pub difference: f64,
    pub weight: f64,
}

#[derive(Debug, Serialize)]
pub struct DistanceView {
    pub distance: f64,
    pub slots: Vec<SlotView>,
}

/// `points` is `[[x, y], ...]`, `side` is "left" or "right".
pub fn curvature_profile_json(points: &str, side: &str) -> Result<String, String> {
    let points: Vec<Point> = serde_json::from_str(points).map_err(|e| format!("points: {e}"))?;
    let side = match side {
        "left" => EarSide::Left,
        "right" => EarSide::Right,
        other => return Err(format!("unknown ear side {other:?}")),
    };
    let cfg = ContourConfig::default();
    let norm = normalize_contour(&Contour::new(points, side, "demo"), cfg.resample_count)
        .map_err(|e| e.to_string())?;
    let profile = integral_curvature(&norm, &cfg.scales).map_err(|e| e.to_string())?;
    let view = ProfileView {
        points: norm.points,
        scales: profile.scales,
        values: profile.values,
        interior: profile.interior,
    };
    Ok(serde_json::to_string(&view).expect("serializable"))
}

/// Distance between two canonical codes under the bundled schema and the
/// default weights, with the per-slot breakdown.
pub fn seek_distance_json(a: &str, b: &str) -> Result<String, String> {
    let schema = SeekSchema::default_v1();
    let w = SeekWeights::default();
    let ca = parse_code(&schema, a.trim()).map_err(|e| format!("first code: {e}"))?;
    let cb = parse_code(&schema, b.trim()).map_err(|e| format!("second code: {e}"))?;
    let distance = seek_distance(&ca, &cb, &w).map_err(|e| e.to_string())?;
    let slots = Slot::ALL
        .iter()
        .map(|&s| SlotView {
            slot: s.name(),
            a: ca.get(s).as_str().to_string(),
            b: cb.get(s).as_str().to_string(),
            difference: slot_difference(ca.get(s), cb.get(s), w.wildcard_penalty),
            weight: w.slot_weights[s.index()],
        })
        .collect();
    Ok(serde_json::to_string(&DistanceView { distance, slots }).expect("serializable"))
}

/// `candidates` is `[{individual, seek_distance, contour_score}, ...]`;
/// returns the ranked list, best first.
pub fn fuse_and_rank_json(candidates: &str, curv_coefficient: f64) -> Result<String, String> {
    let candidates: Vec<Candidate> = serde_json::from_str(candidates).map_err(|e| format!("candidates: {e}"))?;
    if !curv_coefficient.is_finite() {
        return Err("coefficient must be finite".into());
    }
    let cfg = FusionConfig {
        curv_coefficient,
        ..FusionConfig::default()
    };
    let ranked = rank_candidates(candidates, &cfg).map_err(|e| e.to_string())?;
    Ok(serde_json::to_string(&ranked).expect("serializable"))
}

#[wasm_bindgen(js_name = curvatureProfile)]
pub fn curvature_profile(points: &str, side: &str) -> Result<String, JsError> {
    curvature_profile_json(points, side).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = seekDistance)]
pub fn seek_distance_js(a: &str, b: &str) -> Result<String, JsError> {
    seek_distance_json(a, b).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = fuseAndRank)]
pub fn fuse_and_rank(candidates: &str, curv_coefficient: f64) -> Result<String, JsError> {
    fuse_and_rank_json(candidates, curv_coefficient).map_err(|e| JsError::new(&e))
}
