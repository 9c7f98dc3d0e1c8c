//! Ear contour pipeline: arc-length normalization, multi-scale integral
//! curvature, keypoints at curvature extrema, and fixed-length descriptors
//! for every keypoint pair.

mod curvature;
mod descriptors;
pub mod io;
mod keypoints;
mod normalize;

use serde::{Deserialize, Serialize};

pub use curvature::{integral_curvature, integral_curvature_at, interior_side};
pub use descriptors::extract_descriptors;
pub use keypoints::{extract_keypoints, smooth};
pub use normalize::{normalize_contour, resample_by_arc_length};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EarSide {
    Left,
    Right,
}

impl EarSide {
    pub fn code(self) -> char {
        match self {
            EarSide::Left => 'L',
            EarSide::Right => 'R',
        }
    }
}

/// Side of a directed curve, looking along the direction of travel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveSide {
    Left,
    Right,
}

/// Ordered point sequence along one ear margin, as traced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub points: Vec<Point>,
    pub side: EarSide,
    pub source: String,
}

impl Contour {
    pub fn new(points: Vec<Point>, side: EarSide, source: impl Into<String>) -> Contour {
        Contour {
            points,
            side,
            source: source.into(),
        }
    }

    pub fn arc_length(&self) -> f64 {
        polyline_length(&self.points)
    }
}

/// A contour resampled uniformly by arc length, centered on the origin,
/// scaled to unit arc length, with left ears mirrored into the right-ear
/// frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedContour {
    pub points: Vec<Point>,
    pub side: EarSide,
    pub source: String,
    /// Side of the curve treated as the ear interior.
    pub interior: CurveSide,
}

impl NormalizedContour {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn arc_length(&self) -> f64 {
        polyline_length(&self.points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureProfile {
    pub scales: Vec<f64>,
    /// `values[s][i]` is the interior area fraction at scale `s` around
    /// resampled point `i`.
    pub values: Vec<Vec<f64>>,
    pub interior: CurveSide,
}

impl CurvatureProfile {
    pub fn len(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeypointKind {
    Min,
    Max,
    Endpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub index: usize,
    pub scale_index: usize,
    pub scale: f64,
    pub kind: KeypointKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    /// Unit-norm curvature samples between the two keypoints.
    pub vector: Vec<f64>,
    pub scale: f64,
    pub span: (usize, usize),
    pub side: EarSide,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContourConfig {
    pub resample_count: usize,
    /// Disk radii as fractions of the contour arc length, each in (0, 0.5).
    pub scales: Vec<f64>,
    pub smoothing_window: usize,
    pub min_span: usize,
    pub descriptor_dim: usize,
    /// Samples at each end excluded from extremum detection.
    pub endpoint_margin: usize,
    /// Minimum rise over both neighbours for a sample to count as an extremum.
    pub extremum_tolerance: f64,
}

impl Default for ContourConfig {
    fn default() -> Self {
        ContourConfig {
            resample_count: 256,
            scales: vec![0.02, 0.04, 0.06, 0.08],
            smoothing_window: 5,
            min_span: 8,
            descriptor_dim: 32,
            endpoint_margin: 4,
            extremum_tolerance: 1e-9,
        }
    }
}

impl ContourConfig {
    pub fn validate(&self) -> Result<(), ContourError> {
        if self.resample_count < MIN_CONTOUR_POINTS {
            return Err(ContourError::InvalidConfig("resample_count below 32"));
        }
        if self.scales.is_empty() {
            return Err(ContourError::InvalidConfig("no scales"));
        }
        for &r in &self.scales {
            check_scale(r)?;
        }
        if self.descriptor_dim < 2 {
            return Err(ContourError::InvalidConfig("descriptor_dim below 2"));
        }
        if self.smoothing_window == 0 {
            return Err(ContourError::InvalidConfig("smoothing_window must be positive"));
        }
        if 2 * self.endpoint_margin + 3 > self.resample_count {
            return Err(ContourError::InvalidConfig("endpoint_margin too large"));
        }
        Ok(())
    }
}

pub const MIN_CONTOUR_POINTS: usize = 32;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ContourError {
    #[error("degenerate contour: {0}")]
    DegenerateContour(String),
    #[error("disk radius {0} outside (0, 0.5)")]
    BadScale(f64),
    #[error("invalid contour configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("contour file: {0}")]
    Parse(String),
}

pub(crate) fn check_scale(r: f64) -> Result<(), ContourError> {
    if r > 0.0 && r < 0.5 {
        Ok(())
    } else {
        Err(ContourError::BadScale(r))
    }
}

pub(crate) fn polyline_length(points: &[Point]) -> f64 {
    points.windows(2).map(|w| dist(w[0], w[1])).sum()
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Runs the whole pipeline for one contour.
#[derive(Debug, Clone, Default)]
pub struct ContourEngine {
    config: ContourConfig,
}

impl ContourEngine {
    pub fn new(config: ContourConfig) -> Result<ContourEngine, ContourError> {
        config.validate()?;
        Ok(ContourEngine { config })
    }

    pub fn config(&self) -> &ContourConfig {
        &self.config
    }

    pub fn profile(&self, contour: &Contour) -> Result<CurvatureProfile, ContourError> {
        let normalized = normalize_contour(contour, self.config.resample_count)?;
        integral_curvature(&normalized, &self.config.scales)
    }

    pub fn describe(&self, contour: &Contour) -> Result<Vec<Descriptor>, ContourError> {
        let profile = self.profile(contour)?;
        let keypoints = extract_keypoints(&profile, &self.config);
        Ok(extract_descriptors(&profile, &keypoints, contour.side, &self.config))
    }

    /// Descriptors for several contours, concatenated in input order.
    pub fn describe_all(&self, contours: &[Contour]) -> Result<Vec<Descriptor>, ContourError> {
        let mut out = Vec::new();
        for c in contours {
            out.extend(self.describe(c)?);
        }
        Ok(out)
    }
}
