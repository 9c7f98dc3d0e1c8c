//! Seeded synthetic populations: each individual gets a smooth open ear
//! curve with its own notch pattern and a base attribute code; every
//! sighting perturbs both.

use std::collections::HashSet;
use std::f64::consts::{PI, TAU};

use chrono::{DateTime, Duration, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contour::{EarSide, Point};
use crate::dump::{DumpContour, DumpIndividual, DumpSighting, RegistryDump};
use crate::index::IndividualId;
use crate::seek::{SeekSchema, Slot};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub individuals: usize,
    pub sightings_each: usize,
    /// Probability that a sighting's code differs from the base in a slot.
    pub code_flip_prob: f64,
    /// Share of flipped slots that become wildcards instead of another symbol.
    pub wildcard_share: f64,
    /// RMS displacement of each sighting's contour, as a fraction of the
    /// base contour's arc length.
    pub contour_jitter: f64,
    pub points_per_contour: usize,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            individuals: 45,
            sightings_each: 3,
            code_flip_prob: 0.1,
            wildcard_share: 0.25,
            contour_jitter: 0.02,
            points_per_contour: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synthesis parameter: {0}")]
    InvalidParams(&'static str),
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.individuals == 0 || self.sightings_each == 0 {
            return Err(SynthError::InvalidParams("counts must be positive"));
        }
        if !(0.0..=1.0).contains(&self.code_flip_prob) || !(0.0..=1.0).contains(&self.wildcard_share) {
            return Err(SynthError::InvalidParams("probabilities must lie in [0, 1]"));
        }
        if !(self.contour_jitter >= 0.0 && self.contour_jitter.is_finite()) {
            return Err(SynthError::InvalidParams("contour jitter must be nonnegative"));
        }
        if self.points_per_contour < 64 {
            return Err(SynthError::InvalidParams("points_per_contour below 64"));
        }
        Ok(())
    }
}

/// Shape parameters of one individual's ear margin.
#[derive(Debug, Clone)]
struct EarShape {
    start_angle: f64,
    sweep: f64,
    aspect: f64,
    harmonics: Vec<(f64, f64)>,
    /// (position in [0,1], half-width, depth)
    notches: Vec<(f64, f64, f64)>,
}

impl EarShape {
    fn random(rng: &mut ChaCha8Rng) -> EarShape {
        let notch_count = rng.random_range(2..=5);
        EarShape {
            start_angle: rng.random_range(-0.7..-0.4) * PI,
            sweep: rng.random_range(1.3..1.5) * PI,
            aspect: rng.random_range(0.7..0.9),
            harmonics: (0..3)
                .map(|_| (rng.random_range(-0.06..0.06), rng.random_range(0.0..TAU)))
                .collect(),
            notches: (0..notch_count)
                .map(|_| {
                    (
                        rng.random_range(0.08..0.92),
                        rng.random_range(0.01..0.03),
                        rng.random_range(0.05..0.14),
                    )
                })
                .collect(),
        }
    }

    fn radius(&self, t: f64) -> f64 {
        let mut r = 1.0;
        for (m, (amp, phase)) in self.harmonics.iter().enumerate() {
            r += amp * (TAU * (m + 1) as f64 * t + phase).sin();
        }
        for &(c, w, depth) in &self.notches {
            r -= depth * (1.0 - (t - c).abs() / w).max(0.0);
        }
        r
    }

    fn point(&self, t: f64, extra_radius: f64) -> Point {
        let phi = self.start_angle + self.sweep * t;
        let r = self.radius(t) + extra_radius;
        [self.aspect * r * phi.cos(), r * phi.sin()]
    }

    fn arc_length(&self) -> f64 {
        let n = 4000;
        let pts: Vec<Point> = (0..=n).map(|i| self.point(i as f64 / n as f64, 0.0)).collect();
        crate::contour::polyline_length(&pts)
    }
}

fn random_code(schema: &SeekSchema, rng: &mut ChaCha8Rng) -> Vec<String> {
    Slot::ALL
        .into_iter()
        .map(|slot| random_value(schema, slot, rng))
        .collect()
}

fn random_value(schema: &SeekSchema, slot: Slot, rng: &mut ChaCha8Rng) -> String {
    let alphabet = schema.alphabet(slot);
    match alphabet.unmarked.as_deref() {
        Some(unmarked) if rng.random_bool(0.4) => unmarked.to_string(),
        Some(unmarked) => {
            let features: Vec<&String> = alphabet.symbols.iter().filter(|s| *s != unmarked).collect();
            let count = if rng.random_bool(0.7) { 1 } else { 2 };
            let mut picked: Vec<&str> = features
                .choose_multiple(rng, count)
                .map(|s| s.as_str())
                .collect();
            picked.sort_unstable();
            picked.join("+")
        }
        None => alphabet.symbols.choose(rng).expect("non-empty alphabet").clone(),
    }
}

/// Generates a reproducible population dump. All sightings are assigned to
/// their true individual, oldest first.
pub fn synth_population(params: &SynthParams, schema: &SeekSchema) -> Result<RegistryDump, SynthError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let start: DateTime<Utc> = "2021-01-01T06:00:00Z".parse().expect("valid instant");

    let mut seen_codes = HashSet::new();
    let mut dump = RegistryDump::new(schema.version);
    for i in 0..params.individuals {
        let shape = EarShape::random(&mut rng);
        let base_length = shape.arc_length();
        let code = loop {
            let candidate = random_code(schema, &mut rng);
            if seen_codes.insert(candidate.join(":")) {
                break candidate;
            }
        };
        let id = IndividualId(format!("ind-{:06}", i + 1));
        let mut sightings = Vec::with_capacity(params.sightings_each);
        for s in 0..params.sightings_each {
            let seek = perturb_code(&code, schema, params, &mut rng).join(":");
            let points = sighting_contour(&shape, base_length, params, &mut rng);
            let day = (s * params.individuals + i) as i64;
            sightings.push(DumpSighting {
                id: format!("is-{:06}-{}", i + 1, s + 1),
                timestamp: start + Duration::days(day) + Duration::minutes(i as i64),
                seek: Some(seek),
                contours: vec![DumpContour {
                    side: EarSide::Right,
                    photo: None,
                    points,
                }],
            });
        }
        dump.individuals.push(DumpIndividual {
            id,
            name: format!("Synthetic {}", i + 1),
            sightings,
        });
    }
    Ok(dump)
}

fn perturb_code(
    base: &[String],
    schema: &SeekSchema,
    params: &SynthParams,
    rng: &mut ChaCha8Rng,
) -> Vec<String> {
    base.iter()
        .zip(Slot::ALL)
        .map(|(value, slot)| {
            if !rng.random_bool(params.code_flip_prob) {
                return value.clone();
            }
            if rng.random_bool(params.wildcard_share) {
                return "*".to_string();
            }
            loop {
                let other = random_value(schema, slot, rng);
                if &other != value {
                    return other;
                }
            }
        })
        .collect()
}

fn sighting_contour(
    shape: &EarShape,
    base_length: f64,
    params: &SynthParams,
    rng: &mut ChaCha8Rng,
) -> Vec<Point> {
    let jitter = params.contour_jitter * base_length;
    // Smooth radial displacement with RMS equal to `jitter`: four random
    // low-frequency sinusoids, each contributing a quarter of the variance.
    let waves: Vec<(f64, f64, f64)> = (0..4)
        .map(|m| {
            let amp = if jitter > 0.0 { jitter * 2f64.sqrt() / 2.0 } else { 0.0 };
            (amp, (m + 1) as f64, rng.random_range(0.0..TAU))
        })
        .collect();
    let trim = if jitter > 0.0 { 0.01 } else { 0.0 };
    let t0 = rng.random_range(0.0..=trim);
    let t1 = 1.0 - rng.random_range(0.0..=trim);

    let n = params.points_per_contour;
    let angle = rng.random_range(0.0..TAU);
    let scale = rng.random_range(80.0..240.0);
    let shift = [rng.random_range(0.0..500.0), rng.random_range(0.0..500.0)];
    let (sin, cos) = angle.sin_cos();
    (0..n)
        .map(|j| {
            let t = t0 + (t1 - t0) * j as f64 / (n - 1) as f64;
            let extra: f64 = waves
                .iter()
                .map(|(amp, freq, phase)| amp * (TAU * freq * t + phase).sin())
                .sum();
            let p = shape.point(t, extra);
            [
                scale * (cos * p[0] - sin * p[1]) + shift[0],
                scale * (sin * p[0] + cos * p[1]) + shift[1],
            ]
        })
        .collect()
}
