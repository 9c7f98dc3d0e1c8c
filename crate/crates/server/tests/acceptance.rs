//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any fails.

mod common;

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use common::*;
use earmark_core::contour::{
    integral_curvature, integral_curvature_at, normalize_contour, CurveSide, Descriptor, Point,
};
use earmark_core::dump::{DumpContour, DumpIndividual, DumpSighting};
use earmark_core::eval::{eval_topk, EvalProtocol, Method};
use earmark_core::index::{lnbnn_score, rank_candidates, squared_distance, Candidate};
use earmark_core::seek::{parse_code, seek_distance, SeekCode, Slot};
use earmark_core::synth::{synth_population, SynthParams};
use earmark_core::{
    Contour, ContourConfig, ContourEngine, DescriptorIndex, EarSide, FusionConfig, IndividualId,
    RegistryDump, SeekSchema, SeekWeights,
};
use earmark_ingest::{ingest_events, FeedConfig, IngestEvent, MockFeed, RunningFeed, ELEPHANT_SIGHTING};
use earmark_registry::*;
use earmark_server::MatchPage;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reqwest::Method as Http;
use serde_json::{json, Value};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() {
    let criteria: Vec<(&str, Duration, fn() -> Check)> = vec![
        ("seek distance suite", Duration::from_secs(1), seek_suite),
        ("curvature vs rasterization oracle", Duration::from_secs(30), curvature_oracle),
        ("lnbnn vs exhaustive oracle", Duration::from_secs(10), lnbnn_oracle),
        ("fusion degeneracy", Duration::from_secs(10), fusion_degeneracy),
        ("desk-scale synthetic benchmark", Duration::from_secs(120), desk_scale),
        ("end-to-end service workflow", Duration::from_secs(30), end_to_end),
        ("registry interleavings", Duration::from_secs(300), registry_interleavings),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_text(&p))));
        let took = start.elapsed();
        let result = match result {
            Ok(_) if took > budget => Err(format!("took {took:.2?}, budget {budget:?}")),
            other => other,
        };
        match result {
            Ok(detail) => println!("PASS  {name}: {detail} ({took:.2?})"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why} ({took:.2?})");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn panic_text(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "unknown panic".into())
}

// ---------------------------------------------------------------- seek

fn random_code(rng: &mut ChaCha8Rng, schema: &SeekSchema, wildcard_p: f64) -> SeekCode {
    let parts: Vec<String> = schema
        .slots
        .iter()
        .map(|alpha| {
            if rng.random_bool(wildcard_p) {
                return "*".to_string();
            }
            match (&alpha.unmarked, alpha.multi) {
                (Some(u), true) if rng.random_bool(0.4) => u.clone(),
                (_, true) => {
                    let n = rng.random_range(1..=2);
                    let features: Vec<&String> = alpha
                        .symbols
                        .iter()
                        .filter(|s| Some(*s) != alpha.unmarked.as_ref())
                        .collect();
                    let mut picked: Vec<&str> = (0..n).map(|_| features.choose(rng).unwrap().as_str()).collect();
                    picked.sort();
                    picked.dedup();
                    picked.join("+")
                }
                _ => alpha.symbols.choose(rng).unwrap().clone(),
            }
        })
        .collect();
    parse_code(schema, &parts.join(":")).unwrap()
}

fn seek_suite() -> Check {
    let schema = SeekSchema::default_v1();
    let w = SeekWeights::default();
    let a = parse_code(&schema, "F:AD:T2:U:N1:U:H3:X0").unwrap();
    let b = parse_code(&schema, "M:CALF:T0:H1:U:T2:U:X4").unwrap();
    let d_same = seek_distance(&a, &a, &w).unwrap();
    ensure!(d_same == 0.0, "identical codes gave {d_same}");
    let d_all = seek_distance(&a, &b, &w).unwrap();
    ensure!(d_all == 0.925, "all slots differ gave {d_all}, expected 0.925");
    let aged = a.with(&schema, Slot::Age, "*").unwrap();
    let d_age = seek_distance(&aged, &a, &w).unwrap();
    ensure!(d_age == 0.03, "age wildcard gave {d_age}, expected 0.03");

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut increments = 0;
    for i in 0..1000 {
        let a = random_code(&mut rng, &schema, 0.15);
        let mut b = random_code(&mut rng, &schema, 0.15);
        // Force at least one matching concrete slot so the increment
        // property has something to act on.
        let forced = Slot::ALL[i % Slot::COUNT];
        if !a.get(forced).is_wildcard() {
            b = b.with(&schema, forced, a.get(forced).as_str()).unwrap();
        }
        let ab = seek_distance(&a, &b, &w).unwrap();
        let ba = seek_distance(&b, &a, &w).unwrap();
        ensure!(ab.to_bits() == ba.to_bits(), "asymmetric: {a:?} {b:?}: {ab} vs {ba}");
        ensure!((0.0..=0.925).contains(&ab), "out of bounds: {ab}");
        if !a.has_wildcard() {
            ensure!(seek_distance(&a, &a, &w).unwrap() == 0.0, "self distance nonzero");
        }
        for slot in Slot::ALL {
            let (x, y) = (a.get(slot), b.get(slot));
            if x.is_wildcard() || x != y {
                continue;
            }
            let widened = a.with(&schema, slot, "*").unwrap();
            let d = seek_distance(&widened, &b, &w).unwrap();
            let expected = w.slot_weights[slot.index()] * 0.6 / 8.0;
            ensure!(
                (d - ab - expected).abs() < 1e-12,
                "wildcard in {slot} raised distance by {} not {expected}",
                d - ab
            );
            increments += 1;
        }
    }
    Ok(format!("3 examples exact, 1000 pairs, {increments} wildcard increments"))
}

// ----------------------------------------------------------- curvature

/// Point where the segment from `inside` to `outside` meets the circle of
/// radius `r` about the origin, by bisection.
fn circle_crossing(inside: Point, outside: Point, r: f64) -> Point {
    let at = |t: f64| [inside[0] + t * (outside[0] - inside[0]), inside[1] + t * (outside[1] - inside[1])];
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let p = at(mid);
        if p[0] * p[0] + p[1] * p[1] <= r * r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Interior share of the disk of radius `r` about `points[index]`, by
/// sampling pixel centres on a 512x512 grid. The disk is split by the run of
/// samples inside it that contains the centre, extended along the end
/// direction where the contour stops inside the disk. A pixel's side is its
/// winding number with respect to that piece closed by the counter-clockwise
/// arc from its exit back to its entry.
fn raster_curvature(points: &[Point], index: usize, r: f64, interior: CurveSide) -> f64 {
    const N: usize = 512;
    const ARC: usize = 512;
    let c = points[index];
    let rel: Vec<Point> = points.iter().map(|p| [p[0] - c[0], p[1] - c[1]]).collect();
    let inside = |p: Point| p[0] * p[0] + p[1] * p[1] <= r * r;
    let last = rel.len() - 1;
    let mut lo = index;
    while lo > 0 && inside(rel[lo - 1]) {
        lo -= 1;
    }
    let mut hi = index;
    while hi < last && inside(rel[hi + 1]) {
        hi += 1;
    }
    let extend = |from: Point, toward: Point| {
        let d = [toward[0] - from[0], toward[1] - from[1]];
        let len = d[0].hypot(d[1]);
        [toward[0] + 3.0 * r * d[0] / len, toward[1] + 3.0 * r * d[1] / len]
    };
    let entry = if lo == 0 {
        circle_crossing(rel[0], extend(rel[1], rel[0]), r)
    } else {
        circle_crossing(rel[lo], rel[lo - 1], r)
    };
    let exit = if hi == last {
        circle_crossing(rel[last], extend(rel[last - 1], rel[last]), r)
    } else {
        circle_crossing(rel[hi], rel[hi + 1], r)
    };
    let mut poly = vec![entry];
    poly.extend_from_slice(&rel[lo..=hi]);
    poly.push(exit);
    let a0 = exit[1].atan2(exit[0]);
    let mut sweep = entry[1].atan2(entry[0]) - a0;
    if sweep < 0.0 {
        sweep += TAU;
    }
    for j in 1..ARC {
        let a = a0 + sweep * j as f64 / ARC as f64;
        poly.push([r * a.cos(), r * a.sin()]);
    }

    let cell = 2.0 * r / N as f64;
    let mut in_disk = 0i64;
    let mut winding = 0i64;
    let mut crossings: Vec<(f64, i64)> = Vec::new();
    for row in 0..N {
        let y = -r + (row as f64 + 0.5) * cell;
        crossings.clear();
        for e in 0..poly.len() {
            let p = poly[e];
            let q = poly[(e + 1) % poly.len()];
            let sign = if p[1] <= y && y < q[1] {
                1
            } else if q[1] <= y && y < p[1] {
                -1
            } else {
                continue;
            };
            let x = p[0] + (y - p[1]) / (q[1] - p[1]) * (q[0] - p[0]);
            crossings.push((x, sign));
        }
        crossings.sort_by(|a, b| a.0.total_cmp(&b.0));
        // Winding number of a point is the signed count of crossings to its
        // right; sweep the row right to left.
        let mut k = crossings.len();
        let mut wn = 0;
        for col in (0..N).rev() {
            let x = -r + (col as f64 + 0.5) * cell;
            while k > 0 && crossings[k - 1].0 > x {
                k -= 1;
                wn += crossings[k].1;
            }
            if x * x + y * y <= r * r {
                in_disk += 1;
                winding += wn;
            }
        }
    }
    let left = winding as f64 / in_disk as f64;
    let value = match interior {
        CurveSide::Left => left,
        CurveSide::Right => 1.0 - left,
    };
    value.clamp(0.0, 1.0)
}

fn random_ear_curve(rng: &mut ChaCha8Rng) -> Vec<Point> {
    let n = rng.random_range(60..400);
    let span = rng.random_range(0.5 * PI..1.7 * PI);
    let rot = rng.random_range(0.0..TAU);
    let scale = rng.random_range(20.0..500.0);
    let harmonics: Vec<(f64, f64, f64)> = (0..4)
        .map(|_| (rng.random_range(0.0..0.08), rng.random_range(2.0..14.0), rng.random_range(0.0..TAU)))
        .collect();
    (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            let a = rot + span * t;
            let rad = 1.0 + harmonics.iter().map(|(amp, f, ph)| amp * (f * t * TAU / 4.0 + ph).sin()).sum::<f64>();
            [scale * rad * a.cos(), scale * rad * a.sin()]
        })
        .collect()
}

fn curvature_oracle() -> Check {
    let scales = ContourConfig::default().scales;
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0ffee);
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for c in 0..50 {
        let side = if c % 2 == 0 { EarSide::Right } else { EarSide::Left };
        let contour = Contour::new(random_ear_curve(&mut rng), side, "acceptance");
        let norm = normalize_contour(&contour, 256).map_err(|e| e.to_string())?;
        let profile = integral_curvature(&norm, &scales).map_err(|e| e.to_string())?;
        let mut indices = vec![0, 1, 128, 254, 255];
        indices.extend((0..7).map(|_| rng.random_range(0..256)));
        for (s, &r) in scales.iter().enumerate() {
            for &i in &indices {
                let want = raster_curvature(&norm.points, i, r, norm.interior);
                let got = profile.values[s][i];
                worst = worst.max((got - want).abs());
                compared += 1;
                ensure!(
                    (got - want).abs() <= 0.02,
                    "contour {c}, scale {r}, point {i}: {got} vs oracle {want}"
                );
            }
        }
    }

    let line = normalize_contour(
        &Contour::new((0..100).map(|i| [i as f64, 0.3 * i as f64]).collect(), EarSide::Right, "line"),
        256,
    )
    .map_err(|e| e.to_string())?;
    let profile = integral_curvature(&line, &scales).map_err(|e| e.to_string())?;
    for (s, row) in profile.values.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            ensure!((v - 0.5).abs() <= 0.02, "straight line scale {} point {i}: {v}", scales[s]);
        }
        let oracle = raster_curvature(&line.points, 100, scales[s], line.interior);
        ensure!((oracle - 0.5).abs() <= 0.02, "oracle on straight line: {oracle}");
    }

    // Down the y axis then along x, corner on sample 128; the reflex side is
    // to the right of travel.
    let mut pts: Vec<Point> = (0..=64).map(|i| [0.0, 128.0 * (1.0 - i as f64 / 64.0)]).collect();
    pts.extend((1..=64).map(|i| [127.0 * i as f64 / 64.0, 0.0]));
    let corner = normalize_contour(&Contour::new(pts, EarSide::Right, "corner"), 256).map_err(|e| e.to_string())?;
    for &r in &scales {
        let got = integral_curvature_at(&corner.points, 128, r, CurveSide::Right);
        let oracle = raster_curvature(&corner.points, 128, r, CurveSide::Right);
        ensure!((got - 0.75).abs() <= 0.03, "corner at scale {r}: {got}");
        ensure!((oracle - 0.75).abs() <= 0.03, "oracle corner at scale {r}: {oracle}");
    }
    Ok(format!("{compared} samples, max deviation {worst:.4}; line 0.5, corner 0.75"))
}

// --------------------------------------------------------------- lnbnn

fn random_descriptor(rng: &mut ChaCha8Rng) -> Descriptor {
    let v: Vec<f64> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    Descriptor {
        vector: v.iter().map(|x| x / norm).collect(),
        scale: 0.04,
        span: (0, 31),
        side: if rng.random_bool(0.5) { EarSide::Left } else { EarSide::Right },
    }
}

/// LNBNN by sorting every gallery entry: ties on distance go to the earlier
/// entry.
fn exhaustive_lnbnn(query: &[Descriptor], idx: &DescriptorIndex, k: usize) -> BTreeMap<IndividualId, f64> {
    let mut scores: BTreeMap<IndividualId, f64> =
        idx.entries().iter().map(|e| (e.individual.clone(), 0.0)).collect();
    for q in query {
        let mut all: Vec<(f64, usize)> =
            (0..idx.len()).map(|e| (squared_distance(&q.vector, idx.vector(e)), e)).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let bound = all[k].0;
        let mut seen: Vec<&IndividualId> = Vec::new();
        for &(d, e) in &all[..k] {
            let owner = &idx.entries()[e].individual;
            if seen.contains(&owner) {
                continue;
            }
            seen.push(owner);
            *scores.get_mut(owner).unwrap() += bound - d;
        }
    }
    scores
}

fn lnbnn_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1b);
    let mut runs = 0;
    for g in 0..20 {
        let individuals = rng.random_range(5..=10);
        let mut pool: Vec<Descriptor> = Vec::new();
        let mut gallery: Vec<(IndividualId, Vec<Descriptor>)> = (0..individuals)
            .map(|i| {
                let count = rng.random_range(2..=200 / individuals);
                let ds: Vec<Descriptor> = (0..count)
                    .map(|_| {
                        // Reuse earlier vectors now and then to create exact
                        // distance ties across individuals.
                        if !pool.is_empty() && rng.random_bool(0.1) {
                            pool.choose(&mut rng).unwrap().clone()
                        } else {
                            random_descriptor(&mut rng)
                        }
                    })
                    .collect();
                pool.extend(ds.iter().cloned());
                (IndividualId::new(format!("ind-{g:02}-{i:02}")), ds)
            })
            .collect();
        gallery.rotate_left(g % individuals);
        let idx = DescriptorIndex::build(&gallery, 1).map_err(|e| e.to_string())?;
        ensure!(idx.len() <= 200, "gallery too large: {}", idx.len());
        let query: Vec<Descriptor> = (0..12)
            .map(|_| {
                if rng.random_bool(0.3) {
                    pool.choose(&mut rng).unwrap().clone()
                } else {
                    random_descriptor(&mut rng)
                }
            })
            .collect();
        for k in [1, 3, 5] {
            let got = lnbnn_score(&query, &idx, k).map_err(|e| e.to_string())?;
            let want = exhaustive_lnbnn(&query, &idx, k);
            ensure!(got.len() == want.len(), "gallery {g}, k={k}: individual sets differ");
            for (id, w) in &want {
                let s = got[id];
                ensure!(s.to_bits() == w.to_bits(), "gallery {g}, k={k}, {id}: {s} vs oracle {w}");
            }
            runs += 1;
        }
    }
    Ok(format!("{runs} gallery/k runs bit-identical"))
}

// -------------------------------------------------------------- fusion

fn order(ranked: &[earmark_core::RankedMatch]) -> Vec<String> {
    ranked.iter().map(|m| m.individual.to_string()).collect()
}

fn fusion_degeneracy() -> Check {
    let schema = SeekSchema::default_v1();
    let w = SeekWeights::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xf5);
    for trial in 0..50 {
        let n = rng.random_range(2..40);
        let query = random_code(&mut rng, &schema, 0.1);
        let shared = random_code(&mut rng, &schema, 0.1);
        let mut varied = Vec::new();
        let mut same_code = Vec::new();
        for i in 0..n {
            let id = IndividualId::new(format!("ind-{i:03}"));
            let contour = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..5.0) };
            let code = random_code(&mut rng, &schema, 0.1);
            varied.push(Candidate {
                individual: id.clone(),
                seek_distance: seek_distance(&query, &code, &w).unwrap(),
                contour_score: contour,
            });
            same_code.push(Candidate {
                individual: id,
                seek_distance: seek_distance(&query, &shared, &w).unwrap(),
                contour_score: contour,
            });
        }

        let off = FusionConfig {
            curv_coefficient: 0.0,
            ..FusionConfig::default()
        };
        let mut seek_only = varied.clone();
        seek_only.sort_by(|a, b| a.seek_distance.total_cmp(&b.seek_distance).then(a.individual.cmp(&b.individual)));
        let fused = rank_candidates(varied.clone(), &off).map_err(|e| e.to_string())?;
        ensure!(
            order(&fused) == seek_only.iter().map(|c| c.individual.to_string()).collect::<Vec<_>>(),
            "trial {trial}: coefficient 0 differs from code-only order"
        );

        let cfg = FusionConfig::default();
        let mut contour_only = same_code.clone();
        contour_only.sort_by(|a, b| b.contour_score.total_cmp(&a.contour_score).then(a.individual.cmp(&b.individual)));
        let fused = rank_candidates(same_code, &cfg).map_err(|e| e.to_string())?;
        ensure!(
            order(&fused) == contour_only.iter().map(|c| c.individual.to_string()).collect::<Vec<_>>(),
            "trial {trial}: identical codes differ from contour-only order"
        );

        let base = order(&rank_candidates(varied.clone(), &cfg).map_err(|e| e.to_string())?);
        for shift in [0.5, 3.0, 17.25] {
            let shifted: Vec<Candidate> = varied
                .iter()
                .map(|c| Candidate {
                    contour_score: c.contour_score + shift,
                    ..c.clone()
                })
                .collect();
            let moved = order(&rank_candidates(shifted, &cfg).map_err(|e| e.to_string())?);
            ensure!(moved == base, "trial {trial}: shift {shift} changed the order");
        }
    }
    Ok("50 random galleries, three degenerate cases each".into())
}

// ---------------------------------------------------------- desk scale

fn desk_scale() -> Check {
    let schema = SeekSchema::default_v1();
    let engine = ContourEngine::default();
    let protocol = EvalProtocol::default();
    let params = SynthParams {
        individuals: 45,
        sightings_each: 3,
        code_flip_prob: 0.1,
        contour_jitter: 0.02,
        seed: 0,
        ..SynthParams::default()
    };
    let dump = synth_population(&params, &schema).map_err(|e| e.to_string())?;
    let report = eval_topk(&dump, &protocol, &schema, &engine, &SeekWeights::default(), &FusionConfig::default())
        .map_err(|e| e.to_string())?;
    let acc = |m: Method, k: usize| report.method(m).and_then(|a| a.at(k)).unwrap();
    let mut line = Vec::new();
    for k in [5, 10, 15] {
        let (h, s, c) = (acc(Method::Hybrid, k), acc(Method::Seek, k), acc(Method::Curv, k));
        line.push(format!("top-{k} hybrid {h:.3} seek {s:.3} curv {c:.3}"));
        ensure!(h >= s.max(c) - 0.05, "top-{k}: hybrid {h:.3} below max(seek {s:.3}, curv {c:.3}) - 0.05");
    }
    for m in &report.methods {
        for pair in m.accuracy.windows(2) {
            ensure!(pair[1].1 >= pair[0].1, "{} accuracy drops from k={} to k={}", m.method, pair[0].0, pair[1].0);
        }
    }

    let clean = SynthParams {
        code_flip_prob: 0.0,
        contour_jitter: 0.0,
        ..params
    };
    let dump = synth_population(&clean, &schema).map_err(|e| e.to_string())?;
    let report = eval_topk(&dump, &protocol, &schema, &engine, &SeekWeights::default(), &FusionConfig::default())
        .map_err(|e| e.to_string())?;
    for m in Method::ALL {
        let top1 = report.method(m).and_then(|a| a.at(1)).unwrap();
        ensure!(top1 == 1.0, "noiseless {m} top-1 is {top1}");
    }
    Ok(format!("{}; noiseless top-1 = 1.0", line.join(", ")))
}

// ---------------------------------------------------------- end to end

fn single_individual_dump(code: &str, points: Vec<[f64; 2]>) -> RegistryDump {
    let mut dump = RegistryDump::new(1);
    dump.individuals.push(DumpIndividual {
        id: IndividualId::new("ind-000001"),
        name: "Ngina".into(),
        sightings: vec![DumpSighting {
            id: "is-000001".into(),
            timestamp: "2023-11-02T09:00:00Z".parse().unwrap(),
            seek: Some(code.into()),
            contours: vec![DumpContour {
                side: EarSide::Right,
                photo: None,
                points,
            }],
        }],
    });
    dump
}

fn end_to_end() -> Check {
    tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .unwrap()
        .block_on(end_to_end_async())
}

async fn end_to_end_async() -> Check {
    const KNOWN: &str = "F:AD:T2:U:U:N1:U:X0";
    const STRANGER: &str = "M:SUBAD:TL:H2:U:U:T4:X1";
    let event = IngestEvent {
        id: "evt-7781".into(),
        event_type: ELEPHANT_SIGHTING.into(),
        time: Utc::now() - chrono::Duration::hours(2),
        location: Some(Location {
            latitude: -1.41,
            longitude: 35.02,
        }),
        reported_by: "ranger-4".into(),
        group_size: Some(2),
        composition: "cow with young bull".into(),
    };
    let feed = RunningFeed::start(MockFeed::new(vec![event.to_wire()]).with_token("feed-secret"))
        .await
        .map_err(|e| e.to_string())?;
    let h = Harness::start(Some(FeedConfig {
        base_url: feed.base_url(),
        token: Some("feed-secret".into()),
        ..FeedConfig::default()
    }))
    .await;

    // One individual is already known before the event.
    let dump = single_individual_dump(KNOWN, contour_points(5, 0.0));
    h.ok(Http::POST, "/import", ADMIN, Some(serde_json::to_value(&dump).unwrap())).await;
    let known = h.ok(Http::GET, "/individuals", ANNOTATOR, None).await["items"][0]["id"]
        .as_str()
        .unwrap()
        .to_string();

    let ingested = h.ok(Http::POST, "/events/ingest", ANNOTATOR, Some(json!({}))).await;
    let created = ingested["created"].as_array().unwrap();
    ensure!(created.len() == 1, "expected one group sighting from the feed, got {ingested}");
    let group = created[0][1].as_str().unwrap().to_string();

    // Three photos; elephant 1 is boxed in photos 1 and 2, elephant 2 in
    // photos 1 and 3.
    let layout: [&[(u32, u32)]; 3] = [&[(20, 1), (300, 2)], &[(140, 1)], &[(60, 2)]];
    let mut photos = Vec::new();
    for (n, boxes) in layout.iter().enumerate() {
        let (status, v) = h.upload(&group, ANNOTATOR, &format!("IMG_{n}.png"), png(640, 480, n as u8 * 40)).await;
        ensure!(status.is_success(), "upload {n}: {status} {v}");
        let photo = v["data"].clone();
        let body = json!({
            "version": photo["version"],
            "boxes": boxes.iter().map(|(x, sub)| json!({ "x": x, "y": 40, "w": 180, "h": 200, "subgroup_index": sub })).collect::<Vec<_>>(),
        });
        h.ok(Http::PUT, &format!("/photos/{}/boxes", photo["id"].as_str().unwrap()), ANNOTATOR, Some(body))
            .await;
        photos.push(photo);
    }
    let derived = h.ok(Http::POST, &format!("/group-sightings/{group}/derive"), ANNOTATOR, None).await;
    let sightings: Vec<String> =
        derived.as_array().unwrap().iter().map(|s| s["id"].as_str().unwrap().to_string()).collect();
    ensure!(sightings.len() == 2, "derive produced {} sightings", sightings.len());

    let source = json!({ "photo": photos[0]["id"], "asset": "original" });
    for (s, code, points) in [
        (&sightings[0], KNOWN, contour_points(5, 0.05)),
        (&sightings[1], STRANGER, contour_points(9, 1.3)),
    ] {
        h.ok(Http::PUT, &format!("/sightings/{s}/seek"), CODER, Some(json!({ "code": code }))).await;
        let body = json!({ "contours": [{ "side": "right", "source": source, "points": points }] });
        h.ok(Http::PUT, &format!("/sightings/{s}/contours"), ANNOTATOR, Some(body)).await;
    }

    let page: MatchPage = serde_json::from_value(
        h.ok(Http::GET, &format!("/sightings/{}/matches", sightings[0]), REVIEWER, None).await,
    )
    .unwrap();
    ensure!(
        page.matches.first().map(|m| m.individual.as_str()) == Some(known.as_str()),
        "known individual not ranked first: {:?}",
        page.matches
    );
    let stranger: MatchPage = serde_json::from_value(
        h.ok(Http::GET, &format!("/sightings/{}/matches", sightings[1]), REVIEWER, None).await,
    )
    .unwrap();
    ensure!(stranger.matches.len() == 1, "stranger saw {} candidates", stranger.matches.len());

    h.ok(
        Http::POST,
        &format!("/sightings/{}/assign", sightings[0]),
        REVIEWER,
        Some(json!({ "target": { "kind": "existing", "individual": known } })),
    )
    .await;
    h.ok(
        Http::POST,
        &format!("/sightings/{}/assign", sightings[1]),
        REVIEWER,
        Some(json!({ "target": { "kind": "new", "name": "Lemayian" } })),
    )
    .await;

    let list = h.ok(Http::GET, "/individuals", ANNOTATOR, None).await;
    ensure!(list["total"] == 2, "registry holds {} individuals", list["total"]);

    let trail = h.ok(Http::GET, &format!("/sightings/{}/audit", sightings[0]), ANNOTATOR, None).await;
    let kinds: Vec<&str> = trail.as_array().unwrap().iter().filter_map(|r| r["event"]["type"].as_str()).collect();
    ensure!(kinds.last() == Some(&"assigned"), "audit trail ends with {kinds:?}");

    let full: Value = h.ok(Http::GET, "/export?journal=true", ADMIN, None).await;
    let fresh = Harness::start(None).await;
    let summary = fresh.ok(Http::POST, "/import", ADMIN, Some(full.clone())).await;
    ensure!(summary["replayed"] == true, "journal was not replayed: {summary}");
    let again = fresh.ok(Http::GET, "/export?journal=true", ADMIN, None).await;
    ensure!(again == full, "replayed registry differs from the original");
    let journal_len = full["journal"].as_array().map_or(0, Vec::len);
    feed.stop().await;
    Ok(format!("2 individuals, {journal_len} journal records replayed identically"))
}

// ------------------------------------------------------------ registry

#[derive(Debug, Clone, Copy)]
enum Op {
    CreateGroup,
    AddPhoto,
    SetBoxes,
    Derive,
    Code,
    Contours,
    AssignNew,
    AssignExisting,
    Reassign,
}

const OPS: [(Op, u32); 9] = [
    (Op::CreateGroup, 2),
    (Op::AddPhoto, 3),
    (Op::SetBoxes, 4),
    (Op::Derive, 3),
    (Op::Code, 4),
    (Op::Contours, 1),
    (Op::AssignNew, 3),
    (Op::AssignExisting, 3),
    (Op::Reassign, 2),
];

fn t0() -> DateTime<Utc> {
    "2024-01-01T00:00:00Z".parse().unwrap()
}

fn pick<K: Clone, V>(map: &BTreeMap<K, V>, rng: &mut ChaCha8Rng) -> Option<K> {
    if map.is_empty() {
        return None;
    }
    map.keys().nth(rng.random_range(0..map.len())).cloned()
}

fn feed_event(n: u32, coords: bool) -> IngestEvent {
    IngestEvent {
        id: format!("ev-{n}"),
        event_type: ELEPHANT_SIGHTING.into(),
        time: t0() + chrono::Duration::hours(n as i64),
        location: coords.then_some(Location {
            latitude: -2.0,
            longitude: 36.0,
        }),
        reported_by: "r".into(),
        group_size: None,
        composition: String::new(),
    }
}

fn apply(reg: &mut Registry, op: Op, rng: &mut ChaCha8Rng) -> Result<(), String> {
    let st = reg.state().clone();
    let _ = match op {
        Op::CreateGroup => {
            let ev = feed_event(rng.random_range(0..6), rng.random_bool(0.9));
            ingest_events(reg, "feed", &[ev]).map(drop)
        }
        Op::AddPhoto => match pick(&st.groups, rng) {
            Some(g) => reg
                .add_photo(
                    "a",
                    &g,
                    NewPhoto {
                        content_hash: format!("h{}", rng.random_range(0..4)),
                        file_name: "p.jpg".into(),
                        width: 1000,
                        height: 800,
                        preview: None,
                    },
                )
                .map(drop),
            None => Ok(()),
        },
        Op::SetBoxes => match pick(&st.photos, rng) {
            Some(p) => {
                let oob = rng.random_bool(0.1);
                let stale = rng.random_bool(0.1);
                let boxes = (0..rng.random_range(0..4))
                    .map(|k| NewBox {
                        rect: Rect {
                            x: if oob { 950 } else { 200 * k },
                            y: 10,
                            w: 100,
                            h: 100,
                        },
                        subgroup_index: rng.random_range(1..=4),
                    })
                    .collect();
                let v = st.photos[&p].version;
                reg.set_boxes("a", &p, boxes, Some(if stale { v + 1 } else { v })).map(drop)
            }
            None => Ok(()),
        },
        Op::Derive => match pick(&st.groups, rng) {
            Some(g) => reg.derive_individual_sightings("a", &g).map(drop),
            None => Ok(()),
        },
        Op::Code => match pick(&st.sightings, rng) {
            Some(s) => {
                let code = if rng.random_bool(0.9) { "F:AD:T2:U:U:N1:U:X0" } else { "F:AD:Q9" };
                reg.set_seek_code("c", &s, code, None).map(drop)
            }
            None => Ok(()),
        },
        Op::Contours => match (pick(&st.sightings, rng), pick(&st.photos, rng)) {
            (Some(s), Some(p)) => reg
                .set_contours(
                    "c",
                    &s,
                    vec![SightingContour {
                        side: EarSide::Left,
                        source: Some(AssetRef {
                            photo: p,
                            asset: if rng.random_bool(0.1) { Asset::Preview } else { Asset::Original },
                        }),
                        points: (0..40).map(|i| [i as f64, (i % 7) as f64]).collect(),
                    }],
                    None,
                )
                .map(drop),
            _ => Ok(()),
        },
        Op::AssignNew => match pick(&st.sightings, rng) {
            Some(s) => reg.assign("r", &s, AssignTarget::New { name: "x".into() }, None).map(drop),
            None => Ok(()),
        },
        Op::AssignExisting => match (pick(&st.sightings, rng), pick(&st.individuals, rng)) {
            (Some(s), Some(i)) => reg.assign("r", &s, AssignTarget::Existing { individual: i }, None).map(drop),
            _ => Ok(()),
        },
        Op::Reassign => match (pick(&st.sightings, rng), pick(&st.individuals, rng)) {
            (Some(s), Some(i)) => reg
                .reassign("r", &s, AssignTarget::Existing { individual: i }, "fix", None)
                .map(drop),
            _ => Ok(()),
        },
    };
    let violations = reg.state().integrity_violations();
    ensure!(violations.is_empty(), "{violations:?} after {op:?}");
    if !matches!(op, Op::AssignNew) {
        ensure!(reg.state().individuals.len() == st.individuals.len(), "{op:?} changed the individual count");
    }
    if reg.version() == st.version {
        ensure!(reg.state() == &st, "{op:?} changed state without a new version");
    }
    Ok(())
}

fn registry_interleavings() -> Check {
    let weights = WeightedIndex::new(OPS.iter().map(|(_, w)| *w)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let mut total_ops = 0;
    for run in 0..500 {
        let clock_base = t0();
        let mut reg = Registry::in_memory(SeekSchema::default_v1()).with_clock(Arc::new(move || clock_base));
        for _ in 0..rng.random_range(1..160) {
            let op = OPS[weights.sample(&mut rng)].0;
            apply(&mut reg, op, &mut rng).map_err(|e| format!("run {run}: {e}"))?;
            total_ops += 1;
        }
        let replayed = replay(reg.schema(), reg.journal()).map_err(|e| e.to_string())?;
        ensure!(&replayed == reg.state(), "run {run}: journal replay differs from live state");

        let events: Vec<IngestEvent> = (0..6).map(|n| feed_event(n, true)).collect();
        ingest_events(&mut reg, "feed", &events).map_err(|e| e.to_string())?;
        let version = reg.version();
        let groups = reg.state().groups.len();
        let again = ingest_events(&mut reg, "feed", &events).map_err(|e| e.to_string())?;
        ensure!(again.created.is_empty(), "run {run}: second ingestion created {:?}", again.created);
        ensure!(again.already_linked.len() == 6, "run {run}: {} events recognised", again.already_linked.len());
        ensure!(reg.version() == version && reg.state().groups.len() == groups, "run {run}: re-ingestion changed the registry");
    }
    Ok(format!("500 runs, {total_ops} operations, integrity and idempotent ingestion held"))
}
