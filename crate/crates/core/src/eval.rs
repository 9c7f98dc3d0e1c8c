//! Top-k identification accuracy over a registry dump.
//!
//! Each individual contributes its first `codes_per_individual` coded
//! sightings to the gallery; every further coded sighting is a held-out
//! query. Sightings are taken oldest first, or in a seeded shuffle when a
//! seed is given. A query is a hit at `k` when its true individual ranks
//! within the first `k` candidates.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contour::{ContourEngine, ContourError, Descriptor};
use crate::dump::{DumpError, DumpSighting, RegistryDump};
use crate::index::{
    lnbnn_score_with_policy, rank_candidates, Candidate, DescriptorIndex, FusionConfig, IndexError,
    IndividualId,
};
use crate::par::par_map;
use crate::seek::{seek_distance, SeekCode, SeekError, SeekSchema, SeekWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Seek,
    Curv,
    Hybrid,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Seek, Method::Curv, Method::Hybrid];

    pub fn name(self) -> &'static str {
        match self {
            Method::Seek => "seek",
            Method::Curv => "curv",
            Method::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method {s:?} (expected seek, curv or hybrid)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalProtocol {
    pub codes_per_individual: usize,
    pub methods: Vec<Method>,
    pub ks: Vec<usize>,
    /// Shuffles each individual's sightings before the gallery/query split.
    pub seed: Option<u64>,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        EvalProtocol {
            codes_per_individual: 2,
            methods: Method::ALL.to_vec(),
            ks: vec![1, 5, 10, 15],
            seed: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid protocol: {0}")]
    InvalidProtocol(&'static str),
    #[error(transparent)]
    Dump(#[from] DumpError),
    #[error(transparent)]
    Seek(#[from] SeekError),
    #[error("sighting {sighting}: {source}")]
    Contour {
        sighting: String,
        #[source]
        source: ContourError,
    },
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodAccuracy {
    pub method: Method,
    /// `(k, accuracy)` in the protocol's k order.
    pub accuracy: Vec<(usize, f64)>,
}

impl MethodAccuracy {
    pub fn at(&self, k: usize) -> Option<f64> {
        self.accuracy.iter().find(|(kk, _)| *kk == k).map(|(_, a)| *a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub sighting: String,
    pub truth: IndividualId,
    /// 1-based rank of the true individual per method.
    pub ranks: BTreeMap<Method, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: EvalProtocol,
    pub gallery_individuals: usize,
    pub gallery_descriptors: usize,
    pub queries: usize,
    pub methods: Vec<MethodAccuracy>,
    pub outcomes: Vec<QueryOutcome>,
}

impl EvalReport {
    pub fn method(&self, method: Method) -> Option<&MethodAccuracy> {
        self.methods.iter().find(|m| m.method == method)
    }
}

struct Coded<'a> {
    sighting: &'a DumpSighting,
    code: SeekCode,
}

struct QueryItem<'a> {
    truth: &'a IndividualId,
    sighting: &'a DumpSighting,
    code: SeekCode,
}

pub fn eval_topk(
    dump: &RegistryDump,
    protocol: &EvalProtocol,
    schema: &SeekSchema,
    engine: &ContourEngine,
    weights: &SeekWeights,
    fusion: &FusionConfig,
) -> Result<EvalReport, EvalError> {
    let g = protocol.codes_per_individual;
    if !(1..=2).contains(&g) {
        return Err(EvalError::InvalidProtocol("codes_per_individual must be 1 or 2"));
    }
    if protocol.methods.is_empty() || protocol.ks.is_empty() || protocol.ks.contains(&0) {
        return Err(EvalError::InvalidProtocol("need at least one method and positive k values"));
    }
    dump.check_schema(schema)?;

    let mut rng = protocol.seed.map(ChaCha8Rng::seed_from_u64);
    let mut gallery: Vec<(&IndividualId, Vec<Coded>)> = Vec::new();
    let mut queries: Vec<QueryItem> = Vec::new();
    for ind in &dump.individuals {
        let mut coded = Vec::new();
        for s in &ind.sightings {
            if let Some(code) = s.code(schema)? {
                coded.push(Coded { sighting: s, code });
            }
        }
        if coded.is_empty() {
            continue;
        }
        coded.sort_by(|a, b| {
            a.sighting
                .timestamp
                .cmp(&b.sighting.timestamp)
                .then_with(|| a.sighting.id.cmp(&b.sighting.id))
        });
        if let Some(rng) = rng.as_mut() {
            coded.shuffle(rng);
        }
        let held_out = coded.split_off(g.min(coded.len()));
        for q in held_out {
            queries.push(QueryItem {
                truth: &ind.id,
                sighting: q.sighting,
                code: q.code,
            });
        }
        gallery.push((&ind.id, coded));
    }
    if queries.is_empty() {
        return Err(EvalError::InsufficientData(format!(
            "no individual has more than {g} coded sightings"
        )));
    }

    let describe = |s: &DumpSighting| -> Result<Vec<Descriptor>, EvalError> {
        engine.describe_all(&s.contours()).map_err(|source| EvalError::Contour {
            sighting: s.id.clone(),
            source,
        })
    };
    let gallery_sightings: Vec<&DumpSighting> = gallery
        .iter()
        .flat_map(|(_, cs)| cs.iter().map(|c| c.sighting))
        .collect();
    let gallery_descriptors = par_map(&gallery_sightings, |s| describe(s))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let query_descriptors = par_map(&queries, |q| describe(q.sighting))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let mut per_individual: Vec<(IndividualId, Vec<Descriptor>)> = Vec::new();
    let mut cursor = gallery_descriptors.into_iter();
    for (id, coded) in &gallery {
        let mut all = Vec::new();
        for _ in coded {
            all.extend(cursor.next().expect("one entry per gallery sighting"));
        }
        per_individual.push(((*id).clone(), all));
    }
    let index = match DescriptorIndex::build(&per_individual, schema.version) {
        Ok(idx) => Some(idx),
        Err(IndexError::EmptyGallery) => None,
        Err(e) => return Err(e.into()),
    };

    let jobs: Vec<(&QueryItem, &Vec<Descriptor>)> = queries.iter().zip(&query_descriptors).collect();
    let outcomes = par_map(&jobs, |(q, descriptors)| {
        score_query(q, descriptors, &gallery, index.as_ref(), protocol, weights, fusion)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let methods = protocol
        .methods
        .iter()
        .map(|&method| MethodAccuracy {
            method,
            accuracy: protocol
                .ks
                .iter()
                .map(|&k| {
                    let hits = outcomes.iter().filter(|o| o.ranks[&method] <= k).count();
                    (k, hits as f64 / outcomes.len() as f64)
                })
                .collect(),
        })
        .collect();

    Ok(EvalReport {
        protocol: protocol.clone(),
        gallery_individuals: gallery.len(),
        gallery_descriptors: index.as_ref().map_or(0, DescriptorIndex::len),
        queries: outcomes.len(),
        methods,
        outcomes,
    })
}

fn score_query(
    q: &QueryItem,
    descriptors: &[Descriptor],
    gallery: &[(&IndividualId, Vec<Coded>)],
    index: Option<&DescriptorIndex>,
    protocol: &EvalProtocol,
    weights: &SeekWeights,
    fusion: &FusionConfig,
) -> Result<QueryOutcome, EvalError> {
    let contour = match index {
        Some(idx) if !descriptors.is_empty() => {
            match lnbnn_score_with_policy(descriptors, idx, fusion.lnbnn_k, fusion.side_policy) {
                Ok(s) => s,
                Err(IndexError::IndexTooSmall { .. }) => BTreeMap::new(),
                Err(e) => return Err(e.into()),
            }
        }
        _ => BTreeMap::new(),
    };
    let mut seek = Vec::with_capacity(gallery.len());
    for (id, coded) in gallery {
        let mut best = f64::INFINITY;
        for c in coded {
            best = best.min(seek_distance(&q.code, &c.code, weights)?);
        }
        seek.push(((*id).clone(), best, contour.get(*id).copied().unwrap_or(0.0)));
    }

    let mut ranks = BTreeMap::new();
    for &method in &protocol.methods {
        let (candidates, cfg) = method_candidates(method, &seek, fusion);
        let ranked = rank_candidates(candidates, &cfg)?;
        let rank = ranked
            .iter()
            .find(|m| &m.individual == q.truth)
            .map_or(usize::MAX, |m| m.rank);
        ranks.insert(method, rank);
    }
    Ok(QueryOutcome {
        sighting: q.sighting.id.clone(),
        truth: q.truth.clone(),
        ranks,
    })
}

/// Candidates and fusion settings that make [`rank_candidates`] produce the
/// ranking of one method.
pub fn method_candidates(
    method: Method,
    scores: &[(IndividualId, f64, f64)],
    fusion: &FusionConfig,
) -> (Vec<Candidate>, FusionConfig) {
    let candidates = scores.iter().map(|(id, seek, curv)| {
        let (seek_distance, contour_score) = match method {
            Method::Seek => (*seek, 0.0),
            Method::Curv => (0.0, *curv),
            Method::Hybrid => (*seek, *curv),
        };
        Candidate {
            individual: id.clone(),
            seek_distance,
            contour_score,
        }
    });
    let cfg = match method {
        Method::Curv => FusionConfig {
            curv_coefficient: 1.0,
            ..fusion.clone()
        },
        _ => fusion.clone(),
    };
    (candidates.collect(), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dump::{DumpContour, DumpIndividual};
    use crate::synth::{synth_population, SynthParams};

    fn tiny_dump(codes: &[&[&str]]) -> RegistryDump {
        let mut dump = RegistryDump::new(1);
        for (i, cs) in codes.iter().enumerate() {
            dump.individuals.push(DumpIndividual {
                id: IndividualId(format!("ind-{i}")),
                name: String::new(),
                sightings: cs
                    .iter()
                    .enumerate()
                    .map(|(j, c)| DumpSighting {
                        id: format!("s-{i}-{j}"),
                        timestamp: format!("2021-01-{:02}T00:00:00Z", j + 1).parse().unwrap(),
                        seek: Some(c.to_string()),
                        contours: Vec::<DumpContour>::new(),
                    })
                    .collect(),
            });
        }
        dump
    }

    fn run(dump: &RegistryDump, protocol: &EvalProtocol) -> Result<EvalReport, EvalError> {
        eval_topk(
            dump,
            protocol,
            &SeekSchema::default_v1(),
            &ContourEngine::default(),
            &SeekWeights::default(),
            &FusionConfig::default(),
        )
    }

    #[test]
    fn duplicates_retrieve_at_top_one() {
        let dump = tiny_dump(&[
            &["F:AD:T2:U:U:N1:U:X0", "F:AD:T2:U:U:N1:U:X0"],
            &["M:JUV:T0:U:H2:U:U:X0", "M:JUV:T0:U:H2:U:U:X0"],
            &["M:AD:TL:T3:U:U:U:X1", "M:AD:TL:T3:U:U:U:X1"],
        ]);
        let protocol = EvalProtocol {
            codes_per_individual: 1,
            methods: vec![Method::Seek, Method::Hybrid],
            ks: vec![1],
            seed: None,
        };
        let report = run(&dump, &protocol).unwrap();
        assert_eq!(report.queries, 3);
        for m in &report.methods {
            assert_eq!(m.at(1), Some(1.0));
        }
    }

    #[test]
    fn k_beyond_gallery_is_perfect() {
        let dump = tiny_dump(&[
            &["F:AD:T2:U:U:N1:U:X0", "M:CALF:T0:U:U:U:U:X2"],
            &["M:JUV:T0:U:H2:U:U:X0", "F:AD:T2:U:U:N1:U:X0"],
        ]);
        let protocol = EvalProtocol {
            codes_per_individual: 1,
            methods: vec![Method::Seek],
            ks: vec![1, 2, 50],
            seed: None,
        };
        let report = run(&dump, &protocol).unwrap();
        assert_eq!(report.methods[0].at(50), Some(1.0));
        assert_eq!(report.methods[0].at(2), Some(1.0));
    }

    #[test]
    fn insufficient_data() {
        let dump = tiny_dump(&[&["F:AD:T2:U:U:N1:U:X0", "F:AD:T2:U:U:N1:U:X0"]]);
        assert!(matches!(
            run(&dump, &EvalProtocol::default()),
            Err(EvalError::InsufficientData(_))
        ));
    }

    #[test]
    fn invalid_protocol() {
        let dump = tiny_dump(&[&["F:AD:T2:U:U:N1:U:X0"; 4]]);
        let bad = EvalProtocol {
            codes_per_individual: 3,
            ..EvalProtocol::default()
        };
        assert!(matches!(run(&dump, &bad), Err(EvalError::InvalidProtocol(_))));
    }

    #[test]
    fn noiseless_population_is_perfect() {
        let schema = SeekSchema::default_v1();
        let params = SynthParams {
            individuals: 8,
            sightings_each: 3,
            code_flip_prob: 0.0,
            contour_jitter: 0.0,
            seed: 5,
            ..SynthParams::default()
        };
        let dump = synth_population(&params, &schema).unwrap();
        let report = run(&dump, &EvalProtocol::default()).unwrap();
        assert_eq!(report.queries, 8);
        for m in &report.methods {
            assert_eq!(m.at(1), Some(1.0), "{}", m.method);
        }
    }

    #[test]
    fn seeded_split_is_reproducible() {
        let schema = SeekSchema::default_v1();
        let params = SynthParams {
            individuals: 6,
            sightings_each: 4,
            seed: 9,
            ..SynthParams::default()
        };
        let dump = synth_population(&params, &schema).unwrap();
        let protocol = EvalProtocol {
            seed: Some(3),
            ..EvalProtocol::default()
        };
        let a = run(&dump, &protocol).unwrap();
        let b = run(&dump, &protocol).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.queries, 12);
    }

    #[test]
    fn method_names_parse() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("both".parse::<Method>().is_err());
    }
}
