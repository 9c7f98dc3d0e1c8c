//! Command line front end: synthetic populations, top-k evaluation, code
//! reports, registry import/export and index snapshots.
//!
//! Every command reads and writes the registry dump format, so a dump from
//! `synth` or `export` can be fed straight into `eval`, `report`, `reindex`
//! or `import`.

mod table;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use earmark_core::eval::{eval_topk, EvalProtocol, EvalReport, Method};
use earmark_core::gallery::{rank_sighting, GalleryBuild};
use earmark_core::index::snapshot::write_snapshot;
use earmark_core::report::{seek_reports, SeekReport};
use earmark_core::synth::{synth_population, SynthParams};
use earmark_core::{ContourConfig, ContourEngine, FusionConfig, RegistryDump, SeekSchema, SeekWeights};
use earmark_registry::Registry;
use serde::{Deserialize, Serialize};

pub use table::render as render_table;

#[derive(Debug, Parser)]
#[command(name = "earmark", version, about = "Elephant re-identification tools")]
pub struct Cli {
    /// SEEK schema file (TOML). The bundled version 1 schema when omitted.
    #[arg(long, global = true)]
    pub schema: Option<PathBuf>,
    /// Matching config (TOML) with optional [fusion], [seek] and [contour]
    /// tables. A server config file works too.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic population as a registry dump.
    Synth(SynthArgs),
    /// Top-k identification accuracy per method.
    Eval(EvalArgs),
    /// Attribute frequencies and within-individual agreement.
    Report(ReportArgs),
    /// Load a dump into a registry database.
    Import(ImportArgs),
    /// Write a registry database out as a dump.
    Export(ExportArgs),
    /// Build a descriptor index snapshot.
    Reindex(ReindexArgs),
    /// Rank one sighting of a dump against every other individual.
    Rank(RankArgs),
    /// Print the active SEEK schema file.
    Schema,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 45)]
    pub individuals: usize,
    #[arg(long, default_value_t = 3)]
    pub sightings_each: usize,
    /// Per-slot probability that a sighting's code differs from the base.
    #[arg(long, default_value_t = 0.1)]
    pub flip_prob: f64,
    /// Share of flipped slots that become wildcards.
    #[arg(long, default_value_t = 0.25)]
    pub wildcard_share: f64,
    /// Contour displacement as a fraction of arc length.
    #[arg(long, default_value_t = 0.02)]
    pub jitter: f64,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dump: PathBuf,
    /// Gallery codes per individual; the rest are queries.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..=2))]
    pub codes_per_individual: u64,
    #[arg(long, value_delimiter = ',', default_value = "seek,curv,hybrid")]
    pub methods: Vec<Method>,
    #[arg(long, value_delimiter = ',', default_value = "1,5,10,15")]
    pub ks: Vec<usize>,
    /// Shuffle sightings before the gallery/query split instead of taking
    /// them oldest first.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the fusion coefficient of the config.
    #[arg(long)]
    pub curv_coefficient: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub dump: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    /// Registry database; created when missing.
    #[arg(long)]
    pub registry: PathBuf,
    #[arg(long)]
    pub dump: PathBuf,
    /// Recorded as the actor of the import.
    #[arg(long, default_value = "cli")]
    pub actor: String,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub registry: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Include the full journal so the dump replays exactly.
    #[arg(long)]
    pub journal: bool,
}

#[derive(Debug, Args)]
pub struct ReindexArgs {
    #[arg(long, conflicts_with = "registry", required_unless_present = "registry")]
    pub dump: Option<PathBuf>,
    #[arg(long)]
    pub registry: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub generation: u64,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub dump: PathBuf,
    /// Sighting id inside the dump.
    #[arg(long)]
    pub sighting: String,
    #[arg(long, default_value_t = 15)]
    pub top_k: usize,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

/// Matching parameters. Unknown tables are ignored so that a server config
/// can be passed as is.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    pub fusion: FusionConfig,
    pub seek: SeekWeights,
    pub contour: ContourConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("schema: {0}")]
    Schema(#[from] earmark_core::seek::SeekError),
    #[error(transparent)]
    Dump(#[from] earmark_core::dump::DumpError),
    #[error(transparent)]
    Synth(#[from] earmark_core::synth::SynthError),
    #[error(transparent)]
    Eval(#[from] earmark_core::eval::EvalError),
    #[error(transparent)]
    Report(#[from] earmark_core::report::ReportError),
    #[error(transparent)]
    Gallery(#[from] earmark_core::gallery::GalleryError),
    #[error(transparent)]
    Index(#[from] earmark_core::index::IndexError),
    #[error(transparent)]
    Registry(#[from] earmark_registry::RegistryError),
    #[error("{0}")]
    Usage(String),
    #[error("output: {0}")]
    Output(#[from] std::io::Error),
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_out(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => Ok(out.write_all(text.as_bytes())?),
    }
}

fn load_dump(path: &Path) -> Result<RegistryDump, CliError> {
    Ok(RegistryDump::from_json(&read(path)?)?)
}

impl Cli {
    pub fn load_schema(&self) -> Result<SeekSchema, CliError> {
        match &self.schema {
            Some(p) => Ok(SeekSchema::from_toml(&read(p)?)?),
            None => Ok(SeekSchema::default_v1()),
        }
    }

    pub fn load_config(&self) -> Result<MatchConfig, CliError> {
        match &self.config {
            Some(p) => toml::from_str(&read(p)?).map_err(|e| CliError::Config(e.to_string())),
            None => Ok(MatchConfig::default()),
        }
    }
}

fn engine(cfg: &MatchConfig) -> Result<ContourEngine, CliError> {
    ContourEngine::new(cfg.contour.clone()).map_err(|e| CliError::Config(e.to_string()))
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Runs one command, writing its primary output to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let schema = cli.load_schema()?;
    let cfg = cli.load_config()?;
    match &cli.command {
        Command::Synth(a) => {
            let params = SynthParams {
                individuals: a.individuals,
                sightings_each: a.sightings_each,
                code_flip_prob: a.flip_prob,
                wildcard_share: a.wildcard_share,
                contour_jitter: a.jitter,
                points_per_contour: a.points,
                seed: a.seed,
            };
            let dump = synth_population(&params, &schema)?;
            write_out(a.out.as_deref(), &dump.to_json(), out)
        }
        Command::Eval(a) => {
            let dump = load_dump(&a.dump)?;
            let mut fusion = cfg.fusion.clone();
            if let Some(c) = a.curv_coefficient {
                fusion.curv_coefficient = c;
            }
            let protocol = EvalProtocol {
                codes_per_individual: a.codes_per_individual as usize,
                methods: a.methods.clone(),
                ks: a.ks.clone(),
                seed: a.seed,
            };
            let report = eval_topk(&dump, &protocol, &schema, &engine(&cfg)?, &cfg.seek, &fusion)?;
            let text = match a.format {
                Format::Json => json(&report),
                Format::Table => eval_table(&report),
            };
            Ok(out.write_all(text.as_bytes())?)
        }
        Command::Report(a) => {
            let report = seek_reports(&load_dump(&a.dump)?, &schema)?;
            let text = match a.format {
                Format::Json => json(&report),
                Format::Table => report_table(&report),
            };
            Ok(out.write_all(text.as_bytes())?)
        }
        Command::Import(a) => {
            let dump = load_dump(&a.dump)?;
            let mut reg = Registry::open(&a.registry, schema)?;
            let summary = reg.import_dump(&a.actor, &dump)?;
            Ok(writeln!(
                out,
                "imported {} individuals, {} sightings{}",
                summary.individuals,
                summary.sightings,
                if summary.replayed { " (journal replayed)" } else { "" }
            )?)
        }
        Command::Export(a) => {
            let reg = Registry::open(&a.registry, schema)?;
            write_out(a.out.as_deref(), &reg.export_dump(a.journal).to_json(), out)
        }
        Command::Reindex(a) => {
            let dump = match (&a.dump, &a.registry) {
                (Some(d), _) => load_dump(d)?,
                (None, Some(r)) => Registry::open(r, schema.clone())?.export_dump(false),
                (None, None) => return Err(CliError::Usage("reindex needs --dump or --registry".into())),
            };
            let build = GalleryBuild::from_dump(&dump, &schema, &engine(&cfg)?)?;
            let index = build
                .index(schema.version, a.generation)?
                .ok_or_else(|| CliError::Usage("no individual has contour descriptors".into()))?;
            write_out(a.out.as_deref(), &write_snapshot(&index)?, out)
        }
        Command::Rank(a) => {
            let mut dump = load_dump(&a.dump)?;
            let query = take_sighting(&mut dump, &a.sighting)
                .ok_or_else(|| CliError::Usage(format!("sighting {} not in dump", a.sighting)))?;
            let engine = engine(&cfg)?;
            let build = GalleryBuild::from_dump(&dump, &schema, &engine)?;
            let index = build.index(schema.version, 1)?;
            let mut ranked = rank_sighting(
                &query,
                &build.gallery,
                index.as_ref(),
                &schema,
                &engine,
                &cfg.seek,
                &cfg.fusion,
            )?;
            ranked.truncate(a.top_k);
            let text = match a.format {
                Format::Json => json(&ranked),
                Format::Table => {
                    let rows: Vec<Vec<String>> = ranked
                        .iter()
                        .map(|m| {
                            vec![
                                m.rank.to_string(),
                                m.individual.to_string(),
                                table::fixed(m.seek_distance, 4),
                                table::fixed(m.contour_score, 4),
                                table::fixed(m.fused_score, 4),
                            ]
                        })
                        .collect();
                    table::render(&["rank", "individual", "seek", "contour", "fused"], &rows)
                }
            };
            Ok(out.write_all(text.as_bytes())?)
        }
        Command::Schema => match &cli.schema {
            Some(p) => Ok(out.write_all(read(p)?.as_bytes())?),
            None => Ok(out.write_all(SeekSchema::default_toml().as_bytes())?),
        },
    }
}

/// Removes a sighting from the dump. Individuals left with no sightings are
/// dropped, so the query's individual may be absent from the gallery.
fn take_sighting(dump: &mut RegistryDump, id: &str) -> Option<earmark_core::dump::DumpSighting> {
    if let Some(i) = dump.unassigned.iter().position(|s| s.id == id) {
        return Some(dump.unassigned.remove(i));
    }
    for ind in dump.individuals.iter_mut() {
        if let Some(i) = ind.sightings.iter().position(|s| s.id == id) {
            let s = ind.sightings.remove(i);
            dump.individuals.retain(|d| !d.sightings.is_empty());
            return Some(s);
        }
    }
    None
}

pub fn eval_table(r: &EvalReport) -> String {
    let mut headers = vec!["method".to_string()];
    headers.extend(r.protocol.ks.iter().map(|k| format!("top-{k}")));
    let rows: Vec<Vec<String>> = r
        .methods
        .iter()
        .map(|m| {
            let mut row = vec![m.method.to_string()];
            row.extend(m.accuracy.iter().map(|(_, a)| table::fixed(*a, 3)));
            row
        })
        .collect();
    let h: Vec<&str> = headers.iter().map(String::as_str).collect();
    format!(
        "gallery: {} individuals, {} descriptors, {} codes each; queries: {}\n\n{}",
        r.gallery_individuals,
        r.gallery_descriptors,
        r.protocol.codes_per_individual,
        r.queries,
        table::render(&h, &rows)
    )
}

pub fn report_table(r: &SeekReport) -> String {
    let mut out = format!("codes: {}\n\n", r.codes);
    let mut rows = Vec::new();
    for f in &r.frequencies {
        for (value, share) in &f.fractions {
            rows.push(vec![
                f.slot.to_string(),
                value.clone(),
                f.counts[value].to_string(),
                table::fixed(*share, 3),
            ]);
        }
    }
    out.push_str(&table::render(&["slot", "value", "count", "share"], &rows));
    match &r.agreement {
        Some(a) => {
            out.push_str(&format!("\nagreement over {} within-individual pairs\n\n", a.pairs));
            let rows: Vec<Vec<String>> = earmark_core::seek::Slot::ALL
                .iter()
                .map(|s| vec![s.to_string(), table::fixed(a.get(*s), 3)])
                .collect();
            out.push_str(&table::render(&["slot", "agreement"], &rows));
        }
        None => out.push_str("\nagreement: no individual has two codes\n"),
    }
    out
}
