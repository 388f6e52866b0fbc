//! Command implementations behind the `etc-cbir` binary.
//!
//! Each command is a plain function over parsed arguments so that tests can
//! drive the same code paths as the binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use etc_cbir::codec::{jpeg_round_trip, load_image, save_image};
use etc_cbir::descriptor::{patch_descriptors, word_histograms};
use etc_cbir::eval::{fmt_g17, run_scenario, Scenario, ScenarioConfig, ScenarioReport};
use etc_cbir::manifest::{Manifest, ManifestRow};
use etc_cbir::store::{
    decode_keys, encode_keys, read_file, sha256_hex, write_atomic, CodebookArtifact, DescriptorStore,
    LOG_BASE,
};
use etc_cbir::synthetic::{generate_corpus, SyntheticSpec};
use etc_cbir::{
    canonicalize_patch_set, compute_corpus_stats, decrypt, describe, encrypt, kmeans, weight,
    ClusteringConfig, ImageBuffer, Index, IndexEntry, KeySet,
};

mod error;

pub use error::CliError;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "etc-cbir", version, about = "Retrieval over plain and block-scrambled (EtC) images")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encrypt one image into an EtC image.
    Encrypt(EncryptArgs),
    /// Decrypt an EtC image with its key file.
    Decrypt(DecryptArgs),
    /// Encrypt every image of a manifest with per-image keys.
    EncryptManifest(EncryptManifestArgs),
    /// Train a codebook on the images of a manifest.
    BuildCodebook(BuildCodebookArgs),
    /// Describe and index the images of a manifest.
    Index(IndexArgs),
    /// Rank indexed images against a query image.
    Query(QueryArgs),
    /// Run the stored/query scenarios end to end and report mAP.
    Evaluate(EvaluateArgs),
    /// Write a synthetic grouped corpus and its manifest.
    Synth(SynthArgs),
}

/// Accepts decimal or `0x`-prefixed hexadecimal.
pub fn parse_seed(s: &str) -> Result<u64, String> {
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| format!("invalid seed `{s}`: {e}"))
}

fn parse_quality(s: &str) -> Result<u8, String> {
    match s.parse::<u8>() {
        Ok(q @ 1..=100) => Ok(q),
        _ => Err(format!("JPEG quality must be 1..=100, got `{s}`")),
    }
}

#[derive(Debug, Args)]
pub struct EncryptArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    /// Key file. Read when no master seed is given, otherwise written.
    #[arg(long)]
    pub key: PathBuf,
    /// Derive the keys from this master seed instead of reading them.
    #[arg(long, value_parser = parse_seed)]
    pub master_key_seed: Option<u64>,
    /// Image index used with --master-key-seed.
    #[arg(long, default_value_t = 0)]
    pub image_index: u64,
}

#[derive(Debug, Args)]
pub struct DecryptArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    #[arg(long)]
    pub key: PathBuf,
}

#[derive(Debug, Args)]
pub struct EncryptManifestArgs {
    pub manifest: PathBuf,
    #[arg(long, value_parser = parse_seed)]
    pub master_key_seed: u64,
    /// Directory for the EtC images and their manifest.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Directory for per-image key files (defaults to <out-dir>/keys).
    #[arg(long)]
    pub keys_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildCodebookArgs {
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 256)]
    pub codebook_size: usize,
    #[arg(long, value_parser = parse_seed, default_value = "0")]
    pub seed: u64,
    #[arg(long, default_value_t = ClusteringConfig::DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    /// Route images through JPEG at this quality before description.
    #[arg(long, value_parser = parse_quality)]
    pub jpeg_quality: Option<u8>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    pub manifest: PathBuf,
    #[arg(long)]
    pub codebook: PathBuf,
    #[arg(long, value_parser = parse_quality)]
    pub jpeg_quality: Option<u8>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    pub index: PathBuf,
    pub image: PathBuf,
    /// Codebook the index was built with; its hash must match.
    #[arg(long)]
    pub codebook: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 256)]
    pub codebook_size: usize,
    #[arg(long, value_parser = parse_seed, default_value = "0")]
    pub seed: u64,
    #[arg(long, default_value_t = ClusteringConfig::DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    /// Master seed of the stored images' keys.
    #[arg(long, value_parser = parse_seed, default_value = "0x5eed000000000001")]
    pub master_key_seed: u64,
    /// Master seed of the query images' keys; must differ from the stored one.
    #[arg(long, value_parser = parse_seed, default_value = "0x5eed000000000002")]
    pub query_key_seed: u64,
    /// `all` or one of plain-vs-plain, etc-vs-etc, etc-vs-plain, plain-vs-etc
    /// (stored kind first).
    #[arg(long, default_value = "all")]
    pub scenario: String,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub count_self_match: bool,
    #[arg(long, value_parser = parse_quality)]
    pub jpeg_quality: Option<u8>,
    /// Also write the TSV report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Write the configuration echo here instead of stderr.
    #[arg(long)]
    pub config_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    pub out_dir: PathBuf,
    #[arg(long, value_parser = parse_seed, default_value = "2017")]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub groups: usize,
    #[arg(long, default_value_t = 4)]
    pub per_group: usize,
    #[arg(long, default_value_t = 100)]
    pub width: usize,
    #[arg(long, default_value_t = 84)]
    pub height: usize,
}

pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Encrypt(a) => cmd_encrypt(&a),
        Command::Decrypt(a) => cmd_decrypt(&a),
        Command::EncryptManifest(a) => cmd_encrypt_manifest(&a),
        Command::BuildCodebook(a) => cmd_build_codebook(&a),
        Command::Index(a) => cmd_index(&a),
        Command::Query(a) => cmd_query(&a, out),
        Command::Evaluate(a) => cmd_evaluate(&a, out, err),
        Command::Synth(a) => cmd_synth(&a),
    }
}

fn read_keys(path: &Path) -> CliResult<KeySet> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::Validation(format!("{}: key file is not UTF-8", path.display())))?;
    Ok(decode_keys(&text)?)
}

pub fn cmd_encrypt(a: &EncryptArgs) -> CliResult<()> {
    let img = load_image(&a.input)?;
    let keys = match a.master_key_seed {
        Some(master) => {
            let keys = KeySet::derive(master, a.image_index);
            write_atomic(&a.key, encode_keys(&keys).as_bytes())?;
            keys
        }
        None => read_keys(&a.key)?,
    };
    save_image(&a.output, &encrypt(&img, keys)?)?;
    Ok(())
}

pub fn cmd_decrypt(a: &DecryptArgs) -> CliResult<()> {
    let keys = read_keys(&a.key)?;
    let etc = load_image(&a.input)?;
    save_image(&a.output, &decrypt(&etc, keys)?)?;
    Ok(())
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Per-image keys come from `KeySet::derive(master, row_index)`.
pub fn cmd_encrypt_manifest(a: &EncryptManifestArgs) -> CliResult<()> {
    let manifest = Manifest::load(&a.manifest)?;
    let keys_dir = a.keys_dir.clone().unwrap_or_else(|| a.out_dir.join("keys"));
    create_dir(&a.out_dir)?;
    create_dir(&keys_dir)?;
    let mut rows = Vec::with_capacity(manifest.len());
    for (i, row) in manifest.rows.iter().enumerate() {
        let keys = KeySet::derive(a.master_key_seed, i as u64);
        let img = load_image(&row.path)?;
        let out_path = a.out_dir.join(format!("{}.png", row.image_id));
        save_image(&out_path, &encrypt(&img, keys)?)?;
        write_atomic(
            &keys_dir.join(format!("{}.key.json", row.image_id)),
            encode_keys(&keys).as_bytes(),
        )?;
        rows.push(ManifestRow {
            path: out_path,
            ..row.clone()
        });
    }
    let out_manifest = Manifest { rows };
    write_atomic(
        &a.out_dir.join("manifest.tsv"),
        out_manifest.to_tsv(&a.out_dir).as_bytes(),
    )?;
    Ok(())
}

fn load_images(manifest: &Manifest, jpeg: Option<u8>) -> CliResult<Vec<ImageBuffer>> {
    let corpus = manifest.load_corpus()?;
    corpus
        .into_iter()
        .map(|c| match jpeg {
            Some(q) => jpeg_round_trip(&c.image.crop16(), q).map_err(CliError::from),
            None => Ok(c.image),
        })
        .collect()
}

/// Trains the codebook and records the training corpus statistics.
///
/// The file depends only on the pixel content of the images, not on their
/// paths or order, so a plain manifest and its encrypted twin produce the
/// same bytes.
pub fn cmd_build_codebook(a: &BuildCodebookArgs) -> CliResult<()> {
    let manifest = Manifest::load(&a.manifest)?;
    if manifest.is_empty() {
        return Err(CliError::Validation("manifest lists no images".into()));
    }
    let images = load_images(&manifest, a.jpeg_quality)?;
    let mut patches = Vec::new();
    for img in &images {
        patches.extend(patch_descriptors(img)?);
    }
    let cfg = ClusteringConfig {
        max_iters: a.max_iters,
        ..ClusteringConfig::new(a.codebook_size, a.seed)
    };
    let codebook = kmeans(&canonicalize_patch_set(patches), &cfg)?;
    let stats = compute_corpus_stats(&word_histograms(&images, &codebook)?)?;
    let artifact = CodebookArtifact { codebook, stats };
    write_atomic(&a.out, &artifact.encode())?;
    Ok(())
}

pub fn cmd_index(a: &IndexArgs) -> CliResult<()> {
    let cb_bytes = read_file(&a.codebook)?;
    let artifact = CodebookArtifact::decode(&cb_bytes)?;
    let manifest = Manifest::load(&a.manifest)?;
    if manifest.is_empty() {
        return Err(CliError::Validation("manifest lists no images".into()));
    }
    let images = load_images(&manifest, a.jpeg_quality)?;
    let hists = word_histograms(&images, &artifact.codebook)?;
    let stats = compute_corpus_stats(&hists)?;
    let entries = manifest
        .rows
        .iter()
        .zip(&hists)
        .map(|(row, h)| {
            Ok(IndexEntry {
                image_id: row.image_id.clone(),
                owner_id: row.owner_id.clone(),
                descriptor: weight(h, &stats)?,
            })
        })
        .collect::<etc_cbir::Result<Vec<_>>>()?;
    let store = DescriptorStore {
        codebook_sha256: sha256_hex(&cb_bytes),
        stats,
        index: Index::build(entries)?,
    };
    write_atomic(&a.out, &store.encode())?;
    Ok(())
}

/// Prints `rank, image id, owner id, distance` rows.
pub fn cmd_query(a: &QueryArgs, out: &mut dyn Write) -> CliResult<()> {
    if a.top_k == 0 {
        return Err(CliError::Usage("--top-k must be at least 1".into()));
    }
    let store = DescriptorStore::decode(&read_file(&a.index)?)?;
    let cb_bytes = read_file(&a.codebook)?;
    store.verify_codebook(&cb_bytes)?;
    let artifact = CodebookArtifact::decode(&cb_bytes)?;
    let img = load_image(&a.image)?;
    let q = describe(&img, &artifact.codebook, &store.stats)?;
    let mut text = String::from("# rank\timage_id\towner_id\tdistance\n");
    for hit in store.index.query(&q, a.top_k) {
        text.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            hit.rank,
            hit.image_id,
            hit.owner_id,
            fmt_g17(hit.distance)
        ));
    }
    out.write_all(text.as_bytes()).map_err(CliError::stdout)
}

/// Configuration echo written next to every evaluation report.
#[derive(Debug, Serialize)]
pub struct RunConfig {
    pub codebook_size: usize,
    pub seed: String,
    pub max_iters: usize,
    pub tol: f64,
    pub master_key_seed: String,
    pub query_key_seed: String,
    pub log_base: &'static str,
    pub count_self_match: bool,
    pub jpeg_quality: Option<u8>,
    pub scenarios: Vec<String>,
    pub results: Vec<ScenarioSummary>,
}

#[derive(Debug, Serialize)]
pub struct ScenarioSummary {
    pub scenario: String,
    pub label: String,
    pub map: f64,
    pub stored: usize,
    pub queries: usize,
    pub index_digest: String,
}

pub fn evaluate(a: &EvaluateArgs) -> CliResult<(Vec<ScenarioReport>, RunConfig)> {
    let scenarios: Vec<Scenario> = if a.scenario == "all" {
        vec![Scenario::PLAIN_VS_PLAIN, Scenario::ETC_VS_ETC, Scenario::ETC_VS_PLAIN, Scenario::PLAIN_VS_ETC]
    } else {
        vec![Scenario::from_slug(&a.scenario)
            .ok_or_else(|| CliError::Usage(format!("unknown scenario `{}`", a.scenario)))?]
    };
    let clustering = ClusteringConfig {
        max_iters: a.max_iters,
        ..ClusteringConfig::new(a.codebook_size, a.seed)
    };
    let manifest = Manifest::load(&a.manifest)?;
    let corpus = manifest.load_corpus()?;
    let mut reports = Vec::with_capacity(scenarios.len());
    for &scenario in &scenarios {
        let cfg = ScenarioConfig {
            scenario,
            clustering,
            store_key_seed: a.master_key_seed,
            query_key_seed: a.query_key_seed,
            count_self_match: a.count_self_match,
            jpeg_quality: a.jpeg_quality,
        };
        reports.push(run_scenario(&corpus, &cfg)?);
    }
    let config = RunConfig {
        codebook_size: a.codebook_size,
        seed: format!("{:016x}", a.seed),
        max_iters: a.max_iters,
        tol: clustering.tol,
        master_key_seed: format!("{:016x}", a.master_key_seed),
        query_key_seed: format!("{:016x}", a.query_key_seed),
        log_base: LOG_BASE,
        count_self_match: a.count_self_match,
        jpeg_quality: a.jpeg_quality,
        scenarios: scenarios.iter().map(Scenario::slug).collect(),
        results: reports
            .iter()
            .map(|r| ScenarioSummary {
                scenario: r.config.scenario.slug(),
                label: r.config.scenario.to_string(),
                map: r.map,
                stored: r.stored,
                queries: r.queries.len(),
                index_digest: r.index_digest.clone(),
            })
            .collect(),
    };
    Ok((reports, config))
}

pub fn cmd_evaluate(a: &EvaluateArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let (reports, config) = evaluate(a)?;
    let tsv: String = reports.iter().map(ScenarioReport::to_tsv).collect();
    let mut json = serde_json::to_string_pretty(&config).expect("run config serializes");
    json.push('\n');
    if let Some(path) = &a.report {
        write_atomic(path, tsv.as_bytes())?;
    }
    match &a.config_out {
        Some(path) => write_atomic(path, json.as_bytes())?,
        None => err.write_all(json.as_bytes()).map_err(CliError::stdout)?,
    }
    out.write_all(tsv.as_bytes()).map_err(CliError::stdout)
}

pub fn cmd_synth(a: &SynthArgs) -> CliResult<()> {
    if a.groups == 0 || a.per_group == 0 {
        return Err(CliError::Usage("--groups and --per-group must be positive".into()));
    }
    if a.width < 16 || a.height < 16 {
        return Err(CliError::Usage("synthetic images must be at least 16x16".into()));
    }
    create_dir(&a.out_dir)?;
    let corpus = generate_corpus(&SyntheticSpec {
        groups: a.groups,
        per_group: a.per_group,
        width: a.width,
        height: a.height,
        seed: a.seed,
    });
    let mut rows = Vec::with_capacity(corpus.len());
    for c in &corpus {
        let path = a.out_dir.join(format!("{}.png", c.image_id));
        save_image(&path, &c.image)?;
        rows.push(ManifestRow {
            path,
            image_id: c.image_id.clone(),
            group_id: c.group_id.clone(),
            owner_id: c.owner_id.clone(),
            query: c.is_query,
        });
    }
    let manifest = Manifest { rows };
    write_atomic(&a.out_dir.join("manifest.tsv"), manifest.to_tsv(&a.out_dir).as_bytes())?;
    Ok(())
}
