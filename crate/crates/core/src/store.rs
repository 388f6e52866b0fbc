//! On-disk artifacts: key files, codebook containers and descriptor stores.
//!
//! Floating-point values are written as the 16 lowercase hex digits of their
//! IEEE-754 bit pattern, so every artifact reloads bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::codebook::{Codebook, Provenance};
use crate::crypto::KeySet;
use crate::descriptor::{CorpusStats, WeightedDescriptor};
use crate::error::{Error, Result};
use crate::retrieval::{Index, IndexEntry};
use crate::scd::{ScdVector, SCD_LEN};

pub const FORMAT_VERSION: u32 = 1;
const CODEBOOK_FORMAT: &str = "etc-cbir/codebook";
const STORE_FORMAT: &str = "etc-cbir/descriptor-store";
/// Logarithm used by the tf-idf weighting, recorded in every artifact.
pub const LOG_BASE: &str = "e";

pub fn u64_to_hex(v: u64) -> String {
    format!("{v:016x}")
}

pub fn hex_to_u64(s: &str) -> Result<u64> {
    if s.len() != 16 || !s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
        return Err(Error::format("hex word", format!("`{s}` is not 16 lowercase hex digits")));
    }
    u64::from_str_radix(s, 16).map_err(|e| Error::format("hex word", e.to_string()))
}

fn floats_to_hex(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 16);
    for v in values {
        s.push_str(&u64_to_hex(v.to_bits()));
    }
    s
}

fn hex_to_floats(s: &str, expected: usize) -> Result<Vec<f64>> {
    if s.len() != expected * 16 {
        return Err(Error::format(
            "float vector",
            format!("expected {} hex digits, found {}", expected * 16, s.len()),
        ));
    }
    (0..expected)
        .map(|i| hex_to_u64(&s[i * 16..(i + 1) * 16]).map(f64::from_bits))
        .collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::Validation(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

#[derive(Serialize, Deserialize)]
struct KeyFile {
    k1: String,
    k2: String,
}

/// `{"k1":"<16 hex>","k2":"<16 hex>"}` followed by a newline.
pub fn encode_keys(keys: &KeySet) -> String {
    format!(
        "{{\"k1\":\"{}\",\"k2\":\"{}\"}}\n",
        u64_to_hex(keys.k1),
        u64_to_hex(keys.k2)
    )
}

pub fn decode_keys(text: &str) -> Result<KeySet> {
    let kf: KeyFile =
        serde_json::from_str(text).map_err(|e| Error::format("key file", e.to_string()))?;
    Ok(KeySet::new(hex_to_u64(&kf.k1)?, hex_to_u64(&kf.k2)?))
}

#[derive(Serialize, Deserialize)]
struct ProvenanceRecord {
    seed: String,
    max_iters: usize,
    tol: String,
    iterations: usize,
    converged: bool,
    patches: usize,
}

#[derive(Serialize, Deserialize)]
struct StatsRecord {
    n: u64,
    df: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct CodebookRecord {
    format: String,
    version: u32,
    m: usize,
    dim: usize,
    log_base: String,
    provenance: ProvenanceRecord,
    stats: StatsRecord,
    words: Vec<String>,
}

/// A codebook together with the statistics of the corpus it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookArtifact {
    pub codebook: Codebook,
    pub stats: CorpusStats,
}

impl CodebookArtifact {
    pub fn encode(&self) -> Vec<u8> {
        let p = self.codebook.provenance();
        let record = CodebookRecord {
            format: CODEBOOK_FORMAT.into(),
            version: FORMAT_VERSION,
            m: self.codebook.m(),
            dim: SCD_LEN,
            log_base: LOG_BASE.into(),
            provenance: ProvenanceRecord {
                seed: u64_to_hex(p.seed),
                max_iters: p.max_iters,
                tol: u64_to_hex(p.tol.to_bits()),
                iterations: p.iterations,
                converged: p.converged,
                patches: p.patches,
            },
            stats: StatsRecord {
                n: self.stats.n,
                df: self.stats.df.clone(),
            },
            words: self.codebook.words().iter().map(|w| floats_to_hex(&w.0)).collect(),
        };
        to_json(&record)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let r: CodebookRecord = serde_json::from_slice(bytes)
            .map_err(|e| Error::format("codebook file", e.to_string()))?;
        check_header("codebook file", &r.format, CODEBOOK_FORMAT, r.version, &r.log_base)?;
        if r.dim != SCD_LEN {
            return Err(Error::format("codebook file", format!("dimension {} is not {SCD_LEN}", r.dim)));
        }
        if r.words.len() != r.m || r.stats.df.len() != r.m {
            return Err(Error::format("codebook file", "word or df count does not match m"));
        }
        let words = r
            .words
            .iter()
            .map(|w| {
                let v = hex_to_floats(w, SCD_LEN)?;
                let mut a = [0.0; SCD_LEN];
                a.copy_from_slice(&v);
                Ok(ScdVector(a))
            })
            .collect::<Result<Vec<_>>>()?;
        let provenance = Provenance {
            seed: hex_to_u64(&r.provenance.seed)?,
            max_iters: r.provenance.max_iters,
            tol: f64::from_bits(hex_to_u64(&r.provenance.tol)?),
            iterations: r.provenance.iterations,
            converged: r.provenance.converged,
            patches: r.provenance.patches,
        };
        Ok(Self {
            codebook: Codebook::new(words, provenance)?,
            stats: CorpusStats {
                n: r.stats.n,
                df: r.stats.df,
            },
        })
    }
}

#[derive(Serialize, Deserialize)]
struct EntryRecord {
    id: String,
    owner: String,
    values: String,
}

#[derive(Serialize, Deserialize)]
struct StoreRecord {
    format: String,
    version: u32,
    m: usize,
    log_base: String,
    codebook_sha256: String,
    stats: StatsRecord,
    entries: Vec<EntryRecord>,
}

/// Indexed descriptors plus the statistics and codebook they depend on.
#[derive(Debug, Clone)]
pub struct DescriptorStore {
    pub codebook_sha256: String,
    pub stats: CorpusStats,
    pub index: Index,
}

impl DescriptorStore {
    pub fn encode(&self) -> Vec<u8> {
        let record = StoreRecord {
            format: STORE_FORMAT.into(),
            version: FORMAT_VERSION,
            m: self.stats.m(),
            log_base: LOG_BASE.into(),
            codebook_sha256: self.codebook_sha256.clone(),
            stats: StatsRecord {
                n: self.stats.n,
                df: self.stats.df.clone(),
            },
            entries: self
                .index
                .entries()
                .iter()
                .map(|e| EntryRecord {
                    id: e.image_id.clone(),
                    owner: e.owner_id.clone(),
                    values: floats_to_hex(e.descriptor.values()),
                })
                .collect(),
        };
        to_json(&record)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let r: StoreRecord = serde_json::from_slice(bytes)
            .map_err(|e| Error::format("descriptor store", e.to_string()))?;
        check_header("descriptor store", &r.format, STORE_FORMAT, r.version, &r.log_base)?;
        if r.stats.df.len() != r.m {
            return Err(Error::format("descriptor store", "df length does not match m"));
        }
        let entries = r
            .entries
            .into_iter()
            .map(|e| {
                Ok(IndexEntry {
                    image_id: e.id,
                    owner_id: e.owner,
                    descriptor: WeightedDescriptor(hex_to_floats(&e.values, r.m)?),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            codebook_sha256: r.codebook_sha256,
            stats: CorpusStats {
                n: r.stats.n,
                df: r.stats.df,
            },
            index: Index::build(entries)?,
        })
    }

    /// Fails unless `codebook_bytes` is the codebook this store was built with.
    pub fn verify_codebook(&self, codebook_bytes: &[u8]) -> Result<()> {
        let actual = sha256_hex(codebook_bytes);
        if actual != self.codebook_sha256 {
            return Err(Error::HashMismatch {
                expected: self.codebook_sha256.clone(),
                actual,
            });
        }
        Ok(())
    }
}

fn check_header(what: &'static str, format: &str, want: &str, version: u32, log_base: &str) -> Result<()> {
    if format != want {
        return Err(Error::format(what, format!("format tag `{format}`, expected `{want}`")));
    }
    if version != FORMAT_VERSION {
        return Err(Error::format(what, format!("unsupported version {version}")));
    }
    if log_base != LOG_BASE {
        return Err(Error::format(what, format!("unsupported log base `{log_base}`")));
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("artifact records always serialize");
    out.push(b'\n');
    out
}
