//! Average precision, mAP and end-to-end evaluation of stored/query image
//! combinations.

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};
use std::hash::Hash;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codebook::{canonicalize_patch_set, kmeans, ClusteringConfig, Codebook};
use crate::codec::jpeg_round_trip;
use crate::crypto::{encrypt, KeySet};
use crate::descriptor::{compute_corpus_stats, patch_descriptors, weight, word_histograms, CorpusStats};
use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::retrieval::{Index, IndexEntry};
use crate::store::sha256_hex;

/// `(1/G) * sum over n of (TP@n / n) * f(n)`, where `f(n)` marks a relevant
/// item at rank `n`.
pub fn average_precision<T: Eq + Hash>(
    ranking: &[T],
    relevant: &HashSet<T>,
    g: usize,
    n: usize,
) -> Result<f64> {
    if ranking.len() != n {
        return Err(Error::LengthMismatch(format!(
            "ranking has {} entries, N is {n}",
            ranking.len()
        )));
    }
    if relevant.len() != g {
        return Err(Error::LengthMismatch(format!(
            "relevant set has {} ids, G is {g}",
            relevant.len()
        )));
    }
    if g == 0 {
        return Err(Error::Validation("G must be at least 1".into()));
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, id) in ranking.iter().enumerate() {
        if relevant.contains(id) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Ok(sum / g as f64)
}

pub fn mean_ap(aps: &[f64]) -> Result<f64> {
    if aps.is_empty() {
        return Err(Error::Validation("mAP needs at least one query".into()));
    }
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageKind {
    Plain,
    Etc,
}

impl fmt::Display for ImageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ImageKind::Plain => "plain",
            ImageKind::Etc => "EtC",
        })
    }
}

/// Which kind of image is stored and which kind is sent as the query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scenario {
    pub stored: ImageKind,
    pub query: ImageKind,
}

impl Scenario {
    pub const PLAIN_VS_PLAIN: Scenario = Scenario::new(ImageKind::Plain, ImageKind::Plain);
    pub const ETC_VS_ETC: Scenario = Scenario::new(ImageKind::Etc, ImageKind::Etc);
    /// Encrypted images stored, plain images as queries.
    pub const ETC_VS_PLAIN: Scenario = Scenario::new(ImageKind::Etc, ImageKind::Plain);
    /// Plain images stored, encrypted images as queries.
    pub const PLAIN_VS_ETC: Scenario = Scenario::new(ImageKind::Plain, ImageKind::Etc);

    pub const ALL: [Scenario; 4] = [
        Self::PLAIN_VS_PLAIN,
        Self::ETC_VS_ETC,
        Self::ETC_VS_PLAIN,
        Self::PLAIN_VS_ETC,
    ];

    pub const fn new(stored: ImageKind, query: ImageKind) -> Self {
        Self { stored, query }
    }

    /// Short name such as `etc-vs-plain` (stored kind first).
    pub fn slug(&self) -> String {
        let k = |k: ImageKind| match k {
            ImageKind::Plain => "plain",
            ImageKind::Etc => "etc",
        };
        format!("{}-vs-{}", k(self.stored), k(self.query))
    }

    pub fn from_slug(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|sc| sc.slug() == s)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} images vs {} images", self.stored, self.query)
    }
}

/// One image of an evaluation corpus, with its ground-truth group.
#[derive(Debug, Clone)]
pub struct CorpusImage {
    pub image_id: String,
    pub group_id: String,
    pub owner_id: String,
    pub is_query: bool,
    pub image: ImageBuffer,
}

/// Relevant image ids per query id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    pub relevant: BTreeMap<String, HashSet<String>>,
}

impl GroundTruth {
    /// Groups the corpus; when `count_self_match` is false a query is not
    /// relevant to itself.
    pub fn from_corpus(corpus: &[CorpusImage], count_self_match: bool) -> Result<Self> {
        let mut groups: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for c in corpus {
            groups.entry(&c.group_id).or_default().push(&c.image_id);
        }
        let mut relevant = BTreeMap::new();
        for c in corpus.iter().filter(|c| c.is_query) {
            let set: HashSet<String> = groups[c.group_id.as_str()]
                .iter()
                .filter(|&&id| count_self_match || id != c.image_id)
                .map(|id| id.to_string())
                .collect();
            if set.is_empty() {
                return Err(Error::Validation(format!(
                    "query `{}` has no relevant images besides itself",
                    c.image_id
                )));
            }
            relevant.insert(c.image_id.clone(), set);
        }
        Ok(Self { relevant })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub clustering: ClusteringConfig,
    /// Master seed of the per-image keys for stored EtC images.
    pub store_key_seed: u64,
    /// Master seed of the per-image keys for query EtC images.
    pub query_key_seed: u64,
    pub count_self_match: bool,
    pub jpeg_quality: Option<u8>,
}

impl ScenarioConfig {
    pub fn new(scenario: Scenario, clustering: ClusteringConfig) -> Self {
        Self {
            scenario,
            clustering,
            store_key_seed: 0x5eed_0000_0000_0001,
            query_key_seed: 0x5eed_0000_0000_0002,
            count_self_match: true,
            jpeg_quality: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.clustering.validate()?;
        if self.store_key_seed == self.query_key_seed {
            return Err(Error::Validation(
                "stored and query images must use different key seeds".into(),
            ));
        }
        if let Some(q) = self.jpeg_quality {
            if !(1..=100).contains(&q) {
                return Err(Error::Validation(format!("JPEG quality {q} is outside 1..=100")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryScore {
    pub query_id: String,
    pub group_id: String,
    pub relevant: usize,
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub config: ScenarioConfig,
    pub stored: usize,
    pub queries: Vec<QueryScore>,
    pub map: f64,
    /// SHA-256 over the codebook words, corpus statistics and stored
    /// descriptors, all as IEEE-754 bits.
    pub index_digest: String,
}

impl ScenarioReport {
    /// Per-query TSV followed by a `# mAP` summary line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("query_id\tgroup_id\tG\tAP\n");
        for q in &self.queries {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", q.query_id, q.group_id, q.relevant, fmt_g17(q.ap));
        }
        let _ = writeln!(
            out,
            "# scenario={}\tN={}\tQ={}\tmAP={}",
            self.config.scenario.slug(),
            self.stored,
            self.queries.len(),
            fmt_g17(self.map)
        );
        out
    }
}

/// Formats with 17 significant digits, trimming trailing zeros.
pub fn fmt_g17(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.16e}")
    }
}

fn materialize(img: &ImageBuffer, kind: ImageKind, keys: KeySet, jpeg: Option<u8>) -> Result<ImageBuffer> {
    let img = match kind {
        ImageKind::Plain => img.crop16(),
        ImageKind::Etc => encrypt(img, keys)?,
    };
    match jpeg {
        Some(q) => jpeg_round_trip(&img, q),
        None => Ok(img),
    }
}

/// Everything a scenario run produced, for inspection beyond the report.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub report: ScenarioReport,
    pub codebook: Codebook,
    pub stats: CorpusStats,
    pub index: Index,
}

/// Stores the corpus in the configured form, trains the codebook on it,
/// indexes it, and scores every query image against the whole index.
pub fn run_scenario(corpus: &[CorpusImage], cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    run_scenario_detailed(corpus, cfg).map(|r| r.report)
}

pub fn run_scenario_detailed(corpus: &[CorpusImage], cfg: &ScenarioConfig) -> Result<ScenarioRun> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let truth = GroundTruth::from_corpus(corpus, cfg.count_self_match)?;
    if truth.relevant.is_empty() {
        return Err(Error::Validation("corpus has no query images".into()));
    }

    let store_keys: Vec<KeySet> = (0..corpus.len())
        .map(|i| KeySet::derive(cfg.store_key_seed, i as u64))
        .collect();
    let query_keys: Vec<KeySet> = (0..corpus.len())
        .map(|i| KeySet::derive(cfg.query_key_seed, i as u64))
        .collect();
    let store_set: HashSet<KeySet> = store_keys.iter().copied().collect();
    if query_keys.iter().any(|k| store_set.contains(k)) {
        return Err(Error::Validation("a query key coincides with a stored image key".into()));
    }

    let stored: Vec<ImageBuffer> = corpus
        .par_iter()
        .zip(&store_keys)
        .map(|(c, &k)| materialize(&c.image, cfg.scenario.stored, k, cfg.jpeg_quality))
        .collect::<Result<_>>()?;

    let patches: Vec<_> = stored
        .par_iter()
        .map(patch_descriptors)
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let codebook = kmeans(&canonicalize_patch_set(patches), &cfg.clustering)?;

    let hists = word_histograms(&stored, &codebook)?;
    let stats = compute_corpus_stats(&hists)?;
    let entries = corpus
        .iter()
        .zip(&hists)
        .map(|(c, h)| {
            Ok(IndexEntry {
                image_id: c.image_id.clone(),
                owner_id: c.owner_id.clone(),
                descriptor: weight(h, &stats)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let index = Index::build(entries)?;

    let queries: Vec<(usize, &CorpusImage)> =
        corpus.iter().enumerate().filter(|(_, c)| c.is_query).collect();
    let scores = queries
        .par_iter()
        .map(|&(i, c)| {
            let q = materialize(&c.image, cfg.scenario.query, query_keys[i], cfg.jpeg_quality)?;
            let hist = crate::descriptor::image_word_histogram(&q, &codebook)?;
            let desc = weight(&hist, &stats)?;
            let ranking: Vec<String> = index
                .query(&desc, index.len())
                .into_iter()
                .map(|h| h.image_id)
                .filter(|id| cfg.count_self_match || *id != c.image_id)
                .collect();
            let relevant = &truth.relevant[&c.image_id];
            let ap = average_precision(&ranking, relevant, relevant.len(), ranking.len())?;
            Ok(QueryScore {
                query_id: c.image_id.clone(),
                group_id: c.group_id.clone(),
                relevant: relevant.len(),
                ap,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let aps: Vec<f64> = scores.iter().map(|s| s.ap).collect();
    let map = mean_ap(&aps)?;

    let report = ScenarioReport {
        config: *cfg,
        stored: index.len(),
        queries: scores,
        map,
        index_digest: digest(&codebook, &stats, &index),
    };
    Ok(ScenarioRun {
        report,
        codebook,
        stats,
        index,
    })
}

fn digest(codebook: &Codebook, stats: &CorpusStats, index: &Index) -> String {
    let mut bytes = Vec::new();
    for w in codebook.words() {
        for v in w.0 {
            bytes.extend(v.to_bits().to_le_bytes());
        }
    }
    bytes.extend(stats.n.to_le_bytes());
    for d in &stats.df {
        bytes.extend(d.to_le_bytes());
    }
    for e in index.entries() {
        bytes.extend(e.image_id.as_bytes());
        bytes.push(0);
        for v in e.descriptor.values() {
            bytes.extend(v.to_bits().to_le_bytes());
        }
    }
    sha256_hex(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use crate::synthetic::{generate_corpus, SyntheticSpec};

    fn set(ids: &[&str]) -> HashSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    fn ranking(ids: &[&str]) -> Vec<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    /// Direct evaluation of the AP sum with TP@n recounted at every rank.
    fn ap_oracle(ranking: &[u32], relevant: &HashSet<u32>) -> f64 {
        let n = ranking.len();
        let mut total = 0.0;
        for rank in 1..=n {
            let f = if relevant.contains(&ranking[rank - 1]) { 1.0 } else { 0.0 };
            let tp = ranking[..rank].iter().filter(|id| relevant.contains(id)).count();
            total += tp as f64 / rank as f64 * f;
        }
        total / relevant.len() as f64
    }

    #[test]
    fn perfect_ranking() {
        let r = ranking(&["a", "b", "c", "d"]);
        assert_eq!(average_precision(&r, &set(&["a", "b"]), 2, 4).unwrap(), 1.0);
    }

    #[test]
    fn hand_case_five_sixths() {
        let r = ranking(&["a", "x", "b", "y"]);
        let ap = average_precision(&r, &set(&["a", "b"]), 2, 4).unwrap();
        assert_eq!(ap, 0.5 * (1.0 + 2.0 / 3.0));
        assert!((ap - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn single_relevant_at_last_rank() {
        let r = ranking(&["x", "y", "z", "a"]);
        assert_eq!(average_precision(&r, &set(&["a"]), 1, 4).unwrap(), 0.25);
    }

    #[test]
    fn ap_errors() {
        let r = ranking(&["a", "b"]);
        assert!(average_precision(&r, &set(&["a"]), 1, 3).is_err());
        assert!(average_precision(&r, &set(&["a"]), 2, 2).is_err());
    }

    #[test]
    fn ap_matches_oracle() {
        let mut rng = SplitMix64::new(99);
        for _ in 0..1000 {
            let n = 1 + rng.bounded_uniform(50) as usize;
            let mut ids: Vec<u32> = (0..n as u32).collect();
            for i in (1..n).rev() {
                ids.swap(i, rng.bounded_uniform(i as u64 + 1) as usize);
            }
            let g = 1 + rng.bounded_uniform(n as u64) as usize;
            let relevant: HashSet<u32> = (0..g as u32).collect();
            let ap = average_precision(&ids, &relevant, g, n).unwrap();
            assert!((ap - ap_oracle(&ids, &relevant)).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&ap));
            let top: HashSet<u32> = ids[..g].iter().copied().collect();
            assert_eq!(ap == 1.0, top == relevant);
        }
    }

    #[test]
    fn map_values() {
        assert_eq!(mean_ap(&[1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(mean_ap(&[1.0, 0.5]).unwrap(), 0.75);
        assert!(mean_ap(&[]).is_err());
    }

    #[test]
    fn scenario_slugs() {
        for s in Scenario::ALL {
            assert_eq!(Scenario::from_slug(&s.slug()), Some(s));
        }
        assert_eq!(Scenario::ETC_VS_PLAIN.to_string(), "EtC images vs plain images");
        assert_eq!(Scenario::ETC_VS_PLAIN.stored, ImageKind::Etc);
    }

    #[test]
    fn g17_formatting() {
        assert_eq!(fmt_g17(0.0), "0");
        assert_eq!(fmt_g17(0.75), "0.75");
        assert_eq!(fmt_g17(1.0), "1");
        assert_eq!(fmt_g17(2f64.sqrt()), "1.4142135623730951");
        assert_eq!(fmt_g17(2f64.sqrt()).parse::<f64>().unwrap(), 2f64.sqrt());
        let tiny = 1.234e-9;
        assert_eq!(fmt_g17(tiny).parse::<f64>().unwrap(), tiny);
    }

    #[test]
    fn self_match_flag() {
        let corpus = generate_corpus(&SyntheticSpec {
            groups: 2,
            per_group: 2,
            ..SyntheticSpec::default()
        });
        let with = GroundTruth::from_corpus(&corpus, true).unwrap();
        assert_eq!(with.relevant["img000"], set(&["img000", "img001"]));
        let without = GroundTruth::from_corpus(&corpus, false).unwrap();
        assert_eq!(without.relevant["img000"], set(&["img001"]));
    }

    #[test]
    fn singleton_group_without_self_match_is_rejected() {
        let corpus = generate_corpus(&SyntheticSpec {
            groups: 2,
            per_group: 1,
            ..SyntheticSpec::default()
        });
        assert!(GroundTruth::from_corpus(&corpus, false).is_err());
    }

    #[test]
    fn small_scenarios_agree() {
        let corpus = generate_corpus(&SyntheticSpec {
            groups: 3,
            per_group: 3,
            width: 64,
            height: 48,
            seed: 5,
        });
        let base = ScenarioConfig::new(Scenario::PLAIN_VS_PLAIN, ClusteringConfig::new(8, 3));
        let reference = run_scenario(&corpus, &base).unwrap();
        assert_eq!(reference.queries.len(), 9);
        assert!(reference.map > 0.0 && reference.map <= 1.0);
        for s in Scenario::ALL {
            let r = run_scenario(&corpus, &ScenarioConfig { scenario: s, ..base }).unwrap();
            assert_eq!(r.map.to_bits(), reference.map.to_bits(), "{s}");
            assert_eq!(r.index_digest, reference.index_digest, "{s}");
        }
    }

    #[test]
    fn equal_key_seeds_are_rejected() {
        let mut cfg = ScenarioConfig::new(Scenario::ETC_VS_ETC, ClusteringConfig::new(2, 0));
        cfg.query_key_seed = cfg.store_key_seed;
        assert!(cfg.validate().is_err());
    }
}
