//! Bag-of-visual-words image descriptors with tf-idf weighting.
//!
//! Every 16x16 block of the image is one patch, so the word histogram of an
//! encrypted image equals that of its plain original: scrambling moves and
//! rotates blocks but never changes their pixel multisets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::image::{partition_blocks, ImageBuffer};
use crate::scd::{l2_norm, scd, ScdVector};

/// Visual-word counts of one image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordHistogram {
    counts: Vec<u32>,
    total: u32,
}

impl WordHistogram {
    pub fn from_counts(counts: Vec<u32>) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    pub fn from_assignments(m: usize, words: impl IntoIterator<Item = usize>) -> Self {
        let mut counts = vec![0u32; m];
        for w in words {
            counts[w] += 1;
        }
        Self::from_counts(counts)
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn total(&self) -> u32 {
        self.total
    }

    pub fn m(&self) -> usize {
        self.counts.len()
    }
}

/// Document frequencies over the indexed corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n: u64,
    pub df: Vec<u64>,
}

impl CorpusStats {
    pub fn m(&self) -> usize {
        self.df.len()
    }
}

/// tf-idf weighted, l2-normalized descriptor (or all zeros).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDescriptor(pub Vec<f64>);

impl WeightedDescriptor {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn m(&self) -> usize {
        self.0.len()
    }

    pub fn to_bits(&self) -> Vec<u64> {
        self.0.iter().map(|v| v.to_bits()).collect()
    }
}

/// Patch descriptors of every block in raster order.
pub fn patch_descriptors(img: &ImageBuffer) -> Result<Vec<ScdVector>> {
    Ok(partition_blocks(img)?.blocks().iter().map(scd).collect())
}

pub fn image_word_histogram(img: &ImageBuffer, cb: &Codebook) -> Result<WordHistogram> {
    let patches = patch_descriptors(img)?;
    Ok(WordHistogram::from_assignments(
        cb.m(),
        patches.iter().map(|p| cb.assign(p)),
    ))
}

pub fn compute_corpus_stats(hists: &[WordHistogram]) -> Result<CorpusStats> {
    let first = hists.first().ok_or(Error::EmptyCorpus)?;
    let m = first.m();
    let mut df = vec![0u64; m];
    for h in hists {
        if h.m() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: h.m(),
            });
        }
        for (d, &c) in df.iter_mut().zip(h.counts()) {
            if c > 0 {
                *d += 1;
            }
        }
    }
    Ok(CorpusStats {
        n: hists.len() as u64,
        df,
    })
}

/// `(1 + ln tf) * ln(N / df)` per word, zero where `tf` or `df` is zero, then
/// l2-normalized.
pub fn weight(h: &WordHistogram, stats: &CorpusStats) -> Result<WeightedDescriptor> {
    if h.m() != stats.m() {
        return Err(Error::DimensionMismatch {
            expected: stats.m(),
            actual: h.m(),
        });
    }
    let n = stats.n as f64;
    let mut values: Vec<f64> = h
        .counts()
        .iter()
        .zip(&stats.df)
        .map(|(&tf, &df)| {
            if tf == 0 || df == 0 {
                0.0
            } else {
                (1.0 + f64::from(tf).ln()) * (n / df as f64).ln()
            }
        })
        .collect();
    let norm = l2_norm(&values);
    if norm > 0.0 {
        values.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(WeightedDescriptor(values))
}

/// Full pipeline for one image against frozen database statistics.
pub fn describe(img: &ImageBuffer, cb: &Codebook, stats: &CorpusStats) -> Result<WeightedDescriptor> {
    weight(&image_word_histogram(img, cb)?, stats)
}

/// Histograms for many images in parallel, in input order.
pub fn word_histograms(images: &[ImageBuffer], cb: &Codebook) -> Result<Vec<WordHistogram>> {
    images
        .par_iter()
        .map(|img| image_word_histogram(img, cb))
        .collect()
}
