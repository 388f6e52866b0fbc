//! Visual-word codebook: deterministic k-means over patch descriptors.
//!
//! Patch descriptors are sorted lexicographically before clustering. Block
//! scrambling only reorders patches across the corpus, so after the sort the
//! plain and encrypted corpora present the exact same sequence and produce
//! bitwise identical codebooks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::scd::{ScdVector, SCD_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusteringConfig {
    pub m: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Stop once the summed l2 movement of all centroids drops below this.
    pub tol: f64,
}

impl ClusteringConfig {
    pub const DEFAULT_MAX_ITERS: usize = 100;
    pub const DEFAULT_TOL: f64 = 1e-9;

    pub fn new(m: usize, seed: u64) -> Self {
        Self {
            m,
            seed,
            max_iters: Self::DEFAULT_MAX_ITERS,
            tol: Self::DEFAULT_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidConfig("codebook size must be at least 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::InvalidConfig(format!("tolerance {} is invalid", self.tol)));
        }
        Ok(())
    }
}

/// How a codebook was produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub max_iters: usize,
    pub tol: f64,
    pub iterations: usize,
    pub converged: bool,
    pub patches: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    words: Vec<ScdVector>,
    provenance: Provenance,
}

impl Codebook {
    pub fn new(words: Vec<ScdVector>, provenance: Provenance) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::InvalidConfig("codebook has no words".into()));
        }
        if words.iter().any(|w| w.0.iter().any(|x| !x.is_finite())) {
            return Err(Error::Validation("codebook word is not finite".into()));
        }
        Ok(Self { words, provenance })
    }

    pub fn m(&self) -> usize {
        self.words.len()
    }

    pub fn words(&self) -> &[ScdVector] {
        &self.words
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn assign(&self, d: &ScdVector) -> usize {
        nearest(&self.words, &d.0).0
    }
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid by squared l2 distance; the lowest index wins ties.
fn nearest(words: &[ScdVector], d: &[f64; SCD_LEN]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, w) in words.iter().enumerate() {
        let dist = squared_distance(&w.0, d);
        if dist < best.1 {
            best = (i, dist);
        }
    }
    best
}

/// Index of the visual word nearest to `d`.
pub fn assign(d: &ScdVector, cb: &Codebook) -> usize {
    cb.assign(d)
}

fn lex_cmp(a: &ScdVector, b: &ScdVector) -> std::cmp::Ordering {
    a.0.iter()
        .zip(&b.0)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Sorts descriptors lexicographically by coefficient; duplicates are kept.
pub fn canonicalize_patch_set(mut descriptors: Vec<ScdVector>) -> Vec<ScdVector> {
    descriptors.sort_by(lex_cmp);
    descriptors
}

/// Per-iteration record of the clustering run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KmeansTrace {
    /// Within-cluster sum of squared distances after each centroid update.
    pub inertia: Vec<f64>,
    /// Summed centroid movement of each update.
    pub movement: Vec<f64>,
}

/// Builds a codebook from a canonical descriptor sequence.
pub fn kmeans(descriptors: &[ScdVector], cfg: &ClusteringConfig) -> Result<Codebook> {
    kmeans_traced(descriptors, cfg).map(|(cb, _)| cb)
}

/// k-means++ seeding followed by Lloyd iterations.
///
/// Assignment ties go to the lowest centroid index. A centroid left without
/// members takes over the point that lies farthest from its current centroid
/// (lowest point index on ties), drawn only from clusters that keep at least
/// one other member.
pub fn kmeans_traced(
    descriptors: &[ScdVector],
    cfg: &ClusteringConfig,
) -> Result<(Codebook, KmeansTrace)> {
    cfg.validate()?;
    let n = descriptors.len();
    if n < cfg.m {
        return Err(Error::InsufficientDescriptors {
            needed: cfg.m,
            available: n,
        });
    }

    let mut rng = SplitMix64::new(cfg.seed);
    let mut centroids = seed_plus_plus(descriptors, cfg.m, &mut rng);
    let mut trace = KmeansTrace::default();
    let mut assignment = vec![0usize; n];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iters {
        iterations += 1;
        let nearest_of: Vec<(usize, f64)> = descriptors
            .par_iter()
            .map(|d| nearest(&centroids, &d.0))
            .collect();
        for (a, &(c, _)) in assignment.iter_mut().zip(&nearest_of) {
            *a = c;
        }
        repair_empty(&mut assignment, &nearest_of, cfg.m);

        let updated = means(descriptors, &assignment, cfg.m);
        let movement: f64 = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| squared_distance(&a.0, &b.0).sqrt())
            .sum();
        centroids = updated;
        trace.movement.push(movement);
        trace.inertia.push(inertia(descriptors, &assignment, &centroids));
        if movement < cfg.tol {
            converged = true;
            break;
        }
    }

    let provenance = Provenance {
        seed: cfg.seed,
        max_iters: cfg.max_iters,
        tol: cfg.tol,
        iterations,
        converged,
        patches: n,
    };
    Ok((Codebook::new(centroids, provenance)?, trace))
}

fn seed_plus_plus(points: &[ScdVector], m: usize, rng: &mut SplitMix64) -> Vec<ScdVector> {
    let n = points.len();
    let mut centroids = Vec::with_capacity(m);
    centroids.push(points[rng.bounded_uniform(n as u64) as usize]);
    let mut dist: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(&p.0, &centroids[0].0))
        .collect();

    while centroids.len() < m {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.next_f64() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &d) in dist.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    chosen = Some(i);
                    break;
                }
            }
            // Rounding can leave the target past the last partial sum.
            chosen.unwrap_or_else(|| dist.iter().rposition(|&d| d > 0.0).unwrap_or(n - 1))
        } else {
            rng.bounded_uniform(n as u64) as usize
        };
        let c = points[pick];
        for (d, p) in dist.iter_mut().zip(points) {
            *d = d.min(squared_distance(&p.0, &c.0));
        }
        centroids.push(c);
    }
    centroids
}

fn repair_empty(assignment: &mut [usize], nearest_of: &[(usize, f64)], m: usize) {
    let mut counts = vec![0usize; m];
    for &a in assignment.iter() {
        counts[a] += 1;
    }
    if counts.iter().all(|&c| c > 0) {
        return;
    }
    let mut dist: Vec<f64> = nearest_of.iter().map(|&(_, d)| d).collect();
    for empty in 0..m {
        if counts[empty] > 0 {
            continue;
        }
        let mut best: Option<usize> = None;
        for (i, &d) in dist.iter().enumerate() {
            if d < 0.0 || counts[assignment[i]] < 2 {
                continue;
            }
            if best.is_none_or(|b| d > dist[b]) {
                best = Some(i);
            }
        }
        // n >= m guarantees some cluster still has two members.
        let Some(p) = best else { break };
        counts[assignment[p]] -= 1;
        assignment[p] = empty;
        counts[empty] = 1;
        dist[p] = -1.0;
    }
}

fn means(points: &[ScdVector], assignment: &[usize], m: usize) -> Vec<ScdVector> {
    let mut sums = vec![[0.0f64; SCD_LEN]; m];
    let mut counts = vec![0usize; m];
    for (p, &a) in points.iter().zip(assignment) {
        counts[a] += 1;
        for (s, x) in sums[a].iter_mut().zip(&p.0) {
            *s += x;
        }
    }
    sums.into_iter()
        .zip(counts)
        .map(|(mut s, c)| {
            let c = c as f64;
            s.iter_mut().for_each(|x| *x /= c);
            ScdVector(s)
        })
        .collect()
}

fn inertia(points: &[ScdVector], assignment: &[usize], centroids: &[ScdVector]) -> f64 {
    points
        .iter()
        .zip(assignment)
        .map(|(p, &a)| squared_distance(&p.0, &centroids[a].0))
        .sum()
}
