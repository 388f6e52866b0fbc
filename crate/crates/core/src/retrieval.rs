//! Exhaustive l2 search over stored descriptors.

use std::collections::HashSet;

use crate::descriptor::WeightedDescriptor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub image_id: String,
    pub owner_id: String,
    pub descriptor: WeightedDescriptor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedHit {
    pub rank: usize,
    pub image_id: String,
    pub owner_id: String,
    pub distance: f64,
}

/// Immutable descriptor index; iteration follows insertion order.
#[derive(Debug, Clone, Default)]
pub struct Index {
    entries: Vec<IndexEntry>,
}

impl Index {
    pub fn build(entries: Vec<IndexEntry>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(entries.len());
        let mut m = None;
        for e in &entries {
            if !seen.insert(e.image_id.as_str()) {
                return Err(Error::DuplicateId(e.image_id.clone()));
            }
            match m {
                None => m = Some(e.descriptor.m()),
                Some(m) if m != e.descriptor.m() => {
                    return Err(Error::DimensionMismatch {
                        expected: m,
                        actual: e.descriptor.m(),
                    })
                }
                _ => {}
            }
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<IndexEntry> {
        self.entries
    }

    pub fn get(&self, image_id: &str) -> Option<&IndexEntry> {
        self.entries.iter().find(|e| e.image_id == image_id)
    }

    /// The `k` nearest entries by l2 distance, ties broken by image id.
    pub fn query(&self, q: &WeightedDescriptor, k: usize) -> Vec<RankedHit> {
        let mut scored: Vec<(f64, &IndexEntry)> = self
            .entries
            .iter()
            .map(|e| (l2_distance(e.descriptor.values(), q.values()), e))
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.image_id.cmp(&b.1.image_id)));
        scored
            .into_iter()
            .take(k)
            .enumerate()
            .map(|(i, (distance, e))| RankedHit {
                rank: i + 1,
                image_id: e.image_id.clone(),
                owner_id: e.owner_id.clone(),
                distance,
            })
            .collect()
    }
}

pub fn build_index(entries: Vec<IndexEntry>) -> Result<Index> {
    Index::build(entries)
}

pub fn query(idx: &Index, q: &WeightedDescriptor, k: usize) -> Vec<RankedHit> {
    idx.query(q, k)
}

fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn entry(id: &str, v: Vec<f64>) -> IndexEntry {
        IndexEntry {
            image_id: id.to_string(),
            owner_id: format!("owner-{id}"),
            descriptor: WeightedDescriptor(v),
        }
    }

    #[test]
    fn empty_index() {
        let idx = build_index(vec![]).unwrap();
        assert!(idx.is_empty());
        assert!(query(&idx, &WeightedDescriptor(vec![1.0]), 5).is_empty());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = build_index(vec![entry("a", vec![1.0]), entry("a", vec![0.0])]).unwrap_err();
        assert!(matches!(err, Error::DuplicateId(id) if id == "a"));
    }

    #[test]
    fn exact_match_ranks_first() {
        let idx = build_index(vec![entry("x", vec![0.6, 0.8]), entry("y", vec![1.0, 0.0])]).unwrap();
        let hits = idx.query(&WeightedDescriptor(vec![1.0, 0.0]), 10);
        assert_eq!(hits.len(), 2);
        assert_eq!((hits[0].image_id.as_str(), hits[0].distance, hits[0].rank), ("y", 0.0, 1));
        assert_eq!(hits[0].owner_id, "owner-y");
    }

    #[test]
    fn unit_vectors_tie_break_by_id() {
        let idx = build_index(vec![
            entry("e3", vec![0.0, 0.0, 1.0]),
            entry("e1", vec![1.0, 0.0, 0.0]),
            entry("e2", vec![0.0, 1.0, 0.0]),
        ])
        .unwrap();
        let hits = idx.query(&WeightedDescriptor(vec![1.0, 0.0, 0.0]), 3);
        let ids: Vec<&str> = hits.iter().map(|h| h.image_id.as_str()).collect();
        assert_eq!(ids, vec!["e1", "e2", "e3"]);
        assert_eq!(hits[0].distance, 0.0);
        assert_eq!(hits[1].distance, 2f64.sqrt());
        assert_eq!(hits[2].distance, 2f64.sqrt());
    }

    #[test]
    fn k_truncates() {
        let idx = build_index((0..5).map(|i| entry(&i.to_string(), vec![i as f64])).collect()).unwrap();
        assert_eq!(idx.query(&WeightedDescriptor(vec![0.0]), 2).len(), 2);
        assert_eq!(idx.query(&WeightedDescriptor(vec![0.0]), 50).len(), 5);
    }

    #[test]
    fn agrees_with_brute_force() {
        let mut rng = SplitMix64::new(77);
        for n in 1..=100usize {
            let entries: Vec<IndexEntry> = (0..n)
                .map(|i| {
                    // Coarse values so that exact distance ties actually occur.
                    let v = (0..4).map(|_| rng.bounded_uniform(3) as f64).collect();
                    entry(&format!("img{:03}", (i * 37) % 101), v)
                })
                .collect();
            let idx = build_index(entries.clone()).unwrap();
            let q = WeightedDescriptor((0..4).map(|_| rng.bounded_uniform(3) as f64).collect());
            let hits = idx.query(&q, n);

            // Oracle: repeatedly pull the smallest (distance, id) pair.
            let mut pool: Vec<(f64, String)> = entries
                .iter()
                .map(|e| {
                    let d: f64 = e.descriptor.0.iter().zip(&q.0).map(|(a, b)| (a - b).powi(2)).sum();
                    (d.sqrt(), e.image_id.clone())
                })
                .collect();
            let mut expected = Vec::new();
            while !pool.is_empty() {
                let mut best = 0;
                for i in 1..pool.len() {
                    if pool[i].0 < pool[best].0 || (pool[i].0 == pool[best].0 && pool[i].1 < pool[best].1) {
                        best = i;
                    }
                }
                expected.push(pool.remove(best));
            }
            assert_eq!(hits.len(), expected.len());
            for (h, (d, id)) in hits.iter().zip(&expected) {
                assert_eq!(&h.image_id, id);
                assert_eq!(h.distance, *d);
            }
            assert!(hits.windows(2).all(|w| w[0].distance <= w[1].distance));
        }
    }
}
