//! Scalable-color style patch descriptor: a 16x4x4 HSV histogram of one
//! 16x16 block, passed through an orthonormal Haar transform.
//!
//! The histogram depends only on the block's pixel multiset, so any block
//! rotation, mirror or pixel shuffle leaves the descriptor bitwise unchanged.

use crate::image::{rgb_to_hsv, Block, Rgb8, BLOCK_PIXELS};

/// Coefficients per descriptor.
pub const SCD_LEN: usize = 256;

const HUE_BINS: usize = 16;
const SAT_BINS: usize = 4;
const VAL_BINS: usize = 4;
const HUE_STEP: f64 = 360.0 / HUE_BINS as f64;

/// Normalized HSV histogram, bin index `h * 16 + s * 4 + v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorHistogram(pub [f64; SCD_LEN]);

impl ColorHistogram {
    pub fn bins(&self) -> &[f64; SCD_LEN] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScdVector(pub [f64; SCD_LEN]);

impl ScdVector {
    pub fn coeffs(&self) -> &[f64; SCD_LEN] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.0)
    }
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Histogram cell of a single pixel.
pub fn bin_index(p: Rgb8) -> usize {
    let hsv = rgb_to_hsv(p);
    let h = ((hsv.h / HUE_STEP) as usize).min(HUE_BINS - 1);
    let s = ((hsv.s * SAT_BINS as f64) as usize).min(SAT_BINS - 1);
    let v = ((hsv.v * VAL_BINS as f64) as usize).min(VAL_BINS - 1);
    h * SAT_BINS * VAL_BINS + s * VAL_BINS + v
}

pub fn block_histogram(b: &Block) -> ColorHistogram {
    let mut counts = [0u32; SCD_LEN];
    for &p in b.pixels() {
        counts[bin_index(p)] += 1;
    }
    let mut bins = [0.0; SCD_LEN];
    for (bin, &c) in bins.iter_mut().zip(&counts) {
        *bin = f64::from(c) / BLOCK_PIXELS as f64;
    }
    ColorHistogram(bins)
}

/// Full 8-level orthonormal Haar transform of the histogram.
///
/// Output layout: the single approximation coefficient, then detail
/// coefficients from the coarsest level (1 value) to the finest (128 values).
pub fn haar_transform(h: &ColorHistogram) -> ScdVector {
    ScdVector(haar_forward(&h.0))
}

/// Inverse of [`haar_transform`].
pub fn inverse_haar_transform(v: &ScdVector) -> ColorHistogram {
    ColorHistogram(haar_inverse(&v.0))
}

fn haar_forward(input: &[f64; SCD_LEN]) -> [f64; SCD_LEN] {
    let mut data = *input;
    let mut tmp = [0.0; SCD_LEN];
    let mut len = SCD_LEN;
    while len > 1 {
        let half = len / 2;
        for i in 0..half {
            let (a, b) = (data[2 * i], data[2 * i + 1]);
            tmp[i] = (a + b) * std::f64::consts::FRAC_1_SQRT_2;
            tmp[half + i] = (a - b) * std::f64::consts::FRAC_1_SQRT_2;
        }
        data[..len].copy_from_slice(&tmp[..len]);
        len = half;
    }
    data
}

fn haar_inverse(input: &[f64; SCD_LEN]) -> [f64; SCD_LEN] {
    let mut data = *input;
    let mut tmp = [0.0; SCD_LEN];
    let mut len = 2;
    while len <= SCD_LEN {
        let half = len / 2;
        for i in 0..half {
            let (s, d) = (data[i], data[half + i]);
            tmp[2 * i] = (s + d) * std::f64::consts::FRAC_1_SQRT_2;
            tmp[2 * i + 1] = (s - d) * std::f64::consts::FRAC_1_SQRT_2;
        }
        data[..len].copy_from_slice(&tmp[..len]);
        len *= 2;
    }
    data
}

/// Patch descriptor of one block.
pub fn scd(b: &Block) -> ScdVector {
    haar_transform(&block_histogram(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{apply_dihedral, DihedralCode};
    use crate::rng::SplitMix64;
    use proptest::prelude::*;

    /// Analytic Haar basis: row `k` is the k-th output coefficient's
    /// analysis vector.
    fn haar_basis() -> Vec<[f64; SCD_LEN]> {
        let mut rows = vec![[1.0 / 16.0; SCD_LEN]];
        let mut support = SCD_LEN;
        while support >= 2 {
            let amp = 1.0 / (support as f64).sqrt();
            for p in 0..SCD_LEN / support {
                let mut row = [0.0; SCD_LEN];
                for (i, r) in row.iter_mut().enumerate().skip(p * support).take(support) {
                    *r = if i < p * support + support / 2 { amp } else { -amp };
                }
                rows.push(row);
            }
            support /= 2;
        }
        rows
    }

    fn random_block(rng: &mut SplitMix64) -> Block {
        Block::from_fn(|_, _| {
            let v = rng.next_u64();
            Rgb8::new(v as u8, (v >> 8) as u8, (v >> 16) as u8)
        })
    }

    #[test]
    fn red_block_fills_bin_15() {
        let h = block_histogram(&Block::filled(Rgb8::new(255, 0, 0)));
        assert_eq!(h.0[15], 1.0);
        assert_eq!(h.0.iter().filter(|&&x| x != 0.0).count(), 1);
    }

    #[test]
    fn half_red_half_green() {
        let b = Block::from_fn(|x, _| {
            if x < 8 {
                Rgb8::new(255, 0, 0)
            } else {
                Rgb8::new(0, 255, 0)
            }
        });
        let h = block_histogram(&b);
        // green: h = 120 -> bin 5, s = 3, v = 3
        assert_eq!(h.0[15], 0.5);
        assert_eq!(h.0[5 * 16 + 15], 0.5);
        assert_eq!(h.0.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn histograms_sum_to_one() {
        let mut rng = SplitMix64::new(1);
        for _ in 0..1000 {
            let h = block_histogram(&random_block(&mut rng));
            assert!(h.0.iter().all(|&x| x >= 0.0));
            assert!((h.0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_histogram_is_dc_only() {
        let v = haar_transform(&ColorHistogram([1.0 / 256.0; SCD_LEN]));
        assert!((v.0[0] - 1.0 / 16.0).abs() < 1e-15);
        assert!(v.0[1..].iter().all(|&x| x.abs() < 1e-15));
    }

    #[test]
    fn one_hot_dc_coefficient() {
        let mut h = [0.0; SCD_LEN];
        h[0] = 1.0;
        let v = haar_transform(&ColorHistogram(h));
        assert!((v.0[0] - 1.0 / 16.0).abs() < 1e-15);
        assert!(v.0[1..].iter().any(|&x| x != 0.0));
    }

    #[test]
    fn layout_matches_analytic_basis() {
        let basis = haar_basis();
        let mut rng = SplitMix64::new(8);
        let mut x = [0.0; SCD_LEN];
        x.iter_mut().for_each(|v| *v = rng.next_f64());
        let fast = haar_forward(&x);
        for (k, row) in basis.iter().enumerate() {
            let dot: f64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
            assert!((dot - fast[k]).abs() < 1e-12, "coefficient {k}");
        }
    }

    #[test]
    fn all_red_descriptor_matches_basis_column() {
        let basis = haar_basis();
        let v = scd(&Block::filled(Rgb8::new(255, 0, 0)));
        for (k, row) in basis.iter().enumerate() {
            assert!((v.0[k] - row[15]).abs() < 1e-15, "coefficient {k}");
        }
        // Bin 15 sits in the first 16-wide support: nonzero at the DC term and
        // one detail per level.
        assert_eq!(v.0.iter().filter(|x| x.abs() > 0.0).count(), 9);
    }

    #[test]
    fn dihedral_invariance() {
        let mut rng = SplitMix64::new(2);
        for _ in 0..100 {
            let b = random_block(&mut rng);
            let base = scd(&b);
            for c in DihedralCode::all() {
                assert_eq!(scd(&apply_dihedral(&b, c)), base);
            }
        }
    }

    #[test]
    fn same_multiset_same_descriptor() {
        let mut rng = SplitMix64::new(4);
        let b = random_block(&mut rng);
        let mut shuffled = b;
        shuffled.0.reverse();
        shuffled.0.swap(3, 200);
        assert_ne!(shuffled, b);
        assert_eq!(scd(&shuffled), scd(&b));
    }

    proptest! {
        #[test]
        fn energy_preserved(seed: u64) {
            let mut rng = SplitMix64::new(seed);
            let mut x = [0.0; SCD_LEN];
            x.iter_mut().for_each(|v| *v = rng.next_f64() * 2.0 - 1.0);
            let y = haar_transform(&ColorHistogram(x));
            prop_assert!((l2_norm(&x) - y.norm()).abs() < 1e-12);
            let back = inverse_haar_transform(&y);
            for (a, b) in back.0.iter().zip(&x) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
