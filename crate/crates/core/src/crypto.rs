//! Encryption-then-compression (EtC) block scrambling.
//!
//! An image is split into 16x16 blocks, the blocks are shuffled with a
//! permutation keyed by `k1`, and every block in the shuffled grid is then
//! rotated and optionally mirrored according to a code stream keyed by `k2`.
//! Dihedral codes are indexed by output (shuffled) position.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{assemble_blocks, partition_blocks, Block, BlockGrid, ImageBuffer, BLOCK_SIZE};
use crate::rng::SplitMix64;

/// The two secret seeds of one image's encryption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KeySet {
    pub k1: u64,
    pub k2: u64,
}

impl KeySet {
    pub const fn new(k1: u64, k2: u64) -> Self {
        Self { k1, k2 }
    }

    /// Per-image keys derived from a master seed: `k1` and `k2` are outputs
    /// `2*index` and `2*index + 1` of the SplitMix64 stream seeded with
    /// `master`.
    pub fn derive(master: u64, index: u64) -> Self {
        Self {
            k1: SplitMix64::nth_output(master, 2 * index),
            k2: SplitMix64::nth_output(master, 2 * index + 1),
        }
    }
}

impl fmt::Display for KeySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}:{:016x}", self.k1, self.k2)
    }
}

/// A bijection on `[0, B)`; output position `p` receives source block
/// `mapping[p]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl Permutation {
    pub fn from_mapping(mapping: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; mapping.len()];
        for &m in &mapping {
            if m >= mapping.len() || std::mem::replace(&mut seen[m], true) {
                return Err(Error::Validation(format!(
                    "mapping of length {} is not a bijection",
                    mapping.len()
                )));
            }
        }
        Ok(Self { mapping })
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }
}

/// One of the eight symmetries of a square block: `code % 4` quarter turns
/// clockwise, followed by a horizontal mirror when `code >= 4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DihedralCode(u8);

impl DihedralCode {
    pub const IDENTITY: DihedralCode = DihedralCode(0);

    pub fn new(code: u8) -> Option<Self> {
        (code < 8).then_some(DihedralCode(code))
    }

    pub fn all() -> impl Iterator<Item = DihedralCode> {
        (0..8).map(DihedralCode)
    }

    pub fn code(self) -> u8 {
        self.0
    }

    pub fn quarter_turns(self) -> u8 {
        self.0 % 4
    }

    pub fn mirrored(self) -> bool {
        self.0 >= 4
    }

    /// The code that undoes `self`. Mirrored codes are involutions.
    pub fn inverse(self) -> Self {
        if self.mirrored() {
            self
        } else {
            DihedralCode((4 - self.0) % 4)
        }
    }
}

pub fn invert_dihedral(c: DihedralCode) -> DihedralCode {
    c.inverse()
}

/// Fisher-Yates shuffle of `0..blocks`, walking `i` from `blocks-1` down to 1
/// and swapping with `j = bounded_uniform(i + 1)`.
pub fn derive_permutation(k1: u64, blocks: usize) -> Permutation {
    assert!(blocks >= 1, "block count must be positive");
    let mut rng = SplitMix64::new(k1);
    let mut mapping: Vec<usize> = (0..blocks).collect();
    for i in (1..blocks).rev() {
        let j = rng.bounded_uniform(i as u64 + 1) as usize;
        mapping.swap(i, j);
    }
    Permutation { mapping }
}

pub fn derive_dihedral_codes(k2: u64, blocks: usize) -> Vec<DihedralCode> {
    assert!(blocks >= 1, "block count must be positive");
    let mut rng = SplitMix64::new(k2);
    (0..blocks)
        .map(|_| DihedralCode(rng.bounded_uniform(8) as u8))
        .collect()
}

pub fn apply_dihedral(b: &Block, c: DihedralCode) -> Block {
    const N: usize = BLOCK_SIZE - 1;
    let turns = c.quarter_turns();
    let mirrored = c.mirrored();
    Block::from_fn(|x, y| {
        // Undo the mirror first, then the rotation, to find the source pixel.
        let x = if mirrored { N - x } else { x };
        let (sx, sy) = match turns {
            0 => (x, y),
            1 => (y, N - x),
            2 => (N - x, N - y),
            _ => (N - y, x),
        };
        b.get(sx, sy)
    })
}

/// Scrambles an image. The output covers the cropped multiple-of-16 region.
pub fn encrypt(img: &ImageBuffer, keys: KeySet) -> Result<ImageBuffer> {
    let grid = partition_blocks(img)?;
    let perm = derive_permutation(keys.k1, grid.len());
    let codes = derive_dihedral_codes(keys.k2, grid.len());
    let src = grid.blocks();
    let blocks = perm
        .mapping()
        .iter()
        .zip(&codes)
        .map(|(&from, &code)| apply_dihedral(&src[from], code))
        .collect();
    assemble_blocks(&BlockGrid::new(grid.cols(), grid.rows(), blocks)?)
}

/// Inverts [`encrypt`]; the input must already be block aligned.
pub fn decrypt(etc: &ImageBuffer, keys: KeySet) -> Result<ImageBuffer> {
    if !etc.is_block_aligned() {
        return Err(Error::DimensionNotAligned {
            width: etc.width(),
            height: etc.height(),
        });
    }
    let grid = partition_blocks(etc)?;
    let perm = derive_permutation(keys.k1, grid.len());
    let codes = derive_dihedral_codes(keys.k2, grid.len());
    let mut plain = grid.blocks().to_vec();
    for (p, (&from, &code)) in perm.mapping().iter().zip(&codes).enumerate() {
        plain[from] = apply_dihedral(&grid.blocks()[p], code.inverse());
    }
    assemble_blocks(&BlockGrid::new(grid.cols(), grid.rows(), plain)?)
}
