//! Privacy-preserving content-based image retrieval over block-scrambled
//! (encryption-then-compression, EtC) images.
//!
//! Images are encrypted by shuffling their 16x16 blocks and rotating or
//! mirroring each block. Every block is also a descriptor patch, and the patch
//! descriptor is an HSV color histogram, which ignores where pixels sit inside
//! the block. An image's bag-of-visual-words descriptor therefore comes out
//! bit for bit identical whether it is computed from the plain image or from
//! any encryption of it.
//!
//! Pipeline:
//! [`crypto::encrypt`] -> [`descriptor::patch_descriptors`] ->
//! [`codebook::kmeans`] -> [`descriptor::describe`] -> [`retrieval::Index`]
//! -> [`eval::run_scenario`].

pub mod codebook;
pub mod codec;
pub mod crypto;
pub mod descriptor;
pub mod error;
pub mod eval;
pub mod image;
pub mod manifest;
pub mod retrieval;
pub mod rng;
pub mod scd;
pub mod store;
pub mod synthetic;

pub use codebook::{assign, canonicalize_patch_set, kmeans, ClusteringConfig, Codebook};
pub use crypto::{decrypt, encrypt, DihedralCode, KeySet, Permutation};
pub use descriptor::{
    compute_corpus_stats, describe, image_word_histogram, weight, CorpusStats, WeightedDescriptor,
    WordHistogram,
};
pub use error::{Error, Result};
pub use eval::{average_precision, mean_ap, run_scenario, CorpusImage, ImageKind, Scenario, ScenarioConfig};
pub use image::{assemble_blocks, partition_blocks, rgb_to_hsv, Block, BlockGrid, ImageBuffer, Rgb8};
pub use manifest::Manifest;
pub use retrieval::{build_index, query, Index, IndexEntry, RankedHit};
pub use rng::SplitMix64;
pub use scd::{block_histogram, haar_transform, scd, ColorHistogram, ScdVector, SCD_LEN};
pub use store::{CodebookArtifact, DescriptorStore};
