//! Shared fixtures for the criterion benchmarks.

use etc_cbir::descriptor::patch_descriptors;
use etc_cbir::synthetic::{generate_corpus, SyntheticSpec};
use etc_cbir::{canonicalize_patch_set, CorpusImage, ImageBuffer, Rgb8, ScdVector, SplitMix64};

pub fn noise_image(width: usize, height: usize, seed: u64) -> ImageBuffer {
    let mut rng = SplitMix64::new(seed);
    ImageBuffer::from_fn(width, height, |_, _| {
        let v = rng.next_u64();
        Rgb8::new(v as u8, (v >> 8) as u8, (v >> 16) as u8)
    })
    .expect("fixture dimensions are valid")
}

pub fn corpus(groups: usize) -> Vec<CorpusImage> {
    generate_corpus(&SyntheticSpec {
        groups,
        ..SyntheticSpec::default()
    })
}

/// Canonical patch set of a synthetic corpus.
pub fn patches(groups: usize) -> Vec<ScdVector> {
    let all = corpus(groups)
        .iter()
        .flat_map(|c| patch_descriptors(&c.image).expect("fixture images are valid"))
        .collect();
    canonicalize_patch_set(all)
}
