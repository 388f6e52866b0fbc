//! Deterministic synthetic corpora for tests, benchmarks and demos.
//!
//! Each group shares a palette and a rectangle layout; members differ by a
//! layout shift, a brightness offset and per-pixel noise, so group members
//! look alike without being pixel identical.

use crate::eval::CorpusImage;
use crate::image::{ImageBuffer, Rgb8};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub groups: usize,
    pub per_group: usize,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    /// 10 groups of 4 images at 100x84 (cropped to 96x80 for description).
    fn default() -> Self {
        Self {
            groups: 10,
            per_group: 4,
            width: 100,
            height: 84,
            seed: 2017,
        }
    }
}

struct Rect {
    x: i64,
    y: i64,
    w: i64,
    h: i64,
    color: Rgb8,
}

fn random_color(rng: &mut SplitMix64) -> Rgb8 {
    let v = rng.next_u64();
    Rgb8::new(v as u8, (v >> 8) as u8, (v >> 16) as u8)
}

fn signed(rng: &mut SplitMix64, max: u64) -> i64 {
    rng.bounded_uniform(2 * max + 1) as i64 - max as i64
}

fn render(
    spec: &SyntheticSpec,
    background: Rgb8,
    rects: &[Rect],
    rng: &mut SplitMix64,
) -> ImageBuffer {
    let (dx, dy) = (signed(rng, 6), signed(rng, 6));
    let brightness = signed(rng, 10);
    ImageBuffer::from_fn(spec.width, spec.height, |x, y| {
        let (x, y) = (x as i64 - dx, y as i64 - dy);
        let base = rects
            .iter()
            .rev()
            .find(|r| x >= r.x && x < r.x + r.w && y >= r.y && y < r.y + r.h)
            .map_or(background, |r| r.color);
        let mut out = [0u8; 3];
        for (o, c) in out.iter_mut().zip(base.0) {
            let v = i64::from(c) + brightness + signed(rng, 8);
            *o = v.clamp(0, 255) as u8;
        }
        Rgb8(out)
    })
    .expect("synthetic dimensions are validated by the caller")
}

/// Generates `groups * per_group` images; ids are `img000`, `img001`, ...
/// and every image is marked as a query.
pub fn generate_corpus(spec: &SyntheticSpec) -> Vec<CorpusImage> {
    assert!(spec.width >= 16 && spec.height >= 16, "synthetic images must be at least 16x16");
    let mut out = Vec::with_capacity(spec.groups * spec.per_group);
    for g in 0..spec.groups {
        let mut rng = SplitMix64::new(SplitMix64::nth_output(spec.seed, g as u64));
        let palette: Vec<Rgb8> = (0..4).map(|_| random_color(&mut rng)).collect();
        let rects: Vec<Rect> = (0..5)
            .map(|_| {
                let w = 12 + rng.bounded_uniform(spec.width as u64 / 2) as i64;
                let h = 12 + rng.bounded_uniform(spec.height as u64 / 2) as i64;
                Rect {
                    x: rng.bounded_uniform(spec.width as u64) as i64 - w / 2,
                    y: rng.bounded_uniform(spec.height as u64) as i64 - h / 2,
                    w,
                    h,
                    color: palette[1 + rng.bounded_uniform(3) as usize],
                }
            })
            .collect();
        for _ in 0..spec.per_group {
            let idx = out.len();
            out.push(CorpusImage {
                image_id: format!("img{idx:03}"),
                group_id: format!("g{g:02}"),
                owner_id: format!("owner{}", g % 3),
                is_query: true,
                image: render(spec, palette[0], &rects, &mut rng),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let spec = SyntheticSpec::default();
        let a = generate_corpus(&spec);
        assert_eq!(a.len(), 40);
        assert_eq!(a[5].group_id, "g01");
        assert_eq!((a[0].image.width(), a[0].image.height()), (100, 84));
        let b = generate_corpus(&spec);
        assert!(a.iter().zip(&b).all(|(x, y)| x.image == y.image));
        assert_ne!(a[0].image, a[1].image);
    }
}
