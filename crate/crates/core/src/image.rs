//! Raster images, 16x16 block partitioning and HSV conversion.
//!
//! Every image is held as row-major 8-bit RGB. Partitioning keeps only the
//! top-left `16*floor(W/16) x 16*floor(H/16)` region; the remainder rows and
//! columns are cropped from both the encryption path and the descriptor path.

use crate::error::{Error, Result};

/// Side length of an encryption block and of a descriptor patch.
pub const BLOCK_SIZE: usize = 16;
/// Pixels per block.
pub const BLOCK_PIXELS: usize = BLOCK_SIZE * BLOCK_SIZE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Rgb8(pub [u8; 3]);

impl Rgb8 {
    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Rgb8([r, g, b])
    }
}

/// A rectangular grid of RGB pixels, at least 16x16.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    pixels: Vec<Rgb8>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, pixels: Vec<Rgb8>) -> Result<Self> {
        if width < BLOCK_SIZE || height < BLOCK_SIZE {
            return Err(Error::DimensionTooSmall { width, height });
        }
        let expected = width * height;
        if pixels.len() != expected {
            return Err(Error::PixelCountMismatch {
                expected,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image from packed `RGBRGB...` bytes.
    pub fn from_rgb_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != width * height * 3 {
            return Err(Error::PixelCountMismatch {
                expected: width * height,
                actual: bytes.len() / 3,
            });
        }
        let pixels = bytes
            .chunks_exact(3)
            .map(|c| Rgb8([c[0], c[1], c[2]]))
            .collect();
        Self::new(width, height, pixels)
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> Rgb8,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[Rgb8] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> Rgb8 {
        self.pixels[y * self.width + x]
    }

    pub fn to_rgb_bytes(&self) -> Vec<u8> {
        self.pixels.iter().flat_map(|p| p.0).collect()
    }

    /// True when both dimensions are multiples of 16.
    pub fn is_block_aligned(&self) -> bool {
        self.width.is_multiple_of(BLOCK_SIZE) && self.height.is_multiple_of(BLOCK_SIZE)
    }

    /// The top-left region whose dimensions are the largest multiples of 16.
    pub fn crop16(&self) -> ImageBuffer {
        let w = self.width / BLOCK_SIZE * BLOCK_SIZE;
        let h = self.height / BLOCK_SIZE * BLOCK_SIZE;
        if w == self.width && h == self.height {
            return self.clone();
        }
        let mut pixels = Vec::with_capacity(w * h);
        for row in self.pixels.chunks_exact(self.width).take(h) {
            pixels.extend_from_slice(&row[..w]);
        }
        ImageBuffer {
            width: w,
            height: h,
            pixels,
        }
    }
}

/// One 16x16 block, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Block(pub [Rgb8; BLOCK_PIXELS]);

impl Block {
    pub fn filled(p: Rgb8) -> Self {
        Block([p; BLOCK_PIXELS])
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> Rgb8) -> Self {
        let mut px = [Rgb8::default(); BLOCK_PIXELS];
        for y in 0..BLOCK_SIZE {
            for x in 0..BLOCK_SIZE {
                px[y * BLOCK_SIZE + x] = f(x, y);
            }
        }
        Block(px)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Rgb8 {
        self.0[y * BLOCK_SIZE + x]
    }

    pub fn pixels(&self) -> &[Rgb8; BLOCK_PIXELS] {
        &self.0
    }

    /// Pixels sorted; two blocks have equal pixel multisets iff these match.
    pub fn sorted_pixels(&self) -> [Rgb8; BLOCK_PIXELS] {
        let mut px = self.0;
        px.sort_unstable();
        px
    }
}

/// Blocks of an image in raster order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockGrid {
    cols: usize,
    rows: usize,
    blocks: Vec<Block>,
}

impl BlockGrid {
    pub fn new(cols: usize, rows: usize, blocks: Vec<Block>) -> Result<Self> {
        if cols == 0 || rows == 0 {
            return Err(Error::MalformedGrid(format!("{cols}x{rows} grid is empty")));
        }
        if blocks.len() != cols * rows {
            return Err(Error::MalformedGrid(format!(
                "{cols}x{rows} grid holds {} blocks",
                blocks.len()
            )));
        }
        Ok(Self { cols, rows, blocks })
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<Block> {
        self.blocks
    }
}

/// Splits an image into non-overlapping 16x16 blocks in raster order.
///
/// Pixels past the last full block in either direction are dropped.
pub fn partition_blocks(img: &ImageBuffer) -> Result<BlockGrid> {
    let (width, height) = (img.width(), img.height());
    if width < BLOCK_SIZE || height < BLOCK_SIZE {
        return Err(Error::DimensionTooSmall { width, height });
    }
    let cols = width / BLOCK_SIZE;
    let rows = height / BLOCK_SIZE;
    let mut blocks = Vec::with_capacity(cols * rows);
    for by in 0..rows {
        for bx in 0..cols {
            let mut px = [Rgb8::default(); BLOCK_PIXELS];
            for y in 0..BLOCK_SIZE {
                let start = (by * BLOCK_SIZE + y) * width + bx * BLOCK_SIZE;
                px[y * BLOCK_SIZE..(y + 1) * BLOCK_SIZE]
                    .copy_from_slice(&img.pixels()[start..start + BLOCK_SIZE]);
            }
            blocks.push(Block(px));
        }
    }
    BlockGrid::new(cols, rows, blocks)
}

/// Inverse of [`partition_blocks`] for the cropped region.
pub fn assemble_blocks(grid: &BlockGrid) -> Result<ImageBuffer> {
    let width = grid.cols * BLOCK_SIZE;
    let height = grid.rows * BLOCK_SIZE;
    let mut pixels = vec![Rgb8::default(); width * height];
    for (i, block) in grid.blocks.iter().enumerate() {
        let (bx, by) = (i % grid.cols, i / grid.cols);
        for y in 0..BLOCK_SIZE {
            let start = (by * BLOCK_SIZE + y) * width + bx * BLOCK_SIZE;
            pixels[start..start + BLOCK_SIZE]
                .copy_from_slice(&block.0[y * BLOCK_SIZE..(y + 1) * BLOCK_SIZE]);
        }
    }
    ImageBuffer::new(width, height, pixels)
}

/// A pixel in the HSV hexcone model: `h` in degrees `[0, 360)`, `s` and `v`
/// in `[0, 1]`. Hue is 0 for achromatic pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsvPixel {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

pub fn rgb_to_hsv(p: Rgb8) -> HsvPixel {
    let [r, g, b] = p.0;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let v = f64::from(max) / 255.0;
    if max == 0 {
        return HsvPixel { h: 0.0, s: 0.0, v };
    }
    let delta = f64::from(max - min);
    let s = delta / f64::from(max);
    if max == min {
        return HsvPixel { h: 0.0, s, v };
    }
    let (r, g, b) = (f64::from(r), f64::from(g), f64::from(b));
    let sector = if max == p.0[0] {
        (g - b) / delta
    } else if max == p.0[1] {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    let mut h = 60.0 * sector;
    if h < 0.0 {
        h += 360.0;
    }
    if h >= 360.0 {
        h -= 360.0;
    }
    HsvPixel { h, s, v }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gradient(w: usize, h: usize) -> ImageBuffer {
        ImageBuffer::from_fn(w, h, |x, y| {
            Rgb8::new((x * 7 % 256) as u8, (y * 13 % 256) as u8, ((x + y) % 256) as u8)
        })
        .unwrap()
    }

    #[test]
    fn vga_image_has_1200_blocks() {
        let grid = partition_blocks(&gradient(640, 480)).unwrap();
        assert_eq!((grid.cols(), grid.rows(), grid.len()), (40, 30, 1200));
    }

    #[test]
    fn single_block_image() {
        let img = gradient(16, 16);
        let grid = partition_blocks(&img).unwrap();
        assert_eq!(grid.len(), 1);
        assert_eq!(grid.blocks()[0].pixels().as_slice(), img.pixels());
        assert_eq!(assemble_blocks(&grid).unwrap(), img);
    }

    #[test]
    fn remainder_is_cropped() {
        let img = gradient(17, 17);
        let grid = partition_blocks(&img).unwrap();
        assert_eq!(grid.len(), 1);
        let back = assemble_blocks(&grid).unwrap();
        assert_eq!((back.width(), back.height()), (16, 16));
        assert_eq!(back, img.crop16());
        assert_eq!(back.pixel(15, 15), img.pixel(15, 15));
    }

    #[test]
    fn vga_round_trip_is_exact() {
        let img = gradient(640, 480);
        let back = assemble_blocks(&partition_blocks(&img).unwrap()).unwrap();
        assert_eq!(back.to_rgb_bytes(), img.to_rgb_bytes());
    }

    #[test]
    fn too_small_is_rejected() {
        assert!(matches!(
            ImageBuffer::new(15, 16, vec![Rgb8::default(); 240]),
            Err(Error::DimensionTooSmall { .. })
        ));
        assert!(matches!(
            ImageBuffer::new(16, 16, vec![Rgb8::default(); 10]),
            Err(Error::PixelCountMismatch { .. })
        ));
    }

    #[test]
    fn malformed_grid_is_rejected() {
        assert!(BlockGrid::new(2, 2, vec![Block::filled(Rgb8::default()); 3]).is_err());
        assert!(BlockGrid::new(0, 1, vec![]).is_err());
    }

    #[test]
    fn hsv_reference_colors() {
        let red = rgb_to_hsv(Rgb8::new(255, 0, 0));
        assert_eq!((red.h, red.s, red.v), (0.0, 1.0, 1.0));
        let gray = rgb_to_hsv(Rgb8::new(128, 128, 128));
        assert_eq!((gray.h, gray.s, gray.v), (0.0, 0.0, 128.0 / 255.0));
        let green = rgb_to_hsv(Rgb8::new(0, 255, 0));
        assert_eq!((green.h, green.s, green.v), (120.0, 1.0, 1.0));
        let blue = rgb_to_hsv(Rgb8::new(0, 0, 255));
        assert_eq!(blue.h, 240.0);
        let magenta_ish = rgb_to_hsv(Rgb8::new(255, 0, 1));
        assert!(magenta_ish.h > 359.0 && magenta_ish.h < 360.0);
        let black = rgb_to_hsv(Rgb8::new(0, 0, 0));
        assert_eq!((black.h, black.s, black.v), (0.0, 0.0, 0.0));
    }

    proptest! {
        #[test]
        fn hsv_in_range(r: u8, g: u8, b: u8) {
            let hsv = rgb_to_hsv(Rgb8::new(r, g, b));
            prop_assert!((0.0..360.0).contains(&hsv.h));
            prop_assert!((0.0..=1.0).contains(&hsv.s));
            prop_assert!((0.0..=1.0).contains(&hsv.v));
        }

        #[test]
        fn gray_has_no_saturation(l: u8) {
            let hsv = rgb_to_hsv(Rgb8::new(l, l, l));
            prop_assert_eq!(hsv.s, 0.0);
            prop_assert_eq!(hsv.h, 0.0);
        }

        #[test]
        fn aligned_round_trip(cols in 1usize..6, rows in 1usize..6, seed: u64) {
            let img = ImageBuffer::from_fn(cols * 16, rows * 16, |x, y| {
                let v = seed.wrapping_mul(x as u64 * 31 + y as u64 * 17 + 1);
                Rgb8::new(v as u8, (v >> 8) as u8, (v >> 16) as u8)
            }).unwrap();
            let grid = partition_blocks(&img).unwrap();
            prop_assert_eq!(grid.len(), cols * rows);
            prop_assert_eq!(assemble_blocks(&grid).unwrap(), img);
        }

        #[test]
        fn block_count_is_floor_product(w in 16usize..100, h in 16usize..100) {
            let grid = partition_blocks(&gradient(w, h)).unwrap();
            prop_assert_eq!(grid.len(), (w / 16) * (h / 16));
        }
    }
}
