//! Seeded test images.

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand::rngs::StdRng;

/// Blocky random texture: 8x8 blocks of random colour, so the image's
/// dHash is effectively a random 64-bit string.
pub fn texture(seed: u64, width: u32, height: u32) -> RgbImage {
    let mut rng = StdRng::seed_from_u64(seed);
    let (bw, bh) = (width.div_ceil(8), height.div_ceil(8));
    let blocks: Vec<[u8; 3]> = (0..64).map(|_| rng.random()).collect();
    RgbImage::from_fn(width, height, |x, y| {
        let b = blocks[((y / bh) * 8 + x / bw) as usize];
        Rgb(b)
    })
}

/// Mirror plus colour inversion. The result's hash is the original's with
/// each row's bits reversed, which matches the original only by chance.
pub fn heavy_distortion(img: &RgbImage) -> RgbImage {
    let (w, h) = img.dimensions();
    RgbImage::from_fn(w, h, |x, y| {
        let p = img.get_pixel(w - 1 - x, y);
        Rgb([255 - p[0], 255 - p[1], 255 - p[2]])
    })
}

pub fn jpeg_bytes(img: &RgbImage, quality: u8) -> Vec<u8> {
    let mut out = Vec::new();
    image::codecs::jpeg::JpegEncoder::new_with_quality(&mut out, quality)
        .encode_image(img)
        .unwrap();
    out
}
