//! 64-bit difference hash (dHash) over an 8x9 grayscale downscale.
//!
//! Luma uses the BT.601 weights in fixed point (`299 R + 587 G + 114 B`,
//! i.e. luma scaled by 1000) and the downscale is an exact area average
//! computed in integer arithmetic, so the hash of a given pixel buffer is
//! identical on every platform. Bit `row * 8 + col` is set when the cell at
//! `col` is strictly brighter than the cell at `col + 1` in the same row.

use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

const GRID_W: usize = 9;
const GRID_H: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HashError {
    #[error("image has zero width or height")]
    EmptyImage,
    #[error("pixel buffer holds {actual} bytes, expected {expected}")]
    BufferSize { expected: usize, actual: usize },
    #[error("invalid hash literal {0:?}: expected 16 hex digits")]
    Parse(alloc::string::String),
}

/// A 64-bit perceptual fingerprint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Hash64(pub u64);

impl Hash64 {
    pub const BITS: u32 = 64;

    pub fn hamming(self, other: Hash64) -> u32 {
        (self.0 ^ other.0).count_ones()
    }

    /// `1 - hamming / 64`; always a multiple of 1/64 in `[0, 1]`.
    pub fn similarity(self, other: Hash64) -> f64 {
        1.0 - f64::from(self.hamming(other)) / f64::from(Self::BITS)
    }
}

impl fmt::Display for Hash64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl FromStr for Hash64 {
    type Err = HashError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 16 || !s.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(HashError::Parse(s.into()));
        }
        u64::from_str_radix(s, 16)
            .map(Hash64)
            .map_err(|_| HashError::Parse(s.into()))
    }
}

/// Hash an interleaved RGB8 buffer (`width * height * 3` bytes, row-major).
pub fn dhash_rgb8(pixels: &[u8], width: usize, height: usize) -> Result<Hash64, HashError> {
    check_dims(pixels.len(), width, height, 3)?;
    Ok(dhash_with(width, height, |i| {
        let p = &pixels[i * 3..i * 3 + 3];
        299 * u64::from(p[0]) + 587 * u64::from(p[1]) + 114 * u64::from(p[2])
    }))
}

/// Hash an 8-bit grayscale buffer (`width * height` bytes, row-major).
pub fn dhash_luma(luma: &[u8], width: usize, height: usize) -> Result<Hash64, HashError> {
    check_dims(luma.len(), width, height, 1)?;
    Ok(dhash_with(width, height, |i| 1000 * u64::from(luma[i])))
}

fn check_dims(len: usize, width: usize, height: usize, channels: usize) -> Result<(), HashError> {
    if width == 0 || height == 0 {
        return Err(HashError::EmptyImage);
    }
    let expected = width * height * channels;
    if len != expected {
        return Err(HashError::BufferSize {
            expected,
            actual: len,
        });
    }
    Ok(())
}

/// Overlap, in scaled units, between source pixel `p` (width `cell`) and
/// grid cell `c` (width `src`), where both axes are scaled to `src * cell`.
fn overlap(p: usize, c: usize, src: usize, cell: usize) -> u64 {
    let (p0, p1) = (p * cell, (p + 1) * cell);
    let (c0, c1) = (c * src, (c + 1) * src);
    let lo = p0.max(c0);
    let hi = p1.min(c1);
    hi.saturating_sub(lo) as u64
}

/// Source pixel range touching grid cell `c`.
fn span(c: usize, src: usize, cell: usize) -> core::ops::Range<usize> {
    let start = c * src / cell;
    let end = ((c + 1) * src).div_ceil(cell).min(src);
    start..end
}

fn dhash_with(width: usize, height: usize, luma: impl Fn(usize) -> u64) -> Hash64 {
    // Every grid cell covers the same scaled area (width * height), so the
    // weighted sums compare exactly like the area averages would.
    let mut cells = [[0u64; GRID_W]; GRID_H];
    let mut row_sums = [0u64; GRID_W];
    for (cy, cell_row) in cells.iter_mut().enumerate() {
        for py in span(cy, height, GRID_H) {
            let wy = overlap(py, cy, height, GRID_H);
            if wy == 0 {
                continue;
            }
            let base = py * width;
            for (cx, sum) in row_sums.iter_mut().enumerate() {
                *sum = span(cx, width, GRID_W)
                    .map(|px| overlap(px, cx, width, GRID_W) * luma(base + px))
                    .sum();
            }
            for (acc, s) in cell_row.iter_mut().zip(row_sums.iter()) {
                *acc += wy * s;
            }
        }
    }

    let mut bits = 0u64;
    for (row, cell_row) in cells.iter().enumerate() {
        for col in 0..GRID_W - 1 {
            if cell_row[col] > cell_row[col + 1] {
                bits |= 1 << (row * 8 + col);
            }
        }
    }
    Hash64(bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;
    use alloc::vec::Vec;

    fn horizontal_gradient(width: usize, height: usize, rising: bool) -> Vec<u8> {
        let mut px = Vec::with_capacity(width * height * 3);
        for _ in 0..height {
            for x in 0..width {
                let v = (x * 255 / (width - 1)) as u8;
                let v = if rising { v } else { 255 - v };
                px.extend_from_slice(&[v, v, v]);
            }
        }
        px
    }

    #[test]
    fn uniform_black_hashes_to_zero() {
        let px = vec![0u8; 32 * 24 * 3];
        assert_eq!(dhash_rgb8(&px, 32, 24).unwrap(), Hash64(0));
    }

    #[test]
    fn uniform_gray_has_no_transitions() {
        // Exact integer averaging: no rounding noise on constant images.
        let px = vec![137u8; 101 * 37 * 3];
        assert_eq!(dhash_rgb8(&px, 101, 37).unwrap(), Hash64(0));
    }

    #[test]
    fn gradient_inversion_is_dissimilar() {
        let a = dhash_rgb8(&horizontal_gradient(90, 40, true), 90, 40).unwrap();
        let b = dhash_rgb8(&horizontal_gradient(90, 40, false), 90, 40).unwrap();
        // Rising left-to-right never has left > right; the inversion always does.
        assert_eq!(a, Hash64(0));
        assert_eq!(b, Hash64(u64::MAX));
        assert!(a.similarity(b) <= 0.2);
    }

    #[test]
    fn same_image_same_hash() {
        let px: Vec<u8> = (0..50 * 30 * 3).map(|i| (i * 7 % 251) as u8).collect();
        assert_eq!(
            dhash_rgb8(&px, 50, 30).unwrap(),
            dhash_rgb8(&px, 50, 30).unwrap()
        );
    }

    #[test]
    fn exact_grid_sized_image_compares_pixels_directly() {
        // A 9x8 image maps one pixel per cell.
        let mut luma = vec![0u8; 9 * 8];
        luma[0] = 200; // row 0: col 0 brighter than col 1
        luma[9 + 4] = 10; // row 1: col 4 brighter than col 5
        let h = dhash_luma(&luma, 9, 8).unwrap();
        assert_eq!(h.0 & 1, 1);
        assert_eq!((h.0 >> 8) & 0xff, 1 << 4);
    }

    #[test]
    fn tiny_images_are_upsampled_by_area() {
        let luma = [255u8, 0];
        let h = dhash_luma(&luma, 2, 1).unwrap();
        // Cells 0..=3 are white, cell 4 straddles the edge, 5..=8 are black.
        for row in 0..8 {
            assert_eq!((h.0 >> (row * 8)) & 0xff, 0b0001_1000, "row {row}");
        }
    }

    #[test]
    fn similarity_arithmetic() {
        let h = Hash64(0x0123_4567_89ab_cdef);
        assert_eq!(h.similarity(h), 1.0);
        assert_eq!(h.similarity(Hash64(!h.0)), 0.0);
        let d13 = Hash64(h.0 ^ 0x1fff);
        assert_eq!(h.hamming(d13), 13);
        assert_eq!(h.similarity(d13), 51.0 / 64.0);
        assert!(h.similarity(d13) < 0.8);
    }

    #[test]
    fn bad_dimensions_are_rejected() {
        assert_eq!(dhash_rgb8(&[], 0, 4), Err(HashError::EmptyImage));
        assert_eq!(
            dhash_rgb8(&[0; 10], 2, 2),
            Err(HashError::BufferSize {
                expected: 12,
                actual: 10
            })
        );
    }

    #[test]
    fn hex_round_trip() {
        let h = Hash64(0xdead_beef_0000_0001);
        assert_eq!(h.to_string(), "deadbeef00000001");
        assert_eq!("deadbeef00000001".parse::<Hash64>().unwrap(), h);
        assert!("deadbeef".parse::<Hash64>().is_err());
        assert!("+eadbeef00000001".parse::<Hash64>().is_err());
    }
}
