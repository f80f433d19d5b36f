//! Counting primitives on binary masks and masked image differences.
//!
//! Everything here is integer arithmetic, so results are exact and do not
//! depend on how rows are partitioned across workers.

use crate::error::{ForgeError, Result};
use crate::model::{ImageBuffer, Mask};

/// Number of pixels where the two masks disagree (symmetric difference).
pub fn non_overlap_count(a: &Mask, b: &Mask) -> Result<u64> {
    a.check_dims(b.dims())?;
    Ok(a.bits()
        .iter()
        .zip(b.bits())
        .map(|(&x, &y)| (x ^ y) as u64)
        .sum())
}

pub fn area(mask: &Mask) -> u64 {
    mask.bits().iter().map(|&b| b as u64).sum()
}

pub fn complement(mask: &Mask) -> Mask {
    let mut out = mask.clone();
    for b in out.bits_mut() {
        *b ^= 1;
    }
    out
}

pub fn intersection(a: &Mask, b: &Mask) -> Result<Mask> {
    a.check_dims(b.dims())?;
    let mut out = a.clone();
    for (o, &y) in out.bits_mut().iter_mut().zip(b.bits()) {
        *o &= y;
    }
    Ok(out)
}

/// Largest absolute channel difference between two pixels.
#[inline]
pub fn pixel_diff(a: &[u8], b: &[u8]) -> u8 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| x.abs_diff(y))
        .max()
        .unwrap_or(0)
}

/// Counts mask pixels whose max-over-channels absolute difference is strictly
/// greater than `intensity_thresh`.
pub fn thresholded_diff_count(
    img_a: &ImageBuffer,
    img_b: &ImageBuffer,
    mask: &Mask,
    intensity_thresh: u8,
) -> Result<u64> {
    if img_a.channels() != img_b.channels() {
        return Err(ForgeError::ChannelMismatch {
            left: img_a.channels(),
            right: img_b.channels(),
        });
    }
    if img_a.dims() != img_b.dims() {
        return Err(ForgeError::dims(img_a.dims(), img_b.dims()));
    }
    mask.check_dims(img_a.dims())?;

    let ch = img_a.channels() as usize;
    let count = img_a
        .data()
        .chunks_exact(ch)
        .zip(img_b.data().chunks_exact(ch))
        .zip(mask.bits())
        .filter(|&((pa, pb), &m)| m != 0 && pixel_diff(pa, pb) > intensity_thresh)
        .count();
    Ok(count as u64)
}
