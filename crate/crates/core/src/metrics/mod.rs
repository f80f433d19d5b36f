//! Evaluation metrics: SSIM, background MSE (L2-M), embedding cosine
//! similarity (CLIP-I) and dataset pass rate.

mod embedding;
mod ssim;

use serde::{Deserialize, Serialize};

pub use self::embedding::{
    decode_embedding, embedding_path_for, encode_embedding, read_embedding, write_embedding,
    EmbeddingVector, EMBEDDING_MAGIC, EMBEDDING_SUFFIX,
};
pub use self::ssim::{
    gaussian_kernel, luma, ssim, ssim_constants, ssim_map, LUMA_WEIGHTS, SSIM_DYNAMIC_RANGE,
    SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW,
};

use crate::error::{ForgeError, Result};
use crate::filters::FilterName;
use crate::mask_algebra::{area, complement};
use crate::model::{ImageBuffer, Mask, PairRecord};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub clip_i: Option<f64>,
    pub ssim: f64,
    pub l2m: f64,
}

/// Mean squared error over background pixels (outside `face_mask`) and all
/// channels, on the 0-255 scale.
pub fn l2m<T: Scalar>(
    source: &ImageBuffer,
    generated: &ImageBuffer,
    face_mask: &Mask,
) -> Result<T> {
    source.check_compatible(generated)?;
    face_mask.check_dims(source.dims())?;
    let background = complement(face_mask);
    let bg_pixels = area(&background);
    if bg_pixels == 0 {
        return Err(ForgeError::NoBackgroundRegion);
    }
    let ch = source.channels() as usize;
    let sum: u64 = source
        .data()
        .chunks_exact(ch)
        .zip(generated.data().chunks_exact(ch))
        .zip(background.bits())
        .filter(|(_, &m)| m != 0)
        .flat_map(|((a, b), _)| a.iter().zip(b))
        .map(|(&x, &y)| {
            let d = x.abs_diff(y) as u64;
            d * d
        })
        .sum();
    let n = bg_pixels * ch as u64;
    Ok(T::from_f64_lossy(sum as f64) / T::from_f64_lossy(n as f64))
}

/// Cosine similarity of two embeddings.
pub fn clip_i<T: Scalar>(emb_ref: &EmbeddingVector<T>, emb_gen: &EmbeddingVector<T>) -> Result<T> {
    if emb_ref.dim() != emb_gen.dim() {
        return Err(ForgeError::Embedding(format!(
            "dimension mismatch: {} vs {}",
            emb_ref.dim(),
            emb_gen.dim()
        )));
    }
    if emb_ref.is_zero() || emb_gen.is_zero() {
        return Err(ForgeError::Embedding("zero vector".into()));
    }
    let (a, b) = (emb_ref.values(), emb_gen.values());
    let dot: T = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
    let na: T = a.iter().map(|&x| x * x).sum::<T>().sqrt();
    let nb: T = b.iter().map(|&x| x * x).sum::<T>().sqrt();
    let cos = dot / (na * nb);
    // rounding can push |cos| a hair past 1
    Ok(cos.max(-T::one()).min(T::one()))
}

/// Failure counts per filter. A pair can count under several filters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionBreakdown {
    pub misalignment: usize,
    pub makeup_failed: usize,
    pub background: usize,
}

impl RejectionBreakdown {
    pub fn get(&self, filter: FilterName) -> usize {
        match filter {
            FilterName::Misalignment => self.misalignment,
            FilterName::MakeupFailed => self.makeup_failed,
            FilterName::Background => self.background,
        }
    }

    fn bump(&mut self, filter: FilterName) {
        match filter {
            FilterName::Misalignment => self.misalignment += 1,
            FilterName::MakeupFailed => self.makeup_failed += 1,
            FilterName::Background => self.background += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.misalignment + self.makeup_failed + self.background
    }

    /// Combines counts from two shards.
    pub fn merge(self, other: Self) -> Self {
        Self {
            misalignment: self.misalignment + other.misalignment,
            makeup_failed: self.makeup_failed + other.makeup_failed,
            background: self.background + other.background,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassRate {
    pub total: usize,
    /// Records without a processing error; the pass rate's denominator.
    pub valid: usize,
    pub errors: usize,
    pub passed: usize,
    pub rate: f64,
    pub breakdown: RejectionBreakdown,
}

/// Whether a record's verdicts all passed. `None` for errored records.
pub fn record_passed(record: &PairRecord) -> Result<Option<bool>> {
    if record.error.is_some() {
        return Ok(None);
    }
    let verdicts = record
        .verdicts
        .as_ref()
        .ok_or_else(|| ForgeError::MissingVerdicts(record.id.clone()))?;
    Ok(Some(verdicts.iter().all(|v| v.passed)))
}

/// Pass rate over records that were processed without error.
pub fn pass_rate(records: &[PairRecord]) -> Result<PassRate> {
    let mut passed = 0;
    let mut errors = 0;
    let mut breakdown = RejectionBreakdown::default();
    for record in records {
        match record_passed(record)? {
            None => errors += 1,
            Some(ok) => {
                passed += ok as usize;
                for v in record.verdicts.iter().flatten().filter(|v| !v.passed) {
                    breakdown.bump(v.filter_name);
                }
            }
        }
    }
    let valid = records.len() - errors;
    if valid == 0 {
        return Err(ForgeError::EmptyManifest);
    }
    Ok(PassRate {
        total: records.len(),
        valid,
        errors,
        passed,
        rate: passed as f64 / valid as f64,
        breakdown,
    })
}
