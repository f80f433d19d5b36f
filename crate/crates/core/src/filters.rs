//! The three rejection filters applied to every generated pair.
//!
//! Each filter is a pure function of the pair's pixels/masks and the
//! [`FilterConfig`]; the verdict's `passed` flag is recomputable from its
//! `statistic` and `threshold_used` via [`FilterName::passes`].

use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};
use crate::mask_algebra::{area, complement, non_overlap_count, thresholded_diff_count};
use crate::model::{
    FilterConfig, ImageBuffer, Mask, PairRecord, PairResources, Region, RegionMaskSet,
    ThresholdMode,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterName {
    Misalignment,
    MakeupFailed,
    Background,
}

impl FilterName {
    /// Pipeline order.
    pub const ALL: [FilterName; 3] = [
        FilterName::Misalignment,
        FilterName::MakeupFailed,
        FilterName::Background,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FilterName::Misalignment => "misalignment",
            FilterName::MakeupFailed => "makeup_failed",
            FilterName::Background => "background",
        }
    }

    /// Comparison direction of each filter.
    ///
    /// Misalignment and background pass while the statistic stays at or
    /// below the threshold; makeup passes only when the modified-pixel
    /// statistic strictly exceeds it.
    pub fn passes(self, statistic: f64, threshold: f64) -> bool {
        match self {
            FilterName::Misalignment | FilterName::Background => statistic <= threshold,
            FilterName::MakeupFailed => statistic > threshold,
        }
    }
}

impl std::fmt::Display for FilterName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub filter_name: FilterName,
    pub passed: bool,
    pub statistic: f64,
    pub threshold_used: f64,
    pub reason: String,
}

impl FilterVerdict {
    fn decide(
        filter_name: FilterName,
        statistic: f64,
        threshold_used: f64,
        reason: String,
    ) -> Self {
        Self {
            filter_name,
            passed: filter_name.passes(statistic, threshold_used),
            statistic,
            threshold_used,
            reason,
        }
    }
}

fn normalize(count: u64, denominator: u64, mode: ThresholdMode) -> f64 {
    match mode {
        ThresholdMode::Fraction => count as f64 / denominator.max(1) as f64,
        ThresholdMode::Absolute => count as f64,
    }
}

/// Misalignment measurement for one region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionCheck {
    pub region: Region,
    pub source_area: u64,
    pub generated_area: u64,
    /// Pixels counted as non-overlapping (before normalization).
    pub non_overlap: u64,
    pub statistic: f64,
    pub threshold: f64,
}

impl RegionCheck {
    pub fn failed(&self) -> bool {
        self.statistic > self.threshold
    }

    fn severity(&self) -> f64 {
        if self.threshold > 0.0 {
            self.statistic / self.threshold
        } else if self.statistic > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

/// Regions checked for misalignment, in reporting order.
pub const MISALIGNMENT_REGIONS: [Region; 4] =
    [Region::Face, Region::Contour, Region::Eyes, Region::Teeth];

fn region_threshold(region: Region, config: &FilterConfig) -> f64 {
    match region {
        Region::Face | Region::Contour => config.face_thresh,
        Region::Eyes => config.eye_thresh,
        Region::Teeth => config.teeth_thresh,
    }
}

/// Per-region misalignment statistics. Eyes or teeth that are below
/// `min_region_area` in both images are omitted (e.g. a closed mouth).
pub fn misalignment_checks(
    source: &RegionMaskSet,
    generated: &RegionMaskSet,
    config: &FilterConfig,
) -> Result<Vec<RegionCheck>> {
    if source.dims() != generated.dims() {
        return Err(ForgeError::DimensionMismatch {
            left_width: source.dims().0,
            left_height: source.dims().1,
            right_width: generated.dims().0,
            right_height: generated.dims().1,
        });
    }
    let mut checks = Vec::with_capacity(MISALIGNMENT_REGIONS.len());
    for region in MISALIGNMENT_REGIONS {
        let (s, g) = (source.region(region), generated.region(region));
        let source_area = area(s);
        let generated_area = area(g);
        let small_region = matches!(region, Region::Eyes | Region::Teeth);
        let s_small = source_area < config.min_region_area;
        let g_small = generated_area < config.min_region_area;
        let non_overlap = if small_region && s_small && g_small {
            continue;
        } else if small_region && s_small != g_small {
            // region vanished or appeared
            source_area.max(generated_area)
        } else {
            non_overlap_count(s, g)?
        };
        checks.push(RegionCheck {
            region,
            source_area,
            generated_area,
            non_overlap,
            statistic: normalize(non_overlap, source_area, config.threshold_mode),
            threshold: region_threshold(region, config),
        });
    }
    Ok(checks)
}

/// Compares source and generated parsing masks region by region; fails if any
/// region's disagreement exceeds its threshold.
pub fn misalignment_filter(
    source_masks: &RegionMaskSet,
    generated_masks: &RegionMaskSet,
    config: &FilterConfig,
) -> Result<FilterVerdict> {
    let checks = misalignment_checks(source_masks, generated_masks, config)?;
    let mut worst: Option<&RegionCheck> = None;
    for c in &checks {
        if worst.is_none_or(|w| c.severity() > w.severity()) {
            worst = Some(c);
        }
    }
    Ok(match worst {
        None => FilterVerdict::decide(
            FilterName::Misalignment,
            0.0,
            config.face_thresh,
            "no regions to compare".to_owned(),
        ),
        Some(w) => {
            let cmp = if w.failed() { ">" } else { "<=" };
            let reason = format!(
                "region {}: non-overlap {} ({:.6}) {cmp} {}",
                w.region, w.non_overlap, w.statistic, w.threshold
            );
            FilterVerdict::decide(FilterName::Misalignment, w.statistic, w.threshold, reason)
        }
    })
}

/// Fails when too few face pixels changed between source and generated.
pub fn makeup_failed_filter(
    source_img: &ImageBuffer,
    generated_img: &ImageBuffer,
    source_face_mask: &Mask,
    config: &FilterConfig,
) -> Result<FilterVerdict> {
    let face_area = area(source_face_mask);
    // validate shapes before the empty-face check so mismatches surface first
    let modified = thresholded_diff_count(
        source_img,
        generated_img,
        source_face_mask,
        config.mu_thresh,
    )?;
    if face_area == 0 {
        return Err(ForgeError::NoFaceRegion);
    }
    let statistic = normalize(modified, face_area, config.threshold_mode);
    let verdict = FilterVerdict::decide(
        FilterName::MakeupFailed,
        statistic,
        config.mu_pixel_thresh,
        String::new(),
    );
    let cmp = if verdict.passed { ">" } else { "<=" };
    Ok(FilterVerdict {
        reason: format!(
            "{modified} of {face_area} face pixels changed by more than {} ({statistic:.6} {cmp} {})",
            config.mu_thresh, config.mu_pixel_thresh
        ),
        ..verdict
    })
}

/// Fails when too many pixels outside the source face changed.
pub fn background_filter(
    source_img: &ImageBuffer,
    generated_img: &ImageBuffer,
    source_face_mask: &Mask,
    config: &FilterConfig,
) -> Result<FilterVerdict> {
    let background = complement(source_face_mask);
    let bg_area = area(&background);
    let inconsistent =
        thresholded_diff_count(source_img, generated_img, &background, config.bg_thresh)?;
    if bg_area == 0 {
        return Err(ForgeError::NoBackgroundRegion);
    }
    let statistic = normalize(inconsistent, bg_area, config.threshold_mode);
    let verdict = FilterVerdict::decide(
        FilterName::Background,
        statistic,
        config.bg_pixel_thresh,
        String::new(),
    );
    let cmp = if verdict.passed { "<=" } else { ">" };
    Ok(FilterVerdict {
        reason: format!(
            "{inconsistent} of {bg_area} background pixels changed by more than {} ({statistic:.6} {cmp} {})",
            config.bg_thresh, config.bg_pixel_thresh
        ),
        ..verdict
    })
}

/// Runs all three filters in pipeline order without short-circuiting.
pub fn run_all_filters(
    pair: &PairRecord,
    resources: &PairResources,
    config: &FilterConfig,
) -> Result<Vec<FilterVerdict>> {
    let run = || -> Result<Vec<FilterVerdict>> {
        let face = &resources.source_masks.face;
        Ok(vec![
            misalignment_filter(&resources.source_masks, &resources.generated_masks, config)?,
            makeup_failed_filter(&resources.source, &resources.generated, face, config)?,
            background_filter(&resources.source, &resources.generated, face, config)?,
        ])
    };
    run().map_err(|e| e.for_pair(&pair.id))
}
