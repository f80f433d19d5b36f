use forge_core::filters::{
    background_filter, makeup_failed_filter, misalignment_checks, misalignment_filter, FilterName,
};
use forge_core::mask_algebra::non_overlap_count;
use forge_core::model::{FilterConfig, ImageBuffer, Mask, Region, RegionMaskSet, ThresholdMode};
use proptest::prelude::*;

const W: u32 = 40;
const H: u32 = 40;

fn rect(x0: u32, y0: u32, w: u32, h: u32) -> Mask {
    Mask::from_fn(W, H, |x, y| x >= x0 && x < x0 + w && y >= y0 && y < y0 + h)
}

/// Face, eyes, teeth and contour rectangles, all translated by (dx, dy).
fn layout(dx: u32, dy: u32, eye_h: u32) -> RegionMaskSet {
    RegionMaskSet::new(
        rect(8 + dx, 8 + dy, 20, 22),
        rect(12 + dx, 12 + dy, 12, eye_h),
        rect(14 + dx, 24 + dy, 8, 3),
        rect(7 + dx, 7 + dy, 22, 24),
    )
    .unwrap()
}

fn masks() -> impl Strategy<Value = RegionMaskSet> {
    (0u32..8, 0u32..8, 1u32..6).prop_map(|(dx, dy, eh)| layout(dx, dy, eh))
}

fn image_pair() -> impl Strategy<Value = (ImageBuffer, ImageBuffer)> {
    let n = (W * H * 3) as usize;
    (
        prop::collection::vec(any::<u8>(), n),
        prop::collection::vec(-90i16..=90, n),
        0.0f64..1.0,
    )
        .prop_map(|(a, delta, keep)| {
            let src = ImageBuffer::new(W, H, 3, a.clone()).unwrap();
            let gen = a
                .iter()
                .zip(&delta)
                .enumerate()
                // leave a share of samples untouched so statistics spread out
                .map(|(i, (&v, &d))| {
                    if (i % 100) as f64 / 100.0 < keep {
                        v
                    } else {
                        (v as i16 + d).clamp(0, 255) as u8
                    }
                })
                .collect();
            (src, ImageBuffer::new(W, H, 3, gen).unwrap())
        })
}

fn mode() -> impl Strategy<Value = ThresholdMode> {
    prop_oneof![Just(ThresholdMode::Fraction), Just(ThresholdMode::Absolute)]
}

fn ordered(a: f64, b: f64) -> (f64, f64) {
    (a.min(b), a.max(b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symmetric_difference_statistic_is_swap_invariant(s in masks(), g in masks()) {
        let config = FilterConfig { threshold_mode: ThresholdMode::Absolute, min_region_area: 0, ..FilterConfig::default() };
        let forward = misalignment_checks(&s, &g, &config).unwrap();
        let backward = misalignment_checks(&g, &s, &config).unwrap();
        prop_assert_eq!(forward.len(), backward.len());
        for (f, b) in forward.iter().zip(&backward) {
            prop_assert_eq!(f.region, b.region);
            prop_assert_eq!(f.non_overlap, b.non_overlap);
            prop_assert_eq!(f.non_overlap, non_overlap_count(s.region(f.region), g.region(f.region)).unwrap());
        }
    }

    #[test]
    fn misalignment_pass_grows_with_thresholds(
        s in masks(), g in masks(), m in mode(),
        a in 0.0f64..2.0, b in 0.0f64..2.0, which in 0usize..3,
    ) {
        let scale = if m == ThresholdMode::Absolute { 300.0 } else { 1.0 };
        let (lo, hi) = ordered(a * scale, b * scale);
        let with = |t: f64| {
            let mut c = FilterConfig { threshold_mode: m, ..FilterConfig::default() };
            match which {
                0 => c.face_thresh = t,
                1 => c.eye_thresh = t,
                _ => c.teeth_thresh = t,
            }
            misalignment_filter(&s, &g, &c).unwrap().passed
        };
        prop_assert!(!with(lo) || with(hi));
    }

    #[test]
    fn makeup_pass_shrinks_with_thresholds(
        (src, gen) in image_pair(), m in mode(),
        a in 0.0f64..1.0, b in 0.0f64..1.0, t1 in any::<u8>(), t2 in any::<u8>(),
    ) {
        let face = layout(0, 0, 4).face;
        let scale = if m == ThresholdMode::Absolute { 440.0 } else { 1.0 };
        let (lo, hi) = ordered(a * scale, b * scale);
        let run = |pixel: f64, intensity: u8| {
            let c = FilterConfig { threshold_mode: m, mu_pixel_thresh: pixel, mu_thresh: intensity, ..FilterConfig::default() };
            makeup_failed_filter(&src, &gen, &face, &c).unwrap().passed
        };
        prop_assert!(!run(hi, t1) || run(lo, t1));
        let (ilo, ihi) = (t1.min(t2), t1.max(t2));
        prop_assert!(!run(lo, ihi) || run(lo, ilo));
    }

    #[test]
    fn background_pass_grows_with_thresholds(
        (src, gen) in image_pair(), m in mode(),
        a in 0.0f64..1.0, b in 0.0f64..1.0, t1 in any::<u8>(), t2 in any::<u8>(),
    ) {
        let face = layout(0, 0, 4).face;
        let scale = if m == ThresholdMode::Absolute { 1200.0 } else { 1.0 };
        let (lo, hi) = ordered(a * scale, b * scale);
        let run = |pixel: f64, intensity: u8| {
            let c = FilterConfig { threshold_mode: m, bg_pixel_thresh: pixel, bg_thresh: intensity, ..FilterConfig::default() };
            let v = background_filter(&src, &gen, &face, &c).unwrap();
            prop_assert_eq!(v.filter_name, FilterName::Background);
            Ok(v.passed)
        };
        prop_assert!(!run(lo, t1)? || run(hi, t1)?);
        let (ilo, ihi) = (t1.min(t2), t1.max(t2));
        prop_assert!(!run(lo, ilo)? || run(lo, ihi)?);
    }

    #[test]
    fn verdicts_are_bitwise_repeatable((src, gen) in image_pair(), s in masks(), g in masks()) {
        let c = FilterConfig::default();
        prop_assert_eq!(misalignment_filter(&s, &g, &c).unwrap(), misalignment_filter(&s, &g, &c).unwrap());
        let face = &s.face;
        prop_assert_eq!(
            makeup_failed_filter(&src, &gen, face, &c).unwrap(),
            makeup_failed_filter(&src, &gen, face, &c).unwrap()
        );
    }
}

#[test]
fn shifted_face_fails_and_names_face() {
    let s = layout(0, 0, 4);
    let g = layout(6, 0, 4);
    let v = misalignment_filter(&s, &g, &FilterConfig::default()).unwrap();
    assert!(!v.passed);
    assert!(
        v.reason.contains("face") || v.reason.contains("contour"),
        "{}",
        v.reason
    );
    let checks = misalignment_checks(&s, &g, &FilterConfig::default()).unwrap();
    let face = checks.iter().find(|c| c.region == Region::Face).unwrap();
    // 6 columns leave and 6 enter over 22 rows
    assert_eq!(face.non_overlap, 2 * 6 * 22);
    assert_eq!(face.statistic, (2 * 6 * 22) as f64 / (20 * 22) as f64);
}
