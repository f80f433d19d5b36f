use forge_core::mask_algebra::{
    area, complement, intersection, non_overlap_count, thresholded_diff_count,
};
use forge_core::model::{ImageBuffer, Mask};
use proptest::prelude::*;

fn mask_pair() -> impl Strategy<Value = (Mask, Mask)> {
    (1u32..=24, 1u32..=24).prop_flat_map(|(w, h)| {
        let n = (w * h) as usize;
        (
            prop::collection::vec(0u8..=1, n),
            prop::collection::vec(0u8..=1, n),
        )
            .prop_map(move |(a, b)| {
                (
                    Mask::from_bits(w, h, a).unwrap(),
                    Mask::from_bits(w, h, b).unwrap(),
                )
            })
    })
}

fn image_pair_with_mask() -> impl Strategy<Value = (ImageBuffer, ImageBuffer, Mask)> {
    (1u32..=16, 1u32..=16, prop_oneof![Just(1u8), Just(3u8)]).prop_flat_map(|(w, h, c)| {
        let n = (w * h) as usize;
        (
            prop::collection::vec(any::<u8>(), n * c as usize),
            prop::collection::vec(any::<u8>(), n * c as usize),
            prop::collection::vec(0u8..=1, n),
        )
            .prop_map(move |(a, b, m)| {
                (
                    ImageBuffer::new(w, h, c, a).unwrap(),
                    ImageBuffer::new(w, h, c, b).unwrap(),
                    Mask::from_bits(w, h, m).unwrap(),
                )
            })
    })
}

proptest! {
    #[test]
    fn non_overlap_is_symmetric((a, b) in mask_pair()) {
        prop_assert_eq!(non_overlap_count(&a, &b).unwrap(), non_overlap_count(&b, &a).unwrap());
    }

    #[test]
    fn non_overlap_matches_and_formula((a, b) in mask_pair()) {
        // AND computed by hand, not via the library
        let both = a.bits().iter().zip(b.bits()).filter(|(&x, &y)| x == 1 && y == 1).count() as u64;
        let lhs = non_overlap_count(&a, &b).unwrap();
        prop_assert_eq!(lhs + 2 * both, area(&a) + area(&b));
        prop_assert_eq!(area(&intersection(&a, &b).unwrap()), both);
    }

    #[test]
    fn complement_partitions((a, _b) in mask_pair()) {
        let c = complement(&a);
        prop_assert_eq!(area(&a) + area(&c), (a.width() * a.height()) as u64);
        prop_assert_eq!(area(&intersection(&a, &c).unwrap()), 0);
        prop_assert_eq!(non_overlap_count(&a, &c).unwrap(), (a.width() * a.height()) as u64);
    }

    #[test]
    fn diff_count_bounded_and_monotone((a, b, m) in image_pair_with_mask(), t1 in any::<u8>(), t2 in any::<u8>()) {
        let (lo, hi) = (t1.min(t2), t1.max(t2));
        let at_lo = thresholded_diff_count(&a, &b, &m, lo).unwrap();
        let at_hi = thresholded_diff_count(&a, &b, &m, hi).unwrap();
        prop_assert!(at_hi <= at_lo);
        prop_assert!(at_lo <= area(&m));
        prop_assert_eq!(thresholded_diff_count(&a, &a, &m, lo).unwrap(), 0);
    }
}

#[test]
fn shifted_band_counts_twice_the_shift() {
    // rows 0..10 vs rows 3..13 of a 16x16 grid: 3 rows leave, 3 rows enter
    let a = Mask::from_fn(16, 16, |_, y| y < 10);
    let b = Mask::from_fn(16, 16, |_, y| (3..13).contains(&y));
    assert_eq!(non_overlap_count(&a, &b).unwrap(), 2 * 3 * 16);
}
