use cxperceptron::eval::{count_errors, pearson, sweep_with_grid, ThresholdGrid};
use cxperceptron::task::Targets;
use proptest::prelude::*;

/// Output trace with `b_sa` samples per bit plus its targets and mask.
fn case() -> impl Strategy<Value = (Vec<f64>, Targets, usize)> {
    (1usize..6, 2usize..40).prop_flat_map(|(b_sa, n)| {
        (
            prop::collection::vec(
                prop::sample::select(vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.5]),
                n * b_sa,
            ),
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(prop::bool::weighted(0.9), n),
            Just(b_sa),
        )
            .prop_filter("need a valid bit", |(_, _, v, _)| v.iter().any(|x| *x))
            .prop_map(|(out, bits, valid, b_sa)| (out, Targets::new(bits, valid).unwrap(), b_sa))
    })
}

/// Exhaustive (offset, level) search with the same tie order.
fn brute_force(out: &[f64], t: &Targets, b_sa: usize, grid: &ThresholdGrid) -> (usize, usize, f64) {
    let mut best = (usize::MAX, 0, 0.0);
    for n in 0..b_sa {
        for &r in grid.levels() {
            let e = count_errors(out, t, b_sa, n, r);
            if e < best.0 {
                best = (e, n, r);
            }
        }
    }
    best
}

proptest! {
    #[test]
    fn sweep_equals_exhaustive_search((out, t, b_sa) in case(), levels in 1usize..20) {
        let grid = ThresholdGrid::for_trace(&out, levels).unwrap();
        let r = sweep_with_grid(&out, &t, b_sa, 0..b_sa, &grid).unwrap();
        let (errors, offset, threshold) = brute_force(&out, &t, b_sa, &grid);
        prop_assert_eq!(r.error_count, errors);
        prop_assert_eq!(r.best_sampling_index, offset);
        prop_assert_eq!(r.best_threshold, threshold);
        prop_assert_eq!(r.total_bits, t.valid_count());
        prop_assert_eq!(r.is_error_free, errors == 0);
    }

    #[test]
    fn ber_never_exceeds_the_minority_fraction((out, t, b_sa) in case(), levels in 2usize..20) {
        let grid = ThresholdGrid::for_trace(&out, levels).unwrap();
        let r = sweep_with_grid(&out, &t, b_sa, 0..b_sa, &grid).unwrap();
        let ones = t.valid_ones();
        let minority = ones.min(t.valid_count() - ones);
        prop_assert!(r.error_count <= minority);
    }

    #[test]
    fn refining_the_grid_never_hurts((out, t, b_sa) in case(), levels in 2usize..20) {
        let coarse = ThresholdGrid::for_trace(&out, levels).unwrap();
        let fine = ThresholdGrid::for_trace(&out, 2 * levels - 1).unwrap();
        for (i, r) in coarse.levels().iter().enumerate() {
            prop_assert!((fine.levels()[2 * i] - r).abs() <= 1e-12 * r.abs().max(1.0));
        }
        let a = sweep_with_grid(&out, &t, b_sa, 0..b_sa, &coarse).unwrap();
        let b = sweep_with_grid(&out, &t, b_sa, 0..b_sa, &fine).unwrap();
        prop_assert!(b.error_count <= a.error_count);
    }

    #[test]
    fn appending_a_cleanly_separated_trace_keeps_ber((out, t, b_sa) in case(), levels in 2usize..20) {
        // Bits decided correctly at every threshold inside the original span.
        let grid = ThresholdGrid::for_trace(&out, levels).unwrap();
        let before = sweep_with_grid(&out, &t, b_sa, 0..b_sa, &grid).unwrap();
        let extra_bits: Vec<bool> = (0..8).map(|l| l % 3 == 0).collect();
        let extra: Vec<f64> = extra_bits.iter().flat_map(|&b| vec![if b { 10.0 } else { -10.0 }; b_sa]).collect();
        let mut joined = out.clone();
        joined.extend(&extra);
        let targets = t.concat(&Targets::all_valid(extra_bits));
        let after = sweep_with_grid(&joined, &targets, b_sa, 0..b_sa, &grid).unwrap();
        prop_assert_eq!(after.error_count, before.error_count);
        prop_assert!(after.ber <= before.ber);
    }

    #[test]
    fn pearson_is_affine_invariant(
        xy in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 3..60),
        a in 0.1..5.0f64,
        b in -5.0..5.0f64,
        c in 0.1..5.0f64,
        d in -5.0..5.0f64,
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
        let Ok(r) = pearson(&x, &y) else { return Ok(()) };
        let xs: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let ys: Vec<f64> = y.iter().map(|v| c * v + d).collect();
        let flipped: Vec<f64> = y.iter().map(|v| -c * v + d).collect();
        prop_assert!((pearson(&xs, &ys).unwrap() - r).abs() < 1e-9);
        prop_assert!((pearson(&xs, &flipped).unwrap() + r).abs() < 1e-9);
        prop_assert!(r.abs() <= 1.0);
    }
}

#[test]
fn ties_prefer_smaller_offset_then_lower_threshold() {
    // Both offsets separate the classes perfectly.
    let out = [0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0];
    let t = Targets::all_valid(vec![false, true, false, true]);
    let grid = ThresholdGrid::spanning(0.0, 1.0, 5).unwrap();
    let r = sweep_with_grid(&out, &t, 2, 0..2, &grid).unwrap();
    assert_eq!(r.error_count, 0);
    assert_eq!(r.best_sampling_index, 0);
    assert!((r.best_threshold - 0.25).abs() < 1e-8);
}

#[test]
fn decision_is_strictly_above_threshold() {
    let t = Targets::all_valid(vec![true]);
    assert_eq!(count_errors(&[0.5], &t, 1, 0, 0.5), 1);
    assert_eq!(count_errors(&[0.5], &t, 1, 0, 0.49), 0);
}

#[test]
fn pearson_frozen_example() {
    // 1, 2, 3, 4 against 2, 1, 4, 3: covariance 3, variances 5 and 5.
    let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0]).unwrap();
    assert!((r - 0.6).abs() < 1e-15);
}
