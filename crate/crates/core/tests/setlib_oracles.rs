mod common;

use liplab::setlib::cover::hausdorff_upper;
use liplab::setlib::scale::{q_int, q_ratio};
use liplab::setlib::{lower_box_dim, lower_box_premeasure, n_delta, CountMode, DyadicCubeSet, IntervalSet, Scale, SetRepr};
use liplab::Gauge;
use proptest::prelude::*;

use common::{brute_force_min_cover, oracle_instances};

#[test]
fn n_delta_matches_exhaustive_search() {
    let instances = oracle_instances();
    assert!(instances.len() >= 2000, "{} instances", instances.len());
    for (cells, j) in &instances {
        let set = DyadicCubeSet::from_packed(1, 5, cells.clone()).unwrap();
        let got = n_delta(&SetRepr::Cubes(set), &Scale::dyadic(*j)).unwrap();
        assert_eq!(got.mode, CountMode::Exact);
        assert_eq!(got.count, brute_force_min_cover(cells, *j), "cells {cells:?} δ = 2^-{j}");
    }
}

#[test]
fn oracle_small_cases() {
    // hand-checked: {0, 2} at δ = 1/32 needs two intervals, at 1/16 one ([0, 3/32] has length 3/32)
    assert_eq!(brute_force_min_cover(&[0, 2], 5), 2);
    assert_eq!(brute_force_min_cover(&[0, 2], 4), 2);
    assert_eq!(brute_force_min_cover(&[0, 2], 3), 1);
    assert_eq!(brute_force_min_cover(&[], 3), 0);
    assert_eq!(brute_force_min_cover(&(0..12).collect::<Vec<_>>(), 2), 2);
    assert_eq!(brute_force_min_cover(&[0, 31], 0), 1);
}

#[test]
fn n_delta_spec_examples() {
    let full = SetRepr::Cubes(DyadicCubeSet::full(1, 8).unwrap());
    assert_eq!(n_delta(&full, &Scale::dyadic(2)).unwrap().count, 4);
    let cantor = SetRepr::Intervals(IntervalSet::cantor(2));
    assert_eq!(n_delta(&cantor, &Scale::triadic(2)).unwrap().count, 4);
    let empty = SetRepr::Intervals(IntervalSet::empty());
    assert_eq!(n_delta(&empty, &Scale::dyadic(3)).unwrap().count, 0);
    let square = SetRepr::Cubes(DyadicCubeSet::full(2, 4).unwrap());
    let c = n_delta(&square, &Scale::dyadic(2)).unwrap();
    assert_eq!((c.count, c.mode), (16, CountMode::GridProxy));
}

#[test]
fn cantor_dimension_proxy() {
    let cantor = SetRepr::Intervals(IntervalSet::cantor(12));
    let scales: Vec<Scale> = (1..=12).map(Scale::triadic).collect();
    let rep = lower_box_dim(&cantor, &scales).unwrap();
    let target = 2f64.ln() / 3f64.ln();
    assert!((rep.lbdim_proxy - target).abs() <= 0.02, "{}", rep.lbdim_proxy);
    // N_{3^-k} = 2^k exactly at every triadic scale
    for (k, s) in rep.per_scale.iter().enumerate() {
        assert_eq!(s.count, 1 << (k + 1));
    }
}

#[test]
fn square_dimension_proxy() {
    let square = SetRepr::Cubes(DyadicCubeSet::full(2, 8).unwrap());
    let scales: Vec<Scale> = (1..=8).map(Scale::dyadic).collect();
    let rep = lower_box_dim(&square, &scales).unwrap();
    assert!((rep.lbdim_proxy - 2.0).abs() <= 0.01, "{}", rep.lbdim_proxy);
}

#[test]
fn finite_set_dimension_proxy() {
    let pts: Vec<_> = [1, 3, 7, 11, 13].iter().map(|&k| q_ratio(k, 17)).collect();
    let set = SetRepr::Intervals(IntervalSet::points(&pts));
    let scales: Vec<Scale> = (1..=12).map(Scale::decimal).collect();
    let rep = lower_box_dim(&set, &scales).unwrap();
    // deepest scale dominates: ln 5 / (12 ln 10)
    assert!((rep.lbdim_proxy - 5f64.ln() / (12.0 * 10f64.ln())).abs() < 1e-12);
    assert!(rep.lbdim_proxy <= 0.1);
}

#[test]
fn cantor_natural_cover_is_one() {
    let g = Gauge::power(2f64.ln() / 3f64.ln()).unwrap();
    for k in 1..=12 {
        let rec = hausdorff_upper(&SetRepr::Intervals(IntervalSet::cantor(k)), &g, None).unwrap();
        assert!((rec.sum - 1.0).abs() <= 1e-12, "k={k}: {}", rec.sum);
    }
}

#[test]
fn premeasure_examples() {
    let id = Gauge::power(1.0).unwrap();
    let scales: Vec<Scale> = (1..=10).map(Scale::dyadic).collect();
    let point = SetRepr::Intervals(IntervalSet::points(&[q_int(0)]));
    let r = lower_box_premeasure(&point, &id, None, &scales).unwrap();
    assert_eq!(r.value, 2f64.powi(-10));
    let unit = SetRepr::Intervals(IntervalSet::unit());
    assert_eq!(lower_box_premeasure(&unit, &id, None, &scales).unwrap().value, 1.0);
}

fn cube_set(dim: u32, depth: u32) -> impl Strategy<Value = DyadicCubeSet> {
    let side = 1u64 << depth;
    prop::collection::vec(prop::collection::vec(0..side, dim as usize), 0..40)
        .prop_map(move |idx| DyadicCubeSet::new(dim, depth, &idx).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn refine_then_coarsen_is_identity(set in cube_set(2, 4)) {
        let back = set.refine(6).unwrap().coarsen(4).unwrap();
        prop_assert_eq!(back, set);
    }

    #[test]
    fn coarsen_covers(set in cube_set(1, 6)) {
        let hull = set.coarsen(3).unwrap().refine(6).unwrap();
        prop_assert!(set.is_subset_of(&hull).unwrap());
    }

    #[test]
    fn n_delta_monotone_in_scale(set in cube_set(1, 6)) {
        let s = SetRepr::Cubes(set);
        let mut prev = 0;
        for j in 0..=6 {
            let c = n_delta(&s, &Scale::dyadic(j)).unwrap().count;
            prop_assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn interval_round_trip(set in cube_set(1, 7)) {
        let iv = set.to_intervals().unwrap();
        prop_assert_eq!(DyadicCubeSet::from_intervals(&iv, 7).unwrap().len() >= set.len(), true);
        prop_assert_eq!(iv.measure(), q_ratio(set.len() as i64, 128));
    }
}
