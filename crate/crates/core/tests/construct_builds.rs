mod common;

use liplab::construct::certify::{certify_lip_bound, LipCertificate};
use liplab::construct::exceptional::{is_uncovered, random_in_box};
use liplab::construct::*;
use liplab::funclib::{make_test_function, TestFunction};
use liplab::setlib::scale::{q_int, q_ratio, q_to_f64};
use liplab::setlib::{Scale, Q};
use liplab::{Error, Gauge, ScaleFn};
use num_traits::One;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn make_build(base: TestFunction, zeta: Gauge, n_max: usize) -> liplab::Result<TypicalBuild> {
    let f = make_test_function(&base, 1, 14)?;
    let phi = Gauge::power(1.0)?;
    iterate_typical(&f, n_max, &phi, &zeta, 1.0, &BuildOptions::default())
}

#[test]
fn generated_params_satisfy_identities() {
    for (_, p) in common::generated_params() {
        let kq = q_int(p.k as i64);
        assert_eq!(p.gamma() * p.beta(), Q::one() - &kq * p.eta());
        assert_eq!((Q::one() - p.gamma()) * (p.beta() / &kq), p.eta() / q_int(2));
        let (e1, e2) = p.float_identity_errors();
        assert!(e1 <= 1e-12 && e2 <= 1e-12, "n={} k={} j={}: {e1} {e2}", p.n, p.k, p.eta_exp);
    }
}

#[test]
fn slab_count_is_k_plus_one() {
    // consecutive slabs sit 1/k - η > 0 apart and each has length <= η
    for (zeta, p) in common::generated_params() {
        let count = p.slabs().n_delta(&Scale::dyadic(p.eta_exp));
        assert_eq!(count, p.k + 1);
        let z = zeta.eval(p.eta_f64()).unwrap();
        assert!(count as f64 * z < 1.0 / p.n as f64);
    }
}

#[test]
fn params_reject_bad_grids() {
    assert!(matches!(StageParams::new(3, 0.1, None, 3, 4), Err(Error::Consistency(_))));
    // η = 1/4 is not below 1/k = 1/4
    assert!(matches!(StageParams::new(1, 0.1, None, 4, 2), Err(Error::Consistency(_))));
    assert!(StageParams::new(1, 0.1, None, 4, 3).is_ok());
    assert!(StageParams::new(0, 0.1, None, 4, 3).is_err());
}

#[test]
fn gap_geometry_in_one_dimension() {
    let p = StageParams::new(2, 0.1, None, 5, 4).unwrap();
    let eta = p.eta().clone();
    for j in 0..5u64 {
        let (a, b) = p.cube_interval(j);
        let (c, d) = p.core_interval(j);
        assert_eq!(&a - q_ratio(j as i64, 5), &eta / q_int(4));
        assert_eq!(q_ratio(j as i64 + 1, 5) - &b, &eta / q_int(4));
        assert_eq!(&b - &a, p.cube_side());
        assert_eq!(&c - &a, &eta / q_int(4));
        assert_eq!(&b - &d, &eta / q_int(4));
    }
    // slabs and cores are disjoint and together cover [0,1]
    let slabs = p.slabs();
    let cores = liplab::setlib::IntervalSet::new((0..5).map(|j| p.core_interval(j)).collect()).unwrap();
    assert!(slabs.intersection(&cores).measure() == q_int(0));
    assert_eq!(slabs.union(&cores).measure(), Q::one());
}

#[test]
fn weierstrass_with_inverse_log_has_no_admissible_gap() {
    let r = make_build(TestFunction::Weierstrass { a: 0.5, b: 3, terms: 25 }, Gauge::inv_log(), 3);
    assert!(matches!(r, Err(Error::NoAdmissibleEta(_))), "{r:?}");
}

#[test]
fn constant_build_is_exact() {
    let b = make_build(TestFunction::Constant { c: 0.5 }, Gauge::power(1.0).unwrap(), 3).unwrap();
    assert_eq!(b.built(), 3);
    assert_eq!(b.vertex_deviation, 0.0);
    for n in 1..=3 {
        let c = certify_membership(&b, n).unwrap();
        assert!(c.pass);
        assert_eq!(c.stage_diam_max, 0.0);
    }
}

#[test]
fn affine_build_certificates() {
    let b = make_build(TestFunction::Affine { c: 1.0 }, Gauge::power(1.0).unwrap(), 3).unwrap();
    assert_eq!(b.built(), 3);
    assert!(b.exhausted.is_none());
    assert!(b.vertex_deviation <= b.budget_sum());
    for w in b.stages.windows(2) {
        assert_eq!(w[1].params.k, 2 * w[0].params.k);
    }
    for n in 1..=3 {
        assert!(certify_membership(&b, n).unwrap().pass, "stage {n}");
        let s = certify_lip_sample(&b, n, 200, 3).unwrap();
        assert!(s.pass, "stage {n}: {s:?}");
        assert!(s.direct_osc_max <= s.bound);
    }
}

#[test]
fn uncovered_points_are_not_certified() {
    let b = make_build(TestFunction::Affine { c: 1.0 }, Gauge::power(1.0).unwrap(), 2).unwrap();
    let p = &b.stage(1).unwrap().params;
    // a slab centre is uncovered at stage 1
    let x = vec![q_ratio(1, p.k as i64)];
    assert!(matches!(certify_lip_bound(&b, &x, 1).unwrap(), LipCertificate::NotCovered { .. }));
    let prof = coverage_profile(&b, &x).unwrap();
    assert!(!prof.covered[0]);
    assert_eq!(is_uncovered(&b, &x), prof.count == 0);
}

#[test]
fn exceptional_set_of_affine_build() {
    let b = make_build(TestFunction::Affine { c: 1.0 }, Gauge::power(1.0).unwrap(), 3).unwrap();
    let ex = exceptional_set(&b, 12, 2000, 4).unwrap();
    for pm in &ex.analysis.premeasures {
        assert!(pm.below, "{pm:?}");
    }
    assert!(ex.analysis.containment.pass(), "{:?}", ex.analysis.containment);
    assert!(ex.analysis.micro.is_none());
    // each tail intersects fewer slab unions than the one before it
    for w in ex.tails.windows(2) {
        assert!(w[0].is_subset_of(&w[1]));
    }
}

#[test]
fn inverse_log_micro_route() {
    let b = make_build(TestFunction::Affine { c: 1.0 }, Gauge::inv_log(), 3).unwrap();
    let ex = exceptional_set(&b, 12, 2000, 5).unwrap();
    let m = ex.analysis.micro.as_ref().expect("inv_log builds take the micro route");
    assert!(m.verify_pass);
    assert_eq!(m.region_exact, Some(true));
    assert_eq!(m.region_inside, m.region_points);
    assert!((m.eps - (-m.beta).exp()).abs() <= 1e-15);
}

#[test]
fn save_load_round_trip() {
    let b = make_build(TestFunction::Affine { c: 1.0 }, Gauge::power(1.0).unwrap(), 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_build(&b, dir.path(), 10, None).unwrap();
    let (back, meta) = load_build(dir.path()).unwrap();
    assert_eq!(back, b);
    assert_eq!(meta.render_depth, 10);
    let bad = std::fs::read_to_string(dir.path().join("stages.json")).unwrap().replacen("\"plateau_values\": [", "\"plateau_values\": [0.125, ", 1);
    std::fs::write(dir.path().join("stages.json"), bad).unwrap();
    assert!(load_build(dir.path()).is_err());
}

#[test]
fn final_function_stays_within_budget() {
    let b = make_build(TestFunction::Weierstrass { a: 0.5, b: 3, terms: 25 }, Gauge::power(1.0).unwrap(), 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let f0 = b.base();
    for _ in 0..200 {
        let x = random_in_box(&mut rng, &[q_int(0)], &[Q::one()]).unwrap();
        let v0 = f0.evaluate(&[q_to_f64(&x[0])]).unwrap();
        let v = b.function.eval_at(b.built(), &x).unwrap();
        // interpolation error of the base on top of the stage budgets
        let slack = 2.0 * f0.modulus().eval(f0.spacing());
        assert!((v - v0).abs() <= b.budget_sum() + slack, "{v} vs {v0}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn stage_identities_hold(n in 1usize..12, extra in 1u64..40, slack in 1u32..30) {
        let k = n as u64 + extra;
        let j = (64 - k.leading_zeros()) + slack;
        let p = StageParams::new(n, 0.5, None, k, j).unwrap();
        let kq = q_int(k as i64);
        prop_assert_eq!(p.gamma() * p.beta(), Q::one() - &kq * p.eta());
        prop_assert_eq!(p.gap_radius(), p.eta() / q_int(2));
        prop_assert_eq!(p.slabs().len() as u64, k + 1);
    }

    #[test]
    fn budgets_decay_geometrically(eps0 in 0.01f64..2.0, s1 in 1e-6f64..1.0, s2 in 1e-6f64..1.0) {
        let e: Vec<f64> = (1..=4).map(|n| build::next_budget(eps0, n, &[s1, s2][..(n - 1).min(2)])).collect();
        let tails = build::tails_of(&e);
        prop_assert!(2.0 * tails[0] < s1 / 2.0 + 1e-15);
        prop_assert!(2.0 * tails[1] < s2 / 2.0 + 1e-15);
        for w in e.windows(2) {
            prop_assert!(w[1] <= w[0] / 2.0 * (1.0 + 1e-15));
        }
    }
}
