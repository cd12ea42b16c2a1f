use liplab::funclib::oscillation::dyadic_window;
use liplab::funclib::{make_test_function, oscillation, scaled_osc_estimate, OscMode, SampledFunction, TestFunction};
use liplab::{Gauge, ScaleFn};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DEPTH: u32 = 14;

fn affine(c: f64) -> SampledFunction {
    make_test_function(&TestFunction::Affine { c }, 1, DEPTH).unwrap()
}

#[test]
fn affine_oscillation_on_grid_aligned_ball() {
    // x ± r on the grid: the vertex spread is exactly 2|c|r
    let f = affine(-2.0);
    let o = oscillation(&f, &[0.5], 0.125).unwrap();
    assert_eq!(o.lower, 0.5);
    assert_eq!(o.upper, 0.5 + 2.0 * 2.0 * 2f64.powi(-(DEPTH as i32)));
    assert!(!o.clipped);
}

#[test]
fn affine_proxies_equal_twice_slope() {
    let phi = Gauge::power(1.0).unwrap();
    let window = dyadic_window(2, DEPTH - 2);
    let r_min = *window.last().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for c in [-2.0f64, 0.5, 1.0] {
        let f = affine(c);
        let tol = 2.0 * f.modulus().eval(f.spacing()) / phi.eval(r_min).unwrap();
        for _ in 0..32 {
            let x = [rng.gen_range(0.3..0.7)];
            for mode in [OscMode::Lower, OscMode::Upper] {
                let rec = scaled_osc_estimate(&f, &x, &phi, &window, mode).unwrap();
                assert!(!rec.clipped);
                let err = (rec.summary - 2.0 * c.abs()).abs();
                assert!(err <= tol, "c={c} x={x:?} {mode:?}: {} (tol {tol})", rec.summary);
            }
        }
    }
}

#[test]
fn constant_proxies_are_zero() {
    let f = make_test_function(&TestFunction::Constant { c: 0.3 }, 1, DEPTH).unwrap();
    let phi = Gauge::power(1.0).unwrap();
    let window = dyadic_window(2, DEPTH - 2);
    for x in [0.01, 0.25, 0.5, 0.99] {
        for mode in [OscMode::Lower, OscMode::Upper] {
            let rec = scaled_osc_estimate(&f, &[x], &phi, &window, mode).unwrap();
            assert_eq!(rec.summary, 0.0);
            assert!(rec.per_scale.iter().all(|s| s.osc_upper == 0.0));
        }
    }
}

#[test]
fn weierstrass_upper_proxy_grows_with_depth() {
    let top = make_test_function(&TestFunction::Weierstrass { a: 0.5, b: 3, terms: 25 }, 1, 16).unwrap();
    let phi = Gauge::power(1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let points: Vec<[f64; 1]> = (0..64).map(|_| [rng.gen::<f64>()]).collect();
    let depths = [12u32, 13, 14, 15, 16];
    let proxies: Vec<Vec<f64>> = depths
        .iter()
        .map(|&d| {
            let f = top.coarsen(d).unwrap();
            let window = dyadic_window(2, d - 2);
            points.iter().map(|x| scaled_osc_estimate(&f, x, &phi, &window, OscMode::Upper).unwrap().summary).collect()
        })
        .collect();
    let ok = (0..points.len()).filter(|&i| proxies.windows(2).all(|w| w[0][i] <= w[1][i])).count();
    assert!(ok as f64 >= 0.95 * points.len() as f64, "{ok} of {}", points.len());
}

#[test]
fn coarsen_keeps_shared_vertices() {
    let f = make_test_function(&TestFunction::Cantor, 1, 12).unwrap();
    let g = f.coarsen(9).unwrap();
    for i in 0..=(1u64 << 9) {
        assert_eq!(g.vertex_value(&[i]), f.vertex_value(&[i << 3]));
    }
    assert!(f.coarsen(13).is_err());
}

#[test]
fn resolution_guard() {
    let f = affine(1.0);
    assert!(oscillation(&f, &[0.5], 2f64.powi(-13)).is_err());
    assert!(oscillation(&f, &[0.5], 2f64.powi(-12)).is_ok());
}

#[test]
fn text_round_trip() {
    let f = make_test_function(&TestFunction::Weierstrass { a: 0.5, b: 3, terms: 25 }, 1, 10).unwrap();
    let g = SampledFunction::from_text(&f.to_text()).unwrap();
    assert_eq!(f, g);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn affine_ratio_brackets_slope(c in -4.0f64..4.0, x in 0.26f64..0.74, j in 2u32..12) {
        let f = affine(c);
        let r = 2f64.powi(-(j as i32));
        let o = oscillation(&f, &[x], r).unwrap();
        let slope = 2.0 * c.abs() * r;
        prop_assert!(o.lower <= slope * (1.0 + 1e-12) + 1e-15);
        prop_assert!(o.upper >= slope * (1.0 - 1e-12) - 1e-15);
    }

    #[test]
    fn oscillation_monotone_in_radius(x in 0.0f64..1.0, j in 3u32..10) {
        let f = make_test_function(&TestFunction::Weierstrass { a: 0.5, b: 3, terms: 25 }, 1, 12).unwrap();
        let big = oscillation(&f, &[x], 2f64.powi(-(j as i32))).unwrap();
        let small = oscillation(&f, &[x], 2f64.powi(-(j as i32 + 1))).unwrap();
        prop_assert!(small.lower <= big.lower);
        prop_assert!(big.lower <= big.upper);
    }
}
