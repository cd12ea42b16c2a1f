//! Shared inputs for the benchmarks.

use liplab::funclib::{make_test_function, SampledFunction, TestFunction};
use liplab::partition::Ball;

pub fn weierstrass(depth: u32) -> SampledFunction {
    make_test_function(&TestFunction::Weierstrass { a: 0.5, b: 3, terms: 25 }, 1, depth).expect("valid generator")
}

/// Deterministic pseudo-random balls in `[0,1]`, radii in `[2^-12, 2^-4]`.
pub fn balls(n: usize) -> Vec<Ball> {
    let mut state = 0x2545_f491_4f6c_dd1du64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    (0..n)
        .map(|_| Ball::new(vec![next()], 2f64.powi(-(4 + (next() * 8.0) as i32))))
        .collect()
}
