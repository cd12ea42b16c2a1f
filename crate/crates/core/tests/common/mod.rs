//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Minimal number of closed intervals of length `2^-j` covering the
/// depth-5 cubes `cells`, by exhaustive search over intervals whose left
/// end lies on the `2^-6` grid. Coverage is tested on the `2^-7` points of
/// the set: with every endpoint on the `2^-6` grid, a missed piece of the
/// set always contains such a point.
pub fn brute_force_min_cover(cells: &[u64], j: u32) -> u64 {
    assert!(j <= 5);
    // units of 2^-7: cube k is [4k, 4k + 4], δ is 2^{7-j}
    let len = 1i64 << (7 - j);
    let mut pts: Vec<i64> = cells.iter().flat_map(|&k| (4 * k as i64)..=(4 * k as i64 + 4)).collect();
    pts.sort_unstable();
    pts.dedup();
    if pts.is_empty() {
        return 0;
    }
    assert!(pts.len() <= 64, "bitmask search handles at most 64 points");
    let full: u64 = if pts.len() == 64 { u64::MAX } else { (1u64 << pts.len()) - 1 };
    let mut masks: Vec<u64> = Vec::new();
    let mut a = -len;
    while a <= 128 {
        let m = pts
            .iter()
            .enumerate()
            .filter(|(_, &p)| p >= a && p <= a + len)
            .fold(0u64, |acc, (i, _)| acc | (1 << i));
        if m != 0 {
            masks.push(m);
        }
        a += 2;
    }
    masks.sort_unstable();
    masks.dedup();
    let masks: Vec<u64> = masks
        .iter()
        .copied()
        .filter(|&m| !masks.iter().any(|&o| o != m && o & m == m))
        .collect();
    // iterative deepening; branch on the lowest uncovered point
    fn search(covered: u64, full: u64, masks: &[u64], left: u32) -> bool {
        if covered == full {
            return true;
        }
        if left == 0 {
            return false;
        }
        let bit = (!covered & full).trailing_zeros();
        masks
            .iter()
            .filter(|&&m| m >> bit & 1 == 1)
            .any(|&m| search(covered | m, full, masks, left - 1))
    }
    (1..=pts.len() as u32).find(|&m| search(0, full, &masks, m)).expect("singletons always cover") as u64
}

/// 340 seeded subsets of at most six depth-5 cubes, each paired with every
/// dyadic `δ` from `2^0` down to `2^-5`.
pub fn oracle_instances() -> Vec<(Vec<u64>, u32)> {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut out = Vec::new();
    for i in 0..340 {
        let size = 1 + i % 6;
        let mut cells: Vec<u64> = sample(&mut rng, 32, size).into_iter().map(|c| c as u64).collect();
        cells.sort_unstable();
        for j in 0..=5 {
            out.push((cells.clone(), j));
        }
    }
    out
}

/// 50 stage parameter sets: `n = 1..10`, half under `power(1)` and half
/// under `inv_log`, each for a seeded Lipschitz modulus and budget.
pub fn generated_params() -> Vec<(liplab::Gauge, liplab::construct::StageParams)> {
    use liplab::construct::params::choose_with_modulus;
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    (0..50)
        .map(|i| {
            let zeta = if i % 2 == 0 { liplab::Gauge::power(1.0).unwrap() } else { liplab::Gauge::inv_log() };
            let n = 1 + (i / 2) % 10;
            let c: f64 = rng.gen_range(0.5..2.0);
            let eps: f64 = rng.gen_range(0.2..1.0);
            let p = choose_with_modulus(&|t| c * t, n, eps, &zeta, &[]).unwrap();
            (zeta, p)
        })
        .collect()
}
