//! Exact finite unions of closed intervals on the line.

use num_traits::{Signed, Zero};

use super::scale::{q_ceil_u64, q_from_f64, q_int, q_ratio, q_to_f64, Scale, Q};
use crate::error::{Error, Result};

/// A finite union of closed intervals with exact rational endpoints.
/// Stored sorted, pairwise disjoint and non-touching (touching intervals are
/// merged). Degenerate intervals `[a, a]` represent points.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IntervalSet {
    intervals: Vec<(Q, Q)>,
}

impl IntervalSet {
    pub fn new(mut raw: Vec<(Q, Q)>) -> Result<Self> {
        for (lo, hi) in &raw {
            if lo > hi {
                return Err(Error::InvalidParam(format!(
                    "interval with lo > hi: {} > {}",
                    q_to_f64(lo),
                    q_to_f64(hi)
                )));
            }
        }
        raw.sort();
        let mut merged: Vec<(Q, Q)> = Vec::with_capacity(raw.len());
        for (lo, hi) in raw {
            match merged.last_mut() {
                Some(last) if lo <= last.1 => {
                    if hi > last.1 {
                        last.1 = hi;
                    }
                }
                _ => merged.push((lo, hi)),
            }
        }
        Ok(IntervalSet { intervals: merged })
    }

    pub fn empty() -> Self {
        IntervalSet::default()
    }

    pub fn unit() -> Self {
        IntervalSet { intervals: vec![(q_int(0), q_int(1))] }
    }

    pub fn from_f64(raw: &[(f64, f64)]) -> Result<Self> {
        let v = raw
            .iter()
            .map(|&(a, b)| Ok((q_from_f64(a)?, q_from_f64(b)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(v)
    }

    pub fn points(xs: &[Q]) -> Self {
        Self::new(xs.iter().map(|x| (x.clone(), x.clone())).collect()).expect("points are valid intervals")
    }

    /// The `2^depth` intervals of the middle-thirds Cantor construction.
    pub fn cantor(depth: u32) -> Self {
        let mut cur = vec![(q_int(0), q_int(1))];
        for _ in 0..depth {
            let mut next = Vec::with_capacity(cur.len() * 2);
            for (lo, hi) in cur {
                let third = (&hi - &lo) / q_int(3);
                next.push((lo.clone(), &lo + &third));
                next.push((&hi - &third, hi));
            }
            cur = next;
        }
        IntervalSet { intervals: cur }
    }

    pub fn intervals(&self) -> &[(Q, Q)] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Lebesgue measure.
    pub fn measure(&self) -> Q {
        self.intervals.iter().fold(Q::zero(), |acc, (lo, hi)| acc + (hi - lo))
    }

    pub fn contains(&self, x: &Q) -> bool {
        let idx = self.intervals.partition_point(|(lo, _)| lo <= x);
        idx > 0 && &self.intervals[idx - 1].1 >= x
    }

    pub fn contains_f64(&self, x: f64) -> bool {
        match q_from_f64(x) {
            Ok(q) => self.contains(&q),
            Err(_) => false,
        }
    }

    /// Index of the interval containing `x`.
    pub fn locate(&self, x: &Q) -> Option<usize> {
        let idx = self.intervals.partition_point(|(lo, _)| lo <= x);
        (idx > 0 && &self.intervals[idx - 1].1 >= x).then(|| idx - 1)
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        let mut all = self.intervals.clone();
        all.extend(other.intervals.iter().cloned());
        IntervalSet::new(all).expect("union of valid sets")
    }

    pub fn intersection(&self, other: &IntervalSet) -> IntervalSet {
        let (a, b) = (&self.intervals, &other.intervals);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < a.len() && j < b.len() {
            let lo = if a[i].0 > b[j].0 { &a[i].0 } else { &b[j].0 };
            let hi = if a[i].1 < b[j].1 { &a[i].1 } else { &b[j].1 };
            if lo <= hi {
                out.push((lo.clone(), hi.clone()));
            }
            if a[i].1 < b[j].1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        IntervalSet::new(out).expect("intersection of valid sets")
    }

    pub fn is_subset_of(&self, other: &IntervalSet) -> bool {
        self.intervals.iter().all(|(lo, hi)| match other.locate(lo) {
            Some(k) => &other.intervals[k].1 >= hi,
            None => false,
        })
    }

    /// Exact `N_δ`: minimal number of sets of diameter `<= δ` covering the set.
    /// On the line a left-to-right greedy sweep with closed windows
    /// `[a, a + δ]` is optimal.
    pub fn n_delta(&self, delta: &Scale) -> u64 {
        let d = delta.value();
        let mut count = 0u64;
        let mut covered: Option<Q> = None;
        for (lo, hi) in &self.intervals {
            let end = match &covered {
                Some(c) if hi <= c => continue,
                Some(c) if lo <= c => c.clone(),
                _ => {
                    count += 1;
                    lo + d
                }
            };
            if hi > &end {
                let extra = q_ceil_u64(&((hi - &end) / d));
                count += extra;
                covered = Some(end + d * q_int(extra as i64));
            } else {
                covered = Some(end);
            }
        }
        count
    }

    /// Shifts and clips to `[0, 1]`.
    pub fn clip_unit(&self) -> IntervalSet {
        self.intersection(&IntervalSet::unit())
    }

    /// Uniform sample from the set (weighted by length; points by count when
    /// the set has measure zero). `u, v` are uniform in `[0, 1)`.
    pub fn sample(&self, u: f64, v: f64) -> Option<f64> {
        if self.is_empty() {
            return None;
        }
        let total = q_to_f64(&self.measure());
        if total <= 0.0 {
            let k = ((u * self.len() as f64) as usize).min(self.len() - 1);
            return Some(q_to_f64(&self.intervals[k].0));
        }
        let target = u * total;
        let mut acc = 0.0;
        for (lo, hi) in &self.intervals {
            let (lo, hi) = (q_to_f64(lo), q_to_f64(hi));
            acc += hi - lo;
            if acc >= target {
                return Some(lo + v * (hi - lo));
            }
        }
        let (lo, hi) = self.intervals.last().map(|(a, b)| (q_to_f64(a), q_to_f64(b)))?;
        Some(lo + v * (hi - lo))
    }

    /// Complement inside `[lo, hi]` as closed intervals (closures of the gaps).
    pub fn complement_within(&self, lo: &Q, hi: &Q) -> IntervalSet {
        let mut out = Vec::new();
        let mut cursor = lo.clone();
        for (a, b) in &self.intervals {
            if b < lo || a > hi {
                continue;
            }
            if a > &cursor {
                out.push((cursor.clone(), a.clone()));
            }
            if b > &cursor {
                cursor = b.clone();
            }
        }
        if &cursor < hi {
            out.push((cursor, hi.clone()));
        }
        IntervalSet::new(out).expect("gaps are valid intervals")
    }

    /// Largest interval length.
    pub fn max_len(&self) -> Q {
        self.intervals
            .iter()
            .map(|(lo, hi)| hi - lo)
            .max()
            .unwrap_or_else(Q::zero)
    }

    pub fn half() -> Q {
        q_ratio(1, 2)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.intervals.first().map(|(lo, _)| !lo.is_negative()).unwrap_or(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_and_contains() {
        let s = IntervalSet::new(vec![(q_ratio(1, 2), q_int(1)), (q_int(0), q_ratio(1, 2))]).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s.contains(&q_ratio(3, 4)));
        assert!(!s.contains(&q_int(2)));
        assert!(IntervalSet::new(vec![(q_int(1), q_int(0))]).is_err());
    }

    #[test]
    fn n_delta_examples() {
        assert_eq!(IntervalSet::unit().n_delta(&Scale::dyadic(2)), 4);
        assert_eq!(IntervalSet::cantor(2).n_delta(&Scale::triadic(2)), 4);
        assert_eq!(IntervalSet::empty().n_delta(&Scale::dyadic(1)), 0);
        assert_eq!(IntervalSet::points(&[q_int(0)]).n_delta(&Scale::dyadic(10)), 1);
        for k in 0..=12 {
            assert_eq!(IntervalSet::cantor(12).n_delta(&Scale::triadic(k)), 1u64 << k);
        }
    }

    #[test]
    fn set_algebra() {
        let a = IntervalSet::from_f64(&[(0.0, 0.5), (0.75, 1.0)]).unwrap();
        let b = IntervalSet::from_f64(&[(0.25, 0.8)]).unwrap();
        let i = a.intersection(&b);
        assert_eq!(i, IntervalSet::from_f64(&[(0.25, 0.5), (0.75, 0.8)]).unwrap());
        assert!(i.is_subset_of(&a) && i.is_subset_of(&b));
        assert!(!a.is_subset_of(&b));
        let gaps = a.complement_within(&q_int(0), &q_int(1));
        assert_eq!(gaps, IntervalSet::from_f64(&[(0.5, 0.75)]).unwrap());
        assert_eq!(a.union(&b), IntervalSet::unit());
    }
}
