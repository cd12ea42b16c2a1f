//! Text formats for sets and covers.
//!
//! Cube sets: a header `d <dim> m <depth>`, then one multi-index per line.
//! Interval sets: a header `d 1 intervals <count>`, then one `lo hi` pair per
//! line. Covers: an optional `# d <dim>` line, then one box per line as
//! `lo_1 hi_1 ... lo_d hi_d`. Numbers are decimals when exactly
//! representable as a double, otherwise exact fractions `p/q`.

use std::fmt::Write as _;

use super::cover::{BoxCover, CoverBox, SetRepr};
use super::cubes::DyadicCubeSet;
use super::intervals::IntervalSet;
use super::scale::{q_fmt, q_from_f64, q_parse, q_to_f64, Q};
use crate::error::{Error, Result};

/// Decimal when the value is an exact double, else `p/q`.
pub fn fmt_exact(q: &Q) -> String {
    let x = q_to_f64(q);
    if x.is_finite() && q_from_f64(x).map_or(false, |back| &back == q) {
        if x != 0.0 && (x.abs() < 1e-4 || x.abs() >= 1e16) {
            format!("{x:e}")
        } else {
            format!("{x}")
        }
    } else {
        q_fmt(q)
    }
}

pub fn write_set(set: &SetRepr) -> String {
    let mut out = String::new();
    match set {
        SetRepr::Cubes(c) => {
            let _ = writeln!(out, "d {} m {}", c.dim(), c.depth());
            for idx in c.indices() {
                let parts: Vec<String> = idx.iter().map(|k| k.to_string()).collect();
                let _ = writeln!(out, "{}", parts.join(" "));
            }
        }
        SetRepr::Intervals(iv) => {
            let _ = writeln!(out, "d 1 intervals {}", iv.len());
            for (a, b) in iv.intervals() {
                let _ = writeln!(out, "{} {}", q_fmt(a), q_fmt(b));
            }
        }
    }
    out
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn parse_set(text: &str) -> Result<SetRepr> {
    let mut lines = content_lines(text);
    let (_, header) = lines.next().ok_or_else(|| Error::Parse("empty set file".into()))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    let bad_header = || Error::Parse(format!("bad set header `{header}`"));
    match h.as_slice() {
        ["d", dim, "m", depth] => {
            let dim: u32 = dim.parse().map_err(|_| bad_header())?;
            let depth: u32 = depth.parse().map_err(|_| bad_header())?;
            let mut idx = Vec::new();
            for (no, line) in lines {
                let v = line
                    .split_whitespace()
                    .map(|t| t.parse::<u64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::Parse(format!("line {no}: bad multi-index `{line}`")))?;
                idx.push(v);
            }
            Ok(SetRepr::Cubes(DyadicCubeSet::new(dim, depth, &idx)?))
        }
        ["d", "1", "intervals", count] => {
            let count: usize = count.parse().map_err(|_| bad_header())?;
            let mut raw = Vec::with_capacity(count);
            for (no, line) in lines {
                let t: Vec<&str> = line.split_whitespace().collect();
                if t.len() != 2 {
                    return Err(Error::Parse(format!("line {no}: expected `lo hi`")));
                }
                raw.push((q_parse(t[0])?, q_parse(t[1])?));
            }
            if raw.len() != count {
                return Err(Error::Parse(format!("header announces {count} intervals, found {}", raw.len())));
            }
            Ok(SetRepr::Intervals(IntervalSet::new(raw)?))
        }
        _ => Err(bad_header()),
    }
}

pub fn write_cover(cover: &BoxCover) -> String {
    let mut out = format!("# d {}\n", cover.dim());
    for b in cover.boxes() {
        let parts: Vec<String> = b.lo.iter().zip(&b.hi).flat_map(|(a, c)| [fmt_exact(a), fmt_exact(c)]).collect();
        let _ = writeln!(out, "{}", parts.join(" "));
    }
    out
}

pub fn parse_cover(text: &str) -> Result<BoxCover> {
    let mut dim: Option<usize> = None;
    for line in text.lines() {
        let t: Vec<&str> = line.trim().trim_start_matches('#').split_whitespace().collect();
        if line.trim().starts_with('#') && t.len() == 2 && t[0] == "d" {
            dim = Some(t[1].parse().map_err(|_| Error::Parse(format!("bad cover header `{line}`")))?);
            break;
        }
    }
    let mut boxes = Vec::new();
    for (no, line) in content_lines(text) {
        let v = line.split_whitespace().map(q_parse).collect::<Result<Vec<Q>>>()?;
        if v.is_empty() || v.len() % 2 != 0 {
            return Err(Error::Parse(format!("line {no}: expected lo/hi pairs")));
        }
        let d = v.len() / 2;
        match dim {
            Some(expected) if expected != d => {
                return Err(Error::Parse(format!("line {no}: box of dimension {d}, expected {expected}")))
            }
            _ => dim = Some(d),
        }
        let lo = v.iter().step_by(2).cloned().collect();
        let hi = v.iter().skip(1).step_by(2).cloned().collect();
        boxes.push(CoverBox::new(lo, hi)?);
    }
    BoxCover::new(dim.unwrap_or(1), boxes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setlib::scale::{q_dyadic, q_ratio};

    #[test]
    fn set_roundtrip() {
        let c = SetRepr::Cubes(DyadicCubeSet::new(2, 3, &[vec![1, 2], vec![7, 0]]).unwrap());
        assert_eq!(parse_set(&write_set(&c)).unwrap(), c);
        let iv = SetRepr::Intervals(IntervalSet::cantor(3));
        assert_eq!(parse_set(&write_set(&iv)).unwrap(), iv);
        assert!(parse_set("d 1 m 2\n4\n").is_err());
        assert!(parse_set("d 1 intervals 2\n0 1\n").is_err());
    }

    #[test]
    fn cover_roundtrip() {
        let b1 = CoverBox::new(vec![q_ratio(1, 3), q_dyadic(70)], vec![q_ratio(1, 2), q_ratio(3, 4)]).unwrap();
        let b2 = CoverBox::new(vec![q_ratio(-1, 2), q_ratio(1, 10)], vec![q_ratio(1, 1), q_ratio(2, 1)]).unwrap();
        let cover = BoxCover::new(2, vec![b1, b2]).unwrap();
        let text = write_cover(&cover);
        assert!(text.contains("0.5 "));
        assert_eq!(parse_cover(&text).unwrap(), cover);
        assert_eq!(parse_cover("# d 3\n").unwrap().dim(), 3);
    }
}
