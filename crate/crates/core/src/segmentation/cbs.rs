//! Circular binary segmentation: each step adds a pair of changepoints.

use alloc::vec::Vec;

use super::cusum::{circular_fast, circular_weight, Prefix};
use super::{insert_sorted, normalize_cuts};
use crate::error::{Error, Result};
use crate::model::{segments, Algorithm, ChangepointModel, Sign};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Pair {
    pub s: usize,
    pub a: usize,
    pub b: usize,
    pub e: usize,
    pub stat: f64,
}

/// Best `(a, b)` over all segments. Scan order: segment, then `b`, then `a`.
pub(crate) fn best_pair(pre: &Prefix, n: usize, boundaries: &[usize]) -> Option<Pair> {
    let mut best: Option<Pair> = None;
    for (s, e) in segments(n, boundaries) {
        if e < s + 2 {
            continue;
        }
        for b in s + 1..e {
            for a in s..b {
                let Some(w) = circular_weight(s, a, b, e) else { continue };
                let stat = circular_fast(pre, s, a, b, e, w);
                if best.is_none_or(|x| stat.abs() > x.stat.abs()) {
                    best = Some(Pair { s, a, b, e, stat });
                }
            }
        }
    }
    best
}

/// k-step CBS. The partition after each step is cut at every `a` and `b`
/// found so far, plus the initial cuts.
pub fn cbs(y: &[f64], k: usize, initial_cuts: &[usize]) -> Result<ChangepointModel> {
    let n = y.len();
    if n < 2 {
        return Err(Error::SeriesTooShort(n));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("number of steps must be at least 1"));
    }
    let cuts = normalize_cuts(initial_cuts, n)?;
    let pre = Prefix::new(y);
    let mut boundaries = cuts.clone();
    let mut locations = Vec::with_capacity(k);
    let mut partners = Vec::with_capacity(k);
    let mut directions = Vec::with_capacity(k);
    for step in 1..=k {
        let p = best_pair(&pre, n, &boundaries).ok_or(Error::NoAdmissibleSplit { step })?;
        partners.push(p.a);
        locations.push(p.b);
        directions.push(Sign::of(p.stat));
        insert_sorted(&mut boundaries, p.a);
        insert_sorted(&mut boundaries, p.b);
    }
    Ok(ChangepointModel {
        algo: Algorithm::Cbs,
        n,
        locations,
        partners: Some(partners),
        directions,
        jmax: None,
        signs: None,
        initial_cuts: cuts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn examples() {
        let m = cbs(&[0.0, 2.0, 2.0, 0.0], 1, &[]).unwrap();
        assert_eq!((m.partners, m.locations, m.directions), (Some(vec![1]), vec![3], vec![Sign::Plus]));
        let m = cbs(&[0.0, -2.0, -2.0, 0.0], 1, &[]).unwrap();
        assert_eq!((m.partners, m.locations, m.directions), (Some(vec![1]), vec![3], vec![Sign::Minus]));
    }

    #[test]
    fn no_pair_in_short_segments() {
        assert_eq!(cbs(&[0.0, 1.0], 1, &[]), Err(Error::NoAdmissibleSplit { step: 1 }));
        // after one step on n = 4 all pieces are shorter than 3
        assert_eq!(cbs(&[0.0, 2.0, 2.0, 0.0], 2, &[]), Err(Error::NoAdmissibleSplit { step: 2 }));
    }
}
