//! Binary segmentation.

use alloc::vec::Vec;

use super::cusum::{cusum_fast, Prefix};
use super::{insert_sorted, normalize_cuts};
use crate::error::{Error, Result};
use crate::model::{segments, Algorithm, ChangepointModel, Sign};

/// The winning split of one BS step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Split {
    pub s: usize,
    pub b: usize,
    pub e: usize,
    pub stat: f64,
}

/// Best split over all segments of the partition `boundaries` (sorted).
/// Ties keep the first candidate in scan order (leftmost segment, smallest b).
pub(crate) fn best_split(pre: &Prefix, n: usize, boundaries: &[usize]) -> Option<Split> {
    let mut best: Option<Split> = None;
    for (s, e) in segments(n, boundaries) {
        for b in s..e {
            let stat = cusum_fast(pre, s, b, e);
            if best.is_none_or(|w| stat.abs() > w.stat.abs()) {
                best = Some(Split { s, b, e, stat });
            }
        }
    }
    best
}

/// k-step binary segmentation of `y`, starting from the partition cut at
/// `initial_cuts`.
pub fn bs(y: &[f64], k: usize, initial_cuts: &[usize]) -> Result<ChangepointModel> {
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
    let mut directions = Vec::with_capacity(k);
    for step in 1..=k {
        let w = best_split(&pre, n, &boundaries).ok_or(Error::NoAdmissibleSplit { step })?;
        locations.push(w.b);
        directions.push(Sign::of(w.stat));
        insert_sorted(&mut boundaries, w.b);
    }
    Ok(ChangepointModel {
        algo: Algorithm::Bs,
        n,
        locations,
        partners: None,
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
        let m = bs(&[0.0, 0.0, 2.0, 2.0], 1, &[]).unwrap();
        assert_eq!((m.locations, m.directions), (vec![2], vec![Sign::Plus]));
        let m = bs(&[0.0, 0.1, 2.0, 2.0], 2, &[]).unwrap();
        assert_eq!((m.locations, m.directions), (vec![2, 1], vec![Sign::Plus, Sign::Plus]));
        let m = bs(&[2.0, 2.0, 0.0, 0.0], 1, &[]).unwrap();
        assert_eq!(m.directions, vec![Sign::Minus]);
    }

    #[test]
    fn runs_out_of_splits() {
        assert_eq!(bs(&[0.0, 1.0, 2.0], 3, &[]), Err(Error::NoAdmissibleSplit { step: 3 }));
        assert_eq!(bs(&[0.0, 1.0, 2.0], 1, &[1, 2]), Err(Error::NoAdmissibleSplit { step: 1 }));
    }

    #[test]
    fn cuts_are_respected() {
        // the strongest jump is at 2, but a cut there forces a different split
        let m = bs(&[0.0, 0.0, 5.0, 5.0, 6.0], 1, &[2]).unwrap();
        assert_eq!(m.locations, vec![4]);
        assert_eq!(m.initial_cuts, vec![2]);
    }
}
