//! Wild binary segmentation over a fixed set of random intervals.

use alloc::vec::Vec;

use rand::Rng;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::cusum::{cusum_fast, Prefix};
use super::normalize_cuts;
use crate::error::{Error, Result};
use crate::model::{Algorithm, ChangepointModel, Sign};

/// Intervals `(s, e)` with `1 <= s < e <= n`.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct IntervalSet {
    pub intervals: Vec<(usize, usize)>,
}

impl IntervalSet {
    pub fn new(intervals: Vec<(usize, usize)>, n: usize) -> Result<Self> {
        if intervals.iter().any(|&(s, e)| s == 0 || s >= e || e > n) {
            return Err(Error::InvalidIndices("intervals need 1 <= s < e <= n"));
        }
        Ok(IntervalSet { intervals })
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }
}

/// One interval uniform over `{(s, e) : s < e}`, by rejection from the square.
pub fn draw_interval<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (usize, usize) {
    loop {
        let s = rng.random_range(1..=n);
        let e = rng.random_range(1..=n);
        if s < e {
            return (s, e);
        }
    }
}

/// `count` independent intervals.
pub fn draw_intervals<R: Rng + ?Sized>(n: usize, count: usize, rng: &mut R) -> Result<IntervalSet> {
    if n < 2 {
        return Err(Error::SeriesTooShort(n));
    }
    if count == 0 {
        return Err(Error::InvalidArgument("at least one interval is required"));
    }
    Ok(IntervalSet { intervals: (0..count).map(|_| draw_interval(n, rng)).collect() })
}

/// Whether no boundary `c` satisfies `s <= c < e`.
#[inline]
pub(crate) fn interval_active(s: usize, e: usize, boundaries: &[usize]) -> bool {
    // boundaries are sorted; find the first >= s
    let i = boundaries.partition_point(|&c| c < s);
    boundaries.get(i).is_none_or(|&c| c >= e)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct WbsWin {
    pub j: usize,
    pub b: usize,
    pub stat: f64,
}

/// Best split over the active intervals. Ties go to the lowest interval
/// index, then the smallest `b`.
pub(crate) fn best_in_intervals(pre: &Prefix, w: &IntervalSet, boundaries: &[usize]) -> Option<WbsWin> {
    let mut best: Option<WbsWin> = None;
    for (j, &(s, e)) in w.intervals.iter().enumerate() {
        if !interval_active(s, e, boundaries) {
            continue;
        }
        for b in s..e {
            let stat = cusum_fast(pre, s, b, e);
            if best.is_none_or(|x| stat.abs() > x.stat.abs()) {
                best = Some(WbsWin { j, b, stat });
            }
        }
    }
    best
}

/// k-step WBS. Intervals containing a previous changepoint or an initial
/// cut are excluded.
pub fn wbs(y: &[f64], k: usize, w: &IntervalSet, initial_cuts: &[usize]) -> Result<ChangepointModel> {
    let n = y.len();
    if n < 2 {
        return Err(Error::SeriesTooShort(n));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("number of steps must be at least 1"));
    }
    IntervalSet::new(w.intervals.clone(), n)?;
    let cuts = normalize_cuts(initial_cuts, n)?;
    let pre = Prefix::new(y);
    let mut boundaries = cuts.clone();
    let mut locations = Vec::with_capacity(k);
    let mut directions = Vec::with_capacity(k);
    let mut jmax = Vec::with_capacity(k);
    for step in 1..=k {
        let win = best_in_intervals(&pre, w, &boundaries).ok_or(Error::NoAdmissibleSplit { step })?;
        locations.push(win.b);
        directions.push(Sign::of(win.stat));
        jmax.push(win.j + 1);
        super::insert_sorted(&mut boundaries, win.b);
    }
    Ok(ChangepointModel {
        algo: Algorithm::Wbs,
        n,
        locations,
        partners: None,
        directions,
        jmax: Some(jmax),
        signs: None,
        initial_cuts: cuts,
    })
}
