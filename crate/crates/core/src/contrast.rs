//! Contrast vectors and post-processing of detected changepoints.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{segment_rss, Changepoint, ChangepointModel, Contrast, ContrastKind, Sign};

fn check_sorted_distinct(locs: &[usize]) -> Result<()> {
    for w in locs.windows(2) {
        if w[0] == w[1] {
            return Err(Error::DuplicateLocation(w[0]));
        }
    }
    Ok(())
}

fn target_of(model: &ChangepointModel, j: usize) -> Result<(Changepoint, Vec<usize>)> {
    let cps = model.sorted_changepoints();
    let k = cps.len();
    if j == 0 || j > k {
        return Err(Error::IndexOutOfRange { j, k });
    }
    let locs: Vec<usize> = cps.iter().map(|c| c.location).collect();
    check_sorted_distinct(&locs)?;
    let boundaries = model.boundaries();
    if boundaries.len() != k + model.initial_cuts.len() {
        return Err(Error::DuplicateLocation(cps[j - 1].location));
    }
    Ok((cps[j - 1], boundaries))
}

/// Difference of the means of the two segments adjacent to the `j`-th
/// changepoint (sorted order), signed by its direction.
pub fn segment_contrast(model: &ChangepointModel, j: usize) -> Result<Contrast> {
    let (cp, boundaries) = target_of(model, j)?;
    segment_contrast_at(model.n, &boundaries, cp, j)
}

/// Segment contrast for `cp` given the full sorted boundary set (which must
/// contain `cp.location`).
pub fn segment_contrast_at(n: usize, boundaries: &[usize], cp: Changepoint, target: usize) -> Result<Contrast> {
    check_sorted_distinct(boundaries)?;
    let idx = boundaries
        .binary_search(&cp.location)
        .map_err(|_| Error::InvalidArgument("changepoint is not among the boundaries"))?;
    let left = if idx == 0 { 0 } else { boundaries[idx - 1] };
    let right = boundaries.get(idx + 1).copied().unwrap_or(n);
    let b = cp.location;
    if b == 0 || b >= n {
        return Err(Error::LocationOutOfRange { location: b, max: n - 1 });
    }
    let d = cp.direction.value();
    let mut v = vec![0.0; n];
    let wl = -d / (b - left) as f64;
    let wr = d / (right - b) as f64;
    v[left..b].fill(wl);
    v[b..right].fill(wr);
    Ok(Contrast { v, kind: ContrastKind::Segment, target, location: b, direction: cp.direction })
}

/// `d (y_{b+1} - y_b)` for the `j`-th changepoint (sorted order).
pub fn spike_contrast(model: &ChangepointModel, j: usize) -> Result<Contrast> {
    let (cp, _) = target_of(model, j)?;
    spike_contrast_at(model.n, cp, j)
}

pub fn spike_contrast_at(n: usize, cp: Changepoint, target: usize) -> Result<Contrast> {
    let b = cp.location;
    if b == 0 || b >= n {
        return Err(Error::LocationOutOfRange { location: b, max: n - 1 });
    }
    let d = cp.direction.value();
    let mut v = vec![0.0; n];
    v[b - 1] = -d;
    v[b] = d;
    Ok(Contrast { v, kind: ContrastKind::Spike, target, location: b, direction: cp.direction })
}

/// Merge nearby locations: single-linkage clusters with gaps `<= max_dist`,
/// each replaced by its centroid rounded half toward the smaller value.
pub fn declutter(locations: &[usize], max_dist: usize) -> Vec<usize> {
    let mut sorted = locations.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    clusters(&sorted, max_dist).into_iter().map(|(loc, _)| loc).collect()
}

/// [`declutter`] on changepoints; each cluster takes the sign of the sum of
/// its member directions, ties going to the first member.
pub fn declutter_changepoints(cps: &[Changepoint], max_dist: usize) -> Vec<Changepoint> {
    let mut sorted = cps.to_vec();
    sorted.sort_by_key(|c| c.location);
    let locs: Vec<usize> = sorted.iter().map(|c| c.location).collect();
    clusters(&locs, max_dist)
        .into_iter()
        .map(|(location, range)| {
            let members = &sorted[range.0..range.1];
            let sum: f64 = members.iter().map(|c| c.direction.value()).sum();
            let direction = if sum > 0.0 {
                Sign::Plus
            } else if sum < 0.0 {
                Sign::Minus
            } else {
                members[0].direction
            };
            Changepoint { location, direction }
        })
        .collect()
}

// Returns (rounded centroid, member index range) per cluster of sorted `locs`.
fn clusters(locs: &[usize], max_dist: usize) -> Vec<(usize, (usize, usize))> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < locs.len() {
        let mut end = start + 1;
        while end < locs.len() && locs[end] - locs[end - 1] <= max_dist {
            end += 1;
        }
        let len = end - start;
        let sum: usize = locs[start..end].iter().sum();
        let (q, r) = (sum / len, sum % len);
        let centroid = if 2 * r > len { q + 1 } else { q };
        out.push((centroid, (start, end)));
        start = end;
    }
    out
}

/// Bonferroni adjustment `min(1, k p)`.
pub fn bonferroni(pvalues: &[f64], k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::InvalidArgument("bonferroni factor must be at least 1"));
    }
    pvalues
        .iter()
        .map(|&p| {
            if !(0.0..=1.0).contains(&p) {
                Err(Error::InvalidPValue(p))
            } else {
                Ok((k as f64 * p).min(1.0))
            }
        })
        .collect()
}

/// Residual variance `RSS / (n - #segments)` of a fitted model.
pub fn residual_variance(y: &[f64], boundaries: &[usize]) -> Result<f64> {
    let segments = boundaries.len() + 1;
    if y.len() <= segments {
        return Err(Error::NoDegreesOfFreedom);
    }
    Ok(segment_rss(y, boundaries) / (y.len() - segments) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Algorithm;

    fn bs_model(n: usize, locs: &[usize], dirs: &[Sign]) -> ChangepointModel {
        ChangepointModel {
            algo: Algorithm::Bs,
            n,
            locations: locs.to_vec(),
            partners: None,
            directions: dirs.to_vec(),
            jmax: None,
            signs: None,
            initial_cuts: vec![],
        }
    }

    #[test]
    fn segment_contrast_examples() {
        let m = bs_model(4, &[2], &[Sign::Plus]);
        assert_eq!(segment_contrast(&m, 1).unwrap().v, vec![-0.5, -0.5, 0.5, 0.5]);
        let m = bs_model(4, &[3, 1], &[Sign::Minus, Sign::Plus]);
        assert_eq!(segment_contrast(&m, 1).unwrap().v, vec![-1.0, 0.5, 0.5, 0.0]);
        let m = bs_model(4, &[2], &[Sign::Minus]);
        assert_eq!(segment_contrast(&m, 1).unwrap().v, vec![0.5, 0.5, -0.5, -0.5]);
        assert!(matches!(segment_contrast(&m, 2), Err(Error::IndexOutOfRange { .. })));
        let dup = bs_model(4, &[2, 2], &[Sign::Plus, Sign::Plus]);
        assert_eq!(segment_contrast(&dup, 1), Err(Error::DuplicateLocation(2)));
    }

    #[test]
    fn cuts_bound_the_contrast() {
        let mut m = bs_model(6, &[3], &[Sign::Plus]);
        m.initial_cuts = vec![1];
        let v = segment_contrast(&m, 1).unwrap().v;
        assert_eq!(v, vec![0.0, -0.5, -0.5, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
    }

    #[test]
    fn spike_contrast_examples() {
        let m = bs_model(4, &[2], &[Sign::Plus]);
        assert_eq!(spike_contrast(&m, 1).unwrap().v, vec![0.0, -1.0, 1.0, 0.0]);
        let m = bs_model(4, &[2], &[Sign::Minus]);
        assert_eq!(spike_contrast(&m, 1).unwrap().v, vec![0.0, 1.0, -1.0, 0.0]);
        let m = bs_model(2, &[1], &[Sign::Plus]);
        assert_eq!(spike_contrast(&m, 1).unwrap().v, vec![-1.0, 1.0]);
    }

    #[test]
    fn declutter_examples() {
        assert_eq!(declutter(&[50, 51, 120], 2), vec![50, 120]);
        assert_eq!(declutter(&[10, 13], 2), vec![10, 13]);
        assert_eq!(declutter(&[], 3), Vec::<usize>::new());
        assert_eq!(declutter(&[10, 12, 14], 2), vec![12]);
        let cps = [
            Changepoint { location: 10, direction: Sign::Minus },
            Changepoint { location: 11, direction: Sign::Plus },
        ];
        assert_eq!(declutter_changepoints(&cps, 1), vec![Changepoint { location: 10, direction: Sign::Minus }]);
    }

    #[test]
    fn bonferroni_examples() {
        assert_eq!(bonferroni(&[0.01, 0.5], 2).unwrap(), vec![0.02, 1.0]);
        assert!((bonferroni(&[0.027], 2).unwrap()[0] - 0.054).abs() < 1e-15);
        assert_eq!(bonferroni(&[0.0], 5).unwrap(), vec![0.0]);
        assert_eq!(bonferroni(&[1.5], 1), Err(Error::InvalidPValue(1.5)));
        assert!(bonferroni(&[0.5], 0).is_err());
    }

    #[test]
    fn residual_variance_examples() {
        assert_eq!(residual_variance(&[0.0, 0.0, 2.0, 2.0], &[2]).unwrap(), 0.0);
        assert!((residual_variance(&[0.0, 2.0, 0.0, 2.0], &[]).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(residual_variance(&[0.0, 1.0], &[1]), Err(Error::NoDegreesOfFreedom));
    }
}
