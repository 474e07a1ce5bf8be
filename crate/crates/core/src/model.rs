//! Shared domain types.

use alloc::string::String;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Detection algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "lowercase"))]
pub enum Algorithm {
    Bs,
    Wbs,
    Cbs,
    Fl,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Bs => "bs",
            Algorithm::Wbs => "wbs",
            Algorithm::Cbs => "cbs",
            Algorithm::Fl => "fl",
        }
    }
}

/// A direction in `{-1, +1}`. `sign(0)` is `+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(into = "i8", try_from = "i8"))]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub fn of(x: f64) -> Sign {
        if x < 0.0 {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Minus => -1.0,
            Sign::Plus => 1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Minus => Sign::Plus,
            Sign::Plus => Sign::Minus,
        }
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        match s {
            Sign::Minus => -1,
            Sign::Plus => 1,
        }
    }
}

impl TryFrom<i8> for Sign {
    type Error = &'static str;
    fn try_from(v: i8) -> core::result::Result<Sign, Self::Error> {
        match v {
            -1 => Ok(Sign::Minus),
            1 => Ok(Sign::Plus),
            _ => Err("sign must be -1 or +1"),
        }
    }
}

/// Observed data vector with optional chromosome labels and positions.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Series {
    values: Vec<f64>,
    chrom: Option<Vec<String>>,
    pos: Option<Vec<i64>>,
}

impl Series {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::with_labels(values, None, None)
    }

    pub fn with_labels(values: Vec<f64>, chrom: Option<Vec<String>>, pos: Option<Vec<i64>>) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::SeriesTooShort(n));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if let Some(c) = &chrom {
            if c.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: c.len() });
            }
            let mut seen: Vec<&str> = Vec::new();
            for (i, label) in c.iter().enumerate() {
                if i > 0 && c[i - 1] == *label {
                    continue;
                }
                if seen.contains(&label.as_str()) {
                    return Err(Error::ChromNotContiguous { label: label.clone(), index: i });
                }
                seen.push(label);
            }
        }
        if let Some(p) = &pos {
            if p.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: p.len() });
            }
        }
        Ok(Series { values, chrom, pos })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn chrom(&self) -> Option<&[String]> {
        self.chrom.as_deref()
    }

    pub fn pos(&self) -> Option<&[i64]> {
        self.pos.as_deref()
    }

    /// Locations `b` (1-based, split after position `b`) where the
    /// chromosome label changes.
    pub fn chrom_boundaries(&self) -> Vec<usize> {
        match &self.chrom {
            None => Vec::new(),
            Some(c) => (1..c.len()).filter(|&i| c[i - 1] != c[i]).collect(),
        }
    }
}

/// A located change with its direction (`+1` means the mean rises).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Changepoint {
    pub location: usize,
    pub direction: Sign,
}

/// Output of a k-step detection run.
///
/// Locations follow the convention that `b` splits between positions `b`
/// and `b + 1` (1-based), so every location lies in `1..n`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ChangepointModel {
    pub algo: Algorithm,
    pub n: usize,
    /// `b` in estimation order.
    pub locations: Vec<usize>,
    /// CBS only: `a` with `a < b` per step.
    pub partners: Option<Vec<usize>>,
    pub directions: Vec<Sign>,
    /// WBS only: 1-based index of the maximizing interval per step.
    pub jmax: Option<Vec<usize>>,
    /// FL only: signs of all competing boundary statistics per step
    /// (reported, not part of the selection event).
    pub signs: Option<Vec<Vec<Sign>>>,
    pub initial_cuts: Vec<usize>,
}

impl ChangepointModel {
    pub fn k(&self) -> usize {
        self.locations.len()
    }

    /// Changepoints in estimation order. CBS contributes `(a, d)` then
    /// `(b, -d)` per step.
    pub fn changepoints(&self) -> Vec<Changepoint> {
        let mut out = Vec::with_capacity(2 * self.k());
        for (l, (&b, &d)) in self.locations.iter().zip(&self.directions).enumerate() {
            if let Some(a) = &self.partners {
                out.push(Changepoint { location: a[l], direction: d });
                out.push(Changepoint { location: b, direction: d.flip() });
            } else {
                out.push(Changepoint { location: b, direction: d });
            }
        }
        out
    }

    /// Changepoints sorted by location.
    pub fn sorted_changepoints(&self) -> Vec<Changepoint> {
        let mut cps = self.changepoints();
        cps.sort_by_key(|c| c.location);
        cps
    }

    /// Sorted segment boundaries: detected locations together with the
    /// initial cuts.
    pub fn boundaries(&self) -> Vec<usize> {
        let mut b: Vec<usize> = self.changepoints().iter().map(|c| c.location).collect();
        b.extend_from_slice(&self.initial_cuts);
        b.sort_unstable();
        b.dedup();
        b
    }

    /// The model made of the first `steps` steps.
    pub fn prefix(&self, steps: usize) -> ChangepointModel {
        let s = steps.min(self.k());
        ChangepointModel {
            algo: self.algo,
            n: self.n,
            locations: self.locations[..s].to_vec(),
            partners: self.partners.as_ref().map(|a| a[..s].to_vec()),
            directions: self.directions[..s].to_vec(),
            jmax: self.jmax.as_ref().map(|j| j[..s].to_vec()),
            signs: self.signs.as_ref().map(|r| r[..s].to_vec()),
            initial_cuts: self.initial_cuts.clone(),
        }
    }

    /// Check the structural invariants.
    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if self.directions.len() != k {
            return Err(Error::ModelMismatch("directions and locations differ in length"));
        }
        match self.algo {
            Algorithm::Cbs => {
                let a = self.partners.as_ref().ok_or(Error::ModelMismatch("CBS model without partners"))?;
                if a.len() != k {
                    return Err(Error::ModelMismatch("partners and locations differ in length"));
                }
                if a.iter().zip(&self.locations).any(|(a, b)| a >= b) {
                    return Err(Error::ModelMismatch("CBS partner must precede its location"));
                }
            }
            Algorithm::Wbs => {
                let j = self.jmax.as_ref().ok_or(Error::ModelMismatch("WBS model without jmax"))?;
                if j.len() != k {
                    return Err(Error::ModelMismatch("jmax and locations differ in length"));
                }
            }
            Algorithm::Fl => {
                let r = self.signs.as_ref().ok_or(Error::ModelMismatch("FL model without sign vectors"))?;
                if r.len() != k {
                    return Err(Error::ModelMismatch("sign vectors and locations differ in length"));
                }
            }
            Algorithm::Bs => {}
        }
        let mut all: Vec<usize> = self.changepoints().iter().map(|c| c.location).collect();
        all.extend_from_slice(&self.initial_cuts);
        for &loc in &all {
            if loc == 0 || loc >= self.n {
                return Err(Error::LocationOutOfRange { location: loc, max: self.n.saturating_sub(1) });
            }
        }
        all.sort_unstable();
        if let Some(w) = all.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateLocation(w[0]));
        }
        Ok(())
    }
}

/// Contrast type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "lowercase"))]
pub enum ContrastKind {
    Segment,
    Spike,
}

/// A test vector `v` for one changepoint.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Contrast {
    pub v: Vec<f64>,
    pub kind: ContrastKind,
    /// 1-based index into the sorted tested changepoints.
    pub target: usize,
    pub location: usize,
    pub direction: Sign,
}

impl Contrast {
    pub fn dot(&self, y: &[f64]) -> f64 {
        crate::linalg::dot(&self.v, y)
    }

    pub fn norm2(&self) -> f64 {
        crate::linalg::dot(&self.v, &self.v)
    }
}

/// How a p-value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum TestMethod {
    Saturated,
    MarginalNoise,
    MarginalIntervals,
    SelectedUnknownSigma,
    SelectedKnownSigma,
    BootstrapPlain,
    BootstrapModified,
    SampleSplit,
}

/// A p-value and its diagnostics.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TestResult {
    pub pvalue: f64,
    pub method: TestMethod,
    pub vlo: f64,
    pub vup: f64,
    pub vty: f64,
    pub sd: f64,
    pub trials: usize,
    pub accept_rate: Option<f64>,
    pub degenerate: usize,
    pub degraded: bool,
    pub seed: Option<u64>,
}

impl TestResult {
    pub(crate) fn closed_form(method: TestMethod, pvalue: f64, vlo: f64, vup: f64, vty: f64, sd: f64) -> Self {
        TestResult {
            pvalue,
            method,
            vlo,
            vup,
            vty,
            sd,
            trials: 0,
            accept_rate: None,
            degenerate: 0,
            degraded: false,
            seed: None,
        }
    }
}

/// Piecewise-constant least-squares fit on the segments induced by
/// `boundaries` (sorted, 1-based split locations).
pub fn segment_fit(y: &[f64], boundaries: &[usize]) -> Vec<f64> {
    let mut fit = Vec::with_capacity(y.len());
    let mut start = 0;
    for end in boundaries.iter().copied().chain(core::iter::once(y.len())) {
        let seg = &y[start..end];
        let mean = seg.iter().sum::<f64>() / seg.len() as f64;
        fit.extend(core::iter::repeat_n(mean, seg.len()));
        start = end;
    }
    fit
}

/// Residual sum of squares of [`segment_fit`].
pub fn segment_rss(y: &[f64], boundaries: &[usize]) -> f64 {
    let fit = segment_fit(y, boundaries);
    y.iter().zip(&fit).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `(s, e)` pairs (1-based, inclusive) of the segments cut by `boundaries`.
pub fn segments(n: usize, boundaries: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(boundaries.len() + 1);
    let mut s = 1;
    for &b in boundaries {
        out.push((s, b));
        s = b + 1;
    }
    out.push((s, n));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn series_validation() {
        assert_eq!(Series::new(vec![1.0]), Err(Error::SeriesTooShort(1)));
        assert_eq!(Series::new(vec![1.0, f64::NAN]), Err(Error::NonFinite(1)));
        let lab = |v: &[&str]| Some(v.iter().map(|s| String::from(*s)).collect::<Vec<_>>());
        assert!(Series::with_labels(vec![0.0; 4], lab(&["1", "1", "2", "1"]), None).is_err());
        let s = Series::with_labels(vec![0.0; 5], lab(&["1", "1", "2", "2", "3"]), None).unwrap();
        assert_eq!(s.chrom_boundaries(), vec![2, 4]);
    }

    #[test]
    fn cbs_changepoints_expand_to_pairs() {
        let m = ChangepointModel {
            algo: Algorithm::Cbs,
            n: 6,
            locations: vec![4],
            partners: Some(vec![2]),
            directions: vec![Sign::Plus],
            jmax: None,
            signs: None,
            initial_cuts: vec![],
        };
        m.validate().unwrap();
        assert_eq!(
            m.changepoints(),
            vec![
                Changepoint { location: 2, direction: Sign::Plus },
                Changepoint { location: 4, direction: Sign::Minus }
            ]
        );
    }

    #[test]
    fn fit_helpers() {
        let y = [0.0, 2.0, 0.0, 2.0];
        assert_eq!(segment_fit(&y, &[]), vec![1.0; 4]);
        assert_eq!(segment_rss(&y, &[]), 4.0);
        assert_eq!(segments(4, &[1, 3]), vec![(1, 1), (2, 3), (4, 4)]);
    }
}
