//! CUSUM and circular CUSUM statistics.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::polyhedra::BlockTerm;

/// Prefix sums for O(1) block sums over 1-based inclusive ranges.
#[derive(Debug, Clone)]
pub struct Prefix {
    p: Vec<f64>,
}

impl Prefix {
    pub fn new(y: &[f64]) -> Self {
        let mut p = Vec::with_capacity(y.len() + 1);
        let mut acc = 0.0;
        p.push(0.0);
        for &v in y {
            acc += v;
            p.push(acc);
        }
        Prefix { p }
    }

    #[inline]
    pub fn sum(&self, lo: usize, hi: usize) -> f64 {
        self.p[hi] - self.p[lo - 1]
    }

    pub fn len(&self) -> usize {
        self.p.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[inline]
pub(crate) fn cusum_weight(s: usize, b: usize, e: usize) -> f64 {
    let nl = (b + 1 - s) as f64;
    let nr = (e - b) as f64;
    libm::sqrt(1.0 / (1.0 / nr + 1.0 / nl))
}

#[inline]
pub(crate) fn cusum_fast(pre: &Prefix, s: usize, b: usize, e: usize) -> f64 {
    let nl = (b + 1 - s) as f64;
    let nr = (e - b) as f64;
    cusum_weight(s, b, e) * (pre.sum(b + 1, e) / nr - pre.sum(s, b) / nl)
}

/// `scale * g_(s,b,e)` as block terms.
pub(crate) fn cusum_terms(s: usize, b: usize, e: usize, scale: f64) -> [BlockTerm; 2] {
    let w = scale * cusum_weight(s, b, e);
    let nl = (b + 1 - s) as f64;
    let nr = (e - b) as f64;
    [BlockTerm::new(-w / nl, s, b), BlockTerm::new(w / nr, b + 1, e)]
}

/// Scaled difference between the mean of `y[b+1..=e]` and `y[s..=b]`
/// (1-based, `s <= b < e`).
pub fn cusum(y: &[f64], s: usize, b: usize, e: usize) -> Result<f64> {
    if s == 0 || !(s <= b && b < e) || e > y.len() {
        return Err(Error::InvalidIndices("cusum needs 1 <= s <= b < e <= n"));
    }
    Ok(cusum_fast(&Prefix::new(y), s, b, e))
}

#[inline]
pub(crate) fn circular_weight(s: usize, a: usize, b: usize, e: usize) -> Option<f64> {
    let inner = (b - a) as f64;
    let outer = (e + a) as f64 - (s + b) as f64;
    if outer <= 0.0 {
        return None;
    }
    Some(libm::sqrt(1.0 / (1.0 / inner + 1.0 / outer)))
}

#[inline]
pub(crate) fn circular_fast(pre: &Prefix, s: usize, a: usize, b: usize, e: usize, w: f64) -> f64 {
    let nin = (b - a) as f64;
    let nout = (e + 1 - s) as f64 - nin;
    let inside = pre.sum(a + 1, b);
    let outside = pre.sum(s, e) - inside;
    w * (inside / nin - outside / nout)
}

/// `scale * (circular CUSUM functional)` as block terms.
pub(crate) fn circular_terms(s: usize, a: usize, b: usize, e: usize, w: f64, scale: f64) -> [BlockTerm; 2] {
    let nin = (b - a) as f64;
    let nout = (e + 1 - s) as f64 - nin;
    let w = scale * w;
    [BlockTerm::new(-w / nout, s, e), BlockTerm::new(w / nin + w / nout, a + 1, b)]
}

/// Inside-minus-outside mean difference for the pair `(a, b)` inside
/// `[s, e]`, with weight `sqrt(1 / (1/(b-a) + 1/(e-s-b+a)))`.
pub fn circular_cusum(y: &[f64], s: usize, a: usize, b: usize, e: usize) -> Result<f64> {
    if s == 0 || !(s <= a && a < b && b < e) || e > y.len() {
        return Err(Error::InvalidIndices("circular cusum needs 1 <= s <= a < b < e <= n"));
    }
    let w = circular_weight(s, a, b, e).ok_or(Error::InvalidIndices("e - s - b + a must be positive"))?;
    Ok(circular_fast(&Prefix::new(y), s, a, b, e, w))
}
