//! Affine selection events `{y : Gamma y >= c}`.
//!
//! Every detection statistic is a combination of a few contiguous block
//! sums of `y`, so rows are stored as short lists of [`BlockTerm`]s rather
//! than as dense vectors. Products `Gamma x` then cost O(n + #terms).

mod bs;
mod cbs;
mod fl;
mod ic;
mod wbs;

use alloc::vec;
use alloc::vec::Vec;

pub use bs::{build_bs, gamma_bs};
pub use cbs::{build_cbs, gamma_cbs};
pub use fl::{build_fl, gamma_fl};
pub use ic::{gamma_bs_ic, ic_halfspaces, ic_stop, IcState};
pub use wbs::{build_wbs, gamma_wbs};
pub(crate) use wbs::WbsSteps;

use crate::error::{Error, Result};
use crate::model::{Algorithm, ChangepointModel};
use crate::segmentation::{IntervalSet, Prefix};

/// `coef * sum(x[lo..=hi])` with 1-based inclusive bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockTerm {
    pub coef: f64,
    pub lo: u32,
    pub hi: u32,
}

impl BlockTerm {
    pub fn new(coef: f64, lo: usize, hi: usize) -> Self {
        BlockTerm { coef, lo: lo as u32, hi: hi as u32 }
    }

    #[inline]
    fn eval(&self, pre: &Prefix) -> f64 {
        self.coef * pre.sum(self.lo as usize, self.hi as usize)
    }
}

/// What a row encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    /// winner dominates `+competitor`
    Above,
    /// winner dominates `-competitor`
    Below,
    /// fused lasso: competing coordinate has not hit when the winner does
    HitTime,
    /// information-criterion halfspace
    Ic,
    /// supplied by the caller
    External,
}

/// Debug tags for a row: step and the competitor it compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowMeta {
    pub step: usize,
    pub kind: RowKind,
    /// 1-based interval index for WBS, 0 otherwise
    pub interval: usize,
    /// CBS `a` of the competitor, 0 otherwise
    pub a: usize,
    /// competitor split location (or coordinate)
    pub b: usize,
}

impl RowMeta {
    pub fn new(step: usize, kind: RowKind, b: usize) -> Self {
        RowMeta { step, kind, interval: 0, a: 0, b }
    }
}

/// Receives rows from the event builders.
pub trait RowSink {
    fn push(&mut self, terms: &[BlockTerm], c: f64, meta: RowMeta);
}

/// Counts rows without storing them.
#[derive(Debug, Default, Clone, Copy)]
pub struct RowCounter(pub usize);

impl RowSink for RowCounter {
    fn push(&mut self, _: &[BlockTerm], _: f64, _: RowMeta) {
        self.0 += 1;
    }
}

// Sort by range, merge equal ranges, drop exact zeros.
fn canonical(terms: &[BlockTerm], out: &mut Vec<BlockTerm>) {
    out.clear();
    out.extend(terms.iter().copied().filter(|t| t.lo <= t.hi));
    out.sort_by_key(|t| (t.lo, t.hi));
    let mut w = 0;
    for r in 0..out.len() {
        if w > 0 && out[w - 1].lo == out[r].lo && out[w - 1].hi == out[r].hi {
            out[w - 1].coef += out[r].coef;
        } else {
            out[w] = out[r];
            w += 1;
        }
    }
    out.truncate(w);
    out.retain(|t| t.coef != 0.0);
}

/// The constraint set `{y : Gamma y >= c}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    n: usize,
    starts: Vec<usize>,
    terms: Vec<BlockTerm>,
    c: Vec<f64>,
    meta: Vec<RowMeta>,
    scratch: Vec<BlockTerm>,
}

impl RowSink for Polyhedron {
    fn push(&mut self, terms: &[BlockTerm], c: f64, meta: RowMeta) {
        let mut scratch = core::mem::take(&mut self.scratch);
        canonical(terms, &mut scratch);
        self.terms.extend_from_slice(&scratch);
        self.starts.push(self.terms.len());
        self.c.push(c);
        self.meta.push(meta);
        self.scratch = scratch;
    }
}

impl Polyhedron {
    /// No rows: the whole space.
    pub fn new(n: usize) -> Self {
        Polyhedron { n, starts: vec![0], terms: Vec::new(), c: Vec::new(), meta: Vec::new(), scratch: Vec::new() }
    }

    /// From dense rows and offsets.
    pub fn from_dense(rows: &[Vec<f64>], c: &[f64], n: usize) -> Result<Self> {
        if rows.len() != c.len() {
            return Err(Error::DimensionMismatch { expected: rows.len(), got: c.len() });
        }
        let mut p = Polyhedron::new(n);
        for (r, &ci) in rows.iter().zip(c) {
            if r.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: r.len() });
            }
            let terms: Vec<BlockTerm> =
                r.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, &v)| BlockTerm::new(v, i + 1, i + 1)).collect();
            p.push(&terms, ci, RowMeta::new(0, RowKind::External, 0));
        }
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of rows.
    pub fn m(&self) -> usize {
        self.c.len()
    }

    pub fn offsets(&self) -> &[f64] {
        &self.c
    }

    pub fn meta(&self) -> &[RowMeta] {
        &self.meta
    }

    pub fn row_terms(&self, j: usize) -> &[BlockTerm] {
        &self.terms[self.starts[j]..self.starts[j + 1]]
    }

    /// Append all rows of `other`.
    pub fn extend(&mut self, other: &Polyhedron) {
        for j in 0..other.m() {
            self.push(other.row_terms(j), other.c[j], other.meta[j]);
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.len() });
        }
        Ok(())
    }

    /// `Gamma x` from precomputed prefix sums of `x`.
    pub fn apply_prefix(&self, pre: &Prefix) -> Vec<f64> {
        (0..self.m()).map(|j| self.row_terms(j).iter().map(|t| t.eval(pre)).sum()).collect()
    }

    /// `Gamma x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.apply_prefix(&Prefix::new(x)))
    }

    /// `Gamma y - c`.
    pub fn slack(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut g = self.apply(y)?;
        for (gi, ci) in g.iter_mut().zip(&self.c) {
            *gi -= ci;
        }
        Ok(g)
    }

    /// Exact membership test `Gamma y >= c`.
    pub fn contains(&self, y: &[f64]) -> Result<bool> {
        self.check_dim(y)?;
        let pre = Prefix::new(y);
        Ok((0..self.m()).all(|j| self.row_terms(j).iter().map(|t| t.eval(&pre)).sum::<f64>() >= self.c[j]))
    }

    /// Index of the first violated row, if any.
    pub fn first_violation(&self, y: &[f64]) -> Result<Option<usize>> {
        let s = self.slack(y)?;
        Ok(s.iter().position(|&v| v < 0.0))
    }

    /// The event for `y` when the original event was defined on `y + w`:
    /// `{y : Gamma y >= c - Gamma w}`.
    pub fn shifted(&self, w: &[f64]) -> Result<Polyhedron> {
        let gw = self.apply(w)?;
        let mut p = self.clone();
        for (ci, g) in p.c.iter_mut().zip(gw) {
            *ci -= g;
        }
        Ok(p)
    }

    /// Same rows, new offsets.
    pub fn with_offsets(&self, c: Vec<f64>) -> Result<Polyhedron> {
        if c.len() != self.m() {
            return Err(Error::DimensionMismatch { expected: self.m(), got: c.len() });
        }
        let mut p = self.clone();
        p.c = c;
        Ok(p)
    }

    /// Row `j` as a dense vector.
    pub fn row_dense(&self, j: usize) -> Vec<f64> {
        let mut diff = vec![0.0; self.n + 1];
        for t in self.row_terms(j) {
            diff[t.lo as usize - 1] += t.coef;
            diff[t.hi as usize] -= t.coef;
        }
        let mut acc = 0.0;
        diff[..self.n]
            .iter()
            .map(|d| {
                acc += d;
                acc
            })
            .collect()
    }

    /// Upper bound on the Euclidean norm of row `j` (exact when its blocks
    /// do not overlap).
    pub fn row_norm_bound(&self, j: usize) -> f64 {
        self.row_terms(j).iter().map(|t| t.coef.abs() * libm::sqrt((t.hi - t.lo + 1) as f64)).sum()
    }
}

/// Selection event of `model` (WBS also needs its interval set).
pub fn gamma(model: &ChangepointModel, intervals: Option<&IntervalSet>) -> Result<Polyhedron> {
    let mut p = Polyhedron::new(model.n);
    build(model, intervals, &mut p)?;
    Ok(p)
}

/// Stream the rows of the selection event of `model` into `sink`.
pub fn build<S: RowSink>(model: &ChangepointModel, intervals: Option<&IntervalSet>, sink: &mut S) -> Result<()> {
    match model.algo {
        Algorithm::Bs => build_bs(model, sink),
        Algorithm::Wbs => build_wbs(model, intervals.ok_or(Error::ModelMismatch("WBS event needs intervals"))?, sink),
        Algorithm::Cbs => build_cbs(model, sink),
        Algorithm::Fl => build_fl(model, sink),
    }
}

/// Exact membership test.
pub fn contains(p: &Polyhedron, y: &[f64]) -> Result<bool> {
    p.contains(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_membership() {
        let p = Polyhedron::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[0.0, 0.0], 2).unwrap();
        assert!(contains(&p, &[1.0, 1.0]).unwrap());
        assert!(!contains(&p, &[1.0, -1.0]).unwrap());
        assert!(contains(&p, &[1.0, 1.0, 1.0]).is_err());
        assert_eq!(p.row_dense(1), vec![0.0, 1.0]);
    }

    #[test]
    fn identical_blocks_merge_to_exact_zero() {
        let mut p = Polyhedron::new(4);
        let t = [BlockTerm::new(0.3, 1, 2), BlockTerm::new(-0.7, 3, 4), BlockTerm::new(-0.3, 1, 2), BlockTerm::new(0.7, 3, 4)];
        p.push(&t, 0.0, RowMeta::new(1, RowKind::Above, 2));
        assert!(p.row_terms(0).is_empty());
        assert_eq!(p.apply(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn overlapping_blocks_densify() {
        let mut p = Polyhedron::new(4);
        p.push(&[BlockTerm::new(1.0, 1, 4), BlockTerm::new(2.0, 2, 3)], 1.0, RowMeta::new(0, RowKind::External, 0));
        assert_eq!(p.row_dense(0), vec![1.0, 3.0, 3.0, 1.0]);
        assert_eq!(p.slack(&[1.0, 1.0, 1.0, 1.0]).unwrap(), vec![7.0]);
        let s = p.shifted(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(s.offsets(), &[0.0]);
    }
}
