//! Exact solution path of the 1-d fused lasso (total-variation denoising),
//! followed by its dual from `lambda = infinity` downward.
//!
//! With boundary set `B` and signs `s_B`, the dual coordinate of an interior
//! boundary `i` inside the fused segment `[s, e]` is `u_i = a_i(y) + lambda c_i`
//! where `a_i(y) = r S(s, e) - S(s, i)`, `r = (i - s + 1) / L` and
//! `c_i = s_left (1 - r) + s_right r`. Coordinate `i` joins the boundary set
//! when `|u_i| = lambda`, i.e. at `lambda = |a_i| / (1 - R_i c_i)` with
//! `R_i = sign(a_i)`. In one dimension boundaries never leave the set.

use alloc::vec::Vec;

use super::cusum::Prefix;
use crate::error::{Error, Result};
use crate::model::{Algorithm, ChangepointModel, Sign};
use crate::polyhedra::BlockTerm;

/// An interior (not yet fused-apart) coordinate at some step.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Coord {
    pub i: usize,
    pub s: usize,
    pub e: usize,
    /// `c_i` in the module docs.
    pub c: f64,
}

impl Coord {
    #[inline]
    pub fn a(&self, pre: &Prefix) -> f64 {
        let len = (self.e + 1 - self.s) as f64;
        (self.i + 1 - self.s) as f64 * pre.sum(self.s, self.e) / len - pre.sum(self.s, self.i)
    }

    /// `scale * a_i` as block terms.
    pub fn a_terms(&self, scale: f64) -> [BlockTerm; 2] {
        let r = (self.i + 1 - self.s) as f64 / (self.e + 1 - self.s) as f64;
        [BlockTerm::new(scale * (r - 1.0), self.s, self.i), BlockTerm::new(scale * r, self.i + 1, self.e)]
    }

    /// `1 - R c_i`: the hitting-time denominator for sign `R`.
    #[inline]
    pub fn denom(&self, r: Sign) -> f64 {
        1.0 - r.value() * self.c
    }
}

/// Interior coordinates, ascending, for the boundary set `bset` (sorted by
/// location, with signs).
pub(crate) fn interior(n: usize, bset: &[(usize, Sign)]) -> Vec<Coord> {
    let mut out = Vec::with_capacity(n - 1 - bset.len());
    let mut s = 1;
    let mut left = 0.0;
    for idx in 0..=bset.len() {
        let (e, right) = match bset.get(idx) {
            Some(&(loc, sg)) => (loc, sg.value()),
            None => (n, 0.0),
        };
        let len = (e + 1 - s) as f64;
        for i in s..e {
            let r = (i + 1 - s) as f64 / len;
            out.push(Coord { i, s, e, c: left * (1.0 - r) + right * r });
        }
        s = e + 1;
        left = right;
    }
    out
}

pub(crate) fn hitting_time(a: f64, denom: f64) -> f64 {
    if denom > 1e-12 {
        a.abs() / denom
    } else {
        f64::NEG_INFINITY
    }
}

/// First `k` knots of the fused lasso path.
///
/// Each knot adds one boundary; its direction is the sign of the dual
/// coordinate that hit. The sign of every interior dual coordinate is
/// recorded per step. Simultaneous knots resolve to the smallest coordinate.
pub fn fl_path(y: &[f64], k: usize) -> Result<ChangepointModel> {
    let n = y.len();
    if n < 2 {
        return Err(Error::SeriesTooShort(n));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("number of steps must be at least 1"));
    }
    if k > n - 1 {
        return Err(Error::InvalidArgument("fused lasso path has at most n - 1 knots"));
    }
    let pre = Prefix::new(y);
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 64.0 * f64::EPSILON * n as f64 * scale;
    let mut bset: Vec<(usize, Sign)> = Vec::with_capacity(k);
    let mut locations = Vec::with_capacity(k);
    let mut directions = Vec::with_capacity(k);
    let mut signs = Vec::with_capacity(k);
    for step in 1..=k {
        let coords = interior(n, &bset);
        let mut step_signs = Vec::with_capacity(coords.len());
        let mut best: Option<(usize, f64, Sign)> = None;
        for c in &coords {
            let a = c.a(&pre);
            let r = Sign::of(a);
            step_signs.push(r);
            let t = hitting_time(a, c.denom(r));
            if best.is_none_or(|(_, bt, _)| t > bt) {
                best = Some((c.i, t, r));
            }
        }
        let (i, t, r) = best.ok_or(Error::PathEnded { step })?;
        if !(t > tol) {
            return Err(Error::PathEnded { step });
        }
        locations.push(i);
        directions.push(r);
        signs.push(step_signs);
        let pos = bset.partition_point(|&(l, _)| l < i);
        bset.insert(pos, (i, r));
    }
    Ok(ChangepointModel {
        algo: Algorithm::Fl,
        n,
        locations,
        partners: None,
        directions,
        jmax: None,
        signs: Some(signs),
        initial_cuts: Vec::new(),
    })
}

/// Knot values `lambda_1 >= ... >= lambda_k` along the path of `model`.
pub fn fl_knots(y: &[f64], model: &ChangepointModel) -> Result<Vec<f64>> {
    if model.algo != Algorithm::Fl {
        return Err(Error::ModelMismatch("knots need a fused lasso model"));
    }
    let pre = Prefix::new(y);
    let mut bset: Vec<(usize, Sign)> = Vec::new();
    let mut out = Vec::with_capacity(model.k());
    for (&b, &d) in model.locations.iter().zip(&model.directions) {
        let coords = interior(model.n, &bset);
        let c = coords.iter().find(|c| c.i == b).ok_or(Error::ModelMismatch("location is not interior"))?;
        out.push(hitting_time(c.a(&pre), c.denom(d)));
        let pos = bset.partition_point(|&(l, _)| l < b);
        bset.insert(pos, (b, d));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn examples() {
        let m = fl_path(&[0.0, 0.0, 2.0, 2.0], 1).unwrap();
        assert_eq!((m.locations, m.directions), (vec![2], vec![Sign::Plus]));
        assert_eq!(fl_path(&[1.5; 5], 1), Err(Error::PathEnded { step: 1 }));
        let m = fl_path(&[0.0, 0.0, 2.0, 2.0, 0.0, 0.0], 2).unwrap();
        // the two boundaries hit at the same lambda; rounding decides the order
        let mut found: Vec<(usize, Sign)> = m.locations.iter().copied().zip(m.directions.iter().copied()).collect();
        found.sort_unstable_by_key(|x| x.0);
        assert_eq!(found, vec![(2, Sign::Plus), (4, Sign::Minus)]);
        assert_eq!(m.signs.as_ref().unwrap()[0].len(), 5);
        assert_eq!(m.signs.as_ref().unwrap()[1].len(), 4);
    }

    #[test]
    fn knots_decrease() {
        let y = [0.3, -0.2, 1.9, 2.2, 2.0, -0.4, 0.1, 0.5];
        let m = fl_path(&y, 5).unwrap();
        let knots = fl_knots(&y, &m).unwrap();
        for w in knots.windows(2) {
            assert!(w[0] >= w[1] - 1e-12);
        }
    }

    #[test]
    fn too_many_steps() {
        assert!(fl_path(&[0.0, 1.0], 2).is_err());
    }
}
