//! Saturated-model inference: the truncated-Gaussian (TG) pivot along the
//! contrast direction, and a bootstrap substitute for non-Gaussian noise.

use alloc::vec::Vec;

use rand::Rng;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::truncated_tail;
use crate::model::{segment_fit, ChangepointModel, Contrast, TestMethod, TestResult};
use crate::polyhedra::{self, BlockTerm, Polyhedron, RowMeta, RowSink};
use crate::segmentation::{bs, IntervalSet, Prefix};

/// Range of `v^T Y` compatible with the event, holding the part of `Y`
/// orthogonal to `v` fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TruncationBounds {
    pub vlo: f64,
    pub vup: f64,
    pub vty: f64,
    pub sd: f64,
}

/// Running intersection of the line `y + (t - v^T y) v / |v|^2` with the
/// halfspaces, one row at a time.
#[derive(Debug, Clone)]
pub(crate) struct LineSlice {
    pub vty: f64,
    vnorm: f64,
    ynorm: f64,
    pub lo: f64,
    pub up: f64,
    pub empty: bool,
    pub worst: Option<(usize, f64)>,
    row: usize,
}

impl LineSlice {
    pub fn new(vty: f64, vnorm: f64, ynorm: f64) -> Self {
        LineSlice {
            vty,
            vnorm,
            ynorm,
            lo: f64::NEG_INFINITY,
            up: f64::INFINITY,
            empty: false,
            worst: None,
            row: 0,
        }
    }

    /// Add the row with slack `gy - c`, `gv = Gamma_j v` and norm bound `gnorm`.
    #[inline]
    pub fn add(&mut self, gy: f64, c: f64, gv: f64, gnorm: f64) {
        let row = self.row;
        self.row += 1;
        let mut slack = gy - c;
        let tol = 1e-9 * (gnorm * self.ynorm + c.abs());
        if slack < 0.0 {
            if slack < -tol {
                if self.worst.is_none_or(|(_, s)| slack < s) {
                    self.worst = Some((row, slack));
                }
            } else {
                slack = 0.0;
            }
        }
        if gv.abs() <= 1e-10 * gnorm * self.vnorm {
            if slack < -tol {
                self.empty = true;
            }
            return;
        }
        let rho = gv / (self.vnorm * self.vnorm);
        let t = self.vty - slack / rho;
        if rho > 0.0 {
            self.lo = self.lo.max(t);
        } else {
            self.up = self.up.min(t);
        }
    }

    /// `(lo, up)`, or `None` when the line misses the event.
    pub fn interval(&self) -> Option<(f64, f64)> {
        if self.empty || !(self.lo <= self.up) {
            None
        } else {
            Some((self.lo, self.up))
        }
    }
}

/// Streams rows straight into one [`LineSlice`] per contrast direction
/// through the same `y`, without storing them.
pub(crate) struct MultiSliceSink {
    ypre: Prefix,
    vpre: Vec<Prefix>,
    pub slices: Vec<LineSlice>,
}

impl MultiSliceSink {
    pub fn new(y: &[f64], vs: &[&[f64]]) -> Self {
        let ynorm = crate::linalg::norm(y);
        MultiSliceSink {
            ypre: Prefix::new(y),
            vpre: vs.iter().map(|v| Prefix::new(v)).collect(),
            slices: vs
                .iter()
                .map(|v| LineSlice::new(crate::linalg::dot(v, y), crate::linalg::norm(v), ynorm))
                .collect(),
        }
    }
}

impl RowSink for MultiSliceSink {
    fn push(&mut self, terms: &[BlockTerm], c: f64, _meta: RowMeta) {
        let mut gy = 0.0;
        let mut gn = 0.0;
        for t in terms {
            let (lo, hi) = (t.lo as usize, t.hi as usize);
            gy += t.coef * self.ypre.sum(lo, hi);
            gn += t.coef.abs() * libm::sqrt((hi - lo + 1) as f64);
        }
        for (pre, slice) in self.vpre.iter().zip(self.slices.iter_mut()) {
            let gv: f64 = terms.iter().map(|t| t.coef * pre.sum(t.lo as usize, t.hi as usize)).sum();
            slice.add(gy, c, gv, gn);
        }
    }
}

fn slice_of(p: &Polyhedron, y: &[f64], v: &[f64]) -> Result<LineSlice> {
    if y.len() != p.n() || v.len() != p.n() {
        return Err(Error::DimensionMismatch { expected: p.n(), got: y.len().min(v.len()) });
    }
    let vnorm = crate::linalg::norm(v);
    if !(vnorm > 0.0) {
        return Err(Error::InvalidArgument("contrast vector is zero"));
    }
    let gy = p.apply(y)?;
    let gv = p.apply(v)?;
    let mut s = LineSlice::new(crate::linalg::dot(v, y), vnorm, crate::linalg::norm(y));
    for j in 0..p.m() {
        s.add(gy[j], p.offsets()[j], gv[j], p.row_norm_bound(j));
    }
    Ok(s)
}

/// Range of `t` such that `y + (t - v^T y) v / |v|^2` lies in `p`; `None`
/// when the line misses it. `y` itself need not be feasible.
pub fn line_slice(p: &Polyhedron, y: &[f64], v: &[f64]) -> Result<Option<(f64, f64)>> {
    Ok(slice_of(p, y, v)?.interval())
}

/// Truncation limits for the contrast at a feasible `y`; `sd = sigma |v|`.
pub fn truncation_bounds(p: &Polyhedron, y: &[f64], v: &Contrast, sigma2: f64) -> Result<TruncationBounds> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidArgument("sigma2 must be positive"));
    }
    let s = slice_of(p, y, &v.v)?;
    if let Some((row, slack)) = s.worst {
        return Err(Error::Infeasible { row, slack });
    }
    let (vlo, vup) = s.interval().ok_or(Error::EmptyTruncation)?;
    Ok(TruncationBounds { vlo, vup, vty: s.vty, sd: libm::sqrt(sigma2) * crate::linalg::norm(&v.v) })
}

/// `P(Z >= vty | vlo <= Z <= vup)` for `Z ~ N(0, sd^2)`.
pub fn tg_pvalue(tb: &TruncationBounds) -> Result<f64> {
    if !(tb.sd > 0.0) {
        return Err(Error::InvalidArgument("pivot scale must be positive"));
    }
    if !(tb.vup > tb.vlo) {
        return Err(Error::EmptyTruncation);
    }
    let p = truncated_tail(tb.vlo / tb.sd, tb.vty / tb.sd, tb.vup / tb.sd);
    if p.is_nan() {
        return Err(Error::EmptyTruncation);
    }
    Ok(p)
}

/// TG test of `v^T theta = 0` against `v^T theta > 0` on the event `p`.
pub fn saturated_test_with(p: &Polyhedron, y: &[f64], v: &Contrast, sigma2: f64) -> Result<TestResult> {
    let tb = truncation_bounds(p, y, v, sigma2)?;
    let pv = tg_pvalue(&tb)?;
    Ok(TestResult::closed_form(TestMethod::Saturated, pv, tb.vlo, tb.vup, tb.vty, tb.sd))
}

/// Build the event of `model` and run the TG test.
pub fn saturated_test(
    y: &[f64],
    model: &ChangepointModel,
    intervals: Option<&IntervalSet>,
    v: &Contrast,
    sigma2: f64,
) -> Result<TestResult> {
    let p = polyhedra::gamma(model, intervals)?;
    saturated_test_with(&p, y, v, sigma2)
}

// All entries in `v`'s support, to make each bootstrap inner product cheap.
fn support(v: &[f64]) -> Vec<(usize, f64)> {
    v.iter().copied().enumerate().filter(|(_, x)| *x != 0.0).collect()
}

/// Midpoint empirical CDF of sorted `xs` at `t`.
fn ecdf_mid(xs: &[f64], t: f64) -> f64 {
    let below = xs.partition_point(|&x| x < t);
    let upto = xs.partition_point(|&x| x <= t);
    (below as f64 + 0.5 * (upto - below) as f64) / xs.len() as f64
}

/// TG ratio with the Gaussian law of `v^T epsilon` replaced by the
/// bootstrap law of `v^T epsilon*`, `epsilon*` drawn i.i.d. from `residuals`.
///
/// The truncation limits come from the event at `y`; the centering used to
/// form `residuals` is the caller's choice (grand mean or a fitted signal).
pub fn bootstrap_tg_pvalue<R: Rng + ?Sized>(
    y: &[f64],
    v: &Contrast,
    p: &Polyhedron,
    residuals: &[f64],
    draws: usize,
    method: TestMethod,
    rng: &mut R,
) -> Result<TestResult> {
    if residuals.is_empty() {
        return Err(Error::InvalidArgument("residual pool is empty"));
    }
    if draws < 1000 {
        return Err(Error::InvalidArgument("bootstrap needs at least 1000 draws"));
    }
    let s = slice_of(p, y, &v.v)?;
    if let Some((row, slack)) = s.worst {
        return Err(Error::Infeasible { row, slack });
    }
    let (vlo, vup) = s.interval().ok_or(Error::EmptyTruncation)?;
    let sup = support(&v.v);
    let tilt = Tilt::new(&sup, residuals, vlo, vup);
    let mut res = TestResult::closed_form(method, f64::NAN, vlo, vup, s.vty, libm::sqrt(v.norm2()));
    res.trials = draws;
    let pvalue = if tilt.theta == 0.0 {
        let m = residuals.len();
        let mut xs: Vec<f64> = (0..draws)
            .map(|_| sup.iter().map(|&(_, c)| c * residuals[rng.random_range(0..m)]).sum())
            .collect();
        xs.sort_by(|a, b| a.total_cmp(b));
        let fup = ecdf_mid(&xs, vup);
        let flo = ecdf_mid(&xs, vlo);
        let fty = ecdf_mid(&xs, s.vty.clamp(vlo, vup));
        if !(fup > flo) {
            return Err(Error::EmptyTruncation);
        }
        (fup - fty) / (fup - flo)
    } else {
        tilt.pvalue(draws, vlo, vup, s.vty.clamp(vlo, vup), rng).ok_or(Error::EmptyTruncation)?
    };
    res.pvalue = pvalue.clamp(0.0, 1.0);
    Ok(res)
}

/// `1 - ecdf_mid` contribution of one point: 1 above `t`, 1/2 at it.
fn mid_step(x: f64, t: f64) -> f64 {
    if x > t {
        1.0
    } else if x == t {
        0.5
    } else {
        0.0
    }
}

/// Exponentially tilted resampling for the bootstrap law of
/// `sum_i c_i e_i`, `e_i` uniform on the pool. The tilt moves the mean to
/// the point of `[vlo, vup]` nearest the untilted mean, so the truncation
/// window is well covered even far in the tail; draws are reweighted by
/// `exp(-theta x)`.
struct Tilt {
    theta: f64,
    target: f64,
    /// per support coefficient, cumulative tilted weights over the pool
    tables: Vec<(f64, Vec<f64>)>,
    coefs: Vec<usize>,
    pool: Vec<f64>,
}

impl Tilt {
    fn new(sup: &[(usize, f64)], pool: &[f64], vlo: f64, vup: f64) -> Tilt {
        let m = pool.len() as f64;
        let mean = pool.iter().sum::<f64>() / m;
        let var = pool.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / m;
        let csum: f64 = sup.iter().map(|&(_, c)| c).sum();
        let c2: f64 = sup.iter().map(|&(_, c)| c * c).sum();
        let mu = csum * mean;
        let mut distinct: Vec<f64> = sup.iter().map(|&(_, c)| c).collect();
        distinct.sort_by(|a, b| a.total_cmp(b));
        distinct.dedup();
        let counts: Vec<f64> =
            distinct.iter().map(|c| sup.iter().filter(|&&(_, x)| x == *c).count() as f64).collect();
        let target = mu.clamp(vlo, vup);
        let scale = libm::sqrt(c2 * var);
        let none = Tilt { theta: 0.0, target, tables: Vec::new(), coefs: Vec::new(), pool: Vec::new() };
        if target == mu || !(scale > 0.0) {
            return none;
        }
        // derivative of the cumulant generating function
        let slope = |theta: f64| -> f64 {
            let mut d = 0.0;
            for (c, n) in distinct.iter().zip(&counts) {
                let top = pool.iter().map(|r| theta * c * r).fold(f64::NEG_INFINITY, f64::max);
                let (mut z, mut zr) = (0.0, 0.0);
                for r in pool {
                    let w = libm::exp(theta * c * r - top);
                    z += w;
                    zr += w * r;
                }
                d += n * c * zr / z;
            }
            d
        };
        let dir = if target > mu { 1.0 } else { -1.0 };
        let (mut lo, mut hi) = (0.0, dir / scale);
        let mut bracketed = false;
        for _ in 0..60 {
            if (slope(hi) - target) * dir >= 0.0 {
                bracketed = true;
                break;
            }
            lo = hi;
            hi *= 2.0;
        }
        if !bracketed {
            // beyond the largest attainable value: tilt as far as we went
            lo = hi;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if (slope(mid) - target) * dir >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let theta = 0.5 * (lo + hi);
        let tables: Vec<(f64, Vec<f64>)> = distinct
            .iter()
            .map(|&c| {
                let top = pool.iter().map(|r| theta * c * r).fold(f64::NEG_INFINITY, f64::max);
                let mut acc = 0.0;
                let cum = pool
                    .iter()
                    .map(|r| {
                        acc += libm::exp(theta * c * r - top);
                        acc
                    })
                    .collect();
                (c, cum)
            })
            .collect();
        let coefs = sup.iter().map(|&(_, c)| distinct.partition_point(|&x| x < c)).collect();
        Tilt { theta, target, tables, coefs, pool: pool.to_vec() }
    }

    /// Weighted midpoint TG ratio from `draws` tilted resamples.
    fn pvalue<R: Rng + ?Sized>(&self, draws: usize, vlo: f64, vup: f64, ty: f64, rng: &mut R) -> Option<f64> {
        let xs: Vec<f64> = (0..draws).map(|_| self.draw(rng)).collect();
        // weights exp(-theta (x - target)) up to a constant factor
        let lw: Vec<f64> = xs.iter().map(|&x| -self.theta * (x - self.target)).collect();
        let top = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (mut above, mut inside) = (0.0, 0.0);
        for (&x, &l) in xs.iter().zip(&lw) {
            let w = libm::exp(l - top);
            inside += w * (mid_step(x, vlo) - mid_step(x, vup));
            above += w * (mid_step(x, ty) - mid_step(x, vup));
        }
        (inside > 0.0).then(|| above / inside)
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut x = 0.0;
        for &g in &self.coefs {
            let (c, cum) = &self.tables[g];
            let u = rng.random::<f64>() * cum[cum.len() - 1];
            let i = cum.partition_point(|&a| a <= u).min(cum.len() - 1);
            x += c * self.pool[i];
        }
        x
    }
}

/// Signal estimate from odd/even two-fold cross-validation over BS steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaHat {
    pub fit: Vec<f64>,
    pub k: usize,
    /// points whose segment is at least the minimum length
    pub keep: Vec<bool>,
}

impl ThetaHat {
    /// `y - theta_hat` on the kept points.
    pub fn residuals(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.fit).zip(&self.keep).filter(|(_, k)| **k).map(|((a, b), _)| a - b).collect()
    }
}

/// Choose `k in 0..=kmax` by fitting BS on the odd-indexed points and
/// scoring on the even-indexed ones, then fit `k` steps on all of `y`.
/// Segments shorter than `min_segment` are excluded from `keep`.
pub fn fit_theta_hat_cv(y: &[f64], kmax: usize, min_segment: usize) -> Result<ThetaHat> {
    let n = y.len();
    if n < 4 {
        return Err(Error::SeriesTooShort(n));
    }
    let odd: Vec<f64> = y.iter().step_by(2).copied().collect();
    let even: Vec<f64> = y.iter().skip(1).step_by(2).copied().collect();
    let score = |bounds: &[usize]| -> f64 {
        let fit = segment_fit(&odd, bounds);
        even.iter().zip(&fit).map(|(a, b)| (a - b) * (a - b)).sum()
    };
    let mut best_k = 0;
    let mut best = score(&[]);
    if kmax > 0 {
        if let Ok(path) = bs(&odd, kmax.min(odd.len() - 1), &[]) {
            for k in 1..=path.k() {
                let sc = score(&path.prefix(k).boundaries());
                if sc < best {
                    best = sc;
                    best_k = k;
                }
            }
        }
    }
    let boundaries = if best_k == 0 { Vec::new() } else { bs(y, best_k, &[])?.boundaries() };
    let fit = segment_fit(y, &boundaries);
    let mut keep = alloc::vec![true; n];
    let mut start = 0;
    for end in boundaries.iter().copied().chain(core::iter::once(n)) {
        if end - start < min_segment {
            keep[start..end].fill(false);
        }
        start = end;
    }
    Ok(ThetaHat { fit, k: best_k, keep })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ContrastKind, Sign};
    use alloc::vec;

    fn contrast(v: Vec<f64>) -> Contrast {
        Contrast { v, kind: ContrastKind::Segment, target: 1, location: 1, direction: Sign::Plus }
    }

    #[test]
    fn quadrant_bounds() {
        let p = Polyhedron::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[0.0, 0.0], 2).unwrap();
        let tb = truncation_bounds(&p, &[1.0, 1.0], &contrast(vec![1.0, 0.0]), 1.0).unwrap();
        assert_eq!((tb.vlo, tb.vup, tb.vty), (0.0, f64::INFINITY, 1.0));
        let empty = Polyhedron::new(2);
        let tb = truncation_bounds(&empty, &[1.0, 1.0], &contrast(vec![1.0, 0.0]), 1.0).unwrap();
        assert_eq!((tb.vlo, tb.vup), (f64::NEG_INFINITY, f64::INFINITY));
        assert!(matches!(
            truncation_bounds(&p, &[1.0, -1.0], &contrast(vec![1.0, 0.0]), 1.0),
            Err(Error::Infeasible { row: 1, .. })
        ));
    }

    #[test]
    fn tg_examples() {
        let tb = |vlo, vty, vup| TruncationBounds { vlo, vup, vty, sd: 1.0 };
        assert!((tg_pvalue(&tb(f64::NEG_INFINITY, 1.0, f64::INFINITY)).unwrap() - 0.158_655_253_931_457).abs() < 1e-12);
        assert!((tg_pvalue(&tb(0.0, 1.0, f64::INFINITY)).unwrap() - 0.317_310_507_862_914).abs() < 1e-12);
        assert_eq!(tg_pvalue(&tb(-1.0, -1.0, 2.0)).unwrap(), 1.0);
        assert_eq!(tg_pvalue(&tb(-1.0, 2.0, 2.0)).unwrap(), 0.0);
        assert_eq!(tg_pvalue(&tb(1.0, 1.0, 1.0)), Err(Error::EmptyTruncation));
    }

    #[test]
    fn infeasible_slice_is_empty() {
        // x0 >= 1 and x0 <= -1 cannot both hold on any line
        let p = Polyhedron::from_dense(&[vec![1.0, 0.0], vec![-1.0, 0.0]], &[1.0, 1.0], 2).unwrap();
        assert_eq!(line_slice(&p, &[0.0, 0.0], &[1.0, 0.0]).unwrap(), None);
        // a row orthogonal to v that is violated empties the slice
        let p = Polyhedron::from_dense(&[vec![0.0, 1.0]], &[1.0], 2).unwrap();
        assert_eq!(line_slice(&p, &[0.0, 0.0], &[1.0, 0.0]).unwrap(), None);
    }

    #[test]
    fn cv_fit_examples() {
        let y = [0.0, 0.0, 0.0, 0.0, 3.0, 3.0, 3.0, 3.0];
        let th = fit_theta_hat_cv(&y, 3, 0).unwrap();
        assert_eq!(th.k, 1);
        assert_eq!(th.fit, y.to_vec());
        let th = fit_theta_hat_cv(&[2.0; 6], 3, 0).unwrap();
        assert_eq!((th.k, th.fit), (0, vec![2.0; 6]));
        assert!(fit_theta_hat_cv(&[1.0, 2.0, 3.0], 1, 0).is_err());
        let th = fit_theta_hat_cv(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 5.0, 5.0], 1, 3).unwrap();
        assert_eq!(th.keep, vec![true, true, true, true, true, true, false, false]);
    }

    #[test]
    fn tilted_bootstrap_matches_enumeration() {
        let pool = [-1.0, 0.2, 0.8];
        let c = [0.5, 0.5, -0.25, -0.25, -0.25, -0.25];
        let sup: Vec<(usize, f64)> = c.iter().copied().enumerate().collect();
        // exact law of sum c_i e_i over all 3^6 resamples
        let mut xs = Vec::new();
        for code in 0..729usize {
            let mut k = code;
            let mut x = 0.0;
            for ci in c {
                x += ci * pool[k % 3];
                k /= 3;
            }
            xs.push(x);
        }
        xs.sort_by(|a, b| a.total_cmp(b));
        let mut rng = crate::rng::rng_for(3, 90, 0);
        for (vlo, vup, ty) in [(0.9, f64::INFINITY, 1.0), (-f64::INFINITY, -0.95, -1.1), (0.6, 1.1, 0.75)] {
            let exact = (ecdf_mid(&xs, vup) - ecdf_mid(&xs, ty)) / (ecdf_mid(&xs, vup) - ecdf_mid(&xs, vlo));
            let tilt = Tilt::new(&sup, &pool, vlo, vup);
            assert!(tilt.theta != 0.0);
            let got = tilt.pvalue(40000, vlo, vup, ty, &mut rng).unwrap();
            assert!((got - exact).abs() < 0.02, "{vlo} {vup}: {got} vs {exact}");
        }
    }

}
