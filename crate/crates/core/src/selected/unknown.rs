use alloc::vec::Vec;

use rand::Rng;

use super::{gaussian_vec, normalize, NullProjector, SufficientConstraints};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::math::TAU;
use crate::model::{Contrast, TestMethod, TestResult};
use crate::polyhedra::Polyhedron;

use core::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Piece {
    a: f64,
    b: f64,
    // (cos, sin) of the end points
    ua: (f64, f64),
    ub: (f64, f64),
}

impl Piece {
    fn new(a: f64, b: f64) -> Self {
        Piece { a, b, ua: (libm::cos(a), libm::sin(a)), ub: (libm::cos(b), libm::sin(b)) }
    }

    // Whether the direction `m` lies on the piece.
    fn holds(&self, m: (f64, f64)) -> bool {
        let cross = |u: (f64, f64), w: (f64, f64)| u.0 * w.1 - u.1 * w.0;
        if self.b - self.a <= PI {
            cross(self.ua, m) >= 0.0 && cross(m, self.ub) >= 0.0
        } else {
            !(cross(self.ub, m) > 0.0 && cross(m, self.ua) > 0.0)
        }
    }
}

/// Finite union of closed intervals of the circle, kept as disjoint sorted
/// pieces of `[-pi, pi]` in the doubled angle `phi = 2 omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcSet {
    pieces: Vec<Piece>,
    buf: Vec<Piece>,
}

impl ArcSet {
    pub fn full() -> Self {
        ArcSet { pieces: alloc::vec![Piece::new(-PI, PI)], buf: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Total length in `omega` units.
    pub fn measure(&self) -> f64 {
        0.5 * self.pieces.iter().map(|p| p.b - p.a).sum::<f64>()
    }

    /// Pieces in `omega` units (subsets of `[-pi/2, pi/2]`).
    pub fn omega_pieces(&self) -> Vec<(f64, f64)> {
        self.pieces.iter().map(|p| (0.5 * p.a, 0.5 * p.b)).collect()
    }

    pub fn contains_omega(&self, omega: f64) -> bool {
        let phi = wrap(2.0 * omega);
        self.pieces.iter().any(|p| p.a <= phi && phi <= p.b)
    }

    fn intersect(&mut self, arc: &[(f64, f64)]) {
        self.buf.clear();
        // both lists are sorted and disjoint, so the output is too
        for p in &self.pieces {
            for &(c, d) in arc {
                let lo = p.a.max(c);
                let hi = p.b.min(d);
                if lo <= hi {
                    let ua = if lo == p.a { p.ua } else { (libm::cos(lo), libm::sin(lo)) };
                    let ub = if hi == p.b { p.ub } else { (libm::cos(hi), libm::sin(hi)) };
                    self.buf.push(Piece { a: lo, b: hi, ua, ub });
                }
            }
        }
        core::mem::swap(&mut self.pieces, &mut self.buf);
    }

    /// Intersect with `{phi : alpha + beta cos(phi) + gamma sin(phi) >= 0}`.
    pub fn restrict(&mut self, alpha: f64, beta: f64, gamma: f64) {
        let r2 = beta * beta + gamma * gamma;
        if alpha >= 0.0 && alpha * alpha >= r2 {
            return;
        }
        if alpha < 0.0 && alpha * alpha >= r2 {
            self.pieces.clear();
            return;
        }
        // cheap test: the row only cuts a piece if it is negative at an end
        // point or its minimizer lies on the piece
        let f = |u: (f64, f64)| alpha + beta * u.0 + gamma * u.1;
        let cuts = self.pieces.iter().any(|p| f(p.ua) < 0.0 || f(p.ub) < 0.0 || p.holds((-beta, -gamma)));
        if !cuts {
            return;
        }
        let r = libm::sqrt(r2);
        let center = libm::atan2(gamma, beta);
        let half = libm::acos((-alpha / r).clamp(-1.0, 1.0));
        let (lo, hi) = (center - half, center + half);
        if lo < -PI {
            self.intersect(&[(-PI, hi), (lo + TAU, PI)]);
        } else if hi > PI {
            self.intersect(&[(-PI, hi - TAU), (lo, PI)]);
        } else {
            self.intersect(&[(lo, hi)]);
        }
    }

    /// Uniform draw of `omega` from the set.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<f64> {
        let total: f64 = self.pieces.iter().map(|p| p.b - p.a).sum();
        if !(total > 0.0) {
            return self.pieces.first().map(|p| 0.5 * p.a);
        }
        let mut u = rng.random::<f64>() * total;
        for p in &self.pieces {
            if u <= p.b - p.a {
                return Some(0.5 * (p.a + u));
            }
            u -= p.b - p.a;
        }
        self.pieces.last().map(|p| 0.5 * p.b)
    }
}

fn wrap(phi: f64) -> f64 {
    let mut p = phi;
    while p > PI {
        p -= TAU;
    }
    while p < -PI {
        p += TAU;
    }
    p
}

// Coefficients of the doubled-angle form for one row.
#[inline]
fn arc_coefficients(slack: f64, ys: f64, yt: f64, gs: f64, gt: f64) -> (f64, f64, f64) {
    (slack - (ys * gs + yt * gt), ys * gs - yt * gt, -(ys * gt + yt * gs))
}

/// Angles `omega in [-pi/2, pi/2]` for which the reflection
/// `y - 2 (y^T u) u`, `u = sin(omega) s + cos(omega) t`, stays in `p`.
pub fn feasible_arc(y: &[f64], s: &[f64], t: &[f64], p: &Polyhedron) -> Result<ArcSet> {
    let slack = p.slack(y)?;
    let gs = p.apply(s)?;
    let gt = p.apply(t)?;
    let (ys, yt) = (dot(y, s), dot(y, t));
    let mut set = ArcSet::full();
    for j in 0..p.m() {
        let (a, b, c) = arc_coefficients(slack[j].max(0.0), ys, yt, gs[j], gt[j]);
        set.restrict(a, b, c);
    }
    if set.is_empty() {
        return Err(Error::EmptyTruncation);
    }
    Ok(set)
}

/// Markov chain on `{y : Gamma y >= c, A y = A y_obs, |y| = |y_obs|}`.
///
/// Even steps use the (projected) contrast direction as `s`, odd steps a
/// fresh isotropic one; both keep the uniform law invariant.
pub struct UnknownSigmaChain<'a> {
    p: &'a Polyhedron,
    proj: NullProjector,
    vdir: Vec<f64>,
    gvdir: Vec<f64>,
    y: Vec<f64>,
    gy: Vec<f64>,
    steps: usize,
    pub stuck: usize,
}

impl<'a> UnknownSigmaChain<'a> {
    pub fn new(y_obs: &[f64], p: &'a Polyhedron, sc: &SufficientConstraints, v: &Contrast) -> Result<Self> {
        let n = y_obs.len();
        if p.n() != n || v.v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: p.n() });
        }
        if sc.sphere.is_none() {
            return Err(Error::InvalidArgument("unknown-sigma sampler needs the sphere constraint"));
        }
        let (proj, _) = NullProjector::new(&sc.a, n)?;
        let mut vdir = v.v.clone();
        proj.project(&mut vdir);
        if normalize(&mut vdir) <= 1e-10 * norm(&v.v) {
            return Err(Error::InvalidArgument("contrast lies in the row space of A"));
        }
        let slack = p.slack(y_obs)?;
        let scale = norm(y_obs);
        if let Some((row, &s)) = slack.iter().enumerate().find(|(j, &s)| s < -1e-9 * (p.row_norm_bound(*j) * scale + 1.0)) {
            return Err(Error::Infeasible { row, slack: s });
        }
        let gy = p.apply(y_obs)?;
        let gvdir = p.apply(&vdir)?;
        Ok(UnknownSigmaChain { p, proj, vdir, gvdir, y: y_obs.to_vec(), gy, steps: 0, stuck: 0 })
    }

    pub fn state(&self) -> &[f64] {
        &self.y
    }

    fn random_null<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut x = gaussian_vec(rng, self.y.len());
        self.proj.project(&mut x);
        x
    }

    /// One hit-and-run move.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let contrast_move = self.steps % 2 == 0;
        let s = if contrast_move {
            self.vdir.clone()
        } else {
            let mut s = self.random_null(rng);
            normalize(&mut s);
            s
        };
        let mut t = self.random_null(rng);
        let ts = dot(&t, &s);
        crate::linalg::axpy(-ts, &s, &mut t);
        self.proj.project(&mut t);
        normalize(&mut t);
        self.steps += 1;

        let gs = if contrast_move { self.gvdir.clone() } else { self.p.apply(&s).expect("dimension checked") };
        let gt = self.p.apply(&t).expect("dimension checked");
        let (ys, yt) = (dot(&self.y, &s), dot(&self.y, &t));
        let c = self.p.offsets();
        let mut set = ArcSet::full();
        for j in 0..self.p.m() {
            let (a, b, g) = arc_coefficients((self.gy[j] - c[j]).max(0.0), ys, yt, gs[j], gt[j]);
            set.restrict(a, b, g);
            if set.is_empty() {
                break;
            }
        }
        let Some(omega) = set.sample(rng) else {
            self.stuck += 1;
            return;
        };
        let (so, co) = (libm::sin(omega), libm::cos(omega));
        let u: Vec<f64> = s.iter().zip(&t).map(|(a, b)| so * a + co * b).collect();
        let r = -2.0 * dot(&self.y, &u);
        crate::linalg::axpy(r, &u, &mut self.y);
        for j in 0..self.gy.len() {
            self.gy[j] += r * (so * gs[j] + co * gt[j]);
        }
        if self.steps % 64 == 0 {
            self.gy = self.p.apply(&self.y).expect("dimension checked");
        }
    }
}

/// Selected-model p-value with unknown `sigma^2`: the tail frequency of
/// `v^T Y` along the chain, after discarding a 10% burn-in.
pub fn hit_and_run_unknown_sigma<R: Rng + ?Sized>(
    y_obs: &[f64],
    p: &Polyhedron,
    sc: &SufficientConstraints,
    v: &Contrast,
    samples: usize,
    rng: &mut R,
) -> Result<TestResult> {
    if samples == 0 {
        return Err(Error::InvalidArgument("at least one sample is required"));
    }
    let mut chain = UnknownSigmaChain::new(y_obs, p, sc, v)?;
    let vty = v.dot(y_obs);
    let burn = samples / 10;
    for _ in 0..burn {
        chain.step(rng);
    }
    let mut hits = 0usize;
    for _ in 0..samples {
        chain.step(rng);
        if v.dot(chain.state()) >= vty {
            hits += 1;
        }
    }
    let mut res = TestResult::closed_form(
        TestMethod::SelectedUnknownSigma,
        hits as f64 / samples as f64,
        f64::NEG_INFINITY,
        f64::INFINITY,
        vty,
        norm(&v.v),
    );
    res.trials = samples;
    res.degenerate = chain.stuck;
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn full_arc_without_rows() {
        let p = Polyhedron::new(3);
        let set = feasible_arc(&[1.0, 2.0, 3.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &p).unwrap();
        assert_eq!(set.omega_pieces(), vec![(-PI / 2.0, PI / 2.0)]);
    }

    #[test]
    fn wrapping_arcs_split() {
        let mut set = ArcSet::full();
        // feasible near phi = pi only
        set.restrict(-0.5, -1.0, 0.0);
        assert_eq!(set.pieces.len(), 2);
        assert!(set.contains_omega(PI / 2.0 - 1e-9));
        assert!(!set.contains_omega(0.0));
    }
}
