use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{gaussian_vec, normalize, NullProjector, SufficientConstraints};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, dot, lower_mul, lower_transpose_mul, norm, solve_lower, spd_solve};
use crate::math::sample_truncated_normal;
use crate::model::{Contrast, TestMethod, TestResult};
use crate::polyhedra::Polyhedron;

/// Gibbs-type hit-and-run for the selected null with known `sigma^2`.
///
/// Writing `B = [N; A]` with `N` an orthonormal basis of `null(A)`, the free
/// coordinates `Y'' = N Y` given `A Y = A y_obs` are Gaussian with mean
/// `mu''` and covariance `Sigma''` (Schur complement of `sigma^2 B B^T`).
/// With `Sigma'' = L L^T` the sampler runs on `Z = L^{-1}(Y'' - mu'')`,
/// which is standard normal restricted to the polyhedron. Each move draws
/// the coordinate of `Z` along a unit direction from its truncated `N(0, 1)`
/// conditional. Moves alternate between the contrast direction and one of
/// `p_dirs` fixed isotropic directions.
pub struct KnownSigmaSampler<'a> {
    p: &'a Polyhedron,
    null: Vec<Vec<f64>>,
    base: Vec<f64>,
    l: Vec<f64>,
    d: usize,
    z: Vec<f64>,
    dirs: Vec<Vec<f64>>,
    rho: Vec<Vec<f64>>,
    hv: Vec<f64>,
    u: Vec<f64>,
    vt_base: f64,
    vt_z: f64,
    h: Vec<f64>,
    steps: usize,
    pub degenerate: usize,
}

impl<'a> KnownSigmaSampler<'a> {
    pub fn new<R: Rng + ?Sized>(
        y_obs: &[f64],
        p: &'a Polyhedron,
        sc: &SufficientConstraints,
        v: &Contrast,
        sigma2: f64,
        p_dirs: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let n = y_obs.len();
        if p.n() != n || v.v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: p.n() });
        }
        if sc.sphere.is_some() {
            return Err(Error::InvalidArgument("known-sigma sampler does not take a sphere constraint"));
        }
        if !(sigma2 > 0.0) {
            return Err(Error::InvalidArgument("sigma2 must be positive"));
        }
        if p_dirs == 0 {
            return Err(Error::InvalidArgument("at least one sampling direction is required"));
        }
        let k = sc.a.len();
        let (proj, null) = NullProjector::new(&sc.a, n)?;
        let d = n - k;
        if d == 0 {
            return Err(Error::InvalidArgument("no free coordinates left"));
        }
        let a = &sc.a;
        // Blocks of sigma^2 B B^T.
        let s11: Vec<f64> = (0..d * d).map(|ij| sigma2 * dot(&null[ij / d], &null[ij % d])).collect();
        let s12: Vec<f64> = (0..d * k).map(|ij| sigma2 * dot(&null[ij / k], &a[ij % k])).collect();
        let s22: Vec<f64> = (0..k * k).map(|ij| sigma2 * dot(&a[ij / k], &a[ij % k])).collect();
        // A null mean: the row-space projection of y_obs.
        let theta0 = proj.row_part(y_obs);
        let mu1: Vec<f64> = null.iter().map(|r| dot(r, &theta0)).collect();
        let resid: Vec<f64> = a.iter().map(|r| dot(r, y_obs) - dot(r, &theta0)).collect();
        let mut mu = mu1;
        let mut sigma = s11;
        if k > 0 {
            let w = spd_solve(&s22, k, &resid)?;
            for (i, m) in mu.iter_mut().enumerate() {
                *m += dot(&s12[i * k..(i + 1) * k], &w);
            }
            // Sigma'' = S11 - S12 S22^{-1} S21
            let cols: Vec<Vec<f64>> = (0..d)
                .map(|j| spd_solve(&s22, k, &s12[j * k..(j + 1) * k]))
                .collect::<Result<_>>()?;
            for i in 0..d {
                for j in 0..d {
                    sigma[i * d + j] -= dot(&s12[i * k..(i + 1) * k], &cols[j]);
                }
            }
        }
        let l = cholesky(&sigma, d)?;
        let mut base = proj.row_part(y_obs);
        for (i, row) in null.iter().enumerate() {
            crate::linalg::axpy(mu[i], row, &mut base);
        }
        let mut z: Vec<f64> = null.iter().zip(&mu).map(|(r, m)| dot(r, y_obs) - m).collect();
        solve_lower(&l, d, &mut z);

        let nv: Vec<f64> = null.iter().map(|r| dot(r, &v.v)).collect();
        let h = lower_transpose_mul(&l, d, &nv);
        let mut vdir = h.clone();
        if normalize(&mut vdir) <= 1e-10 * norm(&v.v) * libm::sqrt(sigma2) {
            return Err(Error::InvalidArgument("contrast lies in the row space of A"));
        }
        let mut dirs = Vec::with_capacity(p_dirs + 1);
        dirs.push(vdir);
        for _ in 0..p_dirs {
            let mut g = gaussian_vec(rng, d);
            normalize(&mut g);
            dirs.push(g);
        }
        let to_data = |g: &[f64]| -> Vec<f64> {
            let lg = lower_mul(&l, d, g);
            let mut x = vec![0.0; n];
            for (row, c) in null.iter().zip(&lg) {
                crate::linalg::axpy(*c, row, &mut x);
            }
            x
        };
        let rho: Vec<Vec<f64>> = dirs.iter().map(|g| p.apply(&to_data(g))).collect::<Result<_>>()?;
        let hv: Vec<f64> = dirs.iter().map(|g| dot(&h, g)).collect();

        let slack = p.slack(y_obs)?;
        let scale = norm(y_obs);
        if let Some((row, &s)) = slack.iter().enumerate().find(|(j, &s)| s < -1e-9 * (p.row_norm_bound(*j) * scale + 1.0)) {
            return Err(Error::Infeasible { row, slack: s });
        }
        let u: Vec<f64> = slack.into_iter().map(|s| s.max(0.0)).collect();
        let vt_base = dot(&v.v, &base);
        let vt_z = dot(&h, &z);
        Ok(KnownSigmaSampler { p, null, base, l, d, z, dirs, rho, hv, u, vt_base, vt_z, h, steps: 0, degenerate: 0 })
    }

    /// Whitening check: `L^{-1} Sigma'' L^{-T}` should be the identity.
    pub fn whitening_factor(&self) -> (&[f64], usize) {
        (&self.l, self.d)
    }

    /// Current `v^T Y`.
    pub fn contrast_value(&self) -> f64 {
        self.vt_base + self.vt_z
    }

    /// Current slack vector `Gamma Y - c`.
    pub fn slack(&self) -> &[f64] {
        &self.u
    }

    /// Current point in data space.
    pub fn state(&self) -> Vec<f64> {
        let lz = lower_mul(&self.l, self.d, &self.z);
        let mut y = self.base.clone();
        for (row, c) in self.null.iter().zip(&lz) {
            crate::linalg::axpy(*c, row, &mut y);
        }
        y
    }

    /// One coordinate move.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let i = if self.steps % 2 == 0 { 0 } else { rng.random_range(1..self.dirs.len()) };
        self.steps += 1;
        let g = &self.dirs[i];
        let rho = &self.rho[i];
        let t0 = dot(g, &self.z);
        let scale = rho.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for (uj, rj) in self.u.iter().zip(rho) {
            if rj.abs() <= 1e-12 * scale {
                continue;
            }
            let t = t0 - uj / rj;
            if *rj > 0.0 {
                lo = lo.max(t);
            } else {
                hi = hi.min(t);
            }
        }
        if !(hi > lo) {
            self.degenerate += 1;
            return;
        }
        let t = sample_truncated_normal(rng, lo, hi);
        let delta = t - t0;
        crate::linalg::axpy(delta, g, &mut self.z);
        for (uj, rj) in self.u.iter_mut().zip(rho) {
            *uj = (*uj + delta * rj).max(0.0);
        }
        self.vt_z += delta * self.hv[i];
        if self.steps % 512 == 0 {
            self.refresh();
        }
    }

    fn refresh(&mut self) {
        let y = self.state();
        if let Ok(s) = self.p.slack(&y) {
            self.u = s.into_iter().map(|x| x.max(0.0)).collect();
        }
        self.vt_z = dot(&self.h, &self.z);
    }
}

/// Selected-model p-value with known `sigma^2`: tail frequency of `v^T Y`
/// over `samples` moves after a 10% burn-in.
#[allow(clippy::too_many_arguments)]
pub fn hit_and_run_known_sigma<R: Rng + ?Sized>(
    y_obs: &[f64],
    p: &Polyhedron,
    sc: &SufficientConstraints,
    v: &Contrast,
    sigma2: f64,
    samples: usize,
    p_dirs: usize,
    rng: &mut R,
) -> Result<TestResult> {
    if samples == 0 {
        return Err(Error::InvalidArgument("at least one sample is required"));
    }
    let mut s = KnownSigmaSampler::new(y_obs, p, sc, v, sigma2, p_dirs, rng)?;
    let vty = v.dot(y_obs);
    for _ in 0..samples / 10 {
        s.step(rng);
    }
    let mut hits = 0usize;
    for _ in 0..samples {
        s.step(rng);
        if s.contrast_value() >= vty {
            hits += 1;
        }
    }
    let mut res = TestResult::closed_form(
        TestMethod::SelectedKnownSigma,
        hits as f64 / samples as f64,
        f64::NEG_INFINITY,
        f64::INFINITY,
        vty,
        libm::sqrt(sigma2) * norm(&v.v),
    );
    res.trials = samples;
    res.degenerate = s.degenerate;
    Ok(res)
}
