//! Selected-model tests: the null additionally fixes the segment means of
//! the selected model, leaving only the contrast's two adjacent segments
//! free (through their pooled mean). Two hit-and-run samplers explore the
//! resulting conditional law, with and without knowledge of `sigma^2`.

mod known;
mod unknown;

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

pub use known::{hit_and_run_known_sigma, KnownSigmaSampler};
pub use unknown::{feasible_arc, hit_and_run_unknown_sigma, ArcSet, UnknownSigmaChain};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, orthonormal_completion};
use crate::model::{segments, ChangepointModel};

/// Linear equalities `A Y = A y_obs` (and optionally `|Y| = radius`) that
/// the selected null conditions on.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientConstraints {
    pub a: Vec<Vec<f64>>,
    pub sphere: Option<f64>,
}

/// Rows: the mean of every segment not adjacent to `location`, then the
/// pooled mean of the two segments adjacent to it.
pub fn sufficient_constraints_at(n: usize, boundaries: &[usize], location: usize, sphere: Option<f64>) -> Result<SufficientConstraints> {
    let idx = boundaries
        .binary_search(&location)
        .map_err(|_| Error::InvalidArgument("tested location is not a boundary"))?;
    let segs = segments(n, boundaries);
    let mut a = Vec::with_capacity(segs.len() - 1);
    for (i, &(s, e)) in segs.iter().enumerate() {
        if i == idx || i == idx + 1 {
            continue;
        }
        let mut row = vec![0.0; n];
        row[s - 1..e].fill(1.0 / (e + 1 - s) as f64);
        a.push(row);
    }
    let (s, e) = (segs[idx].0, segs[idx + 1].1);
    let mut row = vec![0.0; n];
    row[s - 1..e].fill(1.0 / (e + 1 - s) as f64);
    a.push(row);
    Ok(SufficientConstraints { a, sphere })
}

/// Constraints for the `j`-th changepoint (sorted order) of `model`; with
/// `unknown_sigma` the sphere radius is `|y_obs|`.
pub fn build_sufficient_constraints(
    model: &ChangepointModel,
    j: usize,
    y_obs: &[f64],
    unknown_sigma: bool,
) -> Result<SufficientConstraints> {
    let cps = model.sorted_changepoints();
    if j == 0 || j > cps.len() {
        return Err(Error::IndexOutOfRange { j, k: cps.len() });
    }
    if y_obs.len() != model.n {
        return Err(Error::DimensionMismatch { expected: model.n, got: y_obs.len() });
    }
    let radius = if unknown_sigma { Some(norm(y_obs)) } else { None };
    sufficient_constraints_at(model.n, &model.boundaries(), cps[j - 1].location, radius)
}

/// Orthogonal projector onto `null(A)`.
#[derive(Debug, Clone)]
pub(crate) struct NullProjector {
    row_basis: Vec<Vec<f64>>,
}

impl NullProjector {
    pub fn new(a: &[Vec<f64>], n: usize) -> Result<(Self, Vec<Vec<f64>>)> {
        let (row_basis, null) = orthonormal_completion(a, n)?;
        Ok((NullProjector { row_basis }, null))
    }

    pub fn project(&self, x: &mut [f64]) {
        for q in &self.row_basis {
            let c = dot(q, x);
            crate::linalg::axpy(-c, q, x);
        }
    }

    /// Component of `x` in the row space.
    pub fn row_part(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for q in &self.row_basis {
            crate::linalg::axpy(dot(q, x), q, &mut out);
        }
        out
    }
}

pub(crate) fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub(crate) fn normalize(x: &mut [f64]) -> f64 {
    let nx = norm(x);
    if nx > 0.0 {
        for v in x.iter_mut() {
            *v /= nx;
        }
    }
    nx
}

/// Largest absolute residual of `A y = A y_obs` (and the sphere, if set).
pub fn constraint_residual(sc: &SufficientConstraints, y: &[f64], y_obs: &[f64]) -> f64 {
    let mut worst = sc.a.iter().map(|r| (dot(r, y) - dot(r, y_obs)).abs()).fold(0.0, f64::max);
    if let Some(rad) = sc.sphere {
        worst = worst.max((norm(y) - rad).abs());
    }
    worst
}
