use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::bs::{build_bs, segment_of};
use super::{Polyhedron, RowKind, RowMeta, RowSink};
use crate::error::{Error, Result};
use crate::model::{segment_rss, Algorithm, ChangepointModel, Sign};
use crate::segmentation::cusum::cusum_terms;
use crate::segmentation::insert_sorted;

/// Trace of the BIC-type stopping rule along a BS path.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct IcState {
    /// `J_0, ..., J_kmax`
    pub criterion: Vec<f64>,
    /// `S_1, ..., S_kmax`
    pub signs: Vec<Sign>,
    pub q: usize,
    /// first `k` with `S_k = ... = S_{k+q} = +1`
    pub khat: usize,
    /// per-step penalty `sigma^2 log n`
    pub penalty: f64,
}

impl IcState {
    /// Steps of the model used for inference (`khat - 1`).
    pub fn inference_steps(&self) -> usize {
        self.khat - 1
    }

    /// Steps whose selection the event must fix (`khat + q`).
    pub fn conditioned_steps(&self) -> usize {
        self.khat + self.q
    }
}

/// Evaluate `J_l = RSS_l + sigma^2 l log n` along the BS path `path` and
/// find the first run of `q + 1` non-negative increments.
pub fn ic_stop(y: &[f64], path: &ChangepointModel, sigma2: f64, q: usize) -> Result<IcState> {
    if path.algo != Algorithm::Bs {
        return Err(Error::ModelMismatch("IC stopping is defined for BS paths"));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::InvalidArgument("sigma2 must be non-negative"));
    }
    if y.len() != path.n {
        return Err(Error::DimensionMismatch { expected: path.n, got: y.len() });
    }
    let n = path.n;
    let penalty = sigma2 * libm::log(n as f64);
    let kmax = path.k();
    let mut criterion = Vec::with_capacity(kmax + 1);
    for l in 0..=kmax {
        let rss = segment_rss(y, &path.prefix(l).boundaries());
        criterion.push(rss + penalty * l as f64);
    }
    let signs: Vec<Sign> = criterion.windows(2).map(|w| Sign::of(w[1] - w[0])).collect();
    let khat = (1..=kmax)
        .find(|&k| k + q <= kmax && signs[k - 1..k + q].iter().all(|&s| s == Sign::Plus))
        .ok_or(Error::IcNeverStopped(kmax))?;
    Ok(IcState { criterion, signs, q, khat, penalty })
}

/// Halfspaces fixing `S_1, ..., S_{khat+q}`. With the RSS drop
/// `(g_l^T y)^2` at step `l`: `S_l = +1` gives `-d_l g_l^T y >= -sigma sqrt(log n)`
/// and `S_l = -1` gives `d_l g_l^T y >= sigma sqrt(log n)`.
pub fn ic_halfspaces<S: RowSink>(path: &ChangepointModel, state: &IcState, sigma2: f64, sink: &mut S) -> Result<()> {
    if path.algo != Algorithm::Bs {
        return Err(Error::ModelMismatch("IC halfspaces are defined for BS models"));
    }
    let steps = state.conditioned_steps();
    if path.k() < steps || state.signs.len() < steps {
        return Err(Error::ModelMismatch("path shorter than khat + q"));
    }
    let n = path.n;
    let thr = libm::sqrt(sigma2 * libm::log(n as f64));
    let mut boundaries: Vec<usize> = path.initial_cuts.clone();
    for l in 0..steps {
        let (b, d) = (path.locations[l], path.directions[l]);
        let (s, e) = segment_of(n, &boundaries, b)?;
        let meta = RowMeta::new(l + 1, RowKind::Ic, b);
        match state.signs[l] {
            Sign::Plus => sink.push(&cusum_terms(s, b, e, -d.value()), -thr, meta),
            Sign::Minus => sink.push(&cusum_terms(s, b, e, d.value()), thr, meta),
        }
        insert_sorted(&mut boundaries, b);
    }
    Ok(())
}

/// BS event for the first `khat + q` steps together with the IC halfspaces.
pub fn gamma_bs_ic(path: &ChangepointModel, state: &IcState, sigma2: f64) -> Result<Polyhedron> {
    let mut p = Polyhedron::new(path.n);
    build_bs(&path.prefix(state.conditioned_steps()), &mut p)?;
    ic_halfspaces(path, state, sigma2, &mut p)?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::bs;
    use alloc::vec;

    #[test]
    fn worked_example() {
        let y = [0.0, 0.0, 2.0, 2.0];
        let path = bs(&y, 3, &[]).unwrap();
        let st = ic_stop(&y, &path, 1.0, 1).unwrap();
        let l4 = libm::log(4.0);
        for (got, want) in st.criterion.iter().zip([4.0, l4, 2.0 * l4, 3.0 * l4]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(st.signs, vec![Sign::Minus, Sign::Plus, Sign::Plus]);
        assert_eq!(st.khat, 2);
        assert_eq!(st.inference_steps(), 1);
        let mut p = Polyhedron::new(4);
        ic_halfspaces(&path, &st, 1.0, &mut p).unwrap();
        assert_eq!(p.m(), 3);
        let g = p.apply(&y).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-12);
        assert!((p.offsets()[0] - libm::sqrt(l4)).abs() < 1e-12);
        // zero statistics under S = +1 are always feasible
        assert_eq!(g[1], 0.0);
        assert!(p.contains(&y).unwrap());
    }

    #[test]
    fn zero_penalty_never_stops() {
        let y = [0.1, -0.5, 1.3, 0.2, 0.9];
        let path = bs(&y, 4, &[]).unwrap();
        assert_eq!(ic_stop(&y, &path, 0.0, 1), Err(Error::IcNeverStopped(4)));
    }
}
