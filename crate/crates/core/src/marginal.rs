//! Marginalizing saturated tests over auxiliary randomness: Gaussian noise
//! added before detection, or the random intervals of WBS. Each auxiliary
//! draw `w` contributes the selection probability `g(w)` of the slice of
//! its event through `y_obs` and the tail mass `k(w)` beyond `v^T y_obs`;
//! the p-value is the ratio `sum k / sum g`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{ln_add_exp, log_norm_mass};
use crate::model::{Algorithm, ChangepointModel, Contrast, TestMethod, TestResult};
use crate::polyhedra::{build_wbs, BlockTerm, Polyhedron, WbsSteps};
use crate::segmentation::cusum::cusum_terms;
use crate::segmentation::wbs::interval_active;
use crate::saturated::{line_slice, LineSlice, MultiSliceSink};
use crate::segmentation::{draw_interval, IntervalSet, Prefix};

/// Draws allowed per requested trial before additive marginalization gives
/// up and flags its result as degraded.
pub const ADDITIVE_RETRIES: usize = 2000;

/// Numerator and denominator integrands for one auxiliary draw.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct WeightTerms {
    pub k_term: f64,
    pub g_term: f64,
    pub ln_k: f64,
    pub ln_g: f64,
}

impl WeightTerms {
    const ZERO: WeightTerms = WeightTerms { k_term: 0.0, g_term: 0.0, ln_k: f64::NEG_INFINITY, ln_g: f64::NEG_INFINITY };

    fn from_slice(slice: Option<(f64, f64)>, vty: f64, sd: f64) -> WeightTerms {
        let Some((lo, up)) = slice else { return WeightTerms::ZERO };
        let ln_g = log_norm_mass(lo / sd, up / sd);
        let ln_k = log_norm_mass(vty.max(lo) / sd, up / sd);
        WeightTerms { k_term: libm::exp(ln_k), g_term: libm::exp(ln_g), ln_k, ln_g }
    }
}

/// Weight terms of the (draw-specific) event `p` along the contrast line
/// through `y_obs`; an empty slice gives `(0, 0)`.
pub fn weight_terms(y_obs: &[f64], v: &Contrast, p: &Polyhedron, sd: f64) -> Result<WeightTerms> {
    if !(sd > 0.0) {
        return Err(Error::InvalidArgument("pivot scale must be positive"));
    }
    let slice = line_slice(p, y_obs, &v.v)?;
    Ok(WeightTerms::from_slice(slice, v.dot(y_obs), sd))
}

#[derive(Debug, Clone, Copy)]
struct Accumulator {
    ln_k: f64,
    ln_g: f64,
    degenerate: usize,
    draws: usize,
}

impl Accumulator {
    fn new() -> Self {
        Accumulator { ln_k: f64::NEG_INFINITY, ln_g: f64::NEG_INFINITY, degenerate: 0, draws: 0 }
    }

    fn add(&mut self, w: WeightTerms) {
        self.draws += 1;
        if w.ln_g == f64::NEG_INFINITY {
            self.degenerate += 1;
            return;
        }
        self.ln_k = ln_add_exp(self.ln_k, w.ln_k);
        self.ln_g = ln_add_exp(self.ln_g, w.ln_g);
    }

    fn pvalue(&self) -> Result<f64> {
        if self.ln_g == f64::NEG_INFINITY {
            return Err(Error::ZeroMass { draws: self.draws });
        }
        Ok(libm::exp(self.ln_k - self.ln_g).clamp(0.0, 1.0))
    }
}

/// Marginalize over additive noise `W ~ N(0, sigma_add^2 I)`.
///
/// Draws whose shifted event misses the line through `y_obs` for every
/// contrast carry no mass and are redrawn, so `trials` counts draws that
/// contribute. At most `trials` times [`ADDITIVE_RETRIES`] draws are made.
///
/// `p_obs` is the event of the model selected on `y_obs + w_obs` (as a set
/// in the space of `y + w`); each draw `w_t` reuses its rows with offsets
/// `c - Gamma w_t`. The reported bounds are those of the observed draw.
#[allow(clippy::too_many_arguments)]
pub fn marginalize_additive<R: Rng + ?Sized>(
    y_obs: &[f64],
    p_obs: &Polyhedron,
    w_obs: &[f64],
    v: &Contrast,
    sigma_add: f64,
    trials: usize,
    sigma2: f64,
    rng: &mut R,
) -> Result<TestResult> {
    let mut out = marginalize_additive_many(y_obs, p_obs, w_obs, core::slice::from_ref(v), sigma_add, trials, sigma2, rng)?;
    out.pop().expect("one contrast")
}

/// [`marginalize_additive`] for several contrasts sharing the same draws.
#[allow(clippy::too_many_arguments)]
pub fn marginalize_additive_many<R: Rng + ?Sized>(
    y_obs: &[f64],
    p_obs: &Polyhedron,
    w_obs: &[f64],
    vs: &[Contrast],
    sigma_add: f64,
    trials: usize,
    sigma2: f64,
    rng: &mut R,
) -> Result<Vec<Result<TestResult>>> {
    if !(sigma_add > 0.0) || !sigma_add.is_finite() {
        return Err(Error::InvalidArgument("sigma_add must be positive"));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidArgument("sigma2 must be positive"));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is required"));
    }
    let n = p_obs.n();
    if y_obs.len() != n || w_obs.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y_obs.len().min(w_obs.len()) });
    }
    if let Some(v) = vs.iter().find(|v| v.v.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: v.v.len() });
    }
    struct Line {
        sd: f64,
        vty: f64,
        vnorm: f64,
        gv: Vec<f64>,
        acc: Accumulator,
    }
    let gy = p_obs.apply(y_obs)?;
    let norms: Vec<f64> = (0..p_obs.m()).map(|j| p_obs.row_norm_bound(j)).collect();
    let ynorm = crate::linalg::norm(y_obs);
    let c = p_obs.offsets();
    let mut lines = Vec::with_capacity(vs.len());
    for v in vs {
        lines.push(Line {
            sd: libm::sqrt(sigma2) * libm::sqrt(v.norm2()),
            vty: v.dot(y_obs),
            vnorm: libm::sqrt(v.norm2()),
            gv: p_obs.apply(&v.v)?,
            acc: Accumulator::new(),
        });
    }
    let slice_for = |line: &Line, gw: &[f64]| {
        let mut s = crate::saturated::LineSlice::new(line.vty, line.vnorm, ynorm);
        for j in 0..gy.len() {
            s.add(gy[j] + gw[j], c[j], line.gv[j], norms[j]);
        }
        s.interval()
    };
    let gw_obs = p_obs.apply(w_obs)?;
    let obs: Vec<Option<(f64, f64)>> = lines.iter().map(|l| slice_for(l, &gw_obs)).collect();
    let normal = Normal::new(0.0, sigma_add).map_err(|_| Error::InvalidArgument("invalid sigma_add"))?;
    let budget = ADDITIVE_RETRIES.saturating_mul(trials);
    let mut attempts = 0usize;
    let mut accepted = 0usize;
    let mut w = alloc::vec![0.0; n];
    while accepted < trials && attempts < budget {
        attempts += 1;
        for wi in w.iter_mut() {
            *wi = normal.sample(rng);
        }
        let gw = p_obs.apply_prefix(&Prefix::new(&w));
        let slices: Vec<Option<(f64, f64)>> = lines.iter().map(|l| slice_for(l, &gw)).collect();
        if slices.iter().all(Option::is_none) {
            continue;
        }
        accepted += 1;
        for (line, slice) in lines.iter_mut().zip(slices) {
            let terms = WeightTerms::from_slice(slice, line.vty, line.sd);
            line.acc.add(terms);
        }
    }
    Ok(lines
        .iter()
        .zip(obs)
        .map(|(line, obs)| {
            let pvalue = line.acc.pvalue()?;
            let (vlo, vup) = obs.unwrap_or((f64::NAN, f64::NAN));
            let mut res = TestResult::closed_form(TestMethod::MarginalNoise, pvalue, vlo, vup, line.vty, line.sd);
            res.trials = accepted;
            res.accept_rate = Some(accepted as f64 / attempts.max(1) as f64);
            res.degenerate = line.acc.degenerate;
            res.degraded = accepted < trials;
            Ok(res)
        })
        .collect())
}

/// Slices of WBS events through `y_obs`, assembled from memoized
/// per-interval pieces.
struct IntervalSlices {
    steps: WbsSteps,
    ypre: Prefix,
    vpre: Vec<Prefix>,
    roots: Vec<f64>,
    fresh: Vec<LineSlice>,
    memo: BTreeMap<(usize, usize), Vec<LineSlice>>,
}

impl IntervalSlices {
    fn new(y: &[f64], dirs: &[&[f64]], steps: WbsSteps) -> Self {
        let fresh = MultiSliceSink::new(y, dirs).slices;
        IntervalSlices {
            steps,
            ypre: Prefix::new(y),
            vpre: dirs.iter().map(|v| Prefix::new(v)).collect(),
            roots: (0..=y.len()).map(|m| libm::sqrt(m as f64)).collect(),
            fresh,
            memo: BTreeMap::new(),
        }
    }

    /// The rows `win -/+ comp >= 0` of [`WbsSteps::push_interval`], with
    /// the winner's sums hoisted out of the loop. Accumulation order matches
    /// the generic row sink term by term.
    fn piece(&self, s: usize, e: usize) -> Vec<LineSlice> {
        let mut out = self.fresh.clone();
        let sum = |pre: &Prefix, t: &BlockTerm| t.coef * pre.sum(t.lo as usize, t.hi as usize);
        let root = |t: &BlockTerm| libm::fabs(t.coef) * self.roots[(t.hi - t.lo + 1) as usize];
        let mut wv = alloc::vec![0.0; self.vpre.len()];
        for st in &self.steps.steps {
            if !interval_active(s, e, &st.boundaries) {
                continue;
            }
            let [w0, w1] = &st.win;
            let wy = (0.0 + sum(&self.ypre, w0)) + sum(&self.ypre, w1);
            let wn = (0.0 + root(w0)) + root(w1);
            for (x, pre) in wv.iter_mut().zip(&self.vpre) {
                *x = sum(pre, w0) + sum(pre, w1);
            }
            for c in s..e {
                if (s, e) == st.interval && c == st.b {
                    continue;
                }
                let [c0, c1] = cusum_terms(s, c, e, 1.0);
                let (p0, p1) = (sum(&self.ypre, &c0), sum(&self.ypre, &c1));
                let gn = (wn + root(&c0)) + root(&c1);
                let (above, below) = ((wy - p0) - p1, (wy + p0) + p1);
                for ((slice, pre), &v) in out.iter_mut().zip(&self.vpre).zip(&wv) {
                    let (q0, q1) = (sum(pre, &c0), sum(pre, &c1));
                    slice.add(above, 0.0, (v - q0) - q1, gn);
                    slice.add(below, 0.0, (v + q0) + q1, gn);
                }
            }
        }
        out
    }

    fn slices(&mut self, w: &IntervalSet) -> Vec<Option<(f64, f64)>> {
        let mut out = self.fresh.clone();
        for &(s, e) in &w.intervals {
            if !self.memo.contains_key(&(s, e)) {
                let piece = self.piece(s, e);
                self.memo.insert((s, e), piece);
            }
            for (acc, p) in out.iter_mut().zip(&self.memo[&(s, e)]) {
                acc.lo = acc.lo.max(p.lo);
                acc.up = acc.up.min(p.up);
                acc.empty |= p.empty;
            }
        }
        out.iter().map(|s| s.interval()).collect()
    }
}

/// Marginalize a WBS test over the non-maximizing intervals.
///
/// Each trial redraws every interval not listed in `model.jmax` from its
/// prior. A redraw is kept when its event meets the line through `y_obs`
/// along some contrast; redraws that miss it carry no mass. Conditioning on
/// `y_obs` keeping the selection would make the redraws depend on the data,
/// so it is not required. Sampling stops after `max_retries * trials`
/// attempts, flagging the result as degraded.
#[allow(clippy::too_many_arguments)]
pub fn marginalize_wbs_intervals<R: Rng + ?Sized>(
    y_obs: &[f64],
    model: &ChangepointModel,
    w_obs: &IntervalSet,
    v: &Contrast,
    trials: usize,
    sigma2: f64,
    max_retries: usize,
    rng: &mut R,
) -> Result<TestResult> {
    let mut out =
        marginalize_wbs_intervals_many(y_obs, model, w_obs, core::slice::from_ref(v), trials, sigma2, max_retries, rng)?;
    out.pop().expect("one contrast")
}

/// [`marginalize_wbs_intervals`] for several contrasts sharing the same
/// interval draws.
#[allow(clippy::too_many_arguments)]
pub fn marginalize_wbs_intervals_many<R: Rng + ?Sized>(
    y_obs: &[f64],
    model: &ChangepointModel,
    w_obs: &IntervalSet,
    vs: &[Contrast],
    trials: usize,
    sigma2: f64,
    max_retries: usize,
    rng: &mut R,
) -> Result<Vec<Result<TestResult>>> {
    if model.algo != Algorithm::Wbs {
        return Err(Error::ModelMismatch("interval marginalization needs a WBS model"));
    }
    let jmax = model.jmax.as_ref().ok_or(Error::ModelMismatch("WBS model without jmax"))?;
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidArgument("sigma2 must be positive"));
    }
    if trials == 0 || max_retries == 0 {
        return Err(Error::InvalidArgument("trials and max_retries must be positive"));
    }
    let n = model.n;
    if y_obs.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y_obs.len() });
    }
    if let Some(v) = vs.iter().find(|v| v.v.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: v.v.len() });
    }
    let sds: Vec<f64> = vs.iter().map(|v| libm::sqrt(sigma2) * libm::sqrt(v.norm2())).collect();
    let vtys: Vec<f64> = vs.iter().map(|v| v.dot(y_obs)).collect();
    let dirs: Vec<&[f64]> = vs.iter().map(|v| v.v.as_slice()).collect();
    let mut kept = alloc::vec![false; w_obs.len()];
    for &j in jmax {
        kept[j - 1] = true;
    }
    let slices_of = |w: &IntervalSet| -> Result<Vec<Option<(f64, f64)>>> {
        let mut sink = MultiSliceSink::new(y_obs, &dirs);
        build_wbs(model, w, &mut sink)?;
        Ok(sink.slices.iter().map(|s| s.interval()).collect())
    };
    let obs = slices_of(w_obs)?;
    let steps = WbsSteps::new(model, w_obs)?;
    let mut cache = IntervalSlices::new(y_obs, &dirs, steps);
    let budget = max_retries.saturating_mul(trials);
    let mut accs = alloc::vec![Accumulator::new(); vs.len()];
    let mut attempts = 0usize;
    let mut accepted = 0usize;
    let mut degraded = false;
    let mut w = w_obs.clone();
    while accepted < trials {
        if attempts >= budget {
            degraded = true;
            break;
        }
        attempts += 1;
        for (iv, &keep) in w.intervals.iter_mut().zip(&kept) {
            if !keep {
                *iv = draw_interval(n, rng);
            }
        }
        let slices = cache.slices(&w);
        if slices.iter().all(Option::is_none) {
            continue;
        }
        accepted += 1;
        for (i, slice) in slices.into_iter().enumerate() {
            accs[i].add(WeightTerms::from_slice(slice, vtys[i], sds[i]));
        }
    }
    Ok((0..vs.len())
        .map(|i| {
            let pvalue = accs[i].pvalue()?;
            let (vlo, vup) = obs[i].unwrap_or((f64::NAN, f64::NAN));
            let mut res = TestResult::closed_form(TestMethod::MarginalIntervals, pvalue, vlo, vup, vtys[i], sds[i]);
            res.trials = accepted;
            res.accept_rate = Some(accepted as f64 / attempts.max(1) as f64);
            res.degenerate = accs[i].degenerate;
            res.degraded = degraded;
            Ok(res)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ContrastKind, Sign};
    use crate::segmentation::wbs;
    use alloc::vec;

    #[test]
    fn weight_term_examples() {
        let v = Contrast { v: vec![-0.5, -0.5, 0.5, 0.5], kind: ContrastKind::Segment, target: 1, location: 2, direction: Sign::Plus };
        let y = [0.0, 0.0, 1.0, 1.0];
        let w = weight_terms(&y, &v, &Polyhedron::new(4), 1.0).unwrap();
        assert!((w.k_term - crate::math::norm_sf(1.0)).abs() < 1e-12);
        assert!((w.g_term - 1.0).abs() < 1e-12);
        // v^T y sits on the lower limit
        let p = Polyhedron::from_dense(&[v.v.clone()], &[1.0], 4).unwrap();
        let w = weight_terms(&y, &v, &p, 1.0).unwrap();
        assert!((w.k_term - w.g_term).abs() < 1e-15);
        // infeasible slice
        let p = Polyhedron::from_dense(&[vec![1.0, -1.0, 0.0, 0.0]], &[5.0], 4).unwrap();
        assert_eq!(weight_terms(&y, &v, &p, 1.0).unwrap(), WeightTerms::ZERO);
    }

    #[test]
    fn memoized_slices_match_the_full_event() {
        use crate::contrast::segment_contrast;
        use crate::rng::rng_for;
        use crate::segmentation::draw_intervals;
        let mut rng = rng_for(5, 77, 0);
        let n = 30;
        let y: Vec<f64> = (0..n).map(|i| if (10..18).contains(&i) { 2.0 } else { 0.0 } + Normal::new(0.0, 1.0).unwrap().sample(&mut rng)).collect();
        let w_obs = draw_intervals(n, 25, &mut rng).unwrap();
        let model = wbs(&y, 2, &w_obs, &[]).unwrap();
        let vs: Vec<Contrast> = (1..=2).map(|j| segment_contrast(&model, j).unwrap()).collect();
        let dirs: Vec<&[f64]> = vs.iter().map(|v| v.v.as_slice()).collect();
        let mut cache = IntervalSlices::new(&y, &dirs, WbsSteps::new(&model, &w_obs).unwrap());
        let jmax = model.jmax.clone().unwrap();
        let mut w = w_obs.clone();
        for round in 0..40 {
            for (i, iv) in w.intervals.iter_mut().enumerate() {
                if !jmax.contains(&(i + 1)) && (round > 0 || i % 3 == 0) {
                    *iv = draw_interval(n, &mut rng);
                }
            }
            let mut sink = MultiSliceSink::new(&y, &dirs);
            build_wbs(&model, &w, &mut sink).unwrap();
            let full: Vec<Option<(f64, f64)>> = sink.slices.iter().map(|s| s.interval()).collect();
            assert_eq!(cache.slices(&w), full);
        }
    }
}
