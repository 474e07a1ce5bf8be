//! End-to-end inference: detect, build the selection event, form one
//! contrast per changepoint, test, and adjust for multiplicity.
//!
//! All randomness derives from `PipelineConfig::seed` through
//! [`crate::rng::derive_seed`]: stream `INTERVALS` draws the WBS intervals,
//! `ADDITIVE_NOISE` the detection noise, and `TEST` (indexed by the tested
//! changepoint, from 1) each Monte-Carlo test. Marginalized tests share one
//! set of auxiliary draws from `TEST` index 0.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::contrast::{bonferroni, declutter_changepoints, segment_contrast_at, spike_contrast_at};
use crate::error::{Error, Result};
use crate::marginal::{marginalize_additive_many, marginalize_wbs_intervals_many};
use crate::math::two_sided;
use crate::model::{Algorithm, Changepoint, ChangepointModel, Contrast, ContrastKind, TestMethod, TestResult};
use crate::polyhedra::{self, gamma_bs_ic, ic_stop, IcState, Polyhedron};
use crate::rng::{rng_for, stream};
use crate::saturated::{bootstrap_tg_pvalue, fit_theta_hat_cv, saturated_test_with};
use crate::segmentation::{bs, detect, draw_intervals, IntervalSet};
use crate::selected::{hit_and_run_known_sigma, hit_and_run_unknown_sigma, sufficient_constraints_at};

/// How many steps to run.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum Stopping {
    Fixed { steps: usize },
    /// BS only: stop at the first `q + 1` consecutive rises of the criterion.
    Ic { q: usize, kmax: usize },
}

/// Auxiliary randomness to marginalize over (saturated tests only).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum Randomization {
    None,
    AdditiveNoise { sigma_add: f64, trials: usize },
    Intervals { trials: usize, max_retries: usize },
}

/// Which test to run on each changepoint.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum Inference {
    Saturated { randomization: Randomization },
    Selected { known_sigma: bool, samples: usize, directions: usize },
    Bootstrap { modified: bool, draws: usize, cv_kmax: usize, min_segment: usize },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PipelineConfig {
    pub algo: Algorithm,
    pub stopping: Stopping,
    pub initial_cuts: Vec<usize>,
    /// number of WBS intervals
    pub intervals: usize,
    pub contrast: ContrastKind,
    pub declutter: Option<usize>,
    pub inference: Inference,
    pub two_sided: bool,
    pub seed: u64,
}

impl PipelineConfig {
    /// Plain saturated test with `steps` fixed steps.
    pub fn saturated(algo: Algorithm, steps: usize, seed: u64) -> Self {
        PipelineConfig {
            algo,
            stopping: Stopping::Fixed { steps },
            initial_cuts: Vec::new(),
            intervals: 0,
            contrast: ContrastKind::Segment,
            declutter: None,
            inference: Inference::Saturated { randomization: Randomization::None },
            two_sided: false,
            seed,
        }
    }

    /// Reject combinations that have no defined meaning.
    pub fn validate(&self) -> Result<()> {
        if let Stopping::Ic { .. } = self.stopping {
            if self.algo != Algorithm::Bs {
                return Err(Error::InvalidArgument("IC stopping is only defined for BS"));
            }
        }
        if self.algo == Algorithm::Fl && !self.initial_cuts.is_empty() {
            return Err(Error::InvalidArgument("the fused lasso path does not take initial cuts"));
        }
        if self.algo == Algorithm::Wbs && self.intervals == 0 {
            return Err(Error::InvalidArgument("WBS needs at least one interval"));
        }
        if let Inference::Saturated { randomization: Randomization::Intervals { .. } } = self.inference {
            if self.algo != Algorithm::Wbs {
                return Err(Error::InvalidArgument("interval marginalization needs WBS"));
            }
            if let Stopping::Ic { .. } = self.stopping {
                return Err(Error::InvalidArgument("interval marginalization needs fixed stopping"));
            }
        }
        if let Stopping::Fixed { steps: 0 } = self.stopping {
            return Err(Error::InvalidArgument("number of steps must be at least 1"));
        }
        Ok(())
    }

    fn needs_sigma(&self) -> bool {
        match self.inference {
            Inference::Saturated { .. } => true,
            Inference::Selected { known_sigma, .. } => known_sigma || matches!(self.stopping, Stopping::Ic { .. }),
            Inference::Bootstrap { .. } => matches!(self.stopping, Stopping::Ic { .. }),
        }
    }
}

/// Everything produced by one run.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// model whose selection event is conditioned on
    pub model: ChangepointModel,
    /// model whose changepoints are tested
    pub inference_model: ChangepointModel,
    pub intervals: Option<IntervalSet>,
    pub noise: Option<Vec<f64>>,
    pub ic: Option<IcState>,
    pub tested: Vec<Changepoint>,
    pub contrasts: Vec<Contrast>,
    pub results: Vec<Result<TestResult>>,
    /// Bonferroni-adjusted p-values (by the number of tested changepoints)
    pub adjusted: Vec<Option<f64>>,
    /// rows in the selection event
    pub event_rows: usize,
}

/// The detection half of the pipeline.
#[derive(Debug, Clone)]
pub struct Selection {
    /// model whose selection event is conditioned on
    pub model: ChangepointModel,
    /// model whose changepoints are tested
    pub inference_model: ChangepointModel,
    pub intervals: Option<IntervalSet>,
    /// additive detection noise, when marginalizing over it
    pub noise: Option<Vec<f64>>,
    pub ic: Option<IcState>,
    /// selection event as a set of the detection input `y + w`
    pub event: Polyhedron,
    /// selection event as a set of `y`
    pub event_y: Polyhedron,
}

fn check_sigma2(sigma2: Option<f64>) -> Result<Option<f64>> {
    match sigma2 {
        Some(s) if !(s > 0.0) || !s.is_finite() => Err(Error::InvalidArgument("sigma2 must be positive")),
        s => Ok(s),
    }
}

/// Detect changepoints and build the selection event. `sigma2` is only
/// needed for IC stopping.
pub fn select(y: &[f64], sigma2: Option<f64>, cfg: &PipelineConfig) -> Result<Selection> {
    cfg.validate()?;
    let n = y.len();
    if n < 2 {
        return Err(Error::SeriesTooShort(n));
    }
    let sigma2 = check_sigma2(sigma2)?;
    let intervals = if cfg.algo == Algorithm::Wbs {
        Some(draw_intervals(n, cfg.intervals, &mut rng_for(cfg.seed, stream::INTERVALS, 0))?)
    } else {
        None
    };
    let noise = match cfg.inference {
        Inference::Saturated { randomization: Randomization::AdditiveNoise { sigma_add, .. } } => {
            if !(sigma_add > 0.0) || !sigma_add.is_finite() {
                return Err(Error::InvalidArgument("sigma_add must be positive"));
            }
            let normal = Normal::new(0.0, sigma_add).map_err(|_| Error::InvalidArgument("invalid sigma_add"))?;
            let mut rng = rng_for(cfg.seed, stream::ADDITIVE_NOISE, 0);
            Some((0..n).map(|_| normal.sample(&mut rng)).collect::<Vec<f64>>())
        }
        _ => None,
    };
    let y_det: Vec<f64> = match &noise {
        Some(w) => y.iter().zip(w).map(|(a, b)| a + b).collect(),
        None => y.to_vec(),
    };

    let (model, inference_model, event, ic) = match cfg.stopping {
        Stopping::Fixed { steps } => {
            let m = detect(cfg.algo, &y_det, steps, &cfg.initial_cuts, intervals.as_ref())?;
            let p = polyhedra::gamma(&m, intervals.as_ref())?;
            (m.clone(), m, p, None)
        }
        Stopping::Ic { q, kmax } => {
            let s2 = sigma2.ok_or(Error::InvalidArgument("IC stopping needs sigma2"))?;
            let cuts = crate::segmentation::normalize_cuts(&cfg.initial_cuts, n)?;
            let kmax = kmax.min(n - 1 - cuts.len());
            if kmax == 0 {
                return Err(Error::NoAdmissibleSplit { step: 1 });
            }
            let path = bs(&y_det, kmax, &cuts)?;
            let state = ic_stop(&y_det, &path, s2, q)?;
            let p = gamma_bs_ic(&path, &state, s2)?;
            let conditioned = path.prefix(state.conditioned_steps());
            let inference = path.prefix(state.inference_steps());
            (conditioned, inference, p, Some(state))
        }
    };
    let event_y = match &noise {
        Some(w) => event.shifted(w)?,
        None => event.clone(),
    };
    Ok(Selection { model, inference_model, intervals, noise, ic, event, event_y })
}

/// Run the full pipeline on `y`. `sigma2` is the noise variance, needed by
/// everything except unknown-variance selected tests and the bootstrap.
pub fn run(y: &[f64], sigma2: Option<f64>, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let sigma2 = check_sigma2(sigma2)?;
    if cfg.needs_sigma() && sigma2.is_none() {
        return Err(Error::InvalidArgument("this inference needs sigma2"));
    }
    let n = y.len();
    let Selection { model, inference_model, intervals, noise, ic, event, event_y } = select(y, sigma2, cfg)?;

    let mut tested = inference_model.sorted_changepoints();
    if let Some(dist) = cfg.declutter {
        tested = declutter_changepoints(&tested, dist);
    }
    let mut boundaries: Vec<usize> = tested.iter().map(|c| c.location).collect();
    boundaries.extend_from_slice(&inference_model.initial_cuts);
    boundaries.sort_unstable();
    boundaries.dedup();

    let mut contrasts = Vec::with_capacity(tested.len());
    let mut results = Vec::with_capacity(tested.len());
    let pool = match cfg.inference {
        Inference::Bootstrap { modified: false, .. } => {
            let mean = y.iter().sum::<f64>() / n as f64;
            Some(y.iter().map(|v| v - mean).collect::<Vec<f64>>())
        }
        Inference::Bootstrap { modified: true, cv_kmax, min_segment, .. } => {
            Some(fit_theta_hat_cv(y, cv_kmax, min_segment)?.residuals(y))
        }
        _ => None,
    };
    for (idx, cp) in tested.iter().enumerate() {
        let j = idx + 1;
        contrasts.push(match cfg.contrast {
            ContrastKind::Segment => segment_contrast_at(n, &boundaries, *cp, j)?,
            ContrastKind::Spike => spike_contrast_at(n, *cp, j)?,
        });
    }
    let finish = |res: Result<TestResult>, seed: u64| {
        res.map(|mut r| {
            r.seed = Some(seed);
            if cfg.two_sided {
                r.pvalue = two_sided(r.pvalue);
            }
            r
        })
    };
    match cfg.inference {
        // marginalized tests share their auxiliary draws (stream TEST, index 0)
        Inference::Saturated { randomization } if randomization != Randomization::None && !contrasts.is_empty() => {
            let s2 = sigma2.ok_or(Error::InvalidArgument("saturated tests need sigma2"))?;
            let seed = crate::rng::derive_seed(cfg.seed, stream::TEST, 0);
            let mut rng = rng_for(cfg.seed, stream::TEST, 0);
            let batch = match randomization {
                Randomization::AdditiveNoise { sigma_add, trials } => {
                    let w = noise.as_deref().ok_or(Error::InvalidArgument("missing detection noise"))?;
                    marginalize_additive_many(y, &event, w, &contrasts, sigma_add, trials, s2, &mut rng)?
                }
                Randomization::Intervals { trials, max_retries } => {
                    let w = intervals.as_ref().ok_or(Error::InvalidArgument("missing intervals"))?;
                    marginalize_wbs_intervals_many(y, &model, w, &contrasts, trials, s2, max_retries, &mut rng)?
                }
                Randomization::None => unreachable!(),
            };
            results.extend(batch.into_iter().map(|r| finish(r, seed)));
        }
        _ => {
            for (idx, v) in contrasts.iter().enumerate() {
                let j = idx as u64 + 1;
                let seed = crate::rng::derive_seed(cfg.seed, stream::TEST, j);
                let mut rng = rng_for(cfg.seed, stream::TEST, j);
                let res = test_one(y, sigma2, cfg, &event_y, &boundaries, v, pool.as_deref(), &mut rng);
                results.push(finish(res, seed));
            }
        }
    }
    let k = tested.len().max(1);
    let adjusted = results
        .iter()
        .map(|r| r.as_ref().ok().and_then(|t| bonferroni(&[t.pvalue], k).ok().map(|v| v[0])))
        .collect();
    Ok(PipelineOutput { model, inference_model, intervals, noise, ic, tested, contrasts, results, adjusted, event_rows: event.m() })
}

fn test_one<R: Rng + ?Sized>(
    y: &[f64],
    sigma2: Option<f64>,
    cfg: &PipelineConfig,
    event_y: &Polyhedron,
    boundaries: &[usize],
    v: &Contrast,
    pool: Option<&[f64]>,
    rng: &mut R,
) -> Result<TestResult> {
    match cfg.inference {
        Inference::Saturated { .. } => {
            let s2 = sigma2.ok_or(Error::InvalidArgument("saturated tests need sigma2"))?;
            saturated_test_with(event_y, y, v, s2)
        }
        Inference::Selected { known_sigma, samples, directions } => {
            let sphere = if known_sigma { None } else { Some(crate::linalg::norm(y)) };
            let sc = sufficient_constraints_at(y.len(), boundaries, v.location, sphere)?;
            if known_sigma {
                let s2 = sigma2.ok_or(Error::InvalidArgument("known-sigma selected tests need sigma2"))?;
                hit_and_run_known_sigma(y, event_y, &sc, v, s2, samples, directions, rng)
            } else {
                hit_and_run_unknown_sigma(y, event_y, &sc, v, samples, rng)
            }
        }
        Inference::Bootstrap { modified, draws, .. } => {
            let method = if modified { TestMethod::BootstrapModified } else { TestMethod::BootstrapPlain };
            let pool = pool.ok_or(Error::InvalidArgument("missing residual pool"))?;
            bootstrap_tg_pvalue(y, v, event_y, pool, draws, method, rng)
        }
    }
}

/// In-sample noise variance: fit `steps` steps of `algo` and return
/// `RSS / (n - #segments)`. `intervals` is required for WBS.
pub fn estimate_sigma2(
    y: &[f64],
    steps: usize,
    algo: Algorithm,
    cuts: &[usize],
    intervals: Option<&IntervalSet>,
) -> Result<f64> {
    let n = y.len();
    let cuts = crate::segmentation::normalize_cuts(cuts, n.max(1))?;
    let mut boundaries = if steps == 0 {
        cuts.clone()
    } else {
        let avail = n.saturating_sub(1 + cuts.len());
        detect(algo, y, steps.min(avail), &cuts, intervals)?.boundaries()
    };
    boundaries.sort_unstable();
    boundaries.dedup();
    crate::contrast::residual_variance(y, &boundaries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn sigma_estimates() {
        assert_eq!(estimate_sigma2(&[0.0, 0.0, 2.0, 2.0], 1, Algorithm::Bs, &[], None).unwrap(), 0.0);
        let s = estimate_sigma2(&[0.0, 2.0, 0.0, 2.0], 0, Algorithm::Bs, &[], None).unwrap();
        assert!((s - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_combinations() {
        let mut cfg = PipelineConfig::saturated(Algorithm::Wbs, 1, 0);
        cfg.stopping = Stopping::Ic { q: 2, kmax: 5 };
        cfg.intervals = 10;
        assert!(run(&[0.0; 10], Some(1.0), &cfg).is_err());
        let cfg = PipelineConfig::saturated(Algorithm::Bs, 1, 0);
        assert!(run(&[0.0; 10], None, &cfg).is_err());
    }

    #[test]
    fn saturated_run_is_deterministic() {
        let y = vec![0.1, -0.2, 0.3, 0.0, 3.1, 2.9, 3.2, 2.8, 0.1, -0.1];
        let cfg = PipelineConfig::saturated(Algorithm::Bs, 2, 9);
        let a = run(&y, Some(1.0), &cfg).unwrap();
        let b = run(&y, Some(1.0), &cfg).unwrap();
        assert_eq!(a.tested, b.tested);
        assert_eq!(a.adjusted, b.adjusted);
        assert_eq!(a.tested.len(), 2);
        assert!(a.adjusted.iter().all(|p| p.is_some()));
    }
}
