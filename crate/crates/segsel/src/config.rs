//! Settings shared by `detect`, `infer` and `gamma`, and their translation
//! into a pipeline configuration.

use serde::{Deserialize, Serialize};

use segsel_core::pipeline::{estimate_sigma2, Inference, PipelineConfig, Randomization, Stopping};
use segsel_core::rng::{rng_for, stream};
use segsel_core::segmentation::draw_intervals;
use segsel_core::{Algorithm, ContrastKind, Series};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopMode {
    Fixed,
    Ic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    Sat,
    Sel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Marginalize {
    None,
    Noise,
    Intervals,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaMode {
    Known,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bootstrap {
    None,
    Plain,
    Modified,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub algo: Algorithm,
    pub steps: usize,
    pub stop: StopMode,
    pub q: usize,
    pub kmax: usize,
    pub precut: bool,
    /// number of WBS intervals
    pub intervals: usize,
    pub seed: u64,
    pub test: TestKind,
    pub marginalize: Marginalize,
    /// noise standard deviation
    pub sigma: Option<f64>,
    /// `resid:k`, used when a variance is needed and `sigma` is absent
    pub sigma_method: String,
    pub sigma_mode: SigmaMode,
    pub contrast: ContrastKind,
    pub declutter_dist: Option<usize>,
    pub bonferroni: bool,
    pub bootstrap: Bootstrap,
    pub sigma_add: f64,
    pub mc_trials: usize,
    pub max_retries: usize,
    pub samples: usize,
    pub directions: usize,
    pub boot_draws: usize,
    pub cv_kmax: usize,
    pub min_segment: usize,
    pub two_sided: bool,
    pub alpha: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            algo: Algorithm::Bs,
            steps: 2,
            stop: StopMode::Fixed,
            q: 2,
            kmax: 20,
            precut: false,
            intervals: 1000,
            seed: 1,
            test: TestKind::Sat,
            marginalize: Marginalize::None,
            sigma: None,
            sigma_method: "resid:10".into(),
            sigma_mode: SigmaMode::Unknown,
            contrast: ContrastKind::Segment,
            declutter_dist: None,
            bonferroni: false,
            bootstrap: Bootstrap::None,
            sigma_add: 0.2,
            mc_trials: 200,
            max_retries: 2000,
            samples: 4000,
            directions: 100,
            boot_draws: 2000,
            cv_kmax: 10,
            min_segment: 0,
            two_sided: false,
            alpha: 0.05,
        }
    }
}

/// Where the variance came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaInfo {
    pub sigma2: Option<f64>,
    pub source: String,
}

impl RunConfig {
    /// Reject combinations without a defined meaning.
    pub fn validate(&self, series: &Series) -> Result<()> {
        let bad = |m: &str| Err(CliError::Config(m.into()));
        if self.stop == StopMode::Ic && self.algo != Algorithm::Bs {
            return bad("--stop ic is only available for --algo bs");
        }
        if self.test == TestKind::Sel && self.marginalize != Marginalize::None {
            return bad("--test sel cannot be combined with --marginalize");
        }
        if self.marginalize == Marginalize::Intervals && self.algo != Algorithm::Wbs {
            return bad("--marginalize intervals needs --algo wbs");
        }
        if self.marginalize == Marginalize::Intervals && self.stop == StopMode::Ic {
            return bad("--marginalize intervals needs --stop fixed");
        }
        if self.bootstrap != Bootstrap::None && (self.test == TestKind::Sel || self.marginalize != Marginalize::None) {
            return bad("--bootstrap applies to plain saturated tests only");
        }
        if self.algo == Algorithm::Fl && self.precut && !series.chrom_boundaries().is_empty() {
            return bad("--algo fl does not support --precut");
        }
        if self.stop == StopMode::Fixed && self.steps == 0 {
            return bad("--steps must be at least 1");
        }
        if self.algo == Algorithm::Wbs && self.intervals == 0 {
            return bad("--B must be at least 1");
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0) || !s.is_finite() {
                return bad("--sigma must be positive");
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("--alpha must lie in (0, 1)");
        }
        self.resid_steps()?;
        Ok(())
    }

    fn resid_steps(&self) -> Result<usize> {
        let m = self.sigma_method.trim();
        let rest = m
            .strip_prefix("resid")
            .ok_or_else(|| CliError::Config(format!("unknown --sigma-method `{m}`")))?;
        if rest.is_empty() {
            return Ok(10);
        }
        rest.strip_prefix(':')
            .and_then(|k| k.parse().ok())
            .ok_or_else(|| CliError::Config(format!("cannot parse --sigma-method `{m}`, expected resid:k")))
    }

    pub fn cuts(&self, series: &Series) -> Vec<usize> {
        if self.precut {
            series.chrom_boundaries()
        } else {
            Vec::new()
        }
    }

    fn needs_sigma(&self) -> bool {
        self.stop == StopMode::Ic
            || match self.test {
                TestKind::Sat => self.bootstrap == Bootstrap::None,
                TestKind::Sel => self.sigma_mode == SigmaMode::Known,
            }
    }

    /// The variance used by the run. Unknown-variance selected tests ignore
    /// `--sigma` unless IC stopping needs it. Without `--sigma` the variance
    /// is estimated in sample from a pre-cut WBS fit.
    pub fn sigma2(&self, series: &Series) -> Result<SigmaInfo> {
        if !self.needs_sigma() {
            return Ok(SigmaInfo { sigma2: None, source: "unused".into() });
        }
        if let Some(s) = self.sigma {
            return Ok(SigmaInfo { sigma2: Some(s * s), source: "--sigma".into() });
        }
        let k = self.resid_steps()?;
        let y = series.values();
        let w = draw_intervals(y.len(), self.intervals.max(1), &mut rng_for(self.seed, stream::INTERVALS, 1))?;
        let s2 = estimate_sigma2(y, k, Algorithm::Wbs, &series.chrom_boundaries(), Some(&w))?;
        if !(s2 > 0.0) {
            return Err(CliError::Numerical("estimated noise variance is zero; pass --sigma".into()));
        }
        Ok(SigmaInfo { sigma2: Some(s2), source: format!("resid:{k}") })
    }

    pub fn pipeline(&self, series: &Series) -> Result<PipelineConfig> {
        self.validate(series)?;
        let stopping = match self.stop {
            StopMode::Fixed => Stopping::Fixed { steps: self.steps },
            StopMode::Ic => Stopping::Ic { q: self.q, kmax: self.kmax },
        };
        let inference = match (self.test, self.bootstrap) {
            (TestKind::Sel, _) => Inference::Selected {
                known_sigma: self.sigma_mode == SigmaMode::Known,
                samples: self.samples,
                directions: self.directions,
            },
            (TestKind::Sat, Bootstrap::None) => Inference::Saturated {
                randomization: match self.marginalize {
                    Marginalize::None => Randomization::None,
                    Marginalize::Noise => Randomization::AdditiveNoise { sigma_add: self.sigma_add, trials: self.mc_trials },
                    Marginalize::Intervals => {
                        Randomization::Intervals { trials: self.mc_trials, max_retries: self.max_retries }
                    }
                },
            },
            (TestKind::Sat, b) => Inference::Bootstrap {
                modified: b == Bootstrap::Modified,
                draws: self.boot_draws,
                cv_kmax: self.cv_kmax,
                min_segment: self.min_segment,
            },
        };
        let cfg = PipelineConfig {
            algo: self.algo,
            stopping,
            initial_cuts: self.cuts(series),
            intervals: self.intervals,
            contrast: self.contrast,
            declutter: self.declutter_dist,
            inference,
            two_sided: self.two_sided,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
