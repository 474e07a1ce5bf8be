//! Method names for simulation studies, e.g. `bs-sat`, `wbs-sat-marg`,
//! `fl-sel-unknown`, `bs-ic`, `bs-split`, `bs-boot-modified`.

use serde::{Deserialize, Serialize};

use segsel_core::pipeline::{Inference, PipelineConfig, Randomization, Stopping};
use segsel_core::sim::Method;
use segsel_core::{Algorithm, ContrastKind};

use crate::error::{CliError, Result};

/// Tuning shared by all methods of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOptions {
    pub steps: usize,
    /// WBS intervals; `None` means `n`
    pub intervals: Option<usize>,
    pub sigma_add: f64,
    pub mc_trials: usize,
    pub max_retries: usize,
    pub samples: usize,
    pub directions: usize,
    pub q: usize,
    pub kmax: usize,
    pub declutter: Option<usize>,
    pub boot_draws: usize,
    pub cv_kmax: usize,
    pub min_segment: usize,
    pub contrast: ContrastKind,
}

impl Default for MethodOptions {
    fn default() -> Self {
        MethodOptions {
            steps: 2,
            intervals: None,
            sigma_add: 0.2,
            mc_trials: 200,
            max_retries: 2000,
            samples: 4000,
            directions: 100,
            q: 2,
            kmax: 10,
            declutter: None,
            boot_draws: 2000,
            cv_kmax: 10,
            min_segment: 0,
            contrast: ContrastKind::Segment,
        }
    }
}

fn algorithm(name: &str) -> Option<Algorithm> {
    match name {
        "bs" => Some(Algorithm::Bs),
        "wbs" => Some(Algorithm::Wbs),
        "cbs" => Some(Algorithm::Cbs),
        "fl" => Some(Algorithm::Fl),
        _ => None,
    }
}

/// Parse a method name for series of length `n`. Returns the method and
/// whether it needs the true noise variance.
pub fn parse_method(name: &str, n: usize, opt: &MethodOptions) -> Result<(Method, bool)> {
    let bad = || CliError::Config(format!("unknown method `{name}`"));
    let parts: Vec<&str> = name.split('-').collect();
    let algo = parts.first().and_then(|a| algorithm(a)).ok_or_else(bad)?;
    let mut cfg = PipelineConfig::saturated(algo, opt.steps, 0);
    cfg.intervals = opt.intervals.unwrap_or(n);
    cfg.contrast = opt.contrast;
    cfg.declutter = opt.declutter;
    let noise = Randomization::AdditiveNoise { sigma_add: opt.sigma_add, trials: opt.mc_trials };
    let intervals = Randomization::Intervals { trials: opt.mc_trials, max_retries: opt.max_retries };
    let mut known = true;
    match &parts[1..] {
        ["sat"] => {}
        ["sat", "marg"] => {
            let r = if algo == Algorithm::Wbs { intervals } else { noise };
            cfg.inference = Inference::Saturated { randomization: r };
        }
        ["sat", "noise"] => cfg.inference = Inference::Saturated { randomization: noise },
        ["sat", "intervals"] => cfg.inference = Inference::Saturated { randomization: intervals },
        ["sel", mode @ ("known" | "unknown")] => {
            known = *mode == "known";
            cfg.inference = Inference::Selected { known_sigma: known, samples: opt.samples, directions: opt.directions };
        }
        ["ic"] => cfg.stopping = Stopping::Ic { q: opt.q, kmax: opt.kmax },
        ["split"] if algo == Algorithm::Bs => return Ok((Method::SampleSplit { steps: opt.steps }, false)),
        ["boot", kind @ ("plain" | "modified")] => {
            known = false;
            cfg.inference = Inference::Bootstrap {
                modified: *kind == "modified",
                draws: opt.boot_draws,
                cv_kmax: opt.cv_kmax,
                min_segment: opt.min_segment,
            };
        }
        _ => return Err(bad()),
    }
    cfg.validate().map_err(|e| CliError::Config(format!("method `{name}`: {e}")))?;
    Ok((Method::Pipeline(cfg), known))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_names() {
        let o = MethodOptions::default();
        let (m, known) = parse_method("wbs-sat-marg", 200, &o).unwrap();
        match m {
            Method::Pipeline(c) => {
                assert_eq!(c.intervals, 200);
                assert!(matches!(c.inference, Inference::Saturated { randomization: Randomization::Intervals { .. } }));
            }
            _ => panic!(),
        }
        assert!(known);
        assert!(!parse_method("fl-sel-unknown", 200, &o).unwrap().1);
        assert!(matches!(parse_method("bs-split", 200, &o).unwrap().0, Method::SampleSplit { steps: 2 }));
        assert!(parse_method("wbs-ic", 200, &o).is_err());
        assert!(parse_method("bs-sat-foo", 200, &o).is_err());
        assert!(parse_method("xx-sat", 200, &o).is_err());
    }
}
