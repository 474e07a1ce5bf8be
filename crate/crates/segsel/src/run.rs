//! `detect`, `infer` and `gamma` on a loaded series.

use std::time::Instant;

use segsel_core::pipeline::{self, Inference, PipelineConfig, Randomization};
use segsel_core::{Polyhedron, Series};

use crate::config::{RunConfig, SigmaInfo};
use crate::error::{is_numerical, CliError, Result};
use crate::report::RunReport;

fn selection_config(pc: &PipelineConfig) -> PipelineConfig {
    let mut pc = pc.clone();
    // detection only: keep additive noise (it changes the model) but no tests
    if !matches!(pc.inference, Inference::Saturated { randomization: Randomization::AdditiveNoise { .. } }) {
        pc.inference = Inference::Saturated { randomization: Randomization::None };
    }
    pc
}

/// Detection only.
pub fn detect(cfg: &RunConfig, series: &Series, input: &str, timing: bool) -> Result<RunReport> {
    let t0 = Instant::now();
    let pc = cfg.pipeline(series)?;
    let sigma = if cfg.stop == crate::config::StopMode::Ic {
        cfg.sigma2(series)?
    } else {
        SigmaInfo { sigma2: None, source: "unused".into() }
    };
    let sel = pipeline::select(series.values(), sigma.sigma2, &selection_config(&pc))?;
    let mut r = RunReport::from_selection("detect", input, cfg, series, sigma, &sel);
    if timing {
        r.timing_ms = Some(t0.elapsed().as_secs_f64() * 1e3);
    }
    Ok(r)
}

/// Full inference. Returns the report and whether any test hit a
/// numerical degeneracy.
pub fn infer(cfg: &RunConfig, series: &Series, input: &str, timing: bool) -> Result<(RunReport, bool)> {
    let t0 = Instant::now();
    let pc = cfg.pipeline(series)?;
    let sigma = cfg.sigma2(series)?;
    let out = pipeline::run(series.values(), sigma.sigma2, &pc)?;
    let degenerate = out.results.iter().any(|r| matches!(r, Err(e) if is_numerical(e)));
    if let Some(Err(e)) = out.results.iter().find(|r| matches!(r, Err(e) if !is_numerical(e))) {
        return Err(CliError::from(e.clone()));
    }
    let mut r = RunReport::from_output("infer", input, cfg, series, sigma, &out);
    if timing {
        r.timing_ms = Some(t0.elapsed().as_secs_f64() * 1e3);
    }
    Ok((r, degenerate))
}

/// The selection event of the detected model, as a set of the observed
/// series.
pub fn gamma(cfg: &RunConfig, series: &Series) -> Result<Polyhedron> {
    let pc = cfg.pipeline(series)?;
    let sigma = if cfg.stop == crate::config::StopMode::Ic { cfg.sigma2(series)?.sigma2 } else { None };
    Ok(pipeline::select(series.values(), sigma, &selection_config(&pc))?.event_y)
}
