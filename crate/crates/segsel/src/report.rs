//! JSON run reports. Infinite limits are written as the strings `"inf"` and
//! `"-inf"`, and NaN as `null`, so every report is valid JSON.

use serde::{Deserialize, Serialize, Serializer};

use segsel_core::pipeline::{PipelineOutput, Selection};
use segsel_core::polyhedra::IcState;
use segsel_core::{Algorithm, ChangepointModel, Series, Sign, TestMethod, TestResult};

use crate::config::{RunConfig, SigmaInfo, StopMode};

pub const SCHEMA_VERSION: u32 = 1;

/// Serialize an extended real.
pub fn ext_real<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_nan() {
        s.serialize_none()
    } else if *x == f64::INFINITY {
        s.serialize_str("inf")
    } else if *x == f64::NEG_INFINITY {
        s.serialize_str("-inf")
    } else {
        s.serialize_f64(*x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub algorithm: Algorithm,
    pub steps: usize,
    pub stopping: StopMode,
    /// split locations in estimation order
    pub b: Vec<usize>,
    pub d: Vec<Sign>,
    /// CBS partner locations
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<usize>>,
    /// WBS maximizing intervals (1-based)
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jmax: Option<Vec<usize>>,
    pub initial_cuts: Vec<usize>,
    /// rows in the selection event
    pub rows: usize,
}

impl ModelReport {
    fn new(m: &ChangepointModel, stopping: StopMode, rows: usize) -> Self {
        ModelReport {
            algorithm: m.algo,
            steps: m.k(),
            stopping,
            b: m.locations.clone(),
            d: m.directions.clone(),
            a: m.partners.clone(),
            jmax: m.jmax.clone(),
            initial_cuts: m.initial_cuts.clone(),
            rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IcReport {
    pub criterion: Vec<f64>,
    pub signs: Vec<Sign>,
    pub q: usize,
    pub khat: usize,
    pub penalty: f64,
    /// steps of the tested model (`khat - 1`)
    pub inference_steps: usize,
}

impl From<&IcState> for IcReport {
    fn from(s: &IcState) -> Self {
        IcReport {
            criterion: s.criterion.clone(),
            signs: s.signs.clone(),
            q: s.q,
            khat: s.khat,
            penalty: s.penalty,
            inference_steps: s.inference_steps(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultReport {
    pub pvalue: f64,
    pub method: TestMethod,
    #[serde(serialize_with = "ext_real")]
    pub vlo: f64,
    #[serde(serialize_with = "ext_real")]
    pub vup: f64,
    #[serde(serialize_with = "ext_real")]
    pub vty: f64,
    #[serde(serialize_with = "ext_real")]
    pub sd: f64,
    pub trials: usize,
    pub accept_rate: Option<f64>,
    pub degenerate: usize,
    pub degraded: bool,
    pub seed: Option<u64>,
}

impl From<&TestResult> for ResultReport {
    fn from(r: &TestResult) -> Self {
        ResultReport {
            pvalue: r.pvalue,
            method: r.method,
            vlo: r.vlo,
            vup: r.vup,
            vty: r.vty,
            sd: r.sd,
            trials: r.trials,
            accept_rate: r.accept_rate,
            degenerate: r.degenerate,
            degraded: r.degraded,
            seed: r.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub location: usize,
    pub direction: Sign,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chrom: Option<String>,
    /// position of the last point before the change
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pos: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<ResultReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Bonferroni-adjusted p-value when `--bonferroni` is set
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adjusted: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reject: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    pub input: String,
    pub config: RunConfig,
    pub n: usize,
    pub sigma: SigmaInfo,
    pub model: ModelReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ic: Option<IcReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub tests: Vec<TestReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<f64>,
}

impl RunReport {
    pub fn from_selection(command: &str, input: &str, cfg: &RunConfig, series: &Series, sigma: SigmaInfo, sel: &Selection) -> Self {
        RunReport {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            input: input.into(),
            config: cfg.clone(),
            n: series.len(),
            sigma,
            model: ModelReport::new(&sel.inference_model, cfg.stop, sel.event.m()),
            ic: sel.ic.as_ref().map(IcReport::from),
            tests: Vec::new(),
            timing_ms: None,
        }
    }

    pub fn from_output(command: &str, input: &str, cfg: &RunConfig, series: &Series, sigma: SigmaInfo, out: &PipelineOutput) -> Self {
        let label = |loc: usize| {
            let chrom = series.chrom().map(|c| c[loc - 1].clone());
            let pos = series.pos().map(|p| p[loc - 1]);
            (chrom, pos)
        };
        let tests = out
            .tested
            .iter()
            .zip(&out.results)
            .zip(&out.adjusted)
            .map(|((cp, res), adj)| {
                let (chrom, pos) = label(cp.location);
                let (result, error) = match res {
                    Ok(r) => (Some(ResultReport::from(r)), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                let p = if cfg.bonferroni { *adj } else { res.as_ref().ok().map(|r| r.pvalue) };
                TestReport {
                    location: cp.location,
                    direction: cp.direction,
                    chrom,
                    pos,
                    result,
                    error,
                    adjusted: if cfg.bonferroni { *adj } else { None },
                    reject: p.map(|p| p <= cfg.alpha),
                }
            })
            .collect();
        RunReport {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            input: input.into(),
            config: cfg.clone(),
            n: series.len(),
            sigma,
            model: ModelReport::new(&out.inference_model, cfg.stop, out.event_rows),
            ic: out.ic.as_ref().map(IcReport::from),
            tests,
            timing_ms: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
