//! Parallel simulation studies: trials run on a rayon pool, results are
//! kept in trial order, and cells can be extended until their standard
//! errors are small enough.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use segsel_core::sim::{self, KsResult, Metrics, SimConfig, SimRecord};

use crate::error::{CliError, Result};
use crate::io::csv_err;

pub const SCHEMA_VERSION: u32 = 1;

/// A worker pool of `jobs` threads (0 means one per core).
pub fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))
}

/// Run trials `range` of `cfg`, in trial order.
pub fn run_trials(cfg: &SimConfig, range: std::ops::Range<usize>, pool: &rayon::ThreadPool) -> Vec<SimRecord> {
    pool.install(|| range.into_par_iter().map(|t| sim::run_trial(cfg, t)).collect())
}

/// Keep adding trials while any watched standard error exceeds the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Adaptive {
    pub target_se: f64,
    pub max_trials: usize,
}

/// Which ratios an adaptive cell must pin down.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Watch {
    pub detection: bool,
    pub conditional: bool,
    pub unconditional: bool,
}

impl Watch {
    pub const ALL: Watch = Watch { detection: true, conditional: true, unconditional: true };
    pub const NONE: Watch = Watch { detection: false, conditional: false, unconditional: false };

    fn worst(&self, m: &Metrics) -> f64 {
        let se = |r: &sim::Ratio| match (r.value, r.stderr) {
            (Some(_), Some(s)) => s,
            (Some(_), None) => f64::INFINITY,
            // an undefined ratio cannot be pinned down by more trials of this size
            (None, _) => 0.0,
        };
        let mut w: f64 = 0.0;
        if self.detection {
            w = w.max(se(&m.detection));
        }
        if self.conditional {
            w = w.max(se(&m.conditional_power));
        }
        if self.unconditional {
            w = w.max(se(&m.unconditional_power));
        }
        w
    }
}

/// One (scenario, delta, method) cell of a study.
#[derive(Debug, Clone, Serialize)]
pub struct Cell {
    pub scenario: String,
    pub delta: f64,
    pub method: String,
    pub seed: u64,
    pub metrics: Metrics,
    /// uniformity of the p-values of null tests
    pub ks_uniform: Option<KsResult>,
    pub ks_optimism: Option<KsResult>,
    pub null_tests: usize,
    pub failed_trials: usize,
    #[serde(skip)]
    pub records: Vec<SimRecord>,
}

impl Cell {
    pub fn from_records(cfg: &SimConfig, records: Vec<SimRecord>) -> Self {
        let truths = sim::truths(cfg.scenario, cfg.n);
        let metrics = sim::metrics(&records, &truths, cfg.window, cfg.alpha);
        let nulls = sim::null_pvalues(&records);
        Cell {
            scenario: cfg.scenario.name().into(),
            delta: cfg.delta,
            method: cfg.method_name.clone(),
            seed: cfg.seed,
            metrics,
            ks_uniform: sim::ks_uniform(&nulls).ok(),
            ks_optimism: sim::ks_optimism(&nulls).ok(),
            null_tests: nulls.len(),
            failed_trials: records.iter().filter(|r| r.error.is_some()).count(),
            records,
        }
    }
}

/// Run `cfg.trials` trials, then extend in chunks of half the current size
/// while the watched standard errors exceed the target.
pub fn run_cell(cfg: &SimConfig, pool: &rayon::ThreadPool, adaptive: Option<(Adaptive, Watch)>) -> Cell {
    let mut records = run_trials(cfg, 0..cfg.trials, pool);
    if let Some((a, watch)) = adaptive {
        loop {
            let m = sim::metrics(&records, &sim::truths(cfg.scenario, cfg.n), cfg.window, cfg.alpha);
            let have = records.len();
            if watch.worst(&m) <= a.target_se || have >= a.max_trials {
                break;
            }
            let more = (have / 2).max(10).min(a.max_trials - have);
            records.extend(run_trials(cfg, have..have + more, pool));
        }
    }
    Cell::from_records(cfg, records)
}

/// Long-format CSV: one line per (cell, metric).
pub fn write_long_csv<W: Write>(cells: &[Cell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["schema_version", "scenario", "delta", "method", "metric", "value", "stderr", "trials", "seed"])
        .map_err(csv_err)?;
    let fmt = |x: Option<f64>| x.map(|v| format!("{v}")).unwrap_or_default();
    for c in cells {
        let m = &c.metrics;
        let mut rows: Vec<(&str, Option<f64>, Option<f64>)> = vec![
            ("detection", m.detection.value, m.detection.stderr),
            ("conditional_power", m.conditional_power.value, m.conditional_power.stderr),
            ("unconditional_power", m.unconditional_power.value, m.unconditional_power.stderr),
            ("unique_detection", m.unique_detection.value, m.unique_detection.stderr),
            ("rejection_rate", m.rejection_rate.value, m.rejection_rate.stderr),
            ("mean_steps", Some(m.mean_steps), None),
        ];
        if let Some(k) = &c.ks_uniform {
            rows.push(("ks_statistic", Some(k.statistic), None));
            rows.push(("ks_pvalue", Some(k.pvalue), None));
        }
        for (name, v, se) in rows {
            w.write_record([
                SCHEMA_VERSION.to_string(),
                c.scenario.clone(),
                format!("{}", c.delta),
                c.method.clone(),
                name.to_string(),
                fmt(v),
                fmt(se),
                m.trials.to_string(),
                c.seed.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct Summary<'a, C: Serialize> {
    pub schema_version: u32,
    pub config: &'a C,
    pub cells: &'a [Cell],
}

pub fn summary_json<C: Serialize>(config: &C, cells: &[Cell]) -> String {
    serde_json::to_string_pretty(&Summary { schema_version: SCHEMA_VERSION, config, cells }).expect("summary serializes")
}
