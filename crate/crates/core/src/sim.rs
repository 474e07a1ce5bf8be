//! Simulation harness: mean and noise generators, detection and power
//! metrics, the sample-splitting baseline and uniformity diagnostics.
//!
//! Trial `t` of a study with master seed `s` draws its noise from
//! `rng_for(s, TRIAL, t)` and runs the pipeline with seed
//! `derive_seed(s, SPLIT, t)`, so trials can be run in any order.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::math::{kolmogorov_sf, student_t_sf};
use crate::model::{Changepoint, Sign, TestMethod, TestResult};
use crate::pipeline::{self, PipelineConfig};
use crate::rng::{derive_seed, rng_for, stream};
use crate::segmentation::bs;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum Scenario {
    /// a raised block in the middle
    Middle,
    /// a raised block running to the end
    Edge,
    /// a single jump halfway, meant for heavy-tailed noise
    PseudoReal,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Middle => "middle",
            Scenario::Edge => "edge",
            Scenario::PseudoReal => "pseudo_real",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum NoiseKind {
    Gaussian,
    Laplace,
    Bootstrap,
}

/// Mean vector for a scenario. For `n = 200` the middle block is
/// `101..=140` and the edge block `161..=200`; other lengths scale the
/// block ends proportionally (`n/2`, `7n/10`, `4n/5`). The pseudo-real
/// jump sits after `n/2`.
pub fn gen_mean(scenario: Scenario, delta: f64, n: usize) -> Vec<f64> {
    let (lo, hi) = match scenario {
        Scenario::Middle => (n / 2, 7 * n / 10),
        Scenario::Edge => (4 * n / 5, n),
        Scenario::PseudoReal => (n / 2, n),
    };
    (1..=n).map(|i| if i > lo && i <= hi { delta } else { 0.0 }).collect()
}

/// True changepoint locations of a scenario (split after these indices).
pub fn truths(scenario: Scenario, n: usize) -> Vec<usize> {
    match scenario {
        Scenario::Middle => alloc::vec![n / 2, 7 * n / 10],
        Scenario::Edge => alloc::vec![4 * n / 5],
        Scenario::PseudoReal => alloc::vec![n / 2],
    }
}

/// Noise with scale `sigma`: Gaussian, Laplace with the same variance, or
/// resampling with replacement from `pool` (which is used as is).
pub fn gen_noise<R: Rng + ?Sized>(kind: NoiseKind, sigma: f64, n: usize, pool: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    match kind {
        NoiseKind::Gaussian => Ok((0..n).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect()),
        NoiseKind::Laplace => {
            let b = sigma / core::f64::consts::SQRT_2;
            Ok((0..n)
                .map(|_| {
                    let e: f64 = Exp1.sample(rng);
                    if rng.random::<bool>() {
                        b * e
                    } else {
                        -b * e
                    }
                })
                .collect())
        }
        NoiseKind::Bootstrap => {
            if pool.is_empty() {
                return Err(Error::InvalidArgument("bootstrap noise needs a residual pool"));
            }
            Ok((0..n).map(|_| pool[rng.random_range(0..pool.len())]).collect())
        }
    }
}

/// What to run in each trial.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum Method {
    Pipeline(PipelineConfig),
    SampleSplit { steps: usize },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SimConfig {
    pub scenario: Scenario,
    pub delta: f64,
    pub n: usize,
    pub noise: NoiseKind,
    pub sigma: f64,
    pub pool: Vec<f64>,
    pub method_name: String,
    pub method: Method,
    /// the noise variance handed to the tests; `None` leaves it unknown
    pub known_sigma2: Option<f64>,
    pub trials: usize,
    pub window: usize,
    pub alpha: f64,
    pub seed: u64,
}

/// One trial's outcome.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SimRecord {
    pub trial: usize,
    /// tested changepoints, on the analysis scale
    pub tested: Vec<Changepoint>,
    /// 1 for full data, 2 for sample splitting (locations are on the half scale)
    pub scale: usize,
    pub pvalues: Vec<Option<f64>>,
    pub adjusted: Vec<Option<f64>>,
    /// whether each test's contrast has zero mean under the true signal
    pub null: Vec<bool>,
    /// steps actually used to pick the tested model
    pub steps: usize,
    /// a pipeline failure before any test ran
    pub error: Option<String>,
}

impl SimRecord {
    fn failed(trial: usize, scale: usize, e: Error) -> Self {
        SimRecord {
            trial,
            tested: Vec::new(),
            scale,
            pvalues: Vec::new(),
            adjusted: Vec::new(),
            null: Vec::new(),
            steps: 0,
            error: Some(alloc::format!("{e}")),
        }
    }
}

/// Run trial `trial` of `cfg`.
pub fn run_trial(cfg: &SimConfig, trial: usize) -> SimRecord {
    let theta = gen_mean(cfg.scenario, cfg.delta, cfg.n);
    let mut rng = rng_for(cfg.seed, stream::TRIAL, trial as u64);
    let noise = match gen_noise(cfg.noise, cfg.sigma, cfg.n, &cfg.pool, &mut rng) {
        Ok(e) => e,
        Err(e) => return SimRecord::failed(trial, 1, e),
    };
    let y: Vec<f64> = theta.iter().zip(&noise).map(|(a, b)| a + b).collect();
    let seed = derive_seed(cfg.seed, stream::SPLIT, trial as u64);
    match &cfg.method {
        Method::Pipeline(p) => {
            let mut p = p.clone();
            p.seed = seed;
            match pipeline::run(&y, cfg.known_sigma2, &p) {
                Ok(out) => {
                    let null = out.contrasts.iter().map(|v| dot(&v.v, &theta).abs() < 1e-9).collect();
                    SimRecord {
                        trial,
                        tested: out.tested,
                        scale: 1,
                        pvalues: out.results.iter().map(|r| r.as_ref().ok().map(|t| t.pvalue)).collect(),
                        adjusted: out.adjusted,
                        null,
                        steps: out.inference_model.k(),
                        error: None,
                    }
                }
                Err(e) => SimRecord::failed(trial, 1, e),
            }
        }
        Method::SampleSplit { steps } => match sample_split(&y, *steps) {
            Ok(split) => {
                let half_theta = even_half(&theta);
                let k = split.tested.len().max(1);
                let null = split
                    .tested
                    .iter()
                    .map(|cp| {
                        let (l, r) = adjacent_means(&half_theta, &split.boundaries, cp.location);
                        (l - r).abs() < 1e-9
                    })
                    .collect();
                let pvalues: Vec<Option<f64>> = split.results.iter().map(|r| r.as_ref().ok().map(|t| t.pvalue)).collect();
                SimRecord {
                    trial,
                    tested: split.tested,
                    scale: 2,
                    adjusted: pvalues.iter().map(|p| p.map(|p| (p * k as f64).min(1.0))).collect(),
                    pvalues,
                    null,
                    steps: *steps,
                    error: None,
                }
            }
            Err(e) => SimRecord::failed(trial, 2, e),
        },
    }
}

/// Run all trials sequentially.
pub fn run_study(cfg: &SimConfig) -> Vec<SimRecord> {
    (0..cfg.trials).map(|t| run_trial(cfg, t)).collect()
}

/// Ratio estimates with trial-level standard errors. A ratio whose
/// denominator is zero is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Ratio {
    pub value: Option<f64>,
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Metrics {
    pub trials: usize,
    pub tests: usize,
    pub correct: usize,
    pub correct_rejected: usize,
    pub detection: Ratio,
    pub conditional_power: Ratio,
    pub unconditional_power: Ratio,
    pub unique_detection: Ratio,
    /// rejections among all tests
    pub rejection_rate: Ratio,
    pub mean_steps: f64,
}

fn ratio(pairs: &[(f64, f64)]) -> Ratio {
    let num: f64 = pairs.iter().map(|p| p.0).sum();
    let den: f64 = pairs.iter().map(|p| p.1).sum();
    if den <= 0.0 {
        return Ratio::default();
    }
    let r = num / den;
    let t = pairs.len() as f64;
    let stderr = if pairs.len() > 1 {
        let ss: f64 = pairs.iter().map(|(a, b)| (a - r * b) * (a - r * b)).sum();
        Some(libm::sqrt(ss * t / (t - 1.0)) / den)
    } else {
        None
    };
    Ratio { value: Some(r), stderr }
}

/// Detection probability, conditional and unconditional power and unique
/// detection. A test is correct when its location is within `window` of a
/// truth (truths and `window` are divided by the record's scale, rounding
/// the window up, so `2` becomes `1` for sample splitting), and rejected
/// when its adjusted p-value is at most `alpha`. A test that failed counts
/// as not rejected.
pub fn metrics(records: &[SimRecord], truths: &[usize], window: usize, alpha: f64) -> Metrics {
    let mut det = Vec::with_capacity(records.len());
    let mut cond = Vec::with_capacity(records.len());
    let mut uncond = Vec::with_capacity(records.len());
    let mut uniq = Vec::with_capacity(records.len());
    let mut rej = Vec::with_capacity(records.len());
    let (mut tests, mut correct, mut cr, mut steps) = (0usize, 0usize, 0usize, 0usize);
    for r in records {
        let scale = r.scale.max(1);
        let scaled: Vec<usize> = truths.iter().map(|t| t / scale).collect();
        let w = window.div_ceil(scale);
        let near = |loc: usize, t: usize| loc.abs_diff(t) <= w;
        let mut c = 0usize;
        let mut c_rej = 0usize;
        let mut all_rej = 0usize;
        for (cp, p) in r.tested.iter().zip(&r.adjusted) {
            let ok = scaled.iter().any(|&t| near(cp.location, t));
            let rejected = matches!(p, Some(p) if *p <= alpha);
            c += ok as usize;
            c_rej += (ok && rejected) as usize;
            all_rej += rejected as usize;
        }
        let found = scaled.iter().filter(|&&t| r.tested.iter().any(|cp| near(cp.location, t))).count();
        let m = r.tested.len();
        tests += m;
        correct += c;
        cr += c_rej;
        steps += r.steps;
        det.push((c as f64, m as f64));
        cond.push((c_rej as f64, c as f64));
        uncond.push((c_rej as f64, m as f64));
        uniq.push((found as f64, scaled.len() as f64));
        rej.push((all_rej as f64, m as f64));
    }
    Metrics {
        trials: records.len(),
        tests,
        correct,
        correct_rejected: cr,
        detection: ratio(&det),
        conditional_power: ratio(&cond),
        unconditional_power: ratio(&uncond),
        unique_detection: ratio(&uniq),
        rejection_rate: ratio(&rej),
        mean_steps: if records.is_empty() { 0.0 } else { steps as f64 / records.len() as f64 },
    }
}

/// Raw p-values of the tests whose contrast is null under the truth.
pub fn null_pvalues(records: &[SimRecord]) -> Vec<f64> {
    records
        .iter()
        .flat_map(|r| r.pvalues.iter().zip(&r.null).filter(|(_, n)| **n).filter_map(|(p, _)| *p))
        .collect()
}

/// Result of sample splitting.
#[derive(Debug, Clone)]
pub struct SplitOutcome {
    /// changepoints found on the odd-index half, sorted; locations on the half scale
    pub tested: Vec<Changepoint>,
    pub boundaries: Vec<usize>,
    pub results: Vec<Result<TestResult>>,
}

fn even_half(y: &[f64]) -> Vec<f64> {
    y.iter().skip(1).step_by(2).copied().collect()
}

fn segment_stats(x: &[f64]) -> (f64, f64, usize) {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let ss = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, ss, n)
}

fn adjacent_range(boundaries: &[usize], location: usize, n: usize) -> (usize, usize, usize) {
    let pos = boundaries.iter().position(|&b| b == location).unwrap_or(0);
    let lo = if pos == 0 { 0 } else { boundaries[pos - 1] };
    let hi = boundaries.get(pos + 1).copied().unwrap_or(n);
    (lo, location.min(n), hi.min(n))
}

fn adjacent_means(x: &[f64], boundaries: &[usize], location: usize) -> (f64, f64) {
    let (lo, mid, hi) = adjacent_range(boundaries, location, x.len());
    let mean = |s: &[f64]| if s.is_empty() { 0.0 } else { s.iter().sum::<f64>() / s.len() as f64 };
    (mean(&x[lo..mid]), mean(&x[mid..hi]))
}

/// Detect `k` BS steps on the odd-indexed points (1st, 3rd, ...) and test
/// each change on the even-indexed points with a one-sided pooled-variance
/// two-sample t-test between its adjacent segments.
pub fn sample_split(y: &[f64], k: usize) -> Result<SplitOutcome> {
    if y.len() < 4 {
        return Err(Error::SeriesTooShort(y.len()));
    }
    let odd: Vec<f64> = y.iter().step_by(2).copied().collect();
    let even = even_half(y);
    let model = bs(&odd, k, &[])?;
    let tested = model.sorted_changepoints();
    let boundaries: Vec<usize> = tested.iter().map(|c| c.location).collect();
    let results = tested
        .iter()
        .map(|cp| {
            let (lo, mid, hi) = adjacent_range(&boundaries, cp.location, even.len());
            two_sample_t(&even[lo..mid], &even[mid..hi], cp.direction)
        })
        .collect();
    Ok(SplitOutcome { tested, boundaries, results })
}

/// The `j`-th (1-based, by location) sample-splitting test.
pub fn sample_split_test(y: &[f64], k: usize, j: usize) -> Result<TestResult> {
    let mut out = sample_split(y, k)?;
    if j == 0 || j > out.results.len() {
        return Err(Error::IndexOutOfRange { j, k: out.results.len() });
    }
    out.results.swap_remove(j - 1)
}

/// One-sided test of `direction * (mean(right) - mean(left)) > 0`.
pub fn two_sample_t(left: &[f64], right: &[f64], direction: Sign) -> Result<TestResult> {
    if left.len() < 2 || right.len() < 2 {
        return Err(Error::SegmentTooShort);
    }
    let (m1, ss1, n1) = segment_stats(left);
    let (m2, ss2, n2) = segment_stats(right);
    let df = (n1 + n2 - 2) as f64;
    let sp = libm::sqrt((ss1 + ss2) / df);
    let se = sp * libm::sqrt(1.0 / n1 as f64 + 1.0 / n2 as f64);
    let diff = direction.value() * (m2 - m1);
    let pvalue = if se > 0.0 {
        student_t_sf(diff / se, df)
    } else if diff > 0.0 {
        0.0
    } else if diff < 0.0 {
        1.0
    } else {
        0.5
    };
    Ok(TestResult {
        pvalue,
        method: TestMethod::SampleSplit,
        vlo: f64::NEG_INFINITY,
        vup: f64::INFINITY,
        vty: diff,
        sd: se,
        trials: 0,
        accept_rate: None,
        degenerate: 0,
        degraded: false,
        seed: None,
    })
}

/// Kolmogorov-Smirnov test against U(0,1).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct KsResult {
    pub statistic: f64,
    pub pvalue: f64,
    pub n: usize,
    pub reject_at_001: bool,
}

fn sorted(p: &[f64]) -> Result<Vec<f64>> {
    if p.is_empty() {
        return Err(Error::InvalidArgument("no p-values"));
    }
    let mut s = p.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// Two-sided statistic `sup |F_N - F|` with the asymptotic Kolmogorov
/// distribution (Stephens' small-sample correction). Meant for 50 or more
/// values.
pub fn ks_uniform(pvalues: &[f64]) -> Result<KsResult> {
    let s = sorted(pvalues)?;
    let n = s.len() as f64;
    let d = s
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let p = p.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - p).max(p - i as f64 / n)
        })
        .fold(0.0, f64::max);
    let rn = libm::sqrt(n);
    let pvalue = kolmogorov_sf((rn + 0.12 + 0.11 / rn) * d).clamp(0.0, 1.0);
    Ok(KsResult { statistic: d, pvalue, n: s.len(), reject_at_001: pvalue < 0.01 })
}

/// One-sided statistic `sup (F_N - F)`: large when the p-values are too
/// small. Asymptotic p-value `exp(-2 N D^2)`.
pub fn ks_optimism(pvalues: &[f64]) -> Result<KsResult> {
    let s = sorted(pvalues)?;
    let n = s.len() as f64;
    let d = s
        .iter()
        .enumerate()
        .map(|(i, &p)| (i + 1) as f64 / n - p.clamp(0.0, 1.0))
        .fold(0.0, f64::max);
    let pvalue = libm::exp(-2.0 * n * d * d).min(1.0);
    Ok(KsResult { statistic: d, pvalue, n: s.len(), reject_at_001: pvalue < 0.01 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn means() {
        let m = gen_mean(Scenario::Middle, 4.0, 200);
        assert_eq!((m[99], m[100], m[139], m[140]), (0.0, 4.0, 4.0, 0.0));
        let e = gen_mean(Scenario::Edge, 1.0, 200);
        assert_eq!((e[159], e[160], e[199]), (0.0, 1.0, 1.0));
        assert!(gen_mean(Scenario::Middle, 0.0, 200).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = gen_noise(NoiseKind::Laplace, 1.0, 1_000_000, &[], &mut rng).unwrap();
        let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!((0.99..=1.01).contains(&var), "{var}");
        let c = gen_noise(NoiseKind::Bootstrap, 1.0, 10, &[2.5], &mut rng).unwrap();
        assert!(c.iter().all(|&v| v == 2.5));
        assert!(gen_noise(NoiseKind::Bootstrap, 1.0, 10, &[], &mut rng).is_err());
        let a = gen_noise(NoiseKind::Gaussian, 1.0, 5, &[], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = gen_noise(NoiseKind::Gaussian, 1.0, 5, &[], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
    }

    fn record(locs: &[usize], adjusted: &[f64]) -> SimRecord {
        SimRecord {
            trial: 0,
            tested: locs.iter().map(|&l| Changepoint { location: l, direction: Sign::Plus }).collect(),
            scale: 1,
            pvalues: adjusted.iter().map(|&p| Some(p)).collect(),
            adjusted: adjusted.iter().map(|&p| Some(p)).collect(),
            null: vec![false; locs.len()],
            steps: locs.len(),
            error: None,
        }
    }

    #[test]
    fn metric_arithmetic() {
        // 100 tests, 80 correct, 40 of those rejected
        let mut recs = Vec::new();
        for i in 0..100 {
            let loc = if i < 80 { 100 } else { 10 };
            let p = if i < 40 { 0.01 } else { 0.5 };
            recs.push(record(&[loc], &[p]));
        }
        let m = metrics(&recs, &[100], 2, 0.05);
        assert_eq!(m.detection.value, Some(0.8));
        assert_eq!(m.conditional_power.value, Some(0.5));
        assert_eq!(m.unconditional_power.value, Some(0.4));
        let u = m.unconditional_power.value.unwrap();
        assert!((u - m.detection.value.unwrap() * m.conditional_power.value.unwrap()).abs() < 1e-15);

        let m = metrics(&[record(&[101, 102, 139], &[0.5, 0.5, 0.5])], &[100, 140], 2, 0.05);
        assert_eq!(m.unique_detection.value, Some(1.0));
        assert_eq!(m.detection.value, Some(1.0));

        let m = metrics(&[record(&[], &[])], &[100], 2, 0.05);
        assert_eq!(m.detection.value, None);
        assert_eq!(m.conditional_power.value, None);
        assert_eq!(m.unique_detection.value, Some(0.0));
    }

    #[test]
    fn t_test() {
        let a = [1.0, 2.0, 3.0];
        let r = two_sample_t(&a, &a, Sign::Plus).unwrap();
        assert_eq!(r.pvalue, 0.5);
        assert!(two_sample_t(&[1.0], &a, Sign::Plus).is_err());
        let r = two_sample_t(&[0.0, 0.1, -0.1], &[5.0, 5.1, 4.9], Sign::Plus).unwrap();
        assert!(r.pvalue < 1e-4);
        let r = two_sample_t(&[0.0, 0.1, -0.1], &[5.0, 5.1, 4.9], Sign::Minus).unwrap();
        assert!(r.pvalue > 0.9999);
    }

    #[test]
    fn split_runs() {
        let mut y = vec![0.0; 40];
        for (i, v) in y.iter_mut().enumerate() {
            *v = if (10..30).contains(&i) { 5.0 } else { 0.0 } + 0.01 * (i % 3) as f64;
        }
        let out = sample_split(&y, 2).unwrap();
        let locs: Vec<usize> = out.tested.iter().map(|c| c.location).collect();
        assert_eq!(locs, vec![5, 15]);
        assert!(out.results.iter().all(|r| r.as_ref().unwrap().pvalue < 1e-6));
        assert!(sample_split_test(&y, 2, 3).is_err());
    }

    #[test]
    fn ks() {
        let n = 199;
        let grid: Vec<f64> = (1..=n).map(|i| i as f64 / (n + 1) as f64).collect();
        let r = ks_uniform(&grid).unwrap();
        assert!((r.statistic - 1.0 / (n + 1) as f64).abs() < 1e-12);
        assert!(!r.reject_at_001);
        assert!(ks_uniform(&[0.01; 100]).unwrap().reject_at_001);
        assert!(ks_optimism(&[0.01; 100]).unwrap().reject_at_001);
        assert!(!ks_optimism(&[0.99; 100]).unwrap().reject_at_001);
        assert!(ks_uniform(&[]).is_err());
    }
}
