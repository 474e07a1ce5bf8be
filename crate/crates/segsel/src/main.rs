use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use segsel::config::{Bootstrap, Marginalize, SigmaMode, StopMode, TestKind};
use segsel::methods::{parse_method, MethodOptions};
use segsel::study::{self, Adaptive, Cell, Watch};
use segsel::{io as sio, run, CliError, Result, RunConfig};
use segsel_core::sim::{NoiseKind, Scenario, SimConfig};
use segsel_core::{Algorithm, ContrastKind, Series};

#[derive(Parser)]
#[command(name = "segsel", version, about = "Changepoint detection with post-selection p-values")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Detect changepoints and print the model.
    Detect(RunArgs),
    /// Detect changepoints and test each one.
    Infer(RunArgs),
    /// Write the selection event as a dense CSV.
    Gamma(RunArgs),
    /// Run a simulation study.
    Simulate(SimArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Bs,
    Wbs,
    Cbs,
    Fl,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Bs => Algorithm::Bs,
            AlgoArg::Wbs => Algorithm::Wbs,
            AlgoArg::Cbs => Algorithm::Cbs,
            AlgoArg::Fl => Algorithm::Fl,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ContrastArg {
    Segment,
    Spike,
}

#[derive(Clone, Copy, ValueEnum)]
enum StopArg {
    Fixed,
    Ic,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestArg {
    Sat,
    Sel,
}

#[derive(Clone, Copy, ValueEnum)]
enum MargArg {
    None,
    Noise,
    Intervals,
}

#[derive(Clone, Copy, ValueEnum)]
enum SigmaModeArg {
    Known,
    Unknown,
}

#[derive(Clone, Copy, ValueEnum)]
enum BootArg {
    None,
    Plain,
    Modified,
}

#[derive(Args)]
struct RunArgs {
    /// CSV with a `value` column and optional `chrom`, `pos`; `-` reads stdin
    #[arg(long)]
    input: String,
    #[arg(long, value_enum, default_value = "bs")]
    algo: AlgoArg,
    #[arg(long, default_value_t = 2)]
    steps: usize,
    #[arg(long, value_enum, default_value = "fixed")]
    stop: StopArg,
    /// IC penalty multiplier
    #[arg(long, default_value_t = 2)]
    q: usize,
    /// largest model considered by IC stopping
    #[arg(long, default_value_t = 20)]
    kmax: usize,
    /// cut at chromosome boundaries before segmenting
    #[arg(long)]
    precut: bool,
    /// number of WBS intervals
    #[arg(long = "B", alias = "intervals", default_value_t = 1000)]
    intervals: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "sat")]
    test: TestArg,
    #[arg(long, value_enum, default_value = "none")]
    marginalize: MargArg,
    /// noise standard deviation
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value = "resid:10")]
    sigma_method: String,
    /// variance treatment of selected-model tests
    #[arg(long, value_enum, default_value = "unknown")]
    sigma_mode: SigmaModeArg,
    #[arg(long, value_enum, default_value = "segment")]
    contrast: ContrastArg,
    /// drop tested changepoints within this distance of an earlier one
    #[arg(long)]
    declutter_dist: Option<usize>,
    #[arg(long)]
    bonferroni: bool,
    #[arg(long, value_enum, default_value = "none")]
    bootstrap: BootArg,
    /// standard deviation of the additive randomization noise
    #[arg(long, default_value_t = 0.2)]
    sigma_add: f64,
    /// Monte Carlo draws for marginalization
    #[arg(long = "trials", env = "SEGSEL_MC_TRIALS", default_value_t = 200)]
    mc_trials: usize,
    #[arg(long, default_value_t = 2000)]
    max_retries: usize,
    /// MCMC samples for selected-model tests
    #[arg(long, env = "SEGSEL_SAMPLES", default_value_t = 4000)]
    samples: usize,
    #[arg(long, default_value_t = 100)]
    directions: usize,
    #[arg(long, env = "SEGSEL_BOOT_DRAWS", default_value_t = 2000)]
    boot_draws: usize,
    #[arg(long, default_value_t = 10)]
    cv_kmax: usize,
    #[arg(long, default_value_t = 0)]
    min_segment: usize,
    #[arg(long)]
    two_sided: bool,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// include wall-clock time in the report
    #[arg(long)]
    timing: bool,
    /// output file (default stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> RunConfig {
        RunConfig {
            algo: self.algo.into(),
            steps: self.steps,
            stop: match self.stop {
                StopArg::Fixed => StopMode::Fixed,
                StopArg::Ic => StopMode::Ic,
            },
            q: self.q,
            kmax: self.kmax,
            precut: self.precut,
            intervals: self.intervals,
            seed: self.seed,
            test: match self.test {
                TestArg::Sat => TestKind::Sat,
                TestArg::Sel => TestKind::Sel,
            },
            marginalize: match self.marginalize {
                MargArg::None => Marginalize::None,
                MargArg::Noise => Marginalize::Noise,
                MargArg::Intervals => Marginalize::Intervals,
            },
            sigma: self.sigma,
            sigma_method: self.sigma_method.clone(),
            sigma_mode: match self.sigma_mode {
                SigmaModeArg::Known => SigmaMode::Known,
                SigmaModeArg::Unknown => SigmaMode::Unknown,
            },
            contrast: contrast(self.contrast),
            declutter_dist: self.declutter_dist,
            bonferroni: self.bonferroni,
            bootstrap: match self.bootstrap {
                BootArg::None => Bootstrap::None,
                BootArg::Plain => Bootstrap::Plain,
                BootArg::Modified => Bootstrap::Modified,
            },
            sigma_add: self.sigma_add,
            mc_trials: self.mc_trials,
            max_retries: self.max_retries,
            samples: self.samples,
            directions: self.directions,
            boot_draws: self.boot_draws,
            cv_kmax: self.cv_kmax,
            min_segment: self.min_segment,
            two_sided: self.two_sided,
            alpha: self.alpha,
        }
    }
}

fn contrast(c: ContrastArg) -> ContrastKind {
    match c {
        ContrastArg::Segment => ContrastKind::Segment,
        ContrastArg::Spike => ContrastKind::Spike,
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Middle,
    Edge,
    PseudoReal,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    Gaussian,
    Laplace,
    Bootstrap,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, value_enum, default_value = "middle")]
    scenario: ScenarioArg,
    /// a single jump size
    #[arg(long, conflicts_with = "deltas")]
    delta: Option<f64>,
    /// comma-separated jump sizes
    #[arg(long, value_delimiter = ',')]
    deltas: Vec<f64>,
    /// comma-separated method names, e.g. `bs-sat,wbs-sat-marg`
    #[arg(long, value_delimiter = ',', required = true)]
    method: Vec<String>,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, value_enum, default_value = "gaussian")]
    noise: NoiseArg,
    /// noise standard deviation
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// CSV of residuals to resample for `--noise bootstrap`
    #[arg(long)]
    pool: Option<PathBuf>,
    #[arg(long, env = "SEGSEL_TRIALS", default_value_t = 300)]
    trials: usize,
    /// keep adding trials until every detection and power standard error
    /// is at most this
    #[arg(long)]
    target_se: Option<f64>,
    #[arg(long, default_value_t = 5000)]
    max_trials: usize,
    /// detection tolerance around each true changepoint
    #[arg(long, default_value_t = 2)]
    window: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// worker threads (0 means one per core)
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, default_value_t = 2)]
    steps: usize,
    /// WBS intervals (default n)
    #[arg(long = "B", alias = "intervals")]
    intervals: Option<usize>,
    #[arg(long, default_value_t = 0.2)]
    sigma_add: f64,
    #[arg(long, env = "SEGSEL_MC_TRIALS", default_value_t = 200)]
    mc_trials: usize,
    #[arg(long, default_value_t = 2000)]
    max_retries: usize,
    #[arg(long, env = "SEGSEL_SAMPLES", default_value_t = 4000)]
    samples: usize,
    #[arg(long, default_value_t = 100)]
    directions: usize,
    #[arg(long, default_value_t = 2)]
    q: usize,
    #[arg(long, default_value_t = 10)]
    kmax: usize,
    #[arg(long)]
    declutter_dist: Option<usize>,
    #[arg(long, env = "SEGSEL_BOOT_DRAWS", default_value_t = 2000)]
    boot_draws: usize,
    #[arg(long, default_value_t = 10)]
    cv_kmax: usize,
    #[arg(long, default_value_t = 0)]
    min_segment: usize,
    #[arg(long, value_enum, default_value = "segment")]
    contrast: ContrastArg,
    /// metrics CSV (default stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON summary with KS results per cell
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(serde::Serialize)]
struct SimEcho<'a> {
    scenario: &'static str,
    deltas: &'a [f64],
    methods: &'a [String],
    n: usize,
    noise: &'static str,
    sigma: f64,
    trials: usize,
    target_se: Option<f64>,
    max_trials: usize,
    window: usize,
    alpha: f64,
    seed: u64,
    options: &'a MethodOptions,
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load(input: &str) -> Result<Series> {
    if input == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        sio::read_series(s.as_bytes())
    } else {
        let f = File::open(input).map_err(|e| CliError::Input(format!("{input}: {e}")))?;
        sio::read_series(BufReader::new(f))
    }
}

fn write_text(path: &Option<PathBuf>, text: &str) -> Result<()> {
    let mut out = open_output(path)?;
    out.write_all(text.as_bytes())?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn run_cmd(args: &RunArgs, kind: &str) -> Result<ExitCode> {
    let series = load(&args.input)?;
    let cfg = args.config();
    cfg.validate(&series)?;
    match kind {
        "detect" => {
            let r = run::detect(&cfg, &series, &args.input, args.timing)?;
            write_text(&args.out, &r.to_json())?;
        }
        "infer" => {
            let (r, degenerate) = run::infer(&cfg, &series, &args.input, args.timing)?;
            write_text(&args.out, &r.to_json())?;
            if degenerate {
                eprintln!("segsel: some tests hit a numerical degeneracy; see their `error` fields");
                return Ok(ExitCode::from(4));
            }
        }
        _ => {
            let p = run::gamma(&cfg, &series)?;
            let mut out = open_output(&args.out)?;
            sio::write_gamma(&p, &mut out)?;
            out.flush()?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn simulate(args: &SimArgs) -> Result<ExitCode> {
    let deltas: Vec<f64> = match args.delta {
        Some(d) => vec![d],
        None if args.deltas.is_empty() => return Err(CliError::Config("give --delta or --deltas".into())),
        None => args.deltas.clone(),
    };
    if args.n < 4 {
        return Err(CliError::Config("--n must be at least 4".into()));
    }
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::Config("--alpha must lie in (0, 1)".into()));
    }
    let scenario = match args.scenario {
        ScenarioArg::Middle => Scenario::Middle,
        ScenarioArg::Edge => Scenario::Edge,
        ScenarioArg::PseudoReal => Scenario::PseudoReal,
    };
    let (noise, noise_name) = match args.noise {
        NoiseArg::Gaussian => (NoiseKind::Gaussian, "gaussian"),
        NoiseArg::Laplace => (NoiseKind::Laplace, "laplace"),
        NoiseArg::Bootstrap => (NoiseKind::Bootstrap, "bootstrap"),
    };
    let pool_values = match (&args.pool, noise) {
        (Some(p), _) => load(&p.to_string_lossy())?.values().to_vec(),
        (None, NoiseKind::Bootstrap) => return Err(CliError::Config("--noise bootstrap needs --pool".into())),
        (None, _) => Vec::new(),
    };
    let opt = MethodOptions {
        steps: args.steps,
        intervals: args.intervals,
        sigma_add: args.sigma_add,
        mc_trials: args.mc_trials,
        max_retries: args.max_retries,
        samples: args.samples,
        directions: args.directions,
        q: args.q,
        kmax: args.kmax,
        declutter: args.declutter_dist,
        boot_draws: args.boot_draws,
        cv_kmax: args.cv_kmax,
        min_segment: args.min_segment,
        contrast: contrast(args.contrast),
    };
    let methods = args
        .method
        .iter()
        .map(|m| parse_method(m, args.n, &opt).map(|(method, known)| (m.clone(), method, known)))
        .collect::<Result<Vec<_>>>()?;
    let pool = study::pool(args.jobs)?;
    let adaptive = args.target_se.map(|t| (Adaptive { target_se: t, max_trials: args.max_trials }, Watch::ALL));
    let mut cells: Vec<Cell> = Vec::new();
    for &delta in &deltas {
        for (name, method, known) in &methods {
            let cfg = SimConfig {
                scenario,
                delta,
                n: args.n,
                noise,
                sigma: args.sigma,
                pool: pool_values.clone(),
                method_name: name.clone(),
                method: method.clone(),
                known_sigma2: known.then_some(args.sigma * args.sigma),
                trials: args.trials,
                window: args.window,
                alpha: args.alpha,
                seed: args.seed,
            };
            cells.push(study::run_cell(&cfg, &pool, adaptive));
        }
    }
    let mut out = open_output(&args.out)?;
    study::write_long_csv(&cells, &mut out)?;
    out.flush()?;
    if let Some(path) = &args.summary {
        let echo = SimEcho {
            scenario: scenario.name(),
            deltas: &deltas,
            methods: &args.method,
            n: args.n,
            noise: noise_name,
            sigma: args.sigma,
            trials: args.trials,
            target_se: args.target_se,
            max_trials: args.max_trials,
            window: args.window,
            alpha: args.alpha,
            seed: args.seed,
            options: &opt,
        };
        write_text(&Some(path.clone()), &study::summary_json(&echo, &cells))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let res = match &cli.cmd {
        Cmd::Detect(a) => run_cmd(a, "detect"),
        Cmd::Infer(a) => run_cmd(a, "infer"),
        Cmd::Gamma(a) => run_cmd(a, "gamma"),
        Cmd::Simulate(a) => simulate(a),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("segsel: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
