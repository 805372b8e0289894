//! `qchan` command-line front end: file formats, canonical reports and the
//! `choi`, `kraus`, `dist` and `verify` subcommands.

pub mod canonical;
pub mod error;
pub mod io;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use qchan::channels::{density_from_kraus, kraus_from_density};
use qchan::optimize::{frank_wolfe, maximize_over_states, OptResult};
use qchan::state_metrics::bures_from_fidelity;
use qchan::verify::{self, SuiteReport, SUITE_DIMS};
use qchan::{ChannelPair, DensityOperator, OptimizerConfig};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

pub use error::{CliError, Outcome};
use io::{Input, StateFile};

pub const SCHEMA_VERSION: &str = "1";

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "QCHAN_THREADS";

#[derive(Debug, Parser)]
#[command(name = "qchan", version, about = "Distances and fidelities between finite-dimensional quantum channels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Channel density kernel of a channel file, with diagnostics.
    Choi(ChoiArgs),
    /// Orthogonal Kraus operators of a kernel file.
    Kraus(KrausArgs),
    /// Distances and fidelities between two channels.
    Dist(DistArgs),
    /// Run a randomized verification suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct ChannelFlags {
    /// Files hold Heisenberg operators F_j = conj(K_j).
    #[arg(long)]
    pub heisenberg: bool,
    /// Skip the trace-preservation gate on ingest. `choi` then emits the
    /// kernel of any completely positive map; metrics still need a channel.
    #[arg(long)]
    pub no_validate: bool,
}

#[derive(Debug, Args)]
pub struct ChoiArgs {
    pub channel: PathBuf,
    #[command(flatten)]
    pub flags: ChannelFlags,
    /// Write here atomically instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KrausArgs {
    pub choi: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Output trace distance.
    B,
    /// CB distance.
    Cb,
    /// C-distance.
    C,
    /// CH distance (from the complete fidelity).
    Ch,
    /// Complete fidelity.
    Fid,
    All,
}

#[derive(Debug, Args)]
pub struct DistArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub metric: Metric,
    /// Evaluate at this input state instead of optimizing over states.
    #[arg(long)]
    pub rho: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    /// Random pure starts of the maximizers.
    #[arg(long, default_value_t = 16)]
    pub starts: usize,
    #[command(flatten)]
    pub flags: ChannelFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Lemma,
    Minimax,
    Inequalities,
    Representations,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    /// Comma-separated dimensions. The lemma uses them directly; the channel
    /// suites use every (m, n) pair drawn from them.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    /// Sampled decompositions per pair (lemma, minimax), channel pairs per
    /// dimension pair (inequalities) or random channels (representations).
    #[arg(long)]
    pub trials: Option<usize>,
    /// Random pairs per dimension (lemma, minimax).
    #[arg(long)]
    pub pairs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Installs the global pool when `QCHAN_THREADS` is set.
pub fn configure_threads(value: Option<&str>) -> Result<(), CliError> {
    let Some(raw) = value else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Input(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Internal(e.to_string()))
}

/// Runs one command and returns its output text and outcome.
pub fn execute(command: &Command) -> Result<(String, Outcome, Option<PathBuf>), CliError> {
    let (value, outcome, out) = match command {
        Command::Choi(a) => (cmd_choi(a)?, Outcome::Success, a.out.clone()),
        Command::Kraus(a) => (cmd_kraus(a)?, Outcome::Success, a.out.clone()),
        Command::Dist(a) => {
            let (v, o) = cmd_dist(a)?;
            (v, o, a.out.clone())
        }
        Command::Verify(a) => {
            let (v, o) = cmd_verify(a)?;
            (v, o, a.out.clone())
        }
    };
    Ok((canonical::to_string(&value), outcome, out))
}

/// Parses `args`, runs and writes the output; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads(std::env::var(THREADS_ENV).ok().as_deref()) {
        eprintln!("qchan: {e}");
        return e.exit_code();
    }
    match execute(&cli.command) {
        Ok((text, outcome, out)) => {
            let written = match out {
                Some(path) => io::write_atomic(&path, &text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("qchan: {e}");
                return e.exit_code();
            }
            match outcome {
                Outcome::NotConverged => eprintln!("qchan: optimizer did not converge; values are one-sided bounds"),
                Outcome::SuiteFailed => eprintln!("qchan: suite failed"),
                Outcome::Success => {}
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("qchan: {e}");
            e.exit_code()
        }
    }
}

fn input_entry(input: &Input) -> Value {
    json!({ "path": input.path, "sha256": input.sha256 })
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

fn read_channel(path: &Path, flags: &ChannelFlags) -> Result<(Input, io::ChannelFile, qchan::KrausChannel), CliError> {
    let input = io::read_input(path)?;
    let file: io::ChannelFile = io::parse_json(&input)?;
    let ch = io::channel_from_file(&file, flags.heisenberg, !flags.no_validate)?;
    Ok((input, file, ch))
}

pub fn cmd_choi(args: &ChoiArgs) -> Result<Value, CliError> {
    let (_, file, ch) = read_channel(&args.channel, &args.flags)?;
    if args.flags.no_validate {
        return Ok(to_value(&io::raw_kernel_to_file(&file.name, &ch)?));
    }
    let cd = density_from_kraus(&ch).map_err(CliError::input)?;
    Ok(to_value(&io::density_to_file(&file.name, &cd)))
}

pub fn cmd_kraus(args: &KrausArgs) -> Result<Value, CliError> {
    let input = io::read_input(&args.choi)?;
    let file: io::ChoiFile = io::parse_json(&input)?;
    let cd = io::density_from_file(&file)?;
    let ch = kraus_from_density(&cd).map_err(CliError::input)?;
    let name = file.name.as_deref().unwrap_or("kraus");
    Ok(to_value(&io::channel_to_file(name, &ch)))
}

#[derive(Serialize)]
struct RunEntry {
    iterations: usize,
    converged: bool,
    gap: Option<f64>,
}

impl From<&OptResult> for RunEntry {
    fn from(r: &OptResult) -> Self {
        Self {
            iterations: r.iterations,
            converged: r.converged,
            gap: r.gap,
        }
    }
}

impl From<qchan::channel_metrics::RunSummary> for RunEntry {
    fn from(r: qchan::channel_metrics::RunSummary) -> Self {
        Self {
            iterations: r.iterations,
            converged: r.converged,
            gap: r.gap,
        }
    }
}

#[derive(Default)]
struct DistResults {
    metrics: BTreeMap<&'static str, f64>,
    witnesses: BTreeMap<&'static str, StateFile>,
    convergence: BTreeMap<&'static str, RunEntry>,
}

impl DistResults {
    fn run(&mut self, key: &'static str, r: &OptResult) {
        self.witnesses.insert(key, io::state_to_file(&r.witness));
        self.convergence.insert(key, RunEntry::from(r));
    }

    fn converged(&self) -> bool {
        self.convergence.values().all(|r| r.converged)
    }
}

fn conditional_results(pair: &ChannelPair, rho: &DensityOperator, metric: Metric) -> Result<DistResults, CliError> {
    let c = pair.conditional(rho).map_err(CliError::internal)?;
    let mut out = DistResults::default();
    let m = &mut out.metrics;
    let all = metric == Metric::All;
    if all || metric == Metric::B {
        m.insert("d_b_rho", c.d_b_rho);
    }
    if all || metric == Metric::Cb {
        m.insert("d_cb_rho", c.d_cb_rho);
    }
    if all || metric == Metric::C {
        m.insert("d_c", pair.c_distance());
    }
    if all || metric == Metric::Ch {
        m.insert("d_ch_rho", c.d_c_rho);
    }
    if all || metric == Metric::Ch || metric == Metric::Fid {
        m.insert("f_c_rho", c.f_c_rho);
    }
    if all {
        m.insert("f_out_rho", c.f_out_rho);
        m.insert("d_h_rho", bures_from_fidelity(c.f_out_rho));
    }
    Ok(out)
}

fn optimized_results(pair: &ChannelPair, metric: Metric, cfg: &OptimizerConfig) -> Result<DistResults, CliError> {
    let mut out = DistResults::default();
    let m = pair.dim_in();
    match metric {
        Metric::All => {
            let r = pair.full_metrics(cfg).map_err(CliError::internal)?;
            out.metrics.extend([
                ("d_b", r.d_b),
                ("d_cb", r.d_cb),
                ("d_c", r.d_c),
                ("d_ch", r.ch),
                ("f_c", r.f_c),
                ("d_h", r.d_h),
            ]);
            let w = &r.witnesses;
            let c = &r.convergence;
            for (key, rho, run) in [("b", &w.b, c.b), ("cb", &w.cb, c.cb), ("fc", &w.fc, c.fc), ("h", &w.h, c.h)] {
                out.witnesses.insert(key, io::state_to_file(rho));
                out.convergence.insert(key, run.into());
            }
        }
        Metric::B => {
            let r = maximize_over_states(|x| pair.output_at(x).map(|o| o.d_b_rho), m, cfg)
                .map_err(CliError::internal)?;
            out.metrics.insert("d_b", r.value);
            out.run("b", &r);
        }
        Metric::Cb => {
            let r = maximize_over_states(|x| pair.cb_at(x), m, cfg).map_err(CliError::internal)?;
            out.metrics.insert("d_cb", r.value);
            out.run("cb", &r);
        }
        Metric::C => {
            out.metrics.insert("d_c", pair.c_distance());
        }
        Metric::Ch | Metric::Fid => {
            let r = frank_wolfe(pair, cfg).map_err(CliError::internal)?;
            out.metrics.insert("f_c", r.value);
            if metric == Metric::Ch {
                out.metrics.insert("d_ch", bures_from_fidelity(r.value));
            }
            out.run("fc", &r);
        }
    }
    Ok(out)
}

pub fn cmd_dist(args: &DistArgs) -> Result<(Value, Outcome), CliError> {
    let (in_a, _, phi) = read_channel(&args.a, &args.flags)?;
    let (in_b, _, psi) = read_channel(&args.b, &args.flags)?;
    let pair = ChannelPair::new(&phi, &psi).map_err(CliError::input)?;
    let cfg = OptimizerConfig {
        tol: args.tol,
        max_iter: args.max_iter,
        n_starts: args.starts,
        seed: args.seed,
        ..OptimizerConfig::default()
    };
    cfg.validate().map_err(CliError::input)?;

    let mut inputs = serde_json::Map::new();
    inputs.insert("a".into(), input_entry(&in_a));
    inputs.insert("b".into(), input_entry(&in_b));
    let results = match &args.rho {
        Some(path) => {
            let input = io::read_input(path)?;
            let rho = io::state_from_file(&io::parse_json(&input)?)?;
            if rho.dim() != pair.dim_in() {
                return Err(CliError::Input(format!(
                    "state has dimension {}, channels take dimension {}",
                    rho.dim(),
                    pair.dim_in()
                )));
            }
            inputs.insert("rho".into(), input_entry(&input));
            conditional_results(&pair, &rho, args.metric)?
        }
        None => optimized_results(&pair, args.metric, &cfg)?,
    };

    let outcome = if results.converged() {
        Outcome::Success
    } else {
        Outcome::NotConverged
    };
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": {
            "name": "dist",
            "metric": to_value(&args.metric),
            "conditional": args.rho.is_some(),
            "heisenberg": args.flags.heisenberg,
            "validate": !args.flags.no_validate,
            "config": {
                "tol": cfg.tol,
                "max_iter": cfg.max_iter,
                "n_starts": cfg.n_starts,
                "seed": cfg.seed,
                "grid_resolution": cfg.grid_resolution,
            },
        },
        "inputs": inputs,
        "metrics": to_value(&results.metrics),
        "witnesses": to_value(&results.witnesses),
        "convergence": to_value(&results.convergence),
        "converged": outcome == Outcome::Success,
    });
    Ok((report, outcome))
}

fn channel_dims(dims: &[usize]) -> Result<Vec<(usize, usize)>, CliError> {
    let pairs: Vec<(usize, usize)> = dims.iter().flat_map(|&m| dims.iter().map(move |&n| (m, n))).collect();
    if let Some(bad) = pairs.iter().find(|p| !SUITE_DIMS.contains(p)) {
        return Err(CliError::Input(format!(
            "dimension pair {bad:?} not supported; channel suites take dimensions from {{2, 3}}"
        )));
    }
    Ok(pairs)
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<(Value, Outcome), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let dims = args.dims.clone();
    let trials = args.trials;
    let pairs = args.pairs;
    let report: SuiteReport = match args.suite {
        Suite::Lemma => {
            let dims = dims.unwrap_or_else(|| vec![2, 3, 4]);
            if dims.contains(&0) {
                return Err(CliError::Input("lemma dimensions must be positive".into()));
            }
            verify::lemma_suite(&dims, pairs.unwrap_or(20), trials.unwrap_or(1000), &mut rng)
        }
        Suite::Minimax => {
            let dims = channel_dims(&dims.unwrap_or_else(|| vec![2, 3]))?;
            verify::minimax_suite(&dims, pairs.unwrap_or(10), trials.unwrap_or(1000), &mut rng)
        }
        Suite::Inequalities => {
            let dims = channel_dims(&dims.unwrap_or_else(|| vec![2, 3]))?;
            verify::inequality_suite(&dims, trials.unwrap_or(50), &mut rng, &OptimizerConfig::default())
        }
        Suite::Representations => verify::representation_suite(trials.unwrap_or(100), &mut rng),
    }
    .map_err(|e| match e {
        qchan::Error::OutOfRange(_) | qchan::Error::DimensionMismatch(_) => CliError::input(e),
        other => CliError::internal(other),
    })?;

    let outcome = if report.pass {
        Outcome::Success
    } else {
        Outcome::SuiteFailed
    };
    let value = json!({
        "schema_version": SCHEMA_VERSION,
        "command": {
            "name": "verify",
            "suite": to_value(&args.suite),
            "dims": args.dims,
            "trials": args.trials,
            "pairs": args.pairs,
            "seed": args.seed,
        },
        "inputs": {},
        "metrics": to_value(&report.metrics),
        "suite": to_value(&report),
        "pass": report.pass,
    });
    Ok((value, outcome))
}
