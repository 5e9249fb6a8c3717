//! Command-line front-end: `gen`, `learn`, `eval` and `bench`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{distance_exact, distance_sampled, write_csv, CsvRow, DistanceReport, EXACT_CAP};
use crate::model::{generate_instance, InstanceKind, InstanceSpec, Model};
use crate::oracle::{build_replay_table, derive_seed, transcript, LiveOracle, Oracle, StreamKey};
use crate::weights::{learn_adaptive, learn_balanced, learn_nonadaptive, Learned};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mnlearn", version, about = "Learn MNL choice models from a simulated MaxSample oracle")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write an instance file.
    Gen(GenArgs),
    /// Learn a model from a simulated oracle.
    Learn(LearnArgs),
    /// Compare two model files.
    Eval(EvalArgs),
    /// Sweep n and eps and record query counts.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Adaptive,
    Balanced,
    Nonadaptive,
}

impl Algo {
    fn name(self) -> &'static str {
        match self {
            Algo::Adaptive => "adaptive",
            Algo::Balanced => "balanced",
            Algo::Nonadaptive => "nonadaptive",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Exact when n <= 20, sampled otherwise.
    Auto,
    Exact,
    Sampled,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// uniform | geometric:RHO | power-law:GAMMA | two-scale:K | explicit:W,.. | pseudo-mnl:P,..[/PI,..]
    #[arg(long)]
    pub instance: String,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Instance spec (as for `gen`) or path to an instance file.
    #[arg(long)]
    pub instance: String,
    #[arg(long, value_enum, default_value_t = Algo::Adaptive)]
    pub algo: Algo,
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub trials: u64,
    /// Answers per pair for the non-adaptive learner (integer or scientific notation).
    #[arg(long, value_parser = parse_count)]
    pub m: Option<u128>,
    /// Fresh-seed retries after a balanced-builder failure.
    #[arg(long, default_value_t = 0)]
    pub retries: u64,
    #[arg(long, value_enum, default_value_t = Mode::Auto)]
    pub mode: Mode,
    /// Slates examined in sampled mode.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub n: Option<usize>,
    /// Output directory for model files and results.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the replay table as a binary transcript (non-adaptive only).
    #[arg(long)]
    pub transcript: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub model_a: PathBuf,
    pub model_b: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Auto)]
    pub mode: Mode,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the report as a CSV row.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated item counts.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    /// Comma-separated accuracies; overrides --eps.
    #[arg(long = "eps-list", value_delimiter = ',')]
    pub eps_list: Vec<f64>,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_count(s: &str) -> std::result::Result<u128, String> {
    if let Ok(x) = s.parse::<u128>() {
        return Ok(x);
    }
    match s.parse::<f64>() {
        Ok(x) if x >= 1.0 && x.is_finite() && x < 3.4e38 => Ok(x.round() as u128),
        _ => Err(format!("{s:?} is not a positive count")),
    }
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::BudgetExhausted { .. } => EXIT_BUDGET,
        Error::BalancedFailure { .. } | Error::GeometricCap { .. } | Error::Invariant(_) | Error::NonPairQuery(_) => {
            EXIT_FAILURE
        }
        _ => EXIT_USAGE,
    }
}

pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a).map(|_| EXIT_OK),
        Command::Learn(a) => cmd_learn(&a),
        Command::Eval(a) => cmd_eval(&a).map(|_| EXIT_OK),
        Command::Bench(a) => cmd_bench(&a),
    }
}

fn load_instance(instance: &str, n: Option<usize>, seed: u64) -> Result<Model> {
    let path = Path::new(instance);
    if path.is_file() {
        let m = Model::read(path)?;
        if let Some(n) = n.filter(|&n| n != m.n()) {
            return Err(Error::arg(format!("--n {n} disagrees with the {} items in {instance}", m.n())));
        }
        return Ok(m);
    }
    let kind: InstanceKind = instance.parse()?;
    let n = match (&kind, n) {
        (_, Some(n)) => n,
        (InstanceKind::Explicit { log_weights }, None) => log_weights.len(),
        (InstanceKind::PseudoMnl { p, .. }, None) => 2 * p.len(),
        _ => return Err(Error::arg("--n is required for this instance kind")),
    };
    generate_instance(&InstanceSpec::new(n, kind, seed))
}

pub fn cmd_gen(a: &GenArgs) -> Result<()> {
    let m = load_instance(&a.instance, a.n, a.seed)?;
    m.write(&a.out)
}

fn distance(truth: &Model, learned: &Model, mode: Mode, samples: usize, key: StreamKey) -> Result<DistanceReport> {
    let exact = match mode {
        Mode::Exact => true,
        Mode::Sampled => false,
        Mode::Auto => truth.n() <= EXACT_CAP,
    };
    if exact {
        distance_exact(truth, learned)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[key.seed, key.trial, 0x6576_616c]));
        distance_sampled(truth, learned, samples, &mut rng)
    }
}

/// One learning run with its query accounting.
pub struct TrialOutcome {
    pub trial: u64,
    pub retries: u64,
    pub learned: Learned,
    pub total_queries: u128,
    pub max_pair_queries: u128,
    pub seconds: f64,
}

/// Runs one trial, retrying balanced-builder failures with derived seeds.
pub fn run_trial(truth: &Model, run: &RunArgs, eps: f64, trial: u64) -> Result<TrialOutcome> {
    let base = StreamKey::new(run.seed, trial);
    let mut attempt = 0;
    loop {
        let key = base.retry(attempt);
        let start = Instant::now();
        let mut oracle = LiveOracle::new(truth.clone(), key);
        let mut rng = key.algo_rng();
        let result = match run.algo {
            Algo::Adaptive => learn_adaptive(&mut oracle, eps, run.delta, &mut rng),
            Algo::Balanced => learn_balanced(&mut oracle, eps, run.delta, &mut rng),
            Algo::Nonadaptive => {
                let m = run.m.ok_or_else(|| Error::arg("--m is required for the nonadaptive learner"))?;
                learn_nonadaptive(&mut oracle, eps, run.delta, m, &mut rng)
            }
        };
        match result {
            Ok(learned) => {
                let ledger = oracle.ledger();
                return Ok(TrialOutcome {
                    trial,
                    retries: attempt,
                    learned,
                    total_queries: ledger.total(),
                    max_pair_queries: ledger.max_pair_count(),
                    seconds: start.elapsed().as_secs_f64(),
                });
            }
            Err(Error::BalancedFailure { .. }) if attempt < run.retries => attempt += 1,
            Err(e) => return Err(e),
        }
    }
}

fn run_trials(truth: &Model, run: &RunArgs, eps: f64) -> Vec<Result<(TrialOutcome, DistanceReport)>> {
    (0..run.trials)
        .into_par_iter()
        .map(|t| {
            let out = run_trial(truth, run, eps, t)?;
            let model: Model = out.learned.model.clone().into();
            let d = distance(truth, &model, run.mode, run.samples, StreamKey::new(run.seed, t))?;
            Ok((out, d))
        })
        .collect()
}

fn row(n: usize, eps: f64, run: &RunArgs, o: &TrialOutcome, d: &DistanceReport) -> CsvRow {
    CsvRow {
        n,
        eps,
        delta: run.delta,
        algo: run.algo.name().to_string(),
        trial: o.trial,
        d1: d.d1,
        dinf: d.dinf,
        total_queries: o.total_queries,
        max_pair_queries: o.max_pair_queries,
        seconds: o.seconds,
    }
}

fn check_run(run: &RunArgs, eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0 && run.delta > 0.0 && run.delta < 1.0) {
        return Err(Error::arg("eps and delta must lie in (0, 1)"));
    }
    if run.trials == 0 {
        return Err(Error::arg("--trials must be at least 1"));
    }
    if run.algo == Algo::Nonadaptive && run.m.is_none() {
        return Err(Error::arg("--m is required for the nonadaptive learner"));
    }
    Ok(())
}

/// Collects rows; reports failures on stderr and returns the exit code of
/// the first one.
fn settle(
    results: Vec<Result<(TrialOutcome, DistanceReport)>>,
    mut each: impl FnMut(&TrialOutcome, &DistanceReport) -> Result<()>,
) -> Result<i32> {
    let mut code = EXIT_OK;
    for (t, r) in results.into_iter().enumerate() {
        match r {
            Ok((o, d)) => {
                if o.retries > 0 {
                    eprintln!("trial {t}: succeeded after {} retries", o.retries);
                }
                each(&o, &d)?;
            }
            Err(e) => {
                eprintln!("trial {t}: {e}");
                if code == EXIT_OK {
                    code = exit_code(&e);
                }
            }
        }
    }
    Ok(code)
}

pub fn cmd_learn(a: &LearnArgs) -> Result<i32> {
    let run = &a.run;
    check_run(run, run.eps)?;
    let truth = load_instance(&run.instance, a.n, run.seed)?;
    if let Some(path) = &a.transcript {
        let m = run.m.filter(|_| run.algo == Algo::Nonadaptive);
        let m = m.ok_or_else(|| Error::arg("--transcript needs the nonadaptive learner and --m"))?;
        let mut oracle = LiveOracle::new(truth.clone(), StreamKey::new(run.seed, 0));
        let triples = build_replay_table(&mut oracle, m)?.transcript(1 << 26)?;
        transcript::write(std::io::BufWriter::new(fs::File::create(path)?), truth.n(), &triples)?;
    }
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
    }
    let results = run_trials(&truth, run, run.eps);
    let mut rows = Vec::new();
    let code = settle(results, |o, d| {
        if let Some(dir) = &a.out {
            Model::from(o.learned.model.clone()).write(&dir.join(format!("model-{}.json", o.trial)))?;
        }
        rows.push(row(truth.n(), run.eps, run, o, d));
        Ok(())
    })?;
    match &a.out {
        Some(dir) => write_csv(fs::File::create(dir.join("results.csv"))?, &rows)?,
        None => write_csv(std::io::stdout().lock(), &rows)?,
    }
    Ok(code)
}

pub fn cmd_eval(a: &EvalArgs) -> Result<DistanceReport> {
    let ma = Model::read(&a.model_a)?;
    let mb = Model::read(&a.model_b)?;
    let r = distance(&ma, &mb, a.mode, a.samples, StreamKey::new(a.seed, 0))?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", serde_json::to_string(&r)?)?;
    if let Some(path) = &a.out {
        let mut w = csv::Writer::from_writer(fs::File::create(path)?);
        w.write_record(["mode", "d1", "dinf", "argmax_slate"])?;
        let mode = match r.mode {
            crate::metrics::DistanceMode::Exact => "exact".to_string(),
            crate::metrics::DistanceMode::Sampled(k) => format!("sampled:{k}"),
        };
        let slate: Vec<String> = r.argmax_slate.iter().map(|x| x.to_string()).collect();
        w.write_record([mode, r.d1.to_string(), r.dinf.to_string(), slate.join(" ")])?;
        w.flush()?;
    }
    Ok(r)
}

pub fn cmd_bench(a: &BenchArgs) -> Result<i32> {
    let run = &a.run;
    let eps_list = if a.eps_list.is_empty() { vec![run.eps] } else { a.eps_list.clone() };
    let mut rows = Vec::new();
    let mut code = EXIT_OK;
    for &n in &a.n {
        let truth = load_instance(&run.instance, Some(n), run.seed)?;
        for &eps in &eps_list {
            check_run(run, eps)?;
            let c = settle(run_trials(&truth, run, eps), |o, d| {
                rows.push(row(n, eps, run, o, d));
                Ok(())
            })?;
            if code == EXIT_OK {
                code = c;
            }
        }
    }
    match &a.out {
        Some(path) => write_csv(fs::File::create(path)?, &rows)?,
        None => write_csv(std::io::stdout().lock(), &rows)?,
    }
    Ok(code)
}
