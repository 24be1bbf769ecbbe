//! Command-line surface.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use blackout_core::eval::tv_to_dataset;
use blackout_core::loss::LossKind;
use blackout_core::pipeline::{self, GenConfig, PoissonStep, Rounding, Sampler, TrainConfig};
use blackout_core::predictor::{BayesOracle, MlpParams, MlpPredictor, Predictor};
use blackout_core::pure_death::PureDeathLaw;
use blackout_core::rng::sample_stream;
use blackout_core::schedule::Schedule;
use blackout_core::StateSpace;

use crate::formats;
use crate::parallel::map_indices;
use crate::validate::{self, Check, Suite};

/// Environment variable that overrides `--out`.
pub const OUT_ENV: &str = "BD_OUT";

#[derive(Debug, Parser)]
#[command(name = "blackout", version, about = "Exact discrete-state diffusion: schedules, simulation, training, generation and validation")]
pub struct Cli {
    /// Directory for output files (overridden by BD_OUT).
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Worker threads for sample-parallel commands.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the Fisher observation times to schedule.csv.
    Schedule {
        #[arg(long = "T")]
        steps: usize,
        #[arg(long)]
        horizon: f64,
    },
    /// Sample X_t given X_0 = o and compare with the exact law (simulate.csv).
    Simulate(SimulateArgs),
    /// Train a network on a dataset (model.mlp, loss.csv).
    Train(TrainArgs),
    /// Generate samples (samples.txt, optional PGM images).
    Generate(GenerateArgs),
    /// Run validation suites (validate.csv); exit code 1 if any check fails.
    Validate {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long = "M", default_value_t = 8)]
        max_label: u32,
        /// Required by the randomized suites (reverse, loss, all).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
    },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// `pure-death` or a generator file.
    #[arg(long)]
    pub process: String,
    #[arg(long)]
    pub o: u32,
    #[arg(long)]
    pub t: f64,
    #[arg(long)]
    pub paths: usize,
    #[arg(long)]
    pub seed: u64,
    /// Largest label for pure death (defaults to o).
    #[arg(long = "M")]
    pub max_label: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Inst,
    Finite,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum)]
    pub loss: LossArg,
    #[arg(long = "T")]
    pub steps: usize,
    #[arg(long)]
    pub iters: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 15.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 64)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    /// Hidden layer sizes.
    #[arg(long, value_delimiter = ',', default_values_t = vec![16usize])]
    pub hidden: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerArg {
    Bridge,
    Poisson,
    Tau,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RoundingArg {
    Nearest,
    Stochastic,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// A network file, or `oracle` for the exact posterior mean over --dataset.
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub sampler: SamplerArg,
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long = "T", default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 15.0)]
    pub horizon: f64,
    /// Largest label when --model is a file and no --dataset is given.
    #[arg(long = "M")]
    pub max_label: Option<u32>,
    #[arg(long, value_enum, default_value_t = RoundingArg::Nearest)]
    pub rounding: RoundingArg,
    /// Use the Poisson rate with no step factor.
    #[arg(long)]
    pub verbatim_poisson: bool,
    /// Also write the first N samples as PGM images (square N only).
    #[arg(long, default_value_t = 0)]
    pub pgm: usize,
}

/// Output directory after applying the environment override.
pub fn output_dir(cli: &Cli) -> PathBuf {
    match std::env::var_os(OUT_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => cli.out.clone(),
    }
}

/// Run a parsed command; `Ok(false)` means a requested check failed.
pub fn run(cli: &Cli) -> anyhow::Result<bool> {
    let out = output_dir(cli);
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let threads = cli.threads.max(1);
    match &cli.command {
        Command::Schedule { steps, horizon } => schedule(&out, *steps, *horizon),
        Command::Simulate(args) => simulate(&out, args, threads),
        Command::Train(args) => train(&out, args),
        Command::Generate(args) => generate(&out, args, threads),
        Command::Validate { suite, max_label, seed, paths } => {
            let seed = match (seed, suite.is_randomized()) {
                (Some(s), _) => *s,
                (None, false) => 0,
                (None, true) => bail!("suite {} is randomized and requires --seed", suite.name()),
            };
            let opts = validate::Options { max_label: *max_label, seed, paths: *paths };
            let checks = validate::run(*suite, &opts)?;
            write_checks(&out.join("validate.csv"), &checks)?;
            for c in &checks {
                println!("{} {}/{}: {:e} ({:e})", if c.pass() { "PASS" } else { "FAIL" }, c.suite, c.name, c.value, c.tolerance);
            }
            Ok(checks.iter().all(Check::pass))
        }
    }
}

fn write_checks(path: &Path, checks: &[Check]) -> anyhow::Result<()> {
    let rows: Vec<Vec<String>> = checks.iter().map(Check::csv_row).collect();
    formats::save(path, |w| formats::write_csv(w, &Check::CSV_HEADER, &rows))?;
    Ok(())
}

fn schedule(out: &Path, steps: usize, horizon: f64) -> anyhow::Result<bool> {
    let s = Schedule::fisher(steps, horizon)?;
    let rows: Vec<Vec<String>> = (1..=steps)
        .map(|k| vec![k.to_string(), s.time(k).to_string(), s.survival(k).to_string()])
        .collect();
    formats::save(&out.join("schedule.csv"), |w| formats::write_csv(w, &["k", "t", "survival"], &rows))?;
    Ok(true)
}

fn simulate(out: &Path, args: &SimulateArgs, threads: usize) -> anyhow::Result<bool> {
    let (counts, exact) = if args.process == "pure-death" {
        let max = args.max_label.unwrap_or(args.o);
        let law = PureDeathLaw::new(StateSpace::new(max, 1)?);
        let mut exact = law.forward_pmf(args.o, args.t)?;
        exact.resize(max as usize + 1, 0.0);
        let draws = map_indices(args.paths, threads, |i| {
            law.sample_forward(&[args.o], args.t, &mut sample_stream(args.seed, i, 0, 0)).map(|x| x[0])
        })?;
        (histogram(&draws, max), exact)
    } else {
        let g = formats::load_generator(Path::new(&args.process))?;
        let p0 = blackout_core::ctmc::Distribution::point(g.size(), args.o)?;
        let exact = g.forward_solve(&p0, args.t)?.probs().to_vec();
        let draws = map_indices(args.paths, threads, |i| {
            g.simulate_exact(args.o, args.t, &mut sample_stream(args.seed, i, 0, 0))
        })?;
        (histogram(&draws, g.max_label()), exact)
    };
    let n = args.paths.max(1) as f64;
    let rows: Vec<Vec<String>> = counts
        .iter()
        .zip(&exact)
        .enumerate()
        .map(|(m, (&c, &p))| vec![m.to_string(), c.to_string(), (c as f64 / n).to_string(), p.to_string()])
        .collect();
    formats::save(&out.join("simulate.csv"), |w| formats::write_csv(w, &["m", "count", "empirical", "exact"], &rows))?;
    Ok(true)
}

fn histogram(draws: &[u32], max: u32) -> Vec<u64> {
    let mut counts = vec![0u64; max as usize + 1];
    for &d in draws {
        counts[d as usize] += 1;
    }
    counts
}

fn train(out: &Path, args: &TrainArgs) -> anyhow::Result<bool> {
    let ds = formats::load_dataset(&args.dataset)?;
    let space = *ds.space();
    let mut sizes = vec![space.dims() + 2];
    sizes.extend(&args.hidden);
    sizes.push(space.dims());
    let mut rng = sample_stream(args.seed, u64::MAX - 1, 0, 0);
    let mut net = MlpPredictor::new(MlpParams::random(&sizes, &mut rng)?, space)?;
    let cfg = TrainConfig {
        loss: match args.loss {
            LossArg::Inst => LossKind::Instantaneous,
            LossArg::Finite => LossKind::FiniteTime,
        },
        batch: args.batch,
        iterations: args.iters,
        learning_rate: args.lr,
        momentum: args.momentum,
        seed: args.seed,
        steps: args.steps,
        horizon: args.horizon,
    };
    let trace = pipeline::train(&ds, &mut net, &cfg)?;
    formats::save(&out.join("model.mlp"), |w| Ok(formats::write_mlp(w, net.params())?))?;
    let rows: Vec<Vec<String>> = trace.iter().enumerate().map(|(i, l)| vec![(i + 1).to_string(), l.to_string()]).collect();
    formats::save(&out.join("loss.csv"), |w| formats::write_csv(w, &["iteration", "loss"], &rows))?;
    Ok(true)
}

fn generate(out: &Path, args: &GenerateArgs, threads: usize) -> anyhow::Result<bool> {
    let ds = args.dataset.as_deref().map(formats::load_dataset).transpose()?;
    let sched = Schedule::fisher(args.steps, args.horizon)?;
    let cfg = GenConfig {
        sampler: match args.sampler {
            SamplerArg::Bridge => Sampler::BinomialBridge,
            SamplerArg::Poisson => Sampler::Poisson,
            SamplerArg::Tau => Sampler::TauLeapingGeneral,
        },
        count: args.count,
        seed: args.seed,
        rounding: match args.rounding {
            RoundingArg::Nearest => Rounding::Nearest,
            RoundingArg::Stochastic => Rounding::Stochastic,
        },
        poisson_step: if args.verbatim_poisson { PoissonStep::Verbatim } else { PoissonStep::Integrated },
    };
    cfg.validate()?;
    let (space, samples) = if args.model == "oracle" {
        let ds = ds.as_ref().ok_or_else(|| anyhow!("--model oracle needs --dataset"))?;
        let oracle = BayesOracle::new(ds);
        (*ds.space(), run_generation(&oracle, ds.space(), &sched, &cfg, threads)?)
    } else {
        let params = formats::load_mlp(Path::new(&args.model))?;
        let max = match (&ds, args.max_label) {
            (Some(ds), _) => ds.space().max_label(),
            (None, Some(m)) => m,
            (None, None) => bail!("a network model needs --dataset or --M for the label range"),
        };
        let dims = params.output_size();
        let net = MlpPredictor::new(params, StateSpace::new(max, dims)?)?;
        (*net.space(), run_generation(&net, net.space(), &sched, &cfg, threads)?)
    };
    formats::save(&out.join("samples.txt"), |w| Ok(formats::write_samples(w, &space, &samples)?))?;
    for (i, x) in samples.iter().take(args.pgm).enumerate() {
        formats::save(&out.join(format!("sample_{i:05}.pgm")), |w| formats::write_pgm(w, &space, x))?;
    }
    if let Some(ds) = &ds {
        let tv = tv_to_dataset(&samples, ds)?;
        let rows = vec![vec![samples.len().to_string(), tv.to_string()]];
        formats::save(&out.join("generate_report.csv"), |w| formats::write_csv(w, &["count", "tv_to_dataset"], &rows))?;
    }
    Ok(true)
}

fn run_generation<P: Predictor + Sync>(
    predictor: &P,
    space: &StateSpace,
    sched: &Schedule,
    cfg: &GenConfig,
    threads: usize,
) -> anyhow::Result<Vec<Vec<u32>>> {
    Ok(map_indices(cfg.count, threads, |i| pipeline::generate_sample(predictor, space, sched, cfg, i))?)
}

