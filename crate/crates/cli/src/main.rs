//! `coarseset`: generate synthetic embeddings, compute annotation orderings,
//! run budget sweeps and class histograms.
//!
//! Exit codes: 0 success, 2 usage or input error, 1 internal failure.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use coarseset::harness::{self, BudgetSchedule, LabeledSet, Method, SweepConfig};
use coarseset::selector::{self, SelectionConfig, SelectionOrder};
use coarseset::synth::{self, MixtureSpec};
use coarseset::{Embeddings, LabelVector, Metric, TrainConfig};

use config::Merge;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or invalid inputs.
    Input(String),
    /// Failure not attributable to the inputs.
    Internal(String),
}

impl From<coarseset::Error> for CliError {
    fn from(e: coarseset::Error) -> Self {
        if e.is_internal() {
            CliError::Internal(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "coarseset", version, about = "Model-agnostic annotation orderings by k-center greedy selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Order every point for labelling (full k-center greedy permutation).
    Order(OrderArgs),
    /// Like `order`, truncated to the first BUDGET points (seeds included).
    Select(SelectArgs),
    /// Compare selection methods by proxy test accuracy across budgets.
    Sweep(SweepArgs),
    /// Count classes among the first BUDGET entries of an order file.
    Histogram(HistogramArgs),
    /// Write a Gaussian-mixture dataset as EMB1 + LAB1 files.
    GenSynth(GenSynthArgs),
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct OrderArgs {
    /// Embedding file (EMB1 or headerless CSV).
    #[arg(long, value_name = "PATH")]
    embeddings: Option<PathBuf>,
    /// Order file to write.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Distance: sqeuclidean, euclidean or cosine [default: sqeuclidean].
    #[arg(long, value_name = "M")]
    metric: Option<Metric>,
    /// Number of random initial centers [default: 1].
    #[arg(long, value_name = "K")]
    seed_count: Option<usize>,
    /// Seed for drawing initial centers [default: $COARSESET_RNG_SEED, else 0].
    #[arg(long, value_name = "S")]
    rng_seed: Option<u64>,
    /// Explicit initial centers, comma-separated; excludes --seed-count and --rng-seed.
    #[arg(long, value_name = "LIST", value_delimiter = ',', conflicts_with_all = ["seed_count", "rng_seed"])]
    seed_indices: Option<Vec<usize>>,
    /// JSON file providing any of these flags; flags win.
    #[arg(long, value_name = "PATH")]
    #[serde(skip)]
    config: Option<PathBuf>,
}
impl_merge!(OrderArgs { embeddings, out, metric, seed_count, rng_seed, seed_indices });

#[derive(Args, Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
struct SelectArgs {
    #[command(flatten)]
    #[serde(flatten)]
    order: OrderArgs,
    /// Total labels to select, initial centers included (required).
    #[arg(long, value_name = "B")]
    budget: Option<usize>,
}

impl Merge for SelectArgs {
    fn merge(self, file: Self) -> Self {
        Self {
            order: self.order.merge(file.order),
            budget: self.budget.or(file.budget),
        }
    }
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct SweepArgs {
    /// Training pool embeddings.
    #[arg(long, value_name = "PATH")]
    train_emb: Option<PathBuf>,
    /// Training pool labels.
    #[arg(long, value_name = "PATH")]
    train_lab: Option<PathBuf>,
    /// Test embeddings (disjoint from the pool).
    #[arg(long, value_name = "PATH")]
    test_emb: Option<PathBuf>,
    /// Test labels.
    #[arg(long, value_name = "PATH")]
    test_lab: Option<PathBuf>,
    /// Strictly increasing label budgets, comma-separated [default: 9 steps from 2% to 40% of the pool].
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    budgets: Option<Vec<usize>>,
    /// Methods, comma-separated, from random, coreset_iterative, fixed_feature [default: all].
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Trials per (method, budget); trial t uses seed rng-seed + t [default: 20].
    #[arg(long, value_name = "T")]
    trials: Option<usize>,
    /// Output directory for results.csv and summary.csv; an existing results.csv is resumed.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Distance for greedy selection [default: sqeuclidean].
    #[arg(long, value_name = "M")]
    metric: Option<Metric>,
    /// Random initial centers of the fixed-feature ordering [default: 1].
    #[arg(long, value_name = "K")]
    seed_count: Option<usize>,
    /// Base seed [default: $COARSESET_RNG_SEED, else 0].
    #[arg(long, value_name = "S")]
    rng_seed: Option<u64>,
    /// Proxy training epochs [default: 100].
    #[arg(long, value_name = "N")]
    epochs: Option<usize>,
    /// Proxy mini-batch size [default: 32].
    #[arg(long, value_name = "N")]
    batch_size: Option<usize>,
    /// Proxy SGD learning rate [default: 0.05].
    #[arg(long, value_name = "LR")]
    learning_rate: Option<f64>,
    /// Proxy hidden width [default: 32].
    #[arg(long, value_name = "H")]
    hidden: Option<usize>,
    /// Class count override when some class is absent from the label files [default: inferred].
    #[arg(long, value_name = "C")]
    num_classes: Option<usize>,
    /// Worker threads [default: number of cores].
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    /// JSON file providing any of these flags; flags win.
    #[arg(long, value_name = "PATH")]
    #[serde(skip)]
    config: Option<PathBuf>,
}
impl_merge!(SweepArgs {
    train_emb, train_lab, test_emb, test_lab, budgets, methods, trials, out, metric, seed_count,
    rng_seed, epochs, batch_size, learning_rate, hidden, num_classes, jobs,
});

#[derive(Args, Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct HistogramArgs {
    /// Order file written by `order` or `select`.
    #[arg(long, value_name = "PATH")]
    order: Option<PathBuf>,
    /// Labels (LAB1 or one integer per line).
    #[arg(long, value_name = "PATH")]
    labels: Option<PathBuf>,
    /// Prefix length to count (required).
    #[arg(long, value_name = "B")]
    budget: Option<usize>,
    /// Histogram CSV to write.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Class count override [default: 1 + max label].
    #[arg(long, value_name = "C")]
    num_classes: Option<usize>,
    /// JSON file providing any of these flags; flags win.
    #[arg(long, value_name = "PATH")]
    #[serde(skip)]
    config: Option<PathBuf>,
}
impl_merge!(HistogramArgs { order, labels, budget, out, num_classes });

#[derive(Args, Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct GenSynthArgs {
    /// Mixture spec: a JSON file path or inline JSON [default: 10 classes x 100 points, d=16, separation 6, std 1].
    #[arg(long, value_name = "JSON")]
    spec: Option<String>,
    /// Writes <PREFIX>.emb and <PREFIX>.lab.
    #[arg(long, value_name = "PREFIX")]
    out_prefix: Option<PathBuf>,
    /// Also write a test split sharing the centers to <PREFIX>.emb/.lab.
    #[arg(long, value_name = "PREFIX")]
    test_prefix: Option<PathBuf>,
    /// Overrides the spec's rng_seed [default: spec value, else $COARSESET_RNG_SEED, else 0].
    #[arg(long, value_name = "S")]
    rng_seed: Option<u64>,
    /// JSON file providing any of these flags; flags win.
    #[arg(long, value_name = "PATH")]
    #[serde(skip)]
    config: Option<PathBuf>,
}
impl_merge!(GenSynthArgs { spec, out_prefix, test_prefix, rng_seed });

fn required<T>(v: Option<T>, flag: &str) -> CliResult<T> {
    v.ok_or_else(|| CliError::Input(format!("missing required flag --{flag}")))
}

fn internal_io(path: &Path, e: std::io::Error) -> CliError {
    CliError::Internal(format!("cannot write {}: {e}", path.display()))
}

/// Flags and config values are merged before this runs, so a conflict
/// between the two sources is caught here too.
fn check_seed_flags(args: &OrderArgs) -> CliResult {
    if args.seed_indices.is_some() && (args.seed_count.is_some() || args.rng_seed.is_some()) {
        return Err(CliError::Input(
            "--seed-indices cannot be combined with --seed-count or --rng-seed".into(),
        ));
    }
    Ok(())
}

/// Greedy order with `picks` greedy additions after the seeds.
fn compute_order(args: &OrderArgs, e: &Embeddings, picks: impl Fn(usize) -> usize) -> CliResult<SelectionOrder> {
    let metric = args.metric.unwrap_or_default();
    if let Some(seeds) = &args.seed_indices {
        let budget = picks(seeds.len()).min(e.n().saturating_sub(seeds.len()));
        return Ok(selector::kcenter_greedy(e, seeds, budget, metric)?);
    }
    let seed_count = args.seed_count.unwrap_or(1);
    if seed_count == 0 || seed_count > e.n() {
        return Err(CliError::Input(format!(
            "--seed-count must be between 1 and the number of points ({}), got {seed_count}",
            e.n()
        )));
    }
    let cfg = SelectionConfig {
        seed_count,
        rng_seed: config::rng_seed(args.rng_seed)?,
        metric,
        budget: Some(picks(seed_count).min(e.n() - seed_count)),
    };
    Ok(selector::select(e, &cfg)?)
}

fn cmd_order(args: OrderArgs) -> CliResult {
    check_seed_flags(&args)?;
    let emb_path = required(args.embeddings.as_ref(), "embeddings")?;
    let out = required(args.out.as_ref(), "out")?;
    let e = coarseset::load_embeddings(emb_path)?;
    let order = compute_order(&args, &e, |k| e.n() - k)?;
    selector::write_order(&order, out)?;
    Ok(())
}

fn cmd_select(args: SelectArgs) -> CliResult {
    let budget = required(args.budget, "budget")?;
    let args = &args.order;
    check_seed_flags(args)?;
    let emb_path = required(args.embeddings.as_ref(), "embeddings")?;
    let out = required(args.out.as_ref(), "out")?;
    let e = coarseset::load_embeddings(emb_path)?;
    if budget > e.n() {
        return Err(CliError::Input(format!("--budget {budget} exceeds the {} available points", e.n())));
    }
    let order = compute_order(args, &e, |k| budget.saturating_sub(k))?;
    selector::write_order(&order.truncated(budget)?, out)?;
    Ok(())
}

fn load_labels(path: &Path, num_classes: Option<usize>) -> CliResult<LabelVector> {
    let labels = coarseset::load_labels(path)?;
    Ok(match num_classes {
        Some(c) => labels.override_num_classes(c)?,
        None => labels,
    })
}

fn cmd_sweep(args: SweepArgs) -> CliResult {
    let train_emb = coarseset::load_embeddings(required(args.train_emb.as_ref(), "train-emb")?)?;
    let train_lab = load_labels(required(args.train_lab.as_ref(), "train-lab")?, args.num_classes)?;
    let test_emb = coarseset::load_embeddings(required(args.test_emb.as_ref(), "test-emb")?)?;
    let test_lab = load_labels(required(args.test_lab.as_ref(), "test-lab")?, args.num_classes)?;
    let out = required(args.out.as_ref(), "out")?;

    let schedule = match &args.budgets {
        Some(b) => BudgetSchedule::new(b.clone())?,
        None => BudgetSchedule::default_for(train_emb.n())?,
    };
    let methods = match &args.methods {
        Some(names) => names.iter().map(|m| m.parse()).collect::<Result<Vec<Method>, _>>()?,
        None => Method::ALL.to_vec(),
    };
    let defaults = TrainConfig::default();
    fs::create_dir_all(out).map_err(|e| internal_io(out, e))?;
    let cfg = SweepConfig {
        trials: args.trials.unwrap_or(20),
        base_seed: config::rng_seed(args.rng_seed)?,
        seed_count: args.seed_count.unwrap_or(1),
        metric: args.metric.unwrap_or_default(),
        train: TrainConfig {
            epochs: args.epochs.unwrap_or(defaults.epochs),
            batch_size: args.batch_size.unwrap_or(defaults.batch_size),
            learning_rate: args.learning_rate.unwrap_or(defaults.learning_rate),
            rng_seed: 0,
            hidden: args.hidden.unwrap_or(defaults.hidden),
        },
        jobs: args.jobs.unwrap_or(0),
        journal: Some(out.join(harness::RESULTS_FILE)),
    };
    let train = LabeledSet::new(&train_emb, &train_lab)?;
    let test = LabeledSet::new(&test_emb, &test_lab)?;
    let result = harness::run_budget_sweep(train, test, &schedule, &methods, &cfg)?;
    harness::emit_report(&result, out)?;
    print!("{}", harness::format_summary_table(&result));
    Ok(())
}

fn cmd_histogram(args: HistogramArgs) -> CliResult {
    let order = selector::read_order(required(args.order.as_ref(), "order")?)?;
    let labels = load_labels(required(args.labels.as_ref(), "labels")?, args.num_classes)?;
    let budget = required(args.budget, "budget")?;
    let out = required(args.out.as_ref(), "out")?;
    let h = harness::class_histogram(order.as_slice(), &labels, budget)?;
    harness::write_histogram(&h, out)?;
    Ok(())
}

fn parse_spec(arg: &str) -> CliResult<MixtureSpec> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        fs::read_to_string(arg).map_err(|e| CliError::Input(format!("cannot read spec {arg}: {e}")))?
    };
    let spec: MixtureSpec =
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("invalid spec JSON: {e}")))?;
    spec.validate()?;
    Ok(spec)
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn cmd_gen_synth(args: GenSynthArgs) -> CliResult {
    let prefix = required(args.out_prefix.as_ref(), "out-prefix")?;
    let spec = match &args.spec {
        Some(s) => {
            let mut spec = parse_spec(s)?;
            if let Some(seed) = args.rng_seed {
                spec.rng_seed = seed;
            }
            spec
        }
        None => synth::default_suite(config::rng_seed(args.rng_seed)?),
    };
    spec.validate()?;
    let (train, test) = synth::generate_split(&spec)?;
    coarseset::save_embeddings(&train.points, with_ext(prefix, "emb"))?;
    coarseset::save_labels(&train.labels, with_ext(prefix, "lab"))?;
    if let Some(tp) = &args.test_prefix {
        coarseset::save_embeddings(&test.points, with_ext(tp, "emb"))?;
        coarseset::save_labels(&test.labels, with_ext(tp, "lab"))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Order(a) => {
            let cfg = a.config.clone();
            cmd_order(config::resolve(a, cfg.as_deref())?)
        }
        Command::Select(a) => {
            let cfg = a.order.config.clone();
            cmd_select(config::resolve(a, cfg.as_deref())?)
        }
        Command::Sweep(a) => {
            let cfg = a.config.clone();
            cmd_sweep(config::resolve(a, cfg.as_deref())?)
        }
        Command::Histogram(a) => {
            let cfg = a.config.clone();
            cmd_histogram(config::resolve(a, cfg.as_deref())?)
        }
        Command::GenSynth(a) => {
            let cfg = a.config.clone();
            cmd_gen_synth(config::resolve(a, cfg.as_deref())?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
