//! Command-line front end for the hashed-ensemble classifier.
//!
//! Output is a stream of `key=value` lines on stdout so scripts and tests
//! can parse results without scraping prose. Exit codes: 0 on success, 2 on
//! a usage error (bad flag values, caught before any data is touched), 1 on
//! a runtime failure (IO, malformed data, dimension mismatches).

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mach::analysis::{audit_distinguishability, cost_report, plan_reps, union_bound};
use mach::data::{load_libsvm, save_libsvm, LoadOptions};
use mach::eval::{evaluate, evaluate_all};
use mach::hash::make_hash_family;
use mach::persist::{load_model, save_model};
use mach::softmax::TrainConfig;
use mach::synth::{generate, SynthConfig};
use mach::{Dataset64, EstimatorKind, HashKind, MachConfig, MachModel64};

#[derive(Parser)]
#[command(name = "mach", version, about = "Many-class classification with hashed label buckets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit an ensemble on a libsvm dataset and write a model file.
    Train(TrainArgs),
    /// Rank classes for each example in a dataset.
    Predict(PredictArgs),
    /// Measure top-1 accuracy of a model on labeled data.
    Eval(EvalArgs),
    /// Smallest ensemble size meeting a class-confusion budget.
    Plan(PlanArgs),
    /// List class pairs a seeded hash family fails to separate.
    Audit(AuditArgs),
    /// Parameter and inference-cost accounting versus one-vs-all.
    Cost(CostArgs),
    /// Generate a synthetic dataset with a known ground-truth model.
    Synth(SynthArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Training data in libsvm text format.
    #[arg(long)]
    data: PathBuf,
    /// Buckets per ensemble member.
    #[arg(short = 'B', long = "buckets", alias = "B")]
    buckets: usize,
    /// Number of ensemble members.
    #[arg(short = 'R', long = "reps", alias = "R")]
    reps: usize,
    /// Total number of classes; inferred from the data when omitted.
    #[arg(short = 'K', long = "classes", alias = "K")]
    classes: Option<usize>,
    /// Seed for hash functions and batch shuffling.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Training epochs per member.
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    /// Initial learning rate.
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    /// Multiplicative learning-rate decay per epoch.
    #[arg(long, default_value_t = 0.9)]
    lr_decay: f64,
    /// Mini-batch size.
    #[arg(long, default_value_t = 64)]
    batch: usize,
    /// Members trained concurrently; results are identical for any value.
    #[arg(long, env = "MACH_WORKERS", default_value_t = 1)]
    workers: usize,
    /// Hash family mapping classes to buckets.
    #[arg(long, value_enum, default_value_t = HashArg::CarterWegman)]
    hash: HashArg,
    /// Map class i to bucket i instead of hashing (needs buckets >= classes).
    #[arg(long)]
    identity_hash: bool,
    /// Treat feature indices in the data as 1-based.
    #[arg(long)]
    one_based: bool,
    /// L2-normalize every feature vector after loading.
    #[arg(long)]
    normalize: bool,
    /// Where to write the model file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Examples in libsvm text format (labels present but ignored).
    #[arg(long)]
    data: PathBuf,
    /// Score combiner across ensemble members.
    #[arg(long, value_enum, default_value_t = EstimatorArg::Unbiased)]
    estimator: EstimatorArg,
    /// Ranked classes to print per example.
    #[arg(long, default_value_t = 1)]
    top_k: usize,
    /// Treat feature indices in the data as 1-based.
    #[arg(long)]
    one_based: bool,
    /// L2-normalize every feature vector after loading.
    #[arg(long)]
    normalize: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Labeled examples in libsvm text format.
    #[arg(long)]
    data: PathBuf,
    /// Score combiner across ensemble members.
    #[arg(long, value_enum, default_value_t = EstimatorArg::Unbiased)]
    estimator: EstimatorArg,
    /// Report all three estimators from one scoring pass.
    #[arg(long, conflicts_with = "estimator")]
    all_estimators: bool,
    /// Treat feature indices in the data as 1-based.
    #[arg(long)]
    one_based: bool,
    /// L2-normalize every feature vector after loading.
    #[arg(long)]
    normalize: bool,
}

#[derive(Args)]
struct PlanArgs {
    /// Total number of classes.
    #[arg(short = 'K', long = "classes", alias = "K")]
    classes: u64,
    /// Buckets per ensemble member.
    #[arg(short = 'B', long = "buckets", alias = "B")]
    buckets: u64,
    /// Acceptable probability that any two classes share every bucket.
    #[arg(long)]
    delta: f64,
}

#[derive(Args)]
struct AuditArgs {
    /// Total number of classes.
    #[arg(short = 'K', long = "classes", alias = "K")]
    classes: u64,
    /// Buckets per ensemble member.
    #[arg(short = 'B', long = "buckets", alias = "B")]
    buckets: u64,
    /// Number of ensemble members.
    #[arg(short = 'R', long = "reps", alias = "R")]
    reps: usize,
    /// Seed the hash family is drawn from.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Hash family mapping classes to buckets.
    #[arg(long, value_enum, default_value_t = HashArg::CarterWegman)]
    hash: HashArg,
    /// Cap on the number of colliding pairs listed.
    #[arg(long, default_value_t = 100)]
    max_pairs: usize,
}

#[derive(Args)]
struct CostArgs {
    /// Total number of classes.
    #[arg(short = 'K', long = "classes", alias = "K")]
    classes: u64,
    /// Buckets per ensemble member.
    #[arg(short = 'B', long = "buckets", alias = "B")]
    buckets: u64,
    /// Number of ensemble members.
    #[arg(short = 'R', long = "reps", alias = "R")]
    reps: u64,
    /// Feature dimension.
    #[arg(short = 'd', long = "dim", alias = "d")]
    dim: u64,
}

#[derive(Args)]
struct SynthArgs {
    /// Number of classes.
    #[arg(short = 'K', long = "classes", alias = "K")]
    classes: usize,
    /// Feature dimension.
    #[arg(short = 'd', long = "dim", alias = "d")]
    dim: usize,
    /// Number of examples.
    #[arg(short = 'N', long = "examples", alias = "N")]
    examples: usize,
    /// Seed for the ground truth and the sample.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Where to write the libsvm data; the ground-truth model lands next to
    /// it with a `.truth.mach` suffix.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum HashArg {
    CarterWegman,
    OddMultiplier,
}

impl From<HashArg> for HashKind {
    fn from(arg: HashArg) -> HashKind {
        match arg {
            HashArg::CarterWegman => HashKind::CarterWegman,
            HashArg::OddMultiplier => HashKind::OddMultiplier,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Unbiased,
    Min,
    Median,
}

impl From<EstimatorArg> for EstimatorKind {
    fn from(arg: EstimatorArg) -> EstimatorKind {
        match arg {
            EstimatorArg::Unbiased => EstimatorKind::Unbiased,
            EstimatorArg::Min => EstimatorKind::Min,
            EstimatorArg::Median => EstimatorKind::Median,
        }
    }
}

fn main() -> ExitCode {
    // Die quietly when a downstream pipe closes, like any other filter.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    if let Err(message) = usage_check(&cli.command) {
        eprintln!("error: {message}");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Rejects bad flag values before any file is opened or any work starts.
fn usage_check(command: &Command) -> std::result::Result<(), String> {
    let check_buckets = |b: u64| {
        if b < 2 {
            return Err(format!("--buckets must be at least 2, got {b}"));
        }
        Ok(())
    };
    let check_reps = |r: u64| {
        if r < 1 {
            return Err(format!("--reps must be at least 1, got {r}"));
        }
        Ok(())
    };
    let check_classes = |k: u64| {
        if k < 2 {
            return Err(format!("--classes must be at least 2, got {k}"));
        }
        Ok(())
    };
    match command {
        Command::Train(a) => {
            check_buckets(a.buckets as u64)?;
            check_reps(a.reps as u64)?;
            if let Some(k) = a.classes {
                check_classes(k as u64)?;
                if a.identity_hash && a.buckets < k {
                    return Err(format!(
                        "--identity-hash needs --buckets >= --classes, got {} < {k}",
                        a.buckets
                    ));
                }
            }
            if a.workers < 1 {
                return Err("--workers must be at least 1".into());
            }
            let tc = TrainConfig {
                epochs: a.epochs,
                batch_size: a.batch,
                learning_rate: a.lr,
                lr_decay: a.lr_decay,
                shuffle_seed: a.seed,
            };
            tc.validate().map_err(|e| e.to_string())?;
        }
        Command::Predict(a) => {
            if a.top_k < 1 {
                return Err("--top-k must be at least 1".into());
            }
        }
        Command::Eval(_) => {}
        Command::Plan(a) => {
            check_classes(a.classes)?;
            check_buckets(a.buckets)?;
            if !(a.delta.is_finite() && 0.0 < a.delta && a.delta < 1.0) {
                return Err(format!("--delta must lie in (0, 1), got {}", a.delta));
            }
        }
        Command::Audit(a) => {
            check_classes(a.classes)?;
            check_buckets(a.buckets)?;
            check_reps(a.reps as u64)?;
        }
        Command::Cost(a) => {
            check_classes(a.classes)?;
            check_buckets(a.buckets)?;
            check_reps(a.reps)?;
            if a.dim < 1 {
                return Err("--dim must be at least 1".into());
            }
        }
        Command::Synth(a) => {
            SynthConfig::new(a.classes, a.dim, a.examples, a.seed)
                .validate()
                .map_err(|e| e.to_string())?;
        }
    }
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Plan(a) => cmd_plan(a),
        Command::Audit(a) => cmd_audit(a),
        Command::Cost(a) => cmd_cost(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn load_data(
    path: &Path,
    expected_dim: Option<usize>,
    expected_classes: Option<usize>,
    one_based: bool,
    normalize: bool,
) -> Result<Dataset64> {
    let opts = LoadOptions {
        expected_dim,
        expected_classes,
        one_based,
    };
    let mut ds = load_libsvm::<f64>(path, &opts)
        .with_context(|| format!("loading {}", path.display()))?;
    if normalize {
        ds.l2_normalize();
    }
    Ok(ds)
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let started = Instant::now();
    let ds = load_data(&a.data, None, a.classes, a.one_based, a.normalize)?;
    println!(
        "examples={} dim={} classes={}",
        ds.len(),
        ds.dim(),
        ds.num_classes()
    );

    let cfg = MachConfig {
        num_classes: ds.num_classes(),
        buckets: a.buckets,
        reps: a.reps,
        seed: a.seed,
        hash_kind: a.hash.into(),
        identity_hash: a.identity_hash,
        train: TrainConfig {
            epochs: a.epochs,
            batch_size: a.batch,
            learning_rate: a.lr,
            lr_decay: a.lr_decay,
            shuffle_seed: a.seed,
        },
    };
    let (model, reports) = MachModel64::train_reporting(&ds, cfg, a.workers)
        .context("training the ensemble")?;
    for r in &reports {
        println!(
            "member={} wall_ms={} final_loss={}",
            r.index, r.wall_ms, r.final_loss
        );
    }

    save_model(&model, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "model_floats={} bias_floats={}",
        a.buckets * a.reps * ds.dim(),
        a.buckets * a.reps
    );
    println!("wall_ms={}", started.elapsed().as_millis());
    println!("out={}", a.out.display());
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let model = load_model(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let ds = load_data(&a.data, Some(model.dim()), None, a.one_based, a.normalize)?;
    let estimator: EstimatorKind = a.estimator.into();
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    for i in 0..ds.len() {
        let ranked = model.predict_topk(ds.feature(i), estimator, a.top_k)?;
        for (rank, p) in ranked.iter().enumerate() {
            writeln!(
                out,
                "example={i} rank={} label={} score={}",
                rank + 1,
                p.label,
                p.score
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let started = Instant::now();
    let model = load_model(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let ds = load_data(&a.data, Some(model.dim()), None, a.one_based, a.normalize)?;
    let reports = if a.all_estimators {
        evaluate_all(&model, &ds)?
    } else {
        vec![evaluate(&model, &ds, a.estimator.into())?]
    };
    for r in &reports {
        println!(
            "estimator={} examples={} correct={} accuracy={}",
            r.estimator.name(),
            r.total,
            r.correct,
            r.accuracy()
        );
    }
    println!("wall_ms={}", started.elapsed().as_millis());
    Ok(())
}

fn cmd_plan(a: PlanArgs) -> Result<()> {
    let reps = plan_reps(a.classes, a.buckets, a.delta)?;
    let bound = union_bound(a.classes, a.buckets, reps)?;
    println!(
        "classes={} buckets={} delta={} reps={reps} bound={bound}",
        a.classes, a.buckets, a.delta
    );
    Ok(())
}

fn cmd_audit(a: AuditArgs) -> Result<()> {
    let specs = make_hash_family(a.classes, a.buckets, a.reps, a.seed, a.hash.into())?;
    let pairs = audit_distinguishability(&specs, a.classes)?;
    let total = a.classes * (a.classes - 1) / 2;
    let bound = union_bound(a.classes, a.buckets, a.reps as u64)?;
    println!(
        "classes={} buckets={} reps={} seed={} pairs_total={total} indistinguishable={} bound={bound}",
        a.classes,
        a.buckets,
        a.reps,
        a.seed,
        pairs.len()
    );
    for (u, v) in pairs.iter().take(a.max_pairs) {
        println!("pair={u},{v}");
    }
    if pairs.len() > a.max_pairs {
        println!("pairs_omitted={}", pairs.len() - a.max_pairs);
    }
    Ok(())
}

fn cmd_cost(a: CostArgs) -> Result<()> {
    let report = cost_report(a.classes, a.buckets, a.reps, a.dim)?;
    println!(
        "classes={} buckets={} reps={} dim={}",
        report.num_classes, report.buckets, report.reps, report.dim
    );
    println!(
        "ensemble_weight_floats={} ensemble_total_floats={} ensemble_bytes={} ensemble_inference_madds={}",
        report.ensemble_weight_floats,
        report.ensemble_total_floats,
        report.ensemble_bytes(),
        report.ensemble_inference_madds
    );
    println!(
        "oaa_weight_floats={} oaa_total_floats={} oaa_bytes={} oaa_inference_madds={}",
        report.oaa_weight_floats,
        report.oaa_total_floats,
        report.oaa_bytes(),
        report.oaa_inference_madds
    );
    println!("parameter_reduction={}", report.parameter_reduction);
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let cfg = SynthConfig::new(a.classes, a.dim, a.examples, a.seed);
    let (ds, truth) = generate::<f64>(&cfg)?;

    save_libsvm(&ds, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let mut truth_out = a.out.as_os_str().to_owned();
    truth_out.push(".truth.mach");
    let truth_out = PathBuf::from(truth_out);
    save_model(&truth, &truth_out)
        .with_context(|| format!("writing {}", truth_out.display()))?;

    let truth_eval = evaluate(&truth, &ds, EstimatorKind::Unbiased)?;
    println!(
        "classes={} dim={} examples={} seed={}",
        a.classes, a.dim, a.examples, a.seed
    );
    println!("truth_accuracy={}", truth_eval.accuracy());
    println!("out={}", a.out.display());
    println!("truth_out={}", truth_out.display());
    Ok(())
}
