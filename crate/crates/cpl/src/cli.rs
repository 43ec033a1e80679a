//! Command-line surface of the `cpl` binary.
//!
//! Exit codes: 0 on success, 2 for configuration, usage, I/O and schema
//! errors, 3 when a run aborts (no trainable instances, divergence).

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cpl_core::metrics;
use cpl_core::selection::generate_candidates;
use cpl_core::{
    ConfidenceMatrix, ContainerKind, Error as CoreError, LossKind, OptimConfig, Paradigm, ParadigmSpec, RunConfig,
    SelectionParams,
};
use serde::Serialize;

use crate::container::{load_any, load_checkpoint, save_checkpoint, save_container, save_csv};
use crate::error::IoError;
use crate::report::{Inputs, ReportDocument};
use crate::synth::{make_synthetic, make_synthetic_split, SynthConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "cpl", version, about = "Candidate pseudolabel learning on frozen embeddings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the iterative candidate-pseudolabel curriculum and write a JSON report.
    Run(RunArgs),
    /// Generate synthetic feature and zero-shot logit containers.
    Synth(SynthArgs),
    /// Apply candidate selection once to a logits container and print statistics.
    Select(SelectArgs),
    /// Score a model checkpoint on a test container.
    Eval(EvalArgs),
    /// Convert between CSV and CPLE containers (chosen by file extension).
    Convert(ConvertArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ParadigmArg {
    Ssl,
    Ul,
    Trzsl,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LossArg {
    Cc,
    Rc,
    Cav,
    Lw,
    Softce,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Features,
    Logits,
}

impl From<KindArg> for ContainerKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Features => ContainerKind::Features,
            KindArg::Logits => ContainerKind::Logits,
        }
    }
}

fn ratio(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} must lie in [0, 1]"))
    }
}

/// Inter-instance quantile ratio; `None` when given as `off`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beta(pub Option<f64>);

fn beta(s: &str) -> Result<Beta, String> {
    if s.eq_ignore_ascii_case("off") {
        Ok(Beta(None))
    } else {
        ratio(s).map(|v| Beta(Some(v)))
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be non-negative"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be positive"))
    }
}

fn open_unit(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} must lie in (0, 1)"))
    }
}

fn at_least_one(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(format!("{s:?} must be an integer >= 1")),
    }
}

/// A `class=value` logit bias.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasPair(pub usize, pub f64);

fn bias_pair(p: &str) -> Result<BiasPair, String> {
    let (k, v) = p.split_once('=').ok_or_else(|| format!("{p:?} is not class=value"))?;
    let k = k.trim().parse().map_err(|_| format!("bad class index {k:?}"))?;
    let v = v.trim().parse().map_err(|_| format!("bad bias value {v:?}"))?;
    Ok(BiasPair(k, v))
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Training container (features or logits; `.csv` accepted).
    #[arg(long)]
    pub data: PathBuf,
    /// Zero-shot logits aligned with --data, used for the first iteration.
    #[arg(long)]
    pub logits: Option<PathBuf>,
    /// Labeled test container for evaluation.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "ul")]
    pub paradigm: ParadigmArg,
    #[arg(long, value_enum, default_value = "cc")]
    pub loss: LossArg,
    /// Leverage of the non-candidate term (LW loss only).
    #[arg(long, value_parser = non_negative, default_value_t = LossKind::LW_DEFAULT_LEVERAGE)]
    pub lw_leverage: f64,
    /// Quantile ratio for the intra-instance threshold.
    #[arg(long, value_parser = ratio, default_value_t = 0.75)]
    pub alpha: f64,
    /// Quantile ratio for inter-instance selection, or `off`.
    #[arg(long, value_parser = beta, default_value = "0.95")]
    pub beta: Beta,
    /// Weight of the candidate-label term (SSL and TRZSL).
    #[arg(long, value_parser = non_negative, default_value_t = 1.0)]
    pub lambda: f64,
    /// Curriculum iterations T.
    #[arg(long, value_parser = at_least_one, default_value_t = 10)]
    pub iters: usize,
    /// Total epoch budget, split evenly across iterations.
    #[arg(long, value_parser = at_least_one, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 2)]
    pub warmup_epochs: usize,
    #[arg(long, value_parser = positive, default_value_t = 0.02)]
    pub lr: f64,
    #[arg(long, value_parser = positive, default_value_t = 1e-4)]
    pub warmup_lr: f64,
    #[arg(long, value_parser = ratio, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, value_parser = non_negative, default_value_t = 5e-2)]
    pub weight_decay: f64,
    /// Unlabeled batch size.
    #[arg(long, value_parser = at_least_one, default_value_t = 64)]
    pub b2: usize,
    #[arg(long, value_parser = at_least_one, default_value_t = 2)]
    pub labeled_per_class: usize,
    #[arg(long, value_parser = open_unit, default_value_t = 0.62)]
    pub seen_fraction: f64,
    /// Keep at most this many unlabeled instances per class (uses ground truth).
    #[arg(long, value_parser = at_least_one)]
    pub fewshot_q: Option<usize>,
    /// Class count for CSV inputs.
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "report.json")]
    pub out: PathBuf,
    /// Also save the final head as a checkpoint container.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Write `wallclock_s: null` so reports are byte-reproducible.
    #[arg(long)]
    pub omit_wallclock: bool,
}

impl RunArgs {
    pub fn to_config(&self) -> Result<RunConfig, Failure> {
        let paradigm = ParadigmSpec {
            paradigm: match self.paradigm {
                ParadigmArg::Ssl => Paradigm::Ssl,
                ParadigmArg::Ul => Paradigm::Ul,
                ParadigmArg::Trzsl => Paradigm::Trzsl,
            },
            labeled_per_class: self.labeled_per_class,
            seen_fraction: self.seen_fraction,
            q_fewshot: self.fewshot_q,
            lambda: self.lambda,
        };
        let loss = match self.loss {
            LossArg::Cc => LossKind::Cc,
            LossArg::Rc => LossKind::Rc,
            LossArg::Cav => LossKind::Cav,
            LossArg::Lw => LossKind::Lw {
                leverage: self.lw_leverage,
            },
            LossArg::Softce => LossKind::SoftCe,
        };
        if self.warmup_epochs >= self.epochs {
            return Err(Failure::config("--warmup-epochs must be smaller than --epochs"));
        }
        let optim = OptimConfig {
            epochs: self.epochs,
            warmup_epochs: self.warmup_epochs,
            lr: self.lr,
            warmup_lr: self.warmup_lr,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            batch_unlabeled: self.b2,
        };
        if self.momentum >= 1.0 {
            return Err(Failure::config("--momentum must be below 1"));
        }
        let config = RunConfig {
            paradigm,
            selection: SelectionParams {
                alpha: self.alpha,
                beta: self.beta.0,
            },
            loss,
            optim,
            iterations: self.iters,
            seed: self.seed,
        };
        config.validate().map_err(|e| Failure::config(e.to_string()))?;
        Ok(config)
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 200)]
    pub per_class: usize,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    #[arg(long, value_parser = positive, default_value_t = 3.0)]
    pub separation: f64,
    /// Per-class logit bias, e.g. `0=2.5,3=1`.
    #[arg(long, value_parser = bias_pair, value_delimiter = ',')]
    pub bias: Vec<BiasPair>,
    #[arg(long, value_parser = non_negative, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 1.0)]
    pub logit_scale: f64,
    /// Also write a held-out test split with this many instances per class.
    #[arg(long, default_value_t = 0)]
    pub test_per_class: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output prefix; writes `<prefix>.features.cple` and `<prefix>.logits.cple`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub logits: PathBuf,
    #[arg(long, value_parser = ratio, default_value_t = 0.75)]
    pub alpha: f64,
    #[arg(long, value_parser = beta, default_value = "0.95")]
    pub beta: Beta,
    /// Print machine-readable JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint written by `cpl run --checkpoint`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "features")]
    pub kind: KindArg,
    #[arg(long)]
    pub classes: Option<usize>,
}

/// A failed command with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Core(core) => core.into(),
            other => Failure::config(other.to_string()),
        }
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        let code = match e.root() {
            CoreError::NoTrainableInstances | CoreError::Diverged => EXIT_RUNTIME,
            _ if matches!(e, CoreError::Iteration { .. }) => EXIT_RUNTIME,
            _ => EXIT_CONFIG,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli.command, stdout) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

pub fn execute(command: &Command, out: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Run(a) => cmd_run(a, out),
        Command::Synth(a) => cmd_synth(a, out),
        Command::Select(a) => cmd_select(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Convert(a) => cmd_convert(a),
    }
}

fn path_string(p: &Path) -> String {
    p.display().to_string()
}

fn ensure_parent(flag: &str, path: &Path) -> Result<(), Failure> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).map_err(|e| Failure::config(format!("{flag}: {}: {e}", dir.display())))
        }
        _ => Ok(()),
    }
}

fn emit(out: &mut dyn Write, text: impl AsRef<str>) -> Result<(), Failure> {
    out.write_all(text.as_ref().as_bytes())
        .map_err(|e| Failure::config(e.to_string()))
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let config = args.to_config()?;
    let started = Instant::now();
    let data = load_any(&args.data, ContainerKind::Features, args.classes)
        .map_err(|e| Failure::config(format!("--data: {e}")))?;
    let logits = args
        .logits
        .as_ref()
        .map(|p| load_any(p, ContainerKind::Logits, Some(data.classes())))
        .transpose()
        .map_err(|e| Failure::config(format!("--logits: {e}")))?;
    let test = args
        .test
        .as_ref()
        .map(|p| load_any(p, ContainerKind::Features, Some(data.classes())))
        .transpose()
        .map_err(|e| Failure::config(format!("--test: {e}")))?;

    ensure_parent("--out", &args.out)?;
    if let Some(path) = &args.checkpoint {
        ensure_parent("--checkpoint", path)?;
    }
    let outcome = cpl_core::run_cpl(&config, &data, logits.as_ref(), test.as_ref())?;
    let wallclock = (!args.omit_wallclock).then(|| started.elapsed().as_secs_f64());
    let inputs = Inputs {
        data: Some(path_string(&args.data)),
        logits: args.logits.as_deref().map(path_string),
        test: args.test.as_deref().map(path_string),
    };
    let doc = ReportDocument::new(config, inputs, outcome.report, wallclock);
    doc.write(&args.out)?;
    doc.write_csv_exports(&args.out)?;
    if let Some(path) = &args.checkpoint {
        save_checkpoint(&outcome.model, path)?;
    }

    for r in &doc.per_iteration {
        let est = r.label_estimation_accuracy.map_or("-".into(), |v| format!("{v:.4}"));
        let top1 = r.test_top1.map_or("-".into(), |v| format!("{v:.4}"));
        emit(
            out,
            format!(
                "iter {:>2}  tau {:.4}  K {:>5}  M {:>6}  |S| {:.3}  est {}  test {}\n",
                r.t, r.tau, r.k_t, r.m, r.avg_candidate_size, est, top1
            ),
        )?;
    }
    if let Some(h) = doc.final_.harmonic_mean {
        emit(out, format!("harmonic mean {h:.4}\n"))?;
    }
    emit(out, format!("report written to {}\n", args.out.display()))
}

fn prefixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let mut bias = Vec::new();
    if !args.bias.is_empty() {
        bias = vec![0.0; args.classes];
        for &BiasPair(k, v) in &args.bias {
            if k >= args.classes {
                return Err(Failure::config(format!("--bias: class {k} out of range")));
            }
            bias[k] = v;
        }
    }
    let cfg = SynthConfig {
        n_per_class: args.per_class,
        classes: args.classes,
        dim: args.dim,
        separation: args.separation,
        confusion_bias: bias,
        logit_noise: args.noise,
        logit_scale: args.logit_scale,
        seed: args.seed,
    };
    let mut written = Vec::new();
    if args.test_per_class > 0 {
        let split = make_synthetic_split(&cfg, args.test_per_class)?;
        for (suffix, c) in [
            (".features.cple", &split.train_features),
            (".logits.cple", &split.train_logits),
            (".test.features.cple", &split.test_features),
            (".test.logits.cple", &split.test_logits),
        ] {
            let path = prefixed(&args.out, suffix);
            save_container(c, &path)?;
            written.push(path);
        }
    } else {
        let (features, logits) = make_synthetic(&cfg)?;
        for (suffix, c) in [(".features.cple", &features), (".logits.cple", &logits)] {
            let path = prefixed(&args.out, suffix);
            save_container(c, &path)?;
            written.push(path);
        }
    }
    for p in written {
        emit(out, format!("{}\n", p.display()))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct SelectionStats {
    pub n: usize,
    pub classes: usize,
    pub tau: f64,
    pub nonempty: usize,
    pub avg_candidate_size: Option<f64>,
    pub class_frequency: Vec<u64>,
    pub label_estimation_accuracy: Option<f64>,
    pub label_estimation_accuracy_all: Option<f64>,
    pub hard_label_accuracy: Option<f64>,
}

pub fn selection_stats(logits: &cpl_core::DataContainer, params: &SelectionParams) -> Result<SelectionStats, Failure> {
    let conf = ConfidenceMatrix::from_logits(logits.classes(), logits.rows())?;
    let assign = generate_candidates(&conf, params)?;
    let estimation = metrics::label_estimation_accuracy(&assign, logits.labels()).ok();
    let (preds, labels): (Vec<usize>, Vec<usize>) = conf
        .argmax()
        .into_iter()
        .zip(logits.labels())
        .filter_map(|(p, l)| l.map(|l| (p, l)))
        .unzip();
    Ok(SelectionStats {
        n: conf.rows(),
        classes: conf.classes(),
        tau: assign.tau,
        nonempty: assign.nonempty_count(),
        avg_candidate_size: metrics::avg_candidate_size(&assign).ok(),
        class_frequency: metrics::class_frequency(&assign),
        label_estimation_accuracy: estimation.map(|e| e.nonempty),
        label_estimation_accuracy_all: estimation.map(|e| e.overall),
        hard_label_accuracy: metrics::top1_accuracy(&preds, &labels).ok(),
    })
}

pub fn cmd_select(args: &SelectArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let logits = load_any(&args.logits, ContainerKind::Logits, None)?;
    if logits.kind() != ContainerKind::Logits {
        return Err(Failure::config("--logits: container is not of kind logits"));
    }
    let stats = selection_stats(
        &logits,
        &SelectionParams {
            alpha: args.alpha,
            beta: args.beta.0,
        },
    )?;
    if args.json {
        return emit(out, serde_json::to_string_pretty(&stats).map_err(IoError::from)? + "\n");
    }
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    let freq: Vec<String> = stats.class_frequency.iter().map(u64::to_string).collect();
    emit(
        out,
        format!(
            "tau {:.6}\nnonempty {}/{}\navg set size {}\nclass frequency {}\nlabel estimation accuracy {} (all: {})\n",
            stats.tau,
            stats.nonempty,
            stats.n,
            fmt(stats.avg_candidate_size),
            freq.join(" "),
            fmt(stats.label_estimation_accuracy),
            fmt(stats.label_estimation_accuracy_all),
        ),
    )
}

#[derive(Debug, Serialize)]
pub struct EvalResult {
    pub n: usize,
    pub top1: f64,
    pub per_class_accuracy: Vec<Option<f64>>,
    pub confusion: metrics::ConfusionMatrix,
}

pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let model = load_checkpoint(&args.model).map_err(|e| Failure::config(format!("--model: {e}")))?;
    let test = load_any(
        &args.test,
        ContainerKind::Features,
        args.classes.or(Some(model.classes())),
    )
    .map_err(|e| Failure::config(format!("--test: {e}")))?;
    if test.dim() != model.dim() || test.classes() != model.classes() {
        return Err(Failure::config("--test: shape does not match the checkpoint"));
    }
    let preds = model.predict(test.rows())?;
    let (preds, labels): (Vec<usize>, Vec<usize>) = preds
        .iter()
        .zip(test.labels())
        .filter_map(|(&p, l)| l.map(|l| (p, l)))
        .unzip();
    if labels.is_empty() {
        return Err(Failure::config("--test: container has no labels"));
    }
    let c = model.classes();
    let result = EvalResult {
        n: labels.len(),
        top1: metrics::top1_accuracy(&preds, &labels)?,
        per_class_accuracy: metrics::per_class_accuracy(&preds, &labels, c),
        confusion: metrics::confusion(&preds, &labels, c)?,
    };
    if args.json {
        return emit(
            out,
            serde_json::to_string_pretty(&result).map_err(IoError::from)? + "\n",
        );
    }
    emit(out, format!("top1 {:.4} over {} instances\n", result.top1, result.n))?;
    for (k, row) in result.confusion.counts.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>5}")).collect();
        emit(out, format!("{k:>3} |{}\n", cells.join("")))?;
    }
    Ok(())
}

pub fn cmd_convert(args: &ConvertArgs) -> Result<(), Failure> {
    let data = load_any(&args.input, args.kind.into(), args.classes)?;
    if args.output.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        save_csv(&data, &args.output)?;
    } else {
        save_container(&data, &args.output)?;
    }
    Ok(())
}
