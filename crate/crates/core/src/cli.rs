//! Command-line interface.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 runtime failure
//! (including a failed gradient check).

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::engine::repri_infer;
use crate::error::RepriError;
use crate::eval::gradcheck::{run_gradcheck, GradcheckConfig};
use crate::eval::metrics::IouCounts;
use crate::eval::report::{
    comparison_csv, sweep_csv, tasks_csv, to_json, write_json, write_text,
};
use crate::eval::runner::{
    ablation_suite, perturbation_sweep, run_benchmark, tpi_sweep, IndexSource, SynthSource,
    TaskDirSource, TaskSource,
};
use crate::par::Execution;
use crate::taskio::container::write_container;
use crate::taskio::synth::SynthConfig;
use crate::taskio::tasks::{probs_to_container, read_task, write_task};
use crate::types::{Hyperparams, LossSelector, Mode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "repri", version, about = "Transductive few-shot segmentation with a region-proportion prior")]
pub struct Cli {
    /// Worker threads for task-level parallelism (1 = sequential; default: all cores).
    #[arg(long, global = true, env = "REPRI_JOBS")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run inference on one task container.
    Infer(InferArgs),
    /// Benchmark over runs of sampled tasks. Writes report.json and tasks.csv
    /// (columns: run,task,class_id,intersection,union,delta_initial,delta_at_t_pi).
    Bench(BenchArgs),
    /// Loss-term ablation on a shared task set. Writes ablation.json and
    /// ablation.csv (columns: label,miou).
    Ablate(AblateArgs),
    /// Mean IoU under a perturbed oracle prior. Writes sweep.json and
    /// sweep.csv (columns: delta,miou, then oracle and standard reference rows).
    Sweep(SweepArgs),
    /// Mean IoU as a function of the prior refresh iteration. Writes
    /// tpi_sweep.json and tpi_sweep.csv (columns: t_pi,miou).
    TpiSweep(TpiSweepArgs),
    /// Generate synthetic task containers (task_00000.rpri, ...).
    Synth(SynthCmdArgs),
    /// Check analytic gradients against central finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Standard,
    Oracle,
    Perturbed,
}

#[derive(Debug, Clone, Args)]
pub struct HyperArgs {
    /// Gradient-descent iterations.
    #[arg(long = "iters", default_value_t = 50)]
    pub iterations: usize,
    /// Learning rate.
    #[arg(long, default_value_t = 0.025)]
    pub lr: f64,
    /// Iteration at which the standard-mode prior is refreshed.
    #[arg(long = "t-pi", default_value_t = 10)]
    pub t_pi: usize,
    /// Cosine temperature.
    #[arg(long, default_value_t = 20.0)]
    pub tau: f64,
    /// Entropy weight [default: 1/K].
    #[arg(long = "lambda-h")]
    pub lambda_h: Option<f64>,
    /// Initial KL weight [default: 1/K].
    #[arg(long = "lambda-kl")]
    pub lambda_kl: Option<f64>,
    /// Added to the KL weight from t_pi onward.
    #[arg(long = "kl-increment", default_value_t = 1.0)]
    pub kl_increment: f64,
    /// Probability clamp used inside logarithms.
    #[arg(long, default_value_t = 1e-10)]
    pub eps: f64,
    /// Proportion prior.
    #[arg(long, value_enum, default_value_t = ModeArg::Standard)]
    pub mode: ModeArg,
    /// Relative foreground error for `--mode perturbed` (> -1).
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    /// Loss terms: `ce`, `h`, `kl` joined by `+`, or `full`.
    #[arg(long, default_value = "full")]
    pub loss: String,
}

impl HyperArgs {
    pub fn to_hyperparams(&self) -> Result<Hyperparams, String> {
        let mode = match (self.mode, self.delta) {
            (ModeArg::Standard, None) => Mode::Standard,
            (ModeArg::Oracle, None) => Mode::Oracle,
            (ModeArg::Perturbed, Some(d)) => Mode::PerturbedOracle(d),
            (ModeArg::Perturbed, None) => return Err("--mode perturbed requires --delta".into()),
            (_, Some(_)) => return Err("--delta is only valid with --mode perturbed".into()),
        };
        let hp = Hyperparams {
            iterations: self.iterations,
            lr: self.lr,
            t_pi: self.t_pi,
            tau: self.tau,
            lambda_h_base: self.lambda_h,
            lambda_kl_base: self.lambda_kl,
            lambda_kl_increment: self.kl_increment,
            eps_clamp: self.eps,
            mode,
            loss_selector: LossSelector::parse(&self.loss).map_err(|e| e.to_string())?,
        };
        hp.validate().map_err(|e| e.to_string())?;
        Ok(hp)
    }
}

/// Synthetic generator settings.
#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 16)]
    pub height: usize,
    #[arg(long, default_value_t = 16)]
    pub width: usize,
    #[arg(long, default_value_t = 16)]
    pub channels: usize,
    /// Angle between class and background directions (fraction of a right angle).
    #[arg(long = "fg-scale", default_value_t = 1.5)]
    pub fg_scale: f64,
    /// Pixel noise standard deviation.
    #[arg(long, default_value_t = 0.15)]
    pub noise: f64,
    /// Foreground proportion range as `lo,hi`.
    #[arg(long = "fg-range", default_value = "0.05,0.5")]
    pub fg_range: String,
    /// Support/query mismatch strength in [0, 1].
    #[arg(long, default_value_t = 0.5)]
    pub shift: f64,
    /// Cosine between distractor and class directions.
    #[arg(long = "distractor", default_value_t = 0.7, allow_hyphen_values = true)]
    pub distractor: f64,
    /// Generate images without distractor regions.
    #[arg(long = "no-distractor")]
    pub no_distractor: bool,
    /// Number of classes synthetic tasks are labelled with.
    #[arg(long, default_value_t = 5)]
    pub classes: u32,
}

impl SynthArgs {
    pub fn to_config(&self, shots: usize) -> Result<SynthConfig, String> {
        let range = parse_f64_list(&self.fg_range)?;
        let [lo, hi] = range[..] else {
            return Err(format!("--fg-range expects `lo,hi`, got '{}'", self.fg_range));
        };
        let cfg = SynthConfig {
            height: self.height,
            width: self.width,
            channels: self.channels,
            fg_mean_scale: self.fg_scale,
            noise_sigma: self.noise,
            fg_proportion_range: (lo, hi),
            support_query_shift: self.shift,
            distractor_similarity: (!self.no_distractor).then_some(self.distractor),
            shots,
        };
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// Task source: a directory of task containers or a dataset index file.
    /// Synthetic tasks are generated when omitted.
    #[arg(long)]
    pub tasks: Option<PathBuf>,
    /// Shots per episode (index and synthetic sources).
    #[arg(long, default_value_t = 1)]
    pub shots: usize,
    #[command(flatten)]
    pub synth: SynthArgs,
}

impl SourceArgs {
    fn open(&self) -> Result<Box<dyn TaskSource>, CliError> {
        match &self.tasks {
            Some(p) if p.is_dir() => Ok(Box::new(TaskDirSource::open(p)?)),
            Some(p) => Ok(Box::new(IndexSource::load(p, self.shots)?)),
            None => {
                let cfg = self.synth.to_config(self.shots).map_err(CliError::Usage)?;
                Ok(Box::new(
                    SynthSource::new(cfg, self.synth.classes).map_err(|e| CliError::Usage(e.to_string()))?,
                ))
            }
        }
    }
}

#[derive(Debug, Args)]
pub struct InferArgs {
    /// Task container.
    #[arg(long)]
    pub task: PathBuf,
    /// Output prefix: writes <out>.rpri (query_probs, query_pred) and <out>.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub hp: HyperArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub hp: HyperArgs,
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    #[arg(long = "tasks-per-run", default_value_t = 1000)]
    pub tasks_per_run: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; the JSON report goes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub hp: HyperArgs,
    /// Comma-separated loss selections.
    #[arg(long, default_value = "ce,ce+h,full")]
    pub losses: String,
    #[arg(long = "n-tasks", default_value_t = 1000)]
    pub n_tasks: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub hp: HyperArgs,
    /// Comma-separated values or `lo:hi:step`.
    #[arg(long, default_value = "-0.5:1.0:0.25", allow_hyphen_values = true)]
    pub deltas: String,
    #[arg(long = "n-tasks", default_value_t = 1000)]
    pub n_tasks: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TpiSweepArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub hp: HyperArgs,
    /// Comma-separated t_pi values.
    #[arg(long, default_value = "0,5,10,20,30,50")]
    pub values: String,
    #[arg(long = "n-tasks", default_value_t = 1000)]
    pub n_tasks: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthCmdArgs {
    /// Number of tasks.
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub shots: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub synth: SynthArgs,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-4)]
    pub step: f64,
    /// Maximum admissible relative error.
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: f64,
    /// Report file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(RepriError),
}

impl From<RepriError> for CliError {
    fn from(e: RepriError) -> Self {
        match e {
            RepriError::Invalid { .. } | RepriError::InvalidDelta(_) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(e) => write!(f, "error: {e}"),
        }
    }
}

pub fn parse_f64_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("not a number: '{t}'"))
        })
        .collect()
}

/// Parses `a,b,c` or `lo:hi:step` (inclusive of `hi` when on the grid).
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts[..] {
        [_] => parse_f64_list(s),
        [lo, hi, step] => {
            let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("not a number: '{t}'"));
            let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
            if !(step > 0.0 && step.is_finite() && lo.is_finite() && hi >= lo) {
                return Err(format!("bad grid '{s}': need lo <= hi and step > 0"));
            }
            let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
            if n > 100_000 {
                return Err(format!("grid '{s}' has too many points"));
            }
            Ok((0..n)
                .map(|i| {
                    let v = lo + i as f64 * step;
                    if v.abs() < 1e-12 * step.max(1.0) {
                        0.0
                    } else {
                        v
                    }
                })
                .collect())
        }
        _ => Err(format!("expected a comma list or lo:hi:step, got '{s}'")),
    }
}

fn exec_of(jobs: Option<usize>) -> Execution {
    match jobs {
        Some(j) => Execution::from_jobs(j),
        None => Execution::default(),
    }
}

fn emit(out: Option<&Path>, name: &str, json: &str, csv: Option<(&str, &str)>) -> Result<(), CliError> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            write_text(dir.join(name), json)?;
            if let Some((csv_name, body)) = csv {
                write_text(dir.join(csv_name), body)?;
            }
        }
        None => std::io::stdout().write_all(json.as_bytes())?,
    }
    Ok(())
}

fn cmd_infer(a: &InferArgs) -> Result<(), CliError> {
    let hp = a.hp.to_hyperparams().map_err(CliError::Usage)?;
    let (task, _) = read_task(&a.task)?;
    let res = repri_infer(&task, &hp)?;
    let iou = match task.query_gt() {
        Some(gt) => {
            let c = IouCounts::of(&res.final_mask, gt)?;
            Some(if c.union > 0 {
                c.intersection as f64 / c.union as f64
            } else {
                1.0
            })
        }
        None => None,
    };
    let summary = json!({
        "config": { "task": a.task.display().to_string(), "hyperparams": hp },
        "iou": iou,
        "result": res,
    });
    let first = res.loss_trajectory.first().expect("non-empty trajectory");
    let last = res.loss_trajectory.last().expect("non-empty trajectory");
    println!("loss       ce          h           kl          total");
    for (label, l) in [("initial", first), ("final", last)] {
        println!(
            "{label:<8} {:>11.6} {:>11.6} {:>11.6} {:>11.6}",
            l.ce, l.entropy, l.kl, l.total
        );
    }
    if let Some(iou) = iou {
        println!("iou {iou:.6}");
    }
    if let Some(d) = &res.delta_history {
        let shown: Vec<String> = d
            .iter()
            .enumerate()
            .filter(|(t, _)| t % 5 == 0 || *t == hp.t_pi || *t + 1 == d.len())
            .map(|(t, v)| format!("{t}:{v:+.4}"))
            .collect();
        println!("delta {}", shown.join(" "));
    }
    if let Some(prefix) = &a.out {
        let mut rpri = prefix.clone().into_os_string();
        rpri.push(".rpri");
        let mut js = prefix.clone().into_os_string();
        js.push(".json");
        write_container(PathBuf::from(rpri), &probs_to_container(&res.final_probs, &res.final_mask)?)
            .map_err(RepriError::from)?;
        write_json(PathBuf::from(js), &summary)?;
    }
    eprintln!("wall time {:.3} ms", res.wall_time.as_secs_f64() * 1e3);
    Ok(())
}

fn cmd_bench(a: &BenchArgs, exec: Execution) -> Result<(), CliError> {
    let hp = a.hp.to_hyperparams().map_err(CliError::Usage)?;
    let source = a.source.open()?;
    let r = run_benchmark(source.as_ref(), &hp, a.runs, a.tasks_per_run, a.seed, exec)?;
    emit(
        a.out.as_deref(),
        "report.json",
        &to_json(&r)?,
        Some(("tasks.csv", &tasks_csv(&r))),
    )?;
    eprintln!(
        "mean mIoU {:.4}; {} tasks in {:.2} s ({:.1} tasks/s)",
        r.mean_miou, r.tasks_attempted, r.timing.wall_seconds, r.timing.tasks_per_second
    );
    Ok(())
}

fn cmd_ablate(a: &AblateArgs, exec: Execution) -> Result<(), CliError> {
    let hp = a.hp.to_hyperparams().map_err(CliError::Usage)?;
    let selectors = a
        .losses
        .split(',')
        .map(LossSelector::parse)
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let source = a.source.open()?;
    let cmp = ablation_suite(source.as_ref(), &hp, &selectors, a.n_tasks, a.seed, exec)?;
    emit(
        a.out.as_deref(),
        "ablation.json",
        &to_json(&cmp)?,
        Some(("ablation.csv", &comparison_csv(&cmp))),
    )?;
    for r in &cmp.results {
        eprintln!("{:<10} {:.4}", r.label, r.miou);
    }
    Ok(())
}

fn cmd_sweep(a: &SweepArgs, exec: Execution) -> Result<(), CliError> {
    let hp = a.hp.to_hyperparams().map_err(CliError::Usage)?;
    let deltas = parse_grid(&a.deltas).map_err(CliError::Usage)?;
    if let Some(d) = deltas.iter().find(|d| !(**d > -1.0)) {
        return Err(CliError::Usage(format!("delta {d} must be > -1")));
    }
    let source = a.source.open()?;
    let t = perturbation_sweep(source.as_ref(), &hp, &deltas, a.n_tasks, a.seed, exec)?;
    emit(
        a.out.as_deref(),
        "sweep.json",
        &to_json(&t)?,
        Some(("sweep.csv", &sweep_csv(&t))),
    )?;
    for r in &t.rows {
        eprintln!("delta {:+.3}  {:.4}", r.value, r.miou);
    }
    Ok(())
}

fn cmd_tpi_sweep(a: &TpiSweepArgs, exec: Execution) -> Result<(), CliError> {
    let hp = a.hp.to_hyperparams().map_err(CliError::Usage)?;
    let values = a
        .values
        .split(',')
        .map(|v| v.trim().parse::<usize>().map_err(|_| format!("not an iteration: '{v}'")))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::Usage)?;
    let source = a.source.open()?;
    let t = tpi_sweep(source.as_ref(), &hp, &values, a.n_tasks, a.seed, exec)?;
    emit(
        a.out.as_deref(),
        "tpi_sweep.json",
        &to_json(&t)?,
        Some(("tpi_sweep.csv", &sweep_csv(&t))),
    )?;
    for r in &t.rows {
        eprintln!("t_pi {:>3}  {:.4}", r.value, r.miou);
    }
    Ok(())
}

fn cmd_synth(a: &SynthCmdArgs) -> Result<(), CliError> {
    let cfg = a.synth.to_config(a.shots).map_err(CliError::Usage)?;
    let source = SynthSource::new(cfg, a.synth.classes)?;
    std::fs::create_dir_all(&a.out)?;
    for i in 0..a.n {
        let t = source.task(crate::rng::sub_seed(a.seed, &[i as u64]))?;
        let class = u8::try_from(t.class_id).ok();
        write_task(a.out.join(format!("task_{i:05}.rpri")), &t.task, class)?;
    }
    eprintln!("wrote {} tasks to {}", a.n, a.out.display());
    Ok(())
}

fn cmd_gradcheck(a: &GradcheckArgs, exec: Execution) -> Result<(), CliError> {
    let cfg = GradcheckConfig {
        trials: a.trials,
        seed: a.seed,
        step: a.step,
        tolerance: a.tolerance,
        ..GradcheckConfig::default()
    };
    let r = run_gradcheck(&cfg, exec)?;
    let json = to_json(&r)?;
    match &a.out {
        Some(p) => write_text(p, &json)?,
        None => std::io::stdout().write_all(json.as_bytes())?,
    }
    eprintln!(
        "max relative error {:.3e} (trial {}), tolerance {:.0e}: {}",
        r.max_error,
        r.worst_trial,
        cfg.tolerance,
        if r.passed { "PASS" } else { "FAIL" }
    );
    eprintln!("against extrapolated differences: {:.3e}", r.max_extrapolated_error);
    if r.passed {
        Ok(())
    } else {
        Err(CliError::Runtime(RepriError::invalid(
            "gradient check",
            format!("max relative error {:e} exceeds {:e}", r.max_error, cfg.tolerance),
        )))
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let exec = exec_of(cli.jobs);
    match &cli.command {
        Command::Infer(a) => cmd_infer(a),
        Command::Bench(a) => cmd_bench(a, exec),
        Command::Ablate(a) => cmd_ablate(a, exec),
        Command::Sweep(a) => cmd_sweep(a, exec),
        Command::TpiSweep(a) => cmd_tpi_sweep(a, exec),
        Command::Synth(a) => cmd_synth(a),
        Command::Gradcheck(a) => cmd_gradcheck(a, exec),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("repri").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn defaults_match_library() {
        let Command::Bench(b) = parse(&["bench"]).command else {
            panic!("expected bench");
        };
        assert_eq!(b.hp.to_hyperparams().unwrap(), Hyperparams::default());
        assert_eq!(b.source.synth.to_config(1).unwrap(), SynthConfig::default());
        assert_eq!((b.runs, b.tasks_per_run), (5, 1000));
        let Command::Gradcheck(g) = parse(&["gradcheck"]).command else {
            panic!("expected gradcheck");
        };
        let d = GradcheckConfig::default();
        assert_eq!((g.trials, g.seed, g.step, g.tolerance), (d.trials, d.seed, d.step, d.tolerance));
    }

    #[test]
    fn grid_parsing() {
        let g = parse_grid("-0.5:1.0:0.25").unwrap();
        assert_eq!(g, vec![-0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(parse_grid("0.1,-0.2").unwrap(), vec![0.1, -0.2]);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("1:0:0.1").is_err());
        let g = parse_grid("-0.3:0.3:0.1").unwrap();
        assert_eq!(g.len(), 7);
        assert_eq!(g[3], 0.0);
    }

    #[test]
    fn mode_flags() {
        let Command::Infer(a) = parse(&["infer", "--task", "t", "--mode", "perturbed", "--delta", "-0.2"]).command else {
            panic!();
        };
        assert_eq!(a.hp.to_hyperparams().unwrap().mode, Mode::PerturbedOracle(-0.2));
        let Command::Infer(a) = parse(&["infer", "--task", "t", "--delta", "0.2"]).command else {
            panic!();
        };
        assert!(a.hp.to_hyperparams().is_err());
        let Command::Infer(a) = parse(&["infer", "--task", "t", "--mode", "perturbed"]).command else {
            panic!();
        };
        assert!(a.hp.to_hyperparams().is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["repri", "bench", "--runs", "many"]), EXIT_USAGE);
        assert_eq!(run(["repri", "nonsense"]), EXIT_USAGE);
        assert_eq!(run(["repri", "bench", "--loss", "ce+xyz"]), EXIT_USAGE);
        assert_eq!(run(["repri", "--help"]), EXIT_OK);
    }
}
