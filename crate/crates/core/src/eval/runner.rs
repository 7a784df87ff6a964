//! Episodic benchmark orchestration.
//!
//! Task `i` of run `r` is generated from `sub_seed(seed, [r, i])`, so the
//! task set is fixed by the seed alone and the execution order (or thread
//! count) cannot change any reported number. IoU accumulation uses integer
//! sums; per-task records are collected in task order.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use super::metrics::{miou, IouAccumulator, IouCounts, Summary};
use crate::engine::repri_infer;
use crate::error::{RepriError, Result};
use crate::par::Execution;
use crate::rng::{rng_from_seed, sub_seed};
use crate::taskio::episodes::{DatasetIndex, EpisodeSampler};
use crate::taskio::synth::{synth_task, SynthConfig};
use crate::taskio::tasks::read_task;
use crate::types::{Hyperparams, LossSelector, Mode, TaskInstance};

pub const DEFAULT_RUNS: usize = 5;
pub const DEFAULT_TASKS_PER_RUN: usize = 1000;

/// Failure ceiling as a fraction of attempted tasks.
const MAX_FAILURE_RATE: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct LabeledTask {
    pub class_id: u32,
    pub task: TaskInstance,
}

/// Deterministic supplier of episodes.
pub trait TaskSource: Sync {
    fn task(&self, seed: u64) -> Result<LabeledTask>;

    /// Echoed into reports.
    fn describe(&self) -> serde_json::Value;
}

/// Synthetic tasks labelled with one of `n_classes` classes.
#[derive(Debug, Clone)]
pub struct SynthSource {
    pub cfg: SynthConfig,
    pub n_classes: u32,
}

impl SynthSource {
    pub fn new(cfg: SynthConfig, n_classes: u32) -> Result<Self> {
        cfg.validate()?;
        if n_classes == 0 {
            return Err(RepriError::invalid("SynthSource", "n_classes must be >= 1"));
        }
        Ok(Self { cfg, n_classes })
    }
}

impl TaskSource for SynthSource {
    fn task(&self, seed: u64) -> Result<LabeledTask> {
        Ok(LabeledTask {
            class_id: (sub_seed(seed, &[u64::MAX]) % self.n_classes as u64) as u32,
            task: synth_task(&self.cfg, seed)?,
        })
    }

    fn describe(&self) -> serde_json::Value {
        json!({ "kind": "synthetic", "config": self.cfg, "n_classes": self.n_classes })
    }
}

/// Episodes sampled from a dataset index of per-image containers.
#[derive(Debug, Clone)]
pub struct IndexSource {
    sampler: EpisodeSampler,
    path: PathBuf,
    shots: usize,
}

impl IndexSource {
    pub fn load(path: impl AsRef<Path>, shots: usize) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let sampler = EpisodeSampler::new(DatasetIndex::load(&path)?, shots)?;
        Ok(Self {
            sampler,
            path,
            shots,
        })
    }
}

impl TaskSource for IndexSource {
    fn task(&self, seed: u64) -> Result<LabeledTask> {
        let (class_id, task) = self.sampler.episode(seed)?;
        Ok(LabeledTask { class_id, task })
    }

    fn describe(&self) -> serde_json::Value {
        json!({ "kind": "index", "path": self.path.display().to_string(), "shots": self.shots })
    }
}

/// Pre-built task containers in a directory (`*.rpri`), drawn uniformly.
#[derive(Debug, Clone)]
pub struct TaskDirSource {
    dir: PathBuf,
    paths: Vec<PathBuf>,
}

impl TaskDirSource {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "rpri"))
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(RepriError::invalid(
                "task directory",
                format!("no .rpri files in {}", dir.display()),
            ));
        }
        Ok(Self { dir, paths })
    }
}

impl TaskSource for TaskDirSource {
    fn task(&self, seed: u64) -> Result<LabeledTask> {
        use rand::Rng as _;
        let i = rng_from_seed(seed).random_range(0..self.paths.len() as u64) as usize;
        let (task, class) = read_task(&self.paths[i])?;
        Ok(LabeledTask {
            class_id: class.unwrap_or(0) as u32,
            task,
        })
    }

    fn describe(&self) -> serde_json::Value {
        json!({ "kind": "directory", "path": self.dir.display().to_string(), "files": self.paths.len() })
    }
}

/// One task's contribution to a report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TaskRecord {
    pub run: usize,
    pub index: usize,
    pub class_id: u32,
    pub intersection: u64,
    pub union: u64,
    pub delta_initial: Option<f64>,
    pub delta_at_t_pi: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassIou {
    pub class_id: u32,
    pub intersection: u64,
    pub union: u64,
    pub iou: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Timing {
    pub wall_seconds: f64,
    pub tasks_per_second: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchConfig {
    pub hyperparams: Hyperparams,
    pub mode: String,
    pub seed: u64,
    pub runs: usize,
    pub tasks_per_run: usize,
    pub source: serde_json::Value,
}

/// Benchmark outcome. Wall-clock timing and per-task records are kept out of
/// the serialised report so that it depends only on the configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub config: BenchConfig,
    pub per_run_miou: Vec<f64>,
    pub mean_miou: f64,
    pub per_class: Vec<ClassIou>,
    pub delta_initial: Option<Summary>,
    pub delta_at_t_pi: Option<Summary>,
    pub tasks_attempted: usize,
    pub tasks_failed: usize,
    pub first_failure: Option<String>,
    #[serde(skip)]
    pub tasks: Vec<TaskRecord>,
    #[serde(skip)]
    pub timing: Timing,
}

fn task_seed(seed: u64, run: usize, index: usize) -> u64 {
    sub_seed(seed, &[run as u64, index as u64])
}

struct Scored {
    class_id: u32,
    counts: IouCounts,
    delta_initial: Option<f64>,
    delta_at_t_pi: Option<f64>,
}

fn score(task: &LabeledTask, hp: &Hyperparams) -> Result<Scored> {
    let gt = task.task.query_gt().ok_or(RepriError::MissingGroundTruth)?;
    let res = repri_infer(&task.task, hp)?;
    let counts = IouCounts::of(&res.final_mask, gt)?;
    let (d0, dt) = match &res.delta_history {
        Some(d) => (d.first().copied(), d.get(hp.t_pi).copied()),
        None => (None, None),
    };
    Ok(Scored {
        class_id: task.class_id,
        counts,
        delta_initial: d0,
        delta_at_t_pi: dt,
    })
}

fn check_failures(total: usize, errors: &[(usize, String)]) -> Result<()> {
    if errors.len() as f64 > MAX_FAILURE_RATE * total as f64 {
        return Err(RepriError::TooManyFailures {
            failed: errors.len(),
            total,
            first: errors[0].1.clone(),
        });
    }
    Ok(())
}

pub fn run_benchmark(
    source: &dyn TaskSource,
    hp: &Hyperparams,
    runs: usize,
    tasks_per_run: usize,
    seed: u64,
    exec: Execution,
) -> Result<BenchmarkReport> {
    hp.validate()?;
    if runs == 0 || tasks_per_run == 0 {
        return Err(RepriError::invalid("benchmark", "runs and tasks_per_run must be >= 1"));
    }
    let start = Instant::now();
    let total = runs * tasks_per_run;
    let outcomes = exec.map(total, |idx| {
        let (run, i) = (idx / tasks_per_run, idx % tasks_per_run);
        source
            .task(task_seed(seed, run, i))
            .and_then(|t| score(&t, hp))
    });

    let mut per_run = vec![IouAccumulator::new(); runs];
    let mut pooled = IouAccumulator::new();
    let mut tasks = Vec::with_capacity(total);
    let mut errors = Vec::new();
    for (idx, outcome) in outcomes.into_iter().enumerate() {
        let (run, index) = (idx / tasks_per_run, idx % tasks_per_run);
        match outcome {
            Ok(s) => {
                per_run[run].add(s.class_id, s.counts);
                pooled.add(s.class_id, s.counts);
                tasks.push(TaskRecord {
                    run,
                    index,
                    class_id: s.class_id,
                    intersection: s.counts.intersection,
                    union: s.counts.union,
                    delta_initial: s.delta_initial,
                    delta_at_t_pi: s.delta_at_t_pi,
                });
            }
            Err(e) => errors.push((idx, e.to_string())),
        }
    }
    check_failures(total, &errors)?;

    let per_run_miou = per_run.iter().map(miou).collect::<Result<Vec<_>>>()?;
    let mean_miou = per_run_miou.iter().sum::<f64>() / runs as f64;
    let per_class = pooled
        .classes()
        .map(|(class_id, n)| ClassIou {
            class_id,
            intersection: n.intersection,
            union: n.union,
            iou: if n.union > 0 {
                n.intersection as f64 / n.union as f64
            } else {
                f64::NAN
            },
        })
        .collect();
    let d0: Vec<f64> = tasks.iter().filter_map(|t| t.delta_initial).collect();
    let dt: Vec<f64> = tasks.iter().filter_map(|t| t.delta_at_t_pi).collect();
    let wall = start.elapsed().as_secs_f64();

    Ok(BenchmarkReport {
        config: BenchConfig {
            hyperparams: hp.clone(),
            mode: hp.mode.to_string(),
            seed,
            runs,
            tasks_per_run,
            source: source.describe(),
        },
        per_run_miou,
        mean_miou,
        per_class,
        delta_initial: Summary::of(&d0),
        delta_at_t_pi: Summary::of(&dt),
        tasks_attempted: total,
        tasks_failed: errors.len(),
        first_failure: errors.first().map(|e| e.1.clone()),
        tasks,
        timing: Timing {
            wall_seconds: wall,
            tasks_per_second: total as f64 / wall.max(1e-9),
        },
    })
}

/// A labelled hyperparameter setting in a controlled comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Variant {
    pub label: String,
    pub hyperparams: Hyperparams,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantResult {
    pub label: String,
    pub miou: f64,
    pub delta_initial: Option<Summary>,
    pub delta_at_t_pi: Option<Summary>,
    pub tasks_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub seed: u64,
    pub n_tasks: usize,
    pub source: serde_json::Value,
    pub variants: Vec<Variant>,
    pub results: Vec<VariantResult>,
}

impl Comparison {
    pub fn miou_of(&self, label: &str) -> Option<f64> {
        self.results.iter().find(|r| r.label == label).map(|r| r.miou)
    }
}

/// Runs every variant on the same `n_tasks` tasks. Each task is generated
/// once and shared by all variants; task `i` uses the same seed as task `i`
/// of run 0 in [`run_benchmark`].
pub fn compare_variants(
    source: &dyn TaskSource,
    variants: &[Variant],
    n_tasks: usize,
    seed: u64,
    exec: Execution,
) -> Result<Comparison> {
    if n_tasks == 0 || variants.is_empty() {
        return Err(RepriError::invalid("comparison", "need at least one task and one variant"));
    }
    for v in variants {
        v.hyperparams.validate()?;
    }
    let outcomes = exec.map(n_tasks, |i| match source.task(task_seed(seed, 0, i)) {
        Ok(task) => variants
            .iter()
            .map(|v| score(&task, &v.hyperparams))
            .collect::<Vec<_>>(),
        Err(e) => {
            let msg = e.to_string();
            variants
                .iter()
                .map(|_| Err(RepriError::invalid("task source", msg.clone())))
                .collect()
        }
    });

    let mut results = Vec::with_capacity(variants.len());
    for (vi, v) in variants.iter().enumerate() {
        let mut acc = IouAccumulator::new();
        let mut errors = Vec::new();
        let (mut d0, mut dt) = (Vec::new(), Vec::new());
        for (i, per_task) in outcomes.iter().enumerate() {
            match &per_task[vi] {
                Ok(s) => {
                    acc.add(s.class_id, s.counts);
                    d0.extend(s.delta_initial);
                    dt.extend(s.delta_at_t_pi);
                }
                Err(e) => errors.push((i, e.to_string())),
            }
        }
        check_failures(n_tasks, &errors)?;
        results.push(VariantResult {
            label: v.label.clone(),
            miou: miou(&acc)?,
            delta_initial: Summary::of(&d0),
            delta_at_t_pi: Summary::of(&dt),
            tasks_failed: errors.len(),
        });
    }
    Ok(Comparison {
        seed,
        n_tasks,
        source: source.describe(),
        variants: variants.to_vec(),
        results,
    })
}

/// Same base settings with each of the given loss selections.
pub fn ablation_suite(
    source: &dyn TaskSource,
    hp: &Hyperparams,
    selectors: &[LossSelector],
    n_tasks: usize,
    seed: u64,
    exec: Execution,
) -> Result<Comparison> {
    let variants: Vec<Variant> = selectors
        .iter()
        .map(|&sel| Variant {
            label: sel.label(),
            hyperparams: Hyperparams {
                loss_selector: sel,
                ..hp.clone()
            },
        })
        .collect();
    compare_variants(source, &variants, n_tasks, seed, exec)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub miou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub parameter: String,
    pub rows: Vec<SweepRow>,
    /// Reference rows run on the same tasks (e.g. oracle and standard).
    pub references: Vec<VariantResult>,
    pub comparison: Comparison,
}

/// Mean IoU under a `delta`-perturbed oracle prior for each `delta`, plus
/// oracle and standard references on the same tasks.
pub fn perturbation_sweep(
    source: &dyn TaskSource,
    hp: &Hyperparams,
    deltas: &[f64],
    n_tasks: usize,
    seed: u64,
    exec: Execution,
) -> Result<SweepTable> {
    let mut variants: Vec<Variant> = deltas
        .iter()
        .map(|&d| Variant {
            label: format!("delta={d}"),
            hyperparams: Hyperparams {
                mode: Mode::PerturbedOracle(d),
                ..hp.clone()
            },
        })
        .collect();
    for mode in [Mode::Oracle, Mode::Standard] {
        variants.push(Variant {
            label: mode.to_string(),
            hyperparams: Hyperparams {
                mode,
                ..hp.clone()
            },
        });
    }
    let comparison = compare_variants(source, &variants, n_tasks, seed, exec)?;
    let rows = deltas
        .iter()
        .zip(&comparison.results)
        .map(|(&d, r)| SweepRow { value: d, miou: r.miou })
        .collect();
    let references = comparison.results[deltas.len()..].to_vec();
    Ok(SweepTable {
        parameter: "delta".into(),
        rows,
        references,
        comparison,
    })
}

/// Mean IoU as a function of the prior-refresh iteration `t_pi`.
pub fn tpi_sweep(
    source: &dyn TaskSource,
    hp: &Hyperparams,
    values: &[usize],
    n_tasks: usize,
    seed: u64,
    exec: Execution,
) -> Result<SweepTable> {
    let variants: Vec<Variant> = values
        .iter()
        .map(|&t| Variant {
            label: format!("t_pi={t}"),
            hyperparams: Hyperparams {
                t_pi: t,
                ..hp.clone()
            },
        })
        .collect();
    let comparison = compare_variants(source, &variants, n_tasks, seed, exec)?;
    let rows = values
        .iter()
        .zip(&comparison.results)
        .map(|(&t, r)| SweepRow {
            value: t as f64,
            miou: r.miou,
        })
        .collect();
    Ok(SweepTable {
        parameter: "t_pi".into(),
        rows,
        references: Vec::new(),
        comparison,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_source() -> SynthSource {
        SynthSource::new(
            SynthConfig {
                height: 8,
                width: 8,
                channels: 8,
                ..SynthConfig::default()
            },
            3,
        )
        .unwrap()
    }

    fn quick_hp() -> Hyperparams {
        Hyperparams {
            iterations: 12,
            t_pi: 4,
            ..Hyperparams::default()
        }
    }

    #[test]
    fn same_seed_same_report() {
        let src = small_source();
        let a = run_benchmark(&src, &quick_hp(), 2, 6, 42, Execution::Sequential).unwrap();
        let b = run_benchmark(&src, &quick_hp(), 2, 6, 42, Execution::from_jobs(4)).unwrap();
        assert_eq!(a.per_run_miou, b.per_run_miou);
        assert_eq!(a.tasks, b.tasks);
        let c = run_benchmark(&src, &quick_hp(), 2, 6, 43, Execution::Sequential).unwrap();
        assert_ne!(a.tasks, c.tasks);
    }

    #[test]
    fn single_task_miou_is_its_iou() {
        let src = small_source();
        let r = run_benchmark(&src, &quick_hp(), 1, 1, 9, Execution::Sequential).unwrap();
        let t = r.tasks[0];
        assert_eq!(r.mean_miou, t.intersection as f64 / t.union as f64);
        assert_eq!(r.per_run_miou.len(), 1);
    }

    #[test]
    fn mean_is_mean_of_runs() {
        let src = small_source();
        let r = run_benchmark(&src, &quick_hp(), 3, 4, 1, Execution::default()).unwrap();
        let mean = r.per_run_miou.iter().sum::<f64>() / 3.0;
        assert!((r.mean_miou - mean).abs() <= 1e-12);
    }

    #[test]
    fn comparison_shares_tasks_with_benchmark_run_zero() {
        let src = small_source();
        let hp = quick_hp();
        let bench = run_benchmark(&src, &hp, 1, 5, 77, Execution::Sequential).unwrap();
        let cmp = compare_variants(
            &src,
            &[Variant { label: "x".into(), hyperparams: hp }],
            5,
            77,
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(cmp.results[0].miou, bench.mean_miou);
    }

    #[test]
    fn sweep_zero_delta_is_oracle() {
        let src = small_source();
        let t = perturbation_sweep(&src, &quick_hp(), &[-0.5, 0.0, 0.5], 6, 3, Execution::default()).unwrap();
        assert_eq!(t.rows.len(), 3);
        let oracle = t.comparison.miou_of("oracle").unwrap();
        assert!((t.rows[1].miou - oracle).abs() <= 1e-9);
    }

    struct Flaky(SynthSource);

    impl TaskSource for Flaky {
        fn task(&self, seed: u64) -> Result<LabeledTask> {
            if seed % 10 == 0 {
                Err(RepriError::invalid("flaky", "synthetic failure"))
            } else {
                self.0.task(seed)
            }
        }

        fn describe(&self) -> serde_json::Value {
            json!("flaky")
        }
    }

    #[test]
    fn failure_ceiling() {
        let err = run_benchmark(&Flaky(small_source()), &quick_hp(), 1, 40, 5, Execution::Sequential);
        assert!(matches!(err, Err(RepriError::TooManyFailures { .. })));
    }
}
