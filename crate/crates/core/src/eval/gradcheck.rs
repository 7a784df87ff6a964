//! Randomised certification of the analytic gradients against the
//! finite-difference oracle.

use std::time::Instant;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::Result;
use crate::losses::{
    finite_diff_gradients, loss_gradients, max_relative_error, Gradients, LossWeights, Objective,
};
use crate::par::Execution;
use crate::rng::{rng_from_seed, sub_seed, Rng};
use crate::types::{
    ClassifierParams, FeatureMap, LossSelector, PixelMask, Proportion, TaskInstance,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckConfig {
    pub trials: usize,
    pub seed: u64,
    pub step: f64,
    pub tolerance: f64,
    /// Denominator floor of the elementwise relative error.
    pub floor: f64,
    pub max_channels: usize,
    pub max_pixels: usize,
    pub tau: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            seed: 7,
            step: 1e-4,
            tolerance: 1e-5,
            floor: 1e-6,
            max_channels: 32,
            max_pixels: 64,
            tau: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TermErrors {
    pub ce: f64,
    pub entropy: f64,
    pub kl: f64,
    pub total: f64,
}

impl TermErrors {
    pub fn max(&self) -> f64 {
        [self.ce, self.entropy, self.kl, self.total]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trial {
    pub trial: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub shots: usize,
    pub errors: TermErrors,
    /// Largest error against Richardson-extrapolated differences from steps
    /// `h` and `h/2`, over all four objectives.
    pub extrapolated_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub config: GradcheckConfig,
    pub trials: Vec<Trial>,
    pub max_error: f64,
    pub worst_trial: usize,
    pub max_extrapolated_error: f64,
    pub passed: bool,
    #[serde(skip)]
    pub wall_seconds: f64,
}

struct Instance {
    task: TaskInstance,
    params: ClassifierParams,
    pi: Proportion,
}

fn normal_vec(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn random_mask(rng: &mut Rng, h: usize, w: usize) -> Result<PixelMask> {
    let p: f64 = rng.random_range(0.1..0.9);
    let mut values: Vec<u8> = (0..h * w).map(|_| rng.random_bool(p) as u8).collect();
    let forced = rng.random_range(0..values.len() as u64) as usize;
    values[forced] = 1;
    PixelMask::new(h, w, values)
}

fn random_instance(cfg: &GradcheckConfig, trial: usize) -> Result<Instance> {
    let mut rng = rng_from_seed(sub_seed(cfg.seed, &[trial as u64]));
    let c = rng.random_range(2..=cfg.max_channels as u64) as usize;
    let h = rng.random_range(1..=8.min(cfg.max_pixels) as u64) as usize;
    let w = rng.random_range(1..=(cfg.max_pixels / h) as u64) as usize;
    let shots = if rng.random_bool(0.5) { 1 } else { 5 };

    let map = |rng: &mut Rng| FeatureMap::new(h, w, c, normal_vec(rng, h * w * c));
    let supports = (0..shots)
        .map(|_| Ok((map(&mut rng)?, random_mask(&mut rng, h, w)?)))
        .collect::<Result<Vec<_>>>()?;
    let query = map(&mut rng)?;
    let task = TaskInstance::new(supports, query, None)?;

    let params = ClassifierParams::new(
        normal_vec(&mut rng, c),
        rng.random_range(-0.3..0.3),
        cfg.tau,
    )?;
    let pi = Proportion::from_fg(rng.random_range(0.05..0.95))?;
    Ok(Instance { task, params, pi })
}

fn check_trial(cfg: &GradcheckConfig, trial: usize) -> Result<Trial> {
    let inst = random_instance(cfg, trial)?;
    let k = inst.task.shots() as f64;
    let unit = LossWeights::new(1.0, 1.0)?;
    let objectives = [
        Objective::new(unit, LossSelector::CE),
        Objective::new(unit, LossSelector { ce: false, entropy: true, kl: false }),
        Objective::new(unit, LossSelector { ce: false, entropy: false, kl: true }),
        Objective::new(LossWeights::new(1.0 / k, 1.0 / k + 1.0)?, LossSelector::FULL),
    ];
    let mut errs = [0.0; 4];
    let mut extrapolated_error: f64 = 0.0;
    for (e, obj) in errs.iter_mut().zip(&objectives) {
        let analytic = loss_gradients(&inst.task, &inst.params, inst.pi, obj)?;
        let numeric = finite_diff_gradients(&inst.task, &inst.params, inst.pi, obj, cfg.step)?;
        *e = max_relative_error(&analytic, &numeric, cfg.floor);
        let half = finite_diff_gradients(&inst.task, &inst.params, inst.pi, obj, cfg.step / 2.0)?;
        let richardson = |a: f64, b: f64| b + (b - a) / 3.0;
        let extrapolated = Gradients {
            w: numeric.w.iter().zip(&half.w).map(|(&a, &b)| richardson(a, b)).collect(),
            b: richardson(numeric.b, half.b),
        };
        extrapolated_error =
            extrapolated_error.max(max_relative_error(&analytic, &extrapolated, cfg.floor));
    }
    let q = inst.task.query();
    Ok(Trial {
        trial,
        channels: q.channels(),
        height: q.height(),
        width: q.width(),
        shots: inst.task.shots(),
        errors: TermErrors {
            ce: errs[0],
            entropy: errs[1],
            kl: errs[2],
            total: errs[3],
        },
        extrapolated_error,
    })
}

pub fn run_gradcheck(cfg: &GradcheckConfig, exec: Execution) -> Result<GradcheckReport> {
    let start = Instant::now();
    let trials = exec
        .install(|| exec.map(cfg.trials, |t| check_trial(cfg, t)))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let (worst_trial, max_error) = trials
        .iter()
        .map(|t| (t.trial, t.errors.max()))
        .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    let max_extrapolated_error = trials
        .iter()
        .map(|t| t.extrapolated_error)
        .fold(0.0, f64::max);
    Ok(GradcheckReport {
        config: cfg.clone(),
        passed: max_error < cfg.tolerance,
        trials,
        max_error,
        worst_trial,
        max_extrapolated_error,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn configs_respect_limits() {
        let cfg = GradcheckConfig::default();
        for t in 0..50 {
            let inst = random_instance(&cfg, t).unwrap();
            let q = inst.task.query();
            assert!(q.channels() <= 32 && q.num_pixels() <= 64);
            assert!([1, 5].contains(&inst.task.shots()));
        }
    }

    #[test]
    fn small_run_is_deterministic_and_passes() {
        let cfg = GradcheckConfig {
            trials: 8,
            ..GradcheckConfig::default()
        };
        let a = run_gradcheck(&cfg, Execution::Sequential).unwrap();
        let b = run_gradcheck(&cfg, Execution::default()).unwrap();
        assert_eq!(a.trials, b.trials);
        assert!(a.passed, "max error {}", a.max_error);
    }
}
