//! Per-task transductive optimisation.
//!
//! The prototype starts at the masked mean of the support foreground, the
//! bias at the mean query foreground probability, and both are refined by
//! full-batch gradient descent on `CE + lambda_h * H + lambda_kl * KL`.
//!
//! In standard mode the proportion prior is the initial query marginal up
//! to and including iteration `t_pi`, and the marginal observed at `t_pi`
//! afterwards. The KL weight gains `lambda_kl_increment` from `t_pi` onward.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::classifier::{hard_mask, init_bias, init_prototype};
use crate::error::{RepriError, Result};
use crate::losses::{LossBreakdown, LossWeights, Objective, PreparedTask};
use crate::types::{
    norm, ClassifierParams, Hyperparams, Mode, PixelMask, ProbMap, Proportion, TaskInstance,
};

/// Prototype norm below which descent is considered collapsed.
const COLLAPSE_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InferenceResult {
    #[serde(skip)]
    pub final_probs: ProbMap,
    #[serde(skip)]
    pub final_mask: PixelMask,
    /// Loss at each parameter state `t = 0..=iterations`.
    pub loss_trajectory: Vec<LossBreakdown>,
    /// Prior used at each `t`.
    pub pi_history: Vec<Proportion>,
    /// Live query marginal at each `t`.
    pub marginal_history: Vec<Proportion>,
    /// `marginal_fg / true_fg - 1` at each `t`; present when the query has a
    /// non-empty ground-truth mask.
    pub delta_history: Option<Vec<f64>>,
    pub params_init: ClassifierParams,
    pub params_final: ClassifierParams,
    #[serde(skip)]
    pub wall_time: Duration,
}

/// True background/foreground proportion of a mask.
pub fn oracle_pi(query_gt: &PixelMask) -> Proportion {
    let fg = query_gt.fg_count() as f64 / query_gt.num_pixels() as f64;
    Proportion { bg: 1.0 - fg, fg }
}

/// Oracle proportion with the foreground scaled by `1 + delta`, clamped into
/// `[eps, 1 - eps]`.
pub fn perturbed_pi(pi_star: Proportion, delta: f64, eps: f64) -> Result<Proportion> {
    if !(delta > -1.0) {
        return Err(RepriError::InvalidDelta(delta));
    }
    let fg = (pi_star.fg * (1.0 + delta)).clamp(eps, 1.0 - eps);
    Ok(Proportion { bg: 1.0 - fg, fg })
}

/// Two-plateau prior schedule.
pub fn pi_at(
    t: usize,
    t_pi: usize,
    marginal_at_0: Proportion,
    marginal_at_tpi: Proportion,
) -> Proportion {
    if t <= t_pi {
        marginal_at_0
    } else {
        marginal_at_tpi
    }
}

/// Loss weights in force at iteration `t`.
pub fn weights_at(hp: &Hyperparams, shots: usize, t: usize) -> LossWeights {
    let bump = if t >= hp.t_pi {
        hp.lambda_kl_increment
    } else {
        0.0
    };
    LossWeights {
        lambda_h: hp.lambda_h(shots),
        lambda_kl: hp.lambda_kl(shots) + bump,
    }
}

pub fn repri_infer(task: &TaskInstance, hp: &Hyperparams) -> Result<InferenceResult> {
    let start = Instant::now();
    hp.validate()?;

    let pi_star = task.query_gt().map(oracle_pi);
    let fixed_prior = match hp.mode {
        Mode::Standard => None,
        Mode::Oracle => Some(pi_star.ok_or(RepriError::MissingGroundTruth)?),
        Mode::PerturbedOracle(delta) => Some(perturbed_pi(
            pi_star.ok_or(RepriError::MissingGroundTruth)?,
            delta,
            hp.eps_clamp,
        )?),
    };

    let prepared = PreparedTask::new(task)?;
    let shots = prepared.shots();
    let w0 = init_prototype(task.supports())?;
    let b0 = init_bias(task.query(), &w0, hp.tau)?;
    let params_init = ClassifierParams::new(w0, b0, hp.tau)?;
    let mut params = params_init.clone();

    let n = hp.iterations;
    let mut loss_trajectory = Vec::with_capacity(n + 1);
    let mut pi_history = Vec::with_capacity(n + 1);
    let mut marginal_history = Vec::with_capacity(n + 1);
    let mut marginal_0: Option<Proportion> = None;
    let mut marginal_tpi: Option<Proportion> = None;
    let mut final_fg = Vec::new();

    for t in 0..=n {
        let obj = Objective {
            weights: weights_at(hp, shots, t),
            selector: hp.loss_selector,
            eps: hp.eps_clamp,
        };
        let prior = |p_hat: Proportion| match fixed_prior {
            Some(pi) => pi,
            None => {
                let m0 = *marginal_0.get_or_insert(p_hat);
                if t == hp.t_pi {
                    marginal_tpi = Some(p_hat);
                }
                pi_at(t, hp.t_pi, m0, marginal_tpi.unwrap_or(m0))
            }
        };
        let eval = prepared.evaluate(&params, prior, &obj, t < n)?;
        loss_trajectory.push(eval.loss);
        pi_history.push(eval.prior);
        marginal_history.push(eval.marginal);

        if let Some(g) = eval.grads {
            let w: Vec<f64> = params
                .w()
                .iter()
                .zip(&g.w)
                .map(|(w, gw)| w - hp.lr * gw)
                .collect();
            let w_norm = norm(&w);
            if !(w_norm >= COLLAPSE_NORM) {
                return Err(RepriError::PrototypeCollapse {
                    iteration: t,
                    norm: w_norm,
                });
            }
            params = ClassifierParams::new(w, params.b() - hp.lr * g.b, hp.tau)?;
        } else {
            final_fg = eval.query_fg;
        }
    }

    let delta_history = pi_star.filter(|p| p.fg > 0.0).map(|truth| {
        marginal_history
            .iter()
            .map(|m| m.fg / truth.fg - 1.0)
            .collect()
    });
    let final_probs = ProbMap::from_fg(prepared.height(), prepared.width(), final_fg)?;
    let final_mask = hard_mask(&final_probs);

    Ok(InferenceResult {
        final_probs,
        final_mask,
        loss_trajectory,
        pi_history,
        marginal_history,
        delta_history,
        params_init,
        params_final: params,
        wall_time: start.elapsed(),
    })
}
