//! The transductive objective: support cross-entropy, query Shannon entropy
//! and the KL divergence between the query marginal and a proportion prior.
//!
//! All logarithms are natural and take clamped arguments. Gradients are
//! taken with respect to the prototype `w` and the bias `b`; the prior is a
//! constant, while the query marginal inside the KL term carries gradient.

use serde::{Deserialize, Serialize};

use crate::classifier::{sigmoid, UnitFeatures};
use crate::error::{RepriError, Result};
use crate::types::{
    clamp_prob, norm, ClassifierParams, LossSelector, PixelMask, ProbMap, Proportion,
    TaskInstance, DEFAULT_EPS,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_h: f64,
    pub lambda_kl: f64,
}

impl LossWeights {
    pub fn new(lambda_h: f64, lambda_kl: f64) -> Result<Self> {
        for v in [lambda_h, lambda_kl] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(RepriError::invalid(
                    "LossWeights",
                    format!("weights must be finite and non-negative, got {v}"),
                ));
            }
        }
        Ok(Self {
            lambda_h,
            lambda_kl,
        })
    }
}

/// Individual terms and the weighted total, with the weights that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ce: f64,
    pub entropy: f64,
    pub kl: f64,
    pub total: f64,
    pub lambda_h: f64,
    pub lambda_kl: f64,
}

/// Everything that defines the objective apart from the task and parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub weights: LossWeights,
    pub selector: LossSelector,
    pub eps: f64,
}

impl Objective {
    pub fn new(weights: LossWeights, selector: LossSelector) -> Self {
        Self {
            weights,
            selector,
            eps: DEFAULT_EPS,
        }
    }

    fn compose(&self, ce: f64, entropy: f64, kl: f64) -> LossBreakdown {
        let mut total = 0.0;
        if self.selector.ce {
            total += ce;
        }
        if self.selector.entropy {
            total += self.weights.lambda_h * entropy;
        }
        if self.selector.kl {
            total += self.weights.lambda_kl * kl;
        }
        LossBreakdown {
            ce,
            entropy,
            kl,
            total,
            lambda_h: self.weights.lambda_h,
            lambda_kl: self.weights.lambda_kl,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w: Vec<f64>,
    pub b: f64,
}

pub fn support_ce(probs: &[ProbMap], masks: &[PixelMask], eps: f64) -> Result<f64> {
    if probs.len() != masks.len() || probs.is_empty() {
        return Err(RepriError::ShapeMismatch(format!(
            "{} probability maps vs {} masks",
            probs.len(),
            masks.len()
        )));
    }
    let pixels = probs[0].num_pixels();
    let mut sum = 0.0;
    for (p, m) in probs.iter().zip(masks) {
        if p.num_pixels() != pixels || m.num_pixels() != pixels {
            return Err(RepriError::ShapeMismatch(
                "support maps differ in size".into(),
            ));
        }
        sum += image_ce(p.fg_values().iter().map(|&s| (s, 1.0 - s)), m, eps);
    }
    Ok(sum / (probs.len() * pixels) as f64)
}

/// `pairs` holds `(fg, bg)` per pixel.
fn image_ce(pairs: impl Iterator<Item = (f64, f64)>, mask: &PixelMask, eps: f64) -> f64 {
    pairs
        .enumerate()
        .map(|(j, (s, t))| {
            if mask.is_fg(j) {
                -clamp_prob(s, eps).ln()
            } else {
                -clamp_prob(t, eps).ln()
            }
        })
        .sum()
}

pub fn query_entropy(probs: &ProbMap, eps: f64) -> f64 {
    let fg = probs.fg_values();
    fg.iter().map(|&s| binary_entropy(s, 1.0 - s, eps)).sum::<f64>() / fg.len() as f64
}

#[inline]
fn binary_entropy(s: f64, t: f64, eps: f64) -> f64 {
    -(s * clamp_prob(s, eps).ln() + t * clamp_prob(t, eps).ln())
}

pub fn marginal(probs: &ProbMap) -> Proportion {
    let pairs: Vec<(f64, f64)> = probs.fg_values().iter().map(|&s| (s, 1.0 - s)).collect();
    marginal_of(&pairs)
}

fn marginal_of(pairs: &[(f64, f64)]) -> Proportion {
    let n = pairs.len() as f64;
    let fg_mean = (pairs.iter().map(|p| p.0).sum::<f64>() / n).clamp(0.0, 1.0);
    let bg_mean = (pairs.iter().map(|p| p.1).sum::<f64>() / n).clamp(0.0, 1.0);
    Proportion {
        bg: bg_mean,
        fg: fg_mean,
    }
}

pub fn kl_to_prior(p_hat: Proportion, pi: Proportion, eps: f64) -> f64 {
    let term = |p: f64, q: f64| p * (clamp_prob(p, eps).ln() - clamp_prob(q, eps).ln());
    term(p_hat.bg, pi.bg) + term(p_hat.fg, pi.fg)
}

/// Derivative of [`kl_to_prior`] along the foreground component of `p_hat`
/// (the background component moves opposite).
fn kl_dfg(p_hat: Proportion, pi: Proportion, eps: f64) -> f64 {
    let partial = |p: f64, q: f64| {
        clamp_prob(p, eps).ln() - clamp_prob(q, eps).ln() + interior(p, eps)
    };
    partial(p_hat.fg, pi.fg) - partial(p_hat.bg, pi.bg)
}

/// 1 where the clamp is inactive (log has its natural derivative), else 0.
#[inline]
fn interior(p: f64, eps: f64) -> f64 {
    if p > eps && p < 1.0 - eps {
        1.0
    } else {
        0.0
    }
}

/// Task with features normalised once, reused across loss/gradient calls.
#[derive(Debug, Clone)]
pub(crate) struct PreparedTask {
    supports: Vec<(UnitFeatures, PixelMask)>,
    query: UnitFeatures,
    height: usize,
    width: usize,
    channels: usize,
}

/// Loss value, optional gradients and the query posterior at one parameter point.
pub(crate) struct Evaluation {
    pub loss: LossBreakdown,
    pub grads: Option<Gradients>,
    pub query_fg: Vec<f64>,
    pub marginal: Proportion,
    pub prior: Proportion,
}

impl PreparedTask {
    pub fn new(task: &TaskInstance) -> Result<Self> {
        let supports = task
            .supports()
            .iter()
            .map(|(f, m)| Ok((UnitFeatures::new(f)?, m.clone())))
            .collect::<Result<Vec<_>>>()?;
        let q = task.query();
        Ok(Self {
            supports,
            query: UnitFeatures::new(q)?,
            height: q.height(),
            width: q.width(),
            channels: q.channels(),
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shots(&self) -> usize {
        self.supports.len()
    }

    /// `prior` maps the current query marginal to the prior used in the KL
    /// term, so schedules that depend on the live marginal cost one pass.
    pub fn evaluate<P>(
        &self,
        params: &ClassifierParams,
        prior: P,
        obj: &Objective,
        with_grads: bool,
    ) -> Result<Evaluation>
    where
        P: FnOnce(Proportion) -> Proportion,
    {
        let w = params.w();
        if w.len() != self.channels {
            return Err(RepriError::DimensionMismatch {
                expected: self.channels,
                actual: w.len(),
            });
        }
        let (tau, b, eps) = (params.tau(), params.b(), obj.eps);
        let w_norm = norm(w);
        let w_unit: Vec<f64> = w.iter().map(|v| v / w_norm).collect();
        let npix = self.query.num_pixels();
        let k = self.supports.len();
        // (fg, bg) from the logit; 1 - s would cancel when s is near 1
        let probs = |cos: &[f64]| -> Vec<(f64, f64)> {
            cos.iter()
                .map(|&c| {
                    let u = tau * (c - b);
                    (sigmoid(u), sigmoid(-u))
                })
                .collect()
        };

        // Accumulators for dL/dw (before the tau/|w| factor) and dL/db.
        let mut acc_z = vec![0.0; self.channels];
        let mut acc_cos = 0.0;
        let mut acc_b = 0.0;
        let mut push = |a: f64, z: &[f64], c: f64| {
            acc_z.iter_mut().zip(z).for_each(|(g, zi)| *g += a * zi);
            acc_cos += a * c;
            acc_b += a;
        };

        let ce_scale = 1.0 / (k * npix) as f64;
        let mut ce_sum = 0.0;
        for (unit, mask) in &self.supports {
            let cos = unit.cosines(&w_unit);
            let fg = probs(&cos);
            ce_sum += image_ce(fg.iter().copied(), mask, eps);
            if with_grads && obj.selector.ce {
                for (j, z) in unit.pixels().enumerate() {
                    let (s, t) = fg[j];
                    // dCE/du = dCE/ds * s(1-s)
                    let a = if mask.is_fg(j) {
                        -interior(s, eps) * t
                    } else {
                        interior(t, eps) * s
                    };
                    push(a * ce_scale, z, cos[j]);
                }
            }
        }
        let ce = ce_sum * ce_scale;

        let cos_q = self.query.cosines(&w_unit);
        let fg_q = probs(&cos_q);
        let entropy = fg_q.iter().map(|&(s, t)| binary_entropy(s, t, eps)).sum::<f64>() / npix as f64;
        let p_hat = marginal_of(&fg_q);
        let pi = prior(p_hat);
        let kl = kl_to_prior(p_hat, pi, eps);
        let loss = obj.compose(ce, entropy, kl);

        let grads = if with_grads {
            let lh = if obj.selector.entropy {
                obj.weights.lambda_h
            } else {
                0.0
            };
            let lkl = if obj.selector.kl {
                obj.weights.lambda_kl
            } else {
                0.0
            };
            let dkl = if lkl != 0.0 {
                kl_dfg(p_hat, pi, eps)
            } else {
                0.0
            };
            if lh != 0.0 || lkl != 0.0 {
                let inv = 1.0 / npix as f64;
                for (j, z) in self.query.pixels().enumerate() {
                    let (s, t) = fg_q[j];
                    let dh = -(clamp_prob(s, eps).ln() + interior(s, eps)
                        - clamp_prob(t, eps).ln()
                        - interior(t, eps));
                    let ds = (lh * dh + lkl * dkl) * inv;
                    push(ds * s * t, z, cos_q[j]);
                }
            }
            let scale = tau / w_norm;
            let gw = acc_z
                .iter()
                .zip(&w_unit)
                .map(|(g, wu)| scale * (g - acc_cos * wu))
                .collect();
            Some(Gradients {
                w: gw,
                b: -tau * acc_b,
            })
        } else {
            None
        };

        Ok(Evaluation {
            loss,
            grads,
            query_fg: fg_q.into_iter().map(|p| p.0).collect(),
            marginal: p_hat,
            prior: pi,
        })
    }
}

pub fn total_loss(
    task: &TaskInstance,
    params: &ClassifierParams,
    pi: Proportion,
    obj: &Objective,
) -> Result<LossBreakdown> {
    Ok(PreparedTask::new(task)?
        .evaluate(params, |_| pi, obj, false)?
        .loss)
}

/// Exact gradient of [`total_loss`] with respect to `w` and `b`.
pub fn loss_gradients(
    task: &TaskInstance,
    params: &ClassifierParams,
    pi: Proportion,
    obj: &Objective,
) -> Result<Gradients> {
    let eval = PreparedTask::new(task)?.evaluate(params, |_| pi, obj, true)?;
    Ok(eval.grads.expect("gradients requested"))
}

/// Central finite differences of `f` at `x` with step `h`.
pub fn central_difference<F>(f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    let coord = |i: usize| {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += h;
        xm[i] -= h;
        (f(&xp) - f(&xm)) / (2.0 * h)
    };
    crate::par::map_indexed(x.len(), coord)
}

/// Gradient oracle: central differences of the loss value in `(w, b)`.
///
/// Only ever calls the forward loss, never the analytic gradient path.
pub fn finite_diff_gradients(
    task: &TaskInstance,
    params: &ClassifierParams,
    pi: Proportion,
    obj: &Objective,
    h: f64,
) -> Result<Gradients> {
    if !(h > 0.0) {
        return Err(RepriError::invalid("finite difference step", format!("{h}")));
    }
    let prepared = PreparedTask::new(task)?;
    let c = params.w().len();
    let mut theta = params.w().to_vec();
    theta.push(params.b());
    // A perturbation that zeroes w yields NaN and fails the comparison loudly.
    let loss_at = |theta: &[f64]| -> f64 {
        ClassifierParams::new(theta[..c].to_vec(), theta[c], params.tau())
            .and_then(|p| prepared.evaluate(&p, |_| pi, obj, false))
            .map(|e| e.loss.total)
            .unwrap_or(f64::NAN)
    };
    let mut g = central_difference(loss_at, &theta, h);
    let b = g.pop().expect("bias coordinate");
    Ok(Gradients { w: g, b })
}

/// Largest elementwise relative error between two gradients.
///
/// Each coordinate is compared relative to `max(|a|, |n|, floor)`, so
/// components that are numerically zero do not blow up the ratio.
pub fn max_relative_error(analytic: &Gradients, numeric: &Gradients, floor: f64) -> f64 {
    analytic
        .w
        .iter()
        .chain(std::iter::once(&analytic.b))
        .zip(numeric.w.iter().chain(std::iter::once(&numeric.b)))
        .map(|(a, n)| {
            let diff = (a - n).abs();
            if diff.is_nan() {
                return f64::INFINITY;
            }
            diff / a.abs().max(n.abs()).max(floor)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::FeatureMap;

    const EPS: f64 = DEFAULT_EPS;

    fn pm(fg: &[f64]) -> ProbMap {
        ProbMap::from_fg(1, fg.len(), fg.to_vec()).unwrap()
    }

    fn mask(v: &[u8]) -> PixelMask {
        PixelMask::new(1, v.len(), v.to_vec()).unwrap()
    }

    #[test]
    fn ce_examples() {
        let perfect = support_ce(&[pm(&[1.0, 0.0])], &[mask(&[1, 0])], EPS).unwrap();
        assert!(perfect <= 1e-9);
        let uniform = support_ce(&[pm(&[0.5; 4])], &[mask(&[1, 0, 1, 1])], EPS).unwrap();
        assert!((uniform - std::f64::consts::LN_2).abs() <= 1e-12);
        let hand = support_ce(&[pm(&[0.8, 0.3])], &[mask(&[1, 0])], EPS).unwrap();
        let expected = -(0.8f64.ln() + 0.7f64.ln()) / 2.0;
        assert!((hand - expected).abs() < 1e-15);
        assert!(support_ce(&[pm(&[0.5])], &[mask(&[1, 0])], EPS).is_err());
        assert!(support_ce(&[], &[], EPS).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert!(query_entropy(&pm(&[0.0, 1.0, 1.0]), EPS) <= 1e-8);
        let u = query_entropy(&pm(&[0.5; 3]), EPS);
        assert!((u - std::f64::consts::LN_2).abs() < 1e-15);
        let h = query_entropy(&pm(&[0.1; 2]), EPS);
        let expected = -(0.9f64 * 0.9f64.ln() + 0.1 * 0.1f64.ln());
        assert!((h - expected).abs() < 1e-15);
    }

    #[test]
    fn marginal_examples() {
        let m = marginal(&pm(&[0.7; 5]));
        assert!((m.bg - 0.3).abs() < 1e-15 && (m.fg - 0.7).abs() < 1e-15);
        let m = marginal(&pm(&[1.0, 0.0]));
        assert_eq!((m.bg, m.fg), (0.5, 0.5));
        let m = marginal(&pm(&[0.1, 0.2, 0.3, 0.4]));
        assert!((m.fg - 0.25).abs() < 1e-15);
    }

    #[test]
    fn kl_examples() {
        let half = Proportion::from_fg(0.5).unwrap();
        assert_eq!(kl_to_prior(half, half, EPS), 0.0);
        let p = Proportion::new(0.3, 0.7).unwrap();
        let expected = 0.3 * 0.6f64.ln() + 0.7 * 1.4f64.ln();
        assert!((kl_to_prior(p, half, EPS) - expected).abs() < 1e-15);
    }

    fn tiny_task() -> TaskInstance {
        let s = FeatureMap::new(2, 2, 2, vec![1.0, 0.2, 0.9, -0.1, -0.3, 1.0, 0.1, 0.8]).unwrap();
        let q = FeatureMap::new(2, 2, 2, vec![0.8, 0.5, 0.2, 1.0, 1.0, 0.0, -0.5, 0.6]).unwrap();
        let m = PixelMask::new(2, 2, vec![1, 1, 0, 0]).unwrap();
        TaskInstance::new(vec![(s, m)], q, None).unwrap()
    }

    #[test]
    fn total_is_sum_of_terms() {
        let task = tiny_task();
        let params = ClassifierParams::new(vec![1.0, 0.3], 0.4, 20.0).unwrap();
        let pi = Proportion::from_fg(0.35).unwrap();
        let obj = Objective::new(LossWeights::new(0.7, 1.3).unwrap(), LossSelector::FULL);
        let got = total_loss(&task, &params, pi, &obj).unwrap();

        let sp = crate::classifier::forward(&task.supports()[0].0, &params).unwrap();
        let qp = crate::classifier::forward(task.query(), &params).unwrap();
        let ce = support_ce(&[sp], &[task.supports()[0].1.clone()], EPS).unwrap();
        let h = query_entropy(&qp, EPS);
        let kl = kl_to_prior(marginal(&qp), pi, EPS);
        assert!((got.ce - ce).abs() < 1e-12);
        assert!((got.entropy - h).abs() < 1e-12);
        assert!((got.kl - kl).abs() < 1e-12);
        assert!((got.total - (ce + 0.7 * h + 1.3 * kl)).abs() < 1e-12);
    }

    #[test]
    fn selector_and_zero_weights() {
        let task = tiny_task();
        let params = ClassifierParams::new(vec![0.5, 0.5], 0.2, 20.0).unwrap();
        let pi = Proportion::from_fg(0.6).unwrap();
        let heavy = LossWeights::new(3.0, 5.0).unwrap();
        let zero = LossWeights::new(0.0, 0.0).unwrap();

        let ce_only = total_loss(&task, &params, pi, &Objective::new(heavy, LossSelector::CE)).unwrap();
        assert_eq!(ce_only.total, ce_only.ce);
        assert!(ce_only.entropy > 0.0 && ce_only.kl > 0.0);
        let zeroed = total_loss(&task, &params, pi, &Objective::new(zero, LossSelector::FULL)).unwrap();
        assert_eq!(zeroed.total, zeroed.ce);

        let g1 = loss_gradients(&task, &params, pi, &Objective::new(heavy, LossSelector::CE)).unwrap();
        let g2 = loss_gradients(&task, &params, pi, &Objective::new(zero, LossSelector::CE)).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn ce_bias_gradient_vanishes_at_symmetric_point() {
        // w orthogonal to every support pixel and b = 0: all predictions 0.5.
        let s = FeatureMap::new(1, 2, 2, vec![0.0, 1.0, 0.0, -2.0]).unwrap();
        let m = PixelMask::new(1, 2, vec![1, 0]).unwrap();
        let task = TaskInstance::new(vec![(s.clone(), m)], s, None).unwrap();
        let params = ClassifierParams::new(vec![1.0, 0.0], 0.0, 20.0).unwrap();
        let obj = Objective::new(LossWeights::new(0.0, 0.0).unwrap(), LossSelector::CE);
        let g = loss_gradients(&task, &params, Proportion::from_fg(0.5).unwrap(), &obj).unwrap();
        assert_eq!(g.b, 0.0);
    }

    #[test]
    fn central_difference_exact_on_quadratic() {
        // f(x) = x^T A x / 2 + c^T x with symmetric A; gradient A x + c.
        let a = [[2.0, -1.0, 0.5], [-1.0, 3.0, 0.25], [0.5, 0.25, 1.5]];
        let c = [0.3, -0.7, 1.1];
        let f = |x: &[f64]| {
            let mut v = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    v += 0.5 * x[i] * a[i][j] * x[j];
                }
                v += c[i] * x[i];
            }
            v
        };
        let x = [0.4, -1.3, 2.2];
        let g = central_difference(f, &x, 1e-3);
        for i in 0..3 {
            let exact: f64 = (0..3).map(|j| a[i][j] * x[j]).sum::<f64>() + c[i];
            assert!((g[i] - exact).abs() < 1e-10, "{i}: {} vs {exact}", g[i]);
        }
    }

    #[test]
    fn analytic_matches_finite_differences_on_tiny_task() {
        let task = tiny_task();
        let params = ClassifierParams::new(vec![0.9, 0.4], 0.3, 20.0).unwrap();
        let pi = Proportion::from_fg(0.2).unwrap();
        for sel in ["ce", "h", "kl", "full"] {
            let obj = Objective::new(
                LossWeights::new(0.8, 1.7).unwrap(),
                LossSelector::parse(sel).unwrap(),
            );
            let a = loss_gradients(&task, &params, pi, &obj).unwrap();
            let n = finite_diff_gradients(&task, &params, pi, &obj, 1e-4).unwrap();
            let err = max_relative_error(&a, &n, 1e-6);
            assert!(err < 1e-5, "{sel}: {err} {a:?} {n:?}");
        }
    }

    #[test]
    fn richardson_second_order() {
        let task = tiny_task();
        let params = ClassifierParams::new(vec![0.9, 0.4], 0.3, 5.0).unwrap();
        let pi = Proportion::from_fg(0.2).unwrap();
        let obj = Objective::new(LossWeights::new(1.0, 1.0).unwrap(), LossSelector::FULL);
        let a = loss_gradients(&task, &params, pi, &obj).unwrap();
        let err = |h: f64| {
            let n = finite_diff_gradients(&task, &params, pi, &obj, h).unwrap();
            (a.b - n.b).abs()
        };
        let ratio = err(1e-2) / err(5e-3);
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn loss_invariant_to_prototype_scale() {
        let task = tiny_task();
        let pi = Proportion::from_fg(0.4).unwrap();
        let obj = Objective::new(LossWeights::new(1.0, 1.0).unwrap(), LossSelector::FULL);
        let base = ClassifierParams::new(vec![0.9, 0.4], 0.3, 20.0).unwrap();
        let l0 = total_loss(&task, &base, pi, &obj).unwrap().total;
        for c in [1e-3, 0.5, 7.0, 1e4] {
            let p = ClassifierParams::new(vec![0.9 * c, 0.4 * c], 0.3, 20.0).unwrap();
            let l = total_loss(&task, &p, pi, &obj).unwrap().total;
            assert!((l - l0).abs() < 1e-12);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn fg_vec() -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(0.0..=1.0f64, 1..40)
        }

        proptest! {
            #[test]
            fn kl_non_negative(a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
                let p = Proportion::from_fg(a).unwrap();
                let q = Proportion::from_fg(b).unwrap();
                prop_assert!(kl_to_prior(p, q, EPS) >= -1e-12);
                prop_assert!(kl_to_prior(p, p, EPS).abs() <= 1e-12);
            }

            #[test]
            fn entropy_and_ce_bounds(fg in fg_vec()) {
                let n = fg.len();
                let p = pm(&fg);
                let h = query_entropy(&p, EPS);
                prop_assert!(h >= 0.0 && h <= std::f64::consts::LN_2 + 1e-9);
                let m = mask(&vec![1; n]);
                prop_assert!(support_ce(&[p.clone()], &[m], EPS).unwrap() >= 0.0);
                let marg = marginal(&p);
                prop_assert!((marg.bg + marg.fg - 1.0).abs() <= 1e-9);
            }

            #[test]
            fn marginal_permutation_invariant(fg in fg_vec(), seed in any::<u64>()) {
                use rand::seq::SliceRandom;
                use rand::SeedableRng;
                let mut shuffled = fg.clone();
                shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
                let a = marginal(&pm(&fg));
                let b = marginal(&pm(&shuffled));
                prop_assert!((a.fg - b.fg).abs() <= 1e-14);
            }
        }
    }
}
