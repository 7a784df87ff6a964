//! Synthetic few-shot tasks with known ground truth.
//!
//! Each task draws a background direction and a class direction at a
//! controlled angle. Every image (supports and query) sees its own variant of
//! the class direction, rotated away from the class centre by an angle that
//! grows with `support_query_shift`, so a prototype fitted on the supports
//! transfers imperfectly to the query. The same parameter offsets the
//! foreground proportion ranges: supports draw from the lower part of
//! `fg_proportion_range`, the query from the upper part.
//!
//! Images may also contain a distractor: a background-labelled region whose
//! direction has cosine `distractor_similarity` with the class direction,
//! shared by all images of a task (a co-occurring object).
//!
//! Foreground and distractor regions are axis-aligned rectangles; pixel
//! features are the region direction plus isotropic Gaussian noise.
//!
//! Random streams are split so that the class geometry and the query depend
//! only on the seed, and support `k` only on `(seed, k)`. Suites generated
//! with different shot counts therefore share queries and leading supports.

use std::f64::consts::FRAC_PI_2;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{RepriError, Result};
use crate::rng::{rng_from_seed, sub_seed, Rng};
use crate::types::{FeatureMap, PixelMask, TaskInstance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// Angle between class and background directions, as a fraction of a
    /// right angle (1 = orthogonal).
    pub fg_mean_scale: f64,
    /// Per-channel standard deviation of the pixel noise.
    pub noise_sigma: f64,
    /// Range the foreground area fraction of each image is drawn from.
    pub fg_proportion_range: (f64, f64),
    /// Per-image rotation of the class direction, as a fraction of a right
    /// angle, and the offset between support and query proportion ranges.
    pub support_query_shift: f64,
    /// Cosine between the distractor and class directions; `None` disables
    /// distractors.
    pub distractor_similarity: Option<f64>,
    pub shots: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            height: 16,
            width: 16,
            channels: 16,
            fg_mean_scale: 1.5,
            noise_sigma: 0.15,
            fg_proportion_range: (0.05, 0.5),
            support_query_shift: 0.5,
            distractor_similarity: Some(0.7),
            shots: 1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |r: String| Err(RepriError::invalid("SynthConfig", r));
        let (lo, hi) = self.fg_proportion_range;
        if self.height == 0 || self.width == 0 || self.channels < 3 {
            return bad("need height, width >= 1 and channels >= 3".into());
        }
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return bad(format!("proportion range ({lo}, {hi}) must satisfy 0 < lo < hi < 1"));
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be > 0, got {}", self.noise_sigma));
        }
        if !(0.0..=2.0).contains(&self.fg_mean_scale) {
            return bad(format!("fg_mean_scale {} outside [0, 2]", self.fg_mean_scale));
        }
        if !(0.0..=1.0).contains(&self.support_query_shift) {
            return bad(format!(
                "support_query_shift {} outside [0, 1]",
                self.support_query_shift
            ));
        }
        if let Some(rho) = self.distractor_similarity {
            if !(-1.0..=1.0).contains(&rho) {
                return bad(format!("distractor_similarity {rho} outside [-1, 1]"));
            }
        }
        if self.shots == 0 {
            return bad("shots must be >= 1".into());
        }
        Ok(())
    }
}

struct Geometry {
    bg: Vec<f64>,
    fg: Vec<f64>,
    distractor: Option<Vec<f64>>,
}

#[derive(Clone, Copy)]
enum Role {
    Support,
    Query,
}

pub fn synth_task(cfg: &SynthConfig, seed: u64) -> Result<TaskInstance> {
    cfg.validate()?;
    let mut rng = rng_from_seed(sub_seed(seed, &[0]));
    let bg = random_unit(&mut rng, cfg.channels);
    let side = random_orthogonal(&mut rng, &[&bg]);
    let angle = cfg.fg_mean_scale * FRAC_PI_2;
    let fg = combine(angle.cos(), &bg, angle.sin(), &side);
    let distractor = cfg.distractor_similarity.map(|rho| {
        let v = random_orthogonal(&mut rng, &[&fg]);
        combine(rho, &fg, (1.0 - rho * rho).sqrt(), &v)
    });
    let geo = Geometry { bg, fg, distractor };

    let (query, query_gt) = synth_image(cfg, &geo, Role::Query, &mut rng)?;
    let supports = (0..cfg.shots)
        .map(|k| {
            let mut r = rng_from_seed(sub_seed(seed, &[1, k as u64]));
            synth_image(cfg, &geo, Role::Support, &mut r)
        })
        .collect::<Result<Vec<_>>>()?;
    TaskInstance::new(supports, query, Some(query_gt))
}

fn synth_image(
    cfg: &SynthConfig,
    geo: &Geometry,
    role: Role,
    rng: &mut Rng,
) -> Result<(FeatureMap, PixelMask)> {
    let (h, w, c) = (cfg.height, cfg.width, cfg.channels);
    let shift = cfg.support_query_shift;

    // this image's view of the class: rotate away from the class centre in a
    // random direction orthogonal to both class and background
    let beta = shift * FRAC_PI_2 * rng.random_range(0.25..1.0);
    let away = random_orthogonal(rng, &[&geo.fg, &geo.bg]);
    let fg_dir = combine(beta.cos(), &geo.fg, beta.sin(), &away);

    let (lo, hi) = cfg.fg_proportion_range;
    let offset = shift * (hi - lo) / 2.0;
    let proportion = match role {
        Role::Support => rng.random_range(lo..hi - offset),
        Role::Query => rng.random_range(lo + offset..hi),
    };
    let mask = rectangle(h, w, proportion, rng)?;
    let clutter = match &geo.distractor {
        Some(d) => {
            let area = rng.random_range(lo..hi);
            Some((rectangle(h, w, area, rng)?, d))
        }
        None => None,
    };

    let mut values = Vec::with_capacity(h * w * c);
    for j in 0..h * w {
        let mean = match &clutter {
            _ if mask.is_fg(j) => &fg_dir,
            Some((region, d)) if region.is_fg(j) => *d,
            _ => &geo.bg,
        };
        values.extend(mean.iter().map(|m| {
            let n: f64 = StandardNormal.sample(rng);
            m + cfg.noise_sigma * n
        }));
    }
    Ok((FeatureMap::new(h, w, c, values)?, mask))
}

/// Axis-aligned rectangle covering roughly `proportion` of the image, at
/// least one pixel.
fn rectangle(h: usize, w: usize, proportion: f64, rng: &mut Rng) -> Result<PixelMask> {
    let area = (proportion * (h * w) as f64).max(1.0);
    let aspect: f64 = rng.random_range(0.5..2.0);
    let rh = ((area * aspect).sqrt().round() as usize).clamp(1, h);
    let rw = ((area / rh as f64).round() as usize).clamp(1, w);
    let top = rng.random_range(0..=(h - rh) as u64) as usize;
    let left = rng.random_range(0..=(w - rw) as u64) as usize;
    let values = (0..h * w)
        .map(|j| {
            let (y, x) = (j / w, j % w);
            (y >= top && y < top + rh && x >= left && x < left + rw) as u8
        })
        .collect();
    PixelMask::new(h, w, values)
}

fn random_unit(rng: &mut Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Random unit vector orthogonal to the given unit vectors (Gram-Schmidt).
fn random_orthogonal(rng: &mut Rng, basis: &[&[f64]]) -> Vec<f64> {
    let dim = basis[0].len();
    loop {
        let mut v = random_unit(rng, dim);
        for b in basis {
            let d: f64 = v.iter().zip(*b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(*b).for_each(|(x, y)| *x -= d * y);
        }
        // the basis itself may not be orthonormal; a second pass fixes that
        for b in basis {
            let d: f64 = v.iter().zip(*b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(*b).for_each(|(x, y)| *x -= d * y);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn combine(a: f64, u: &[f64], b: f64, v: &[f64]) -> Vec<f64> {
    u.iter().zip(v).map(|(x, y)| a * x + b * y).collect()
}
