//! Segmentation metrics.
//!
//! Classwise IoU pools intersections and unions over every task of a class
//! before dividing; mIoU is the unweighted mean over classes. Only the
//! episode's foreground class is scored.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{RepriError, Result};
use crate::types::PixelMask;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IouCounts {
    pub intersection: u64,
    pub union: u64,
}

impl IouCounts {
    pub fn of(pred: &PixelMask, gt: &PixelMask) -> Result<Self> {
        if (pred.height(), pred.width()) != (gt.height(), gt.width()) {
            return Err(RepriError::ShapeMismatch(format!(
                "prediction {}x{} vs ground truth {}x{}",
                pred.height(),
                pred.width(),
                gt.height(),
                gt.width()
            )));
        }
        let (mut i, mut u) = (0u64, 0u64);
        for (&p, &g) in pred.values().iter().zip(gt.values()) {
            i += (p & g) as u64;
            u += (p | g) as u64;
        }
        Ok(Self {
            intersection: i,
            union: u,
        })
    }
}

/// Per-class pooled intersection and union counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IouAccumulator {
    per_class: BTreeMap<u32, IouCounts>,
}

impl IouAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, class_id: u32, counts: IouCounts) {
        let e = self.per_class.entry(class_id).or_default();
        e.intersection += counts.intersection;
        e.union += counts.union;
    }

    pub fn merge(&mut self, other: &IouAccumulator) {
        for (&c, &n) in &other.per_class {
            self.add(c, n);
        }
    }

    pub fn classes(&self) -> impl Iterator<Item = (u32, IouCounts)> + '_ {
        self.per_class.iter().map(|(&c, &n)| (c, n))
    }

    pub fn is_empty(&self) -> bool {
        self.per_class.is_empty()
    }
}

pub fn accumulate_iou(
    acc: &mut IouAccumulator,
    class_id: u32,
    pred: &PixelMask,
    gt: &PixelMask,
) -> Result<()> {
    acc.add(class_id, IouCounts::of(pred, gt)?);
    Ok(())
}

pub fn miou(acc: &IouAccumulator) -> Result<f64> {
    if acc.is_empty() {
        return Err(RepriError::invalid("IoU accumulator", "no classes accumulated"));
    }
    let mut sum = 0.0;
    for (class, n) in acc.classes() {
        if n.union == 0 {
            return Err(RepriError::EmptyClass(class));
        }
        sum += n.intersection as f64 / n.union as f64;
    }
    Ok(sum / acc.per_class.len() as f64)
}

pub fn delta_error(fg_estimate: f64, fg_true: f64) -> Result<f64> {
    if fg_true == 0.0 {
        return Err(RepriError::DegenerateTruth);
    }
    Ok(fg_estimate / fg_true - 1.0)
}

/// Mean, quartiles and extremes of a sample (linear-interpolated quantiles).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub mean_abs: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(Self {
            count: v.len(),
            mean: values.iter().sum::<f64>() / n,
            mean_abs: values.iter().map(|x| x.abs()).sum::<f64>() / n,
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(v: &[u8]) -> PixelMask {
        PixelMask::new(1, v.len(), v.to_vec()).unwrap()
    }

    #[test]
    fn accumulate_examples() {
        let mut acc = IouAccumulator::new();
        accumulate_iou(&mut acc, 0, &mask(&[1, 1, 0]), &mask(&[1, 1, 0])).unwrap();
        assert_eq!(acc.classes().next().unwrap().1, IouCounts { intersection: 2, union: 2 });

        let mut acc = IouAccumulator::new();
        accumulate_iou(&mut acc, 0, &mask(&[1, 0, 0]), &mask(&[0, 1, 1])).unwrap();
        assert_eq!(acc.classes().next().unwrap().1, IouCounts { intersection: 0, union: 3 });

        let c = IouCounts::of(&mask(&[1, 1, 0, 0]), &mask(&[0, 1, 1, 0])).unwrap();
        assert_eq!(c, IouCounts { intersection: 1, union: 3 });
        assert!(IouCounts::of(&mask(&[1]), &mask(&[1, 0])).is_err());
    }

    #[test]
    fn miou_examples() {
        let mut acc = IouAccumulator::new();
        acc.add(3, IouCounts { intersection: 5, union: 5 });
        assert_eq!(miou(&acc).unwrap(), 1.0);

        let mut acc = IouAccumulator::new();
        acc.add(1, IouCounts { intersection: 2, union: 5 });
        acc.add(2, IouCounts { intersection: 3, union: 5 });
        assert!((miou(&acc).unwrap() - 0.5).abs() < 1e-15);

        // pooled, not mean of ratios (which would be 0.4167)
        let mut acc = IouAccumulator::new();
        for (i, u) in [(1, 2), (3, 4), (0, 2)] {
            acc.add(0, IouCounts { intersection: i, union: u });
        }
        assert_eq!(miou(&acc).unwrap(), 0.5);

        let mut acc = IouAccumulator::new();
        acc.add(9, IouCounts::default());
        assert!(matches!(miou(&acc), Err(RepriError::EmptyClass(9))));
    }

    #[test]
    fn delta_examples() {
        assert_eq!(delta_error(0.2, 0.2).unwrap(), 0.0);
        assert!((delta_error(0.3, 0.2).unwrap() - 0.5).abs() < 1e-15);
        assert!((delta_error(0.1, 0.2).unwrap() + 0.5).abs() < 1e-15);
        assert!(matches!(delta_error(0.1, 0.0), Err(RepriError::DegenerateTruth)));
    }

    #[test]
    fn summary_quartiles() {
        let s = Summary::of(&[4.0, -1.0, 2.0, 3.0, 1.0]).unwrap();
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max), (-1.0, 1.0, 2.0, 3.0, 4.0));
        assert_eq!(s.mean, 1.8);
        assert_eq!(s.mean_abs, 2.2);
        assert!(Summary::of(&[]).is_none());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn pairs() -> impl Strategy<Value = Vec<(u32, Vec<u8>, Vec<u8>)>> {
            prop::collection::vec(
                (0u32..4, prop::collection::vec(0u8..2, 12), prop::collection::vec(0u8..2, 12)),
                100..130,
            )
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn miou_equals_brute_force(samples in pairs()) {
                let mut acc = IouAccumulator::new();
                for (c, p, g) in &samples {
                    accumulate_iou(&mut acc, *c, &mask(p), &mask(g)).unwrap();
                }
                // re-aggregate straight from the raw masks
                let mut per: BTreeMap<u32, (u64, u64)> = BTreeMap::new();
                for (c, p, g) in &samples {
                    let e = per.entry(*c).or_default();
                    for k in 0..12 {
                        e.0 += (p[k] == 1 && g[k] == 1) as u64;
                        e.1 += (p[k] == 1 || g[k] == 1) as u64;
                    }
                }
                prop_assume!(per.values().all(|&(_, u)| u > 0));
                let brute = per.values().map(|&(i, u)| i as f64 / u as f64).sum::<f64>() / per.len() as f64;
                prop_assert!((miou(&acc).unwrap() - brute).abs() <= 1e-12);
            }

            #[test]
            fn accumulation_order_independent(samples in pairs(), seed in any::<u64>()) {
                use rand::seq::SliceRandom;
                use rand::SeedableRng;
                let mut shuffled = samples.clone();
                shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
                let fold = |s: &[(u32, Vec<u8>, Vec<u8>)]| {
                    let mut acc = IouAccumulator::new();
                    for (c, p, g) in s {
                        accumulate_iou(&mut acc, *c, &mask(p), &mask(g)).unwrap();
                    }
                    acc
                };
                prop_assert_eq!(fold(&samples), fold(&shuffled));
            }
        }
    }
}
