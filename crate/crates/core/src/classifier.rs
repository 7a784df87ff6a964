//! Cosine-similarity foreground classifier.
//!
//! A pixel with feature `z` gets foreground probability
//! `sigmoid(tau * (cos(z, w) - b))`; background is the complement.

use crate::error::{RepriError, Result};
use crate::types::{norm, ClassifierParams, FeatureMap, PixelMask, ProbMap};

#[inline]
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

pub fn cosine(z: &[f64], w: &[f64]) -> Result<f64> {
    if z.len() != w.len() {
        return Err(RepriError::DimensionMismatch {
            expected: w.len(),
            actual: z.len(),
        });
    }
    let nz = norm(z);
    if nz == 0.0 {
        return Err(RepriError::ZeroVector("pixel feature"));
    }
    let nw = norm(w);
    if nw == 0.0 {
        return Err(RepriError::ZeroVector("prototype"));
    }
    let dot: f64 = z.iter().zip(w).map(|(a, b)| a * b).sum();
    Ok((dot / (nz * nw)).clamp(-1.0, 1.0))
}

pub fn forward(features: &FeatureMap, params: &ClassifierParams) -> Result<ProbMap> {
    check_channels(features.channels(), params.w().len())?;
    let fg = features
        .pixels()
        .map(|z| {
            cosine(z, params.w()).map(|c| sigmoid(params.tau() * (c - params.b())))
        })
        .collect::<Result<Vec<_>>>()?;
    ProbMap::from_fg(features.height(), features.width(), fg)
}

/// Masked mean of the foreground support features.
pub fn init_prototype(supports: &[(FeatureMap, PixelMask)]) -> Result<Vec<f64>> {
    let channels = supports
        .first()
        .map(|(f, _)| f.channels())
        .ok_or(RepriError::EmptyForeground)?;
    // running mean: identical inputs reproduce the input bit-for-bit
    let mut mean_vec = vec![0.0; channels];
    let mut count = 0usize;
    for (features, mask) in supports {
        check_channels(features.channels(), channels)?;
        if features.num_pixels() != mask.num_pixels() {
            return Err(RepriError::ShapeMismatch(format!(
                "{} feature pixels vs {} mask pixels",
                features.num_pixels(),
                mask.num_pixels()
            )));
        }
        for (j, z) in features.pixels().enumerate() {
            if mask.is_fg(j) {
                count += 1;
                let n = count as f64;
                mean_vec.iter_mut().zip(z).for_each(|(m, v)| *m += (v - *m) / n);
            }
        }
    }
    if count == 0 {
        return Err(RepriError::EmptyForeground);
    }
    Ok(mean_vec)
}

/// Initial bias: mean foreground probability on the query, evaluated with
/// a provisional bias of zero.
pub fn init_bias(query: &FeatureMap, w0: &[f64], tau: f64) -> Result<f64> {
    let params = ClassifierParams::new(w0.to_vec(), 0.0, tau)?;
    let probs = forward(query, &params)?;
    Ok(mean(probs.fg_values()))
}

/// Foreground iff the foreground probability is strictly above 0.5.
pub fn hard_mask(probs: &ProbMap) -> PixelMask {
    let values = probs.fg_values().iter().map(|&p| (p > 0.5) as u8).collect();
    PixelMask::new(probs.height(), probs.width(), values)
        .expect("probability map dimensions are valid")
}

fn check_channels(actual: usize, expected: usize) -> Result<()> {
    if actual != expected {
        return Err(RepriError::DimensionMismatch { expected, actual });
    }
    Ok(())
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Feature map with every pixel vector pre-normalised to unit length.
///
/// The optimisation loop evaluates cosines against a changing prototype
/// many times; normalising once turns each cosine into a dot product.
#[derive(Debug, Clone)]
pub(crate) struct UnitFeatures {
    channels: usize,
    unit: Vec<f64>,
}

impl UnitFeatures {
    pub fn new(features: &FeatureMap) -> Result<Self> {
        let mut unit = Vec::with_capacity(features.values().len());
        for z in features.pixels() {
            let n = norm(z);
            if n == 0.0 {
                return Err(RepriError::ZeroVector("pixel feature"));
            }
            unit.extend(z.iter().map(|v| v / n));
        }
        Ok(Self {
            channels: features.channels(),
            unit,
        })
    }

    pub fn num_pixels(&self) -> usize {
        self.unit.len() / self.channels
    }

    pub fn pixels(&self) -> std::slice::ChunksExact<'_, f64> {
        self.unit.chunks_exact(self.channels)
    }

    /// Cosine of every pixel against the unit prototype `w_unit`.
    pub fn cosines(&self, w_unit: &[f64]) -> Vec<f64> {
        self.pixels()
            .map(|z| {
                z.iter()
                    .zip(w_unit)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    .clamp(-1.0, 1.0)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(w: &[f64], b: f64, tau: f64) -> ClassifierParams {
        ClassifierParams::new(w.to_vec(), b, tau).unwrap()
    }

    #[test]
    fn cosine_examples() {
        let z = [0.3, -1.2, 2.0];
        assert!((cosine(&z, &z).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = z.iter().map(|v| -v).collect();
        assert!((cosine(&z, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(
            cosine(&[0.0, 0.0], &[1.0, 0.0]),
            Err(RepriError::ZeroVector(_))
        ));
        assert!(matches!(
            cosine(&[1.0], &[1.0, 0.0]),
            Err(RepriError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn forward_at_bias_is_half() {
        // cos((1,1),(1,0)) = 1/sqrt(2)
        let b = 1.0 / 2f64.sqrt();
        let fm = FeatureMap::new(1, 1, 2, vec![1.0, 1.0]).unwrap();
        let p = forward(&fm, &params(&[1.0, 0.0], b, 20.0)).unwrap();
        assert!((p.fg(0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn forward_cos_06_bias_05() {
        // cos = 0.6 for z = (0.6, 0.8) against w = (1, 0).
        // sigmoid(2) = 1 / (1 + e^-2), reference from mpmath at 30 digits.
        let expected = 0.880_797_077_977_882_444_059_729_141_302_f64;
        let fm = FeatureMap::new(1, 1, 2, vec![0.6, 0.8]).unwrap();
        let p = forward(&fm, &params(&[1.0, 0.0], 0.5, 20.0)).unwrap();
        assert!((p.fg(0) - expected).abs() < 1e-14);
        assert!((p.bg(0) - (1.0 - expected)).abs() < 1e-14);
    }

    #[test]
    fn forward_rejects_mismatch_and_zero_pixels() {
        let fm = FeatureMap::new(1, 1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            forward(&fm, &params(&[1.0, 0.0], 0.0, 1.0)),
            Err(RepriError::DimensionMismatch { .. })
        ));
        let zero = FeatureMap::new(1, 1, 2, vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            forward(&zero, &params(&[1.0, 0.0], 0.0, 1.0)),
            Err(RepriError::ZeroVector(_))
        ));
    }

    fn fm(h: usize, w: usize, c: usize, v: &[f64]) -> FeatureMap {
        FeatureMap::new(h, w, c, v.to_vec()).unwrap()
    }

    fn mask(h: usize, w: usize, v: &[u8]) -> PixelMask {
        PixelMask::new(h, w, v.to_vec()).unwrap()
    }

    #[test]
    fn prototype_examples() {
        let single = vec![(fm(1, 2, 2, &[3.0, -1.0, 9.0, 9.0]), mask(1, 2, &[1, 0]))];
        assert_eq!(init_prototype(&single).unwrap(), vec![3.0, -1.0]);

        let two = vec![(fm(1, 2, 2, &[1.0, 0.0, 0.0, 1.0]), mask(1, 2, &[1, 1]))];
        assert_eq!(init_prototype(&two).unwrap(), vec![0.5, 0.5]);

        // masked mean over {(2,0), (0,4)}; (0,0) is background
        let k2 = vec![
            (fm(1, 1, 2, &[2.0, 0.0]), mask(1, 1, &[1])),
            (fm(1, 2, 2, &[0.0, 4.0, 0.0, 0.0]), mask(1, 2, &[1, 0])),
        ];
        assert_eq!(init_prototype(&k2).unwrap(), vec![1.0, 2.0]);

        let none = vec![(fm(1, 1, 1, &[1.0]), mask(1, 1, &[0]))];
        assert!(matches!(
            init_prototype(&none),
            Err(RepriError::EmptyForeground)
        ));
    }

    #[test]
    fn bias_examples() {
        let w0 = [1.0, 0.0];
        let ortho = fm(1, 3, 2, &[0.0, 1.0, 0.0, -2.0, 0.0, 5.0]);
        assert!((init_bias(&ortho, &w0, 20.0).unwrap() - 0.5).abs() < 1e-15);

        let same = fm(1, 2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let b = init_bias(&same, &w0, 20.0).unwrap();
        assert_eq!(b, sigmoid(20.0));
        assert!(b > 0.0 && b < 1.0);
    }

    #[test]
    fn hard_mask_threshold() {
        let p = ProbMap::from_fg(1, 2, vec![0.9, 0.9]).unwrap();
        assert_eq!(hard_mask(&p).values(), &[1, 1]);
        let p = ProbMap::from_fg(1, 2, vec![0.5, 0.5]).unwrap();
        assert_eq!(hard_mask(&p).values(), &[0, 0]);
        let p = ProbMap::from_fg(1, 2, vec![0.4, 0.6]).unwrap();
        assert_eq!(hard_mask(&p).values(), &[0, 1]);
    }

    #[test]
    fn unit_features_match_cosine() {
        let f = fm(1, 2, 3, &[1.0, 2.0, 3.0, -1.0, 0.5, 0.25]);
        let w = [0.2, -0.7, 1.1];
        let unit = UnitFeatures::new(&f).unwrap();
        let nw = norm(&w);
        let wu: Vec<f64> = w.iter().map(|v| v / nw).collect();
        for (j, c) in unit.cosines(&wu).into_iter().enumerate() {
            assert!((c - cosine(f.pixel(j), &w).unwrap()).abs() < 1e-15);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn pixel_vec(c: usize) -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(-5.0..5.0f64, c).prop_filter("nonzero", |v| norm(v) > 1e-3)
        }

        proptest! {
            #[test]
            fn scale_invariance(
                z in prop::collection::vec(pixel_vec(4), 1..12),
                w in pixel_vec(4),
                b in -1.0..1.0f64,
                scale in 0.01..100.0f64,
            ) {
                let n = z.len();
                let fmap = FeatureMap::new(1, n, 4, z.concat()).unwrap();
                let p = params(&w, b, 20.0);
                let base = forward(&fmap, &p).unwrap();
                let scaled = forward(&fmap.scaled(scale).unwrap(), &p).unwrap();
                for j in 0..n {
                    prop_assert!((base.fg(j) - scaled.fg(j)).abs() <= 1e-12);
                    prop_assert!((base.fg(j) + base.bg(j) - 1.0).abs() <= 1e-9);
                }
            }

            #[test]
            fn monotone_in_cosine(c1 in -1.0..1.0f64, c2 in -1.0..1.0f64, b in -1.0..1.0f64) {
                prop_assume!((c1 - c2).abs() > 1e-6);
                let w = [1.0, 0.0];
                let pix = |c: f64| [c, (1.0 - c * c).max(0.0).sqrt() + 1e-300];
                let fmap = FeatureMap::new(1, 2, 2, [pix(c1), pix(c2)].concat()).unwrap();
                let p = forward(&fmap, &params(&w, b, 1.0)).unwrap();
                prop_assert_eq!(c1 < c2, p.fg(0) < p.fg(1));
            }

            #[test]
            fn prototype_of_identical_features(v in pixel_vec(3), n in 1usize..6) {
                let fmap = FeatureMap::new(1, n, 3, v.repeat(n)).unwrap();
                let m = PixelMask::filled(1, n, true).unwrap();
                let w = init_prototype(&[(fmap, m)]).unwrap();
                prop_assert_eq!(w, v);
            }
        }
    }
}
