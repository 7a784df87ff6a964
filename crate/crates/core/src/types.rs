//! Shared domain types and simplex primitives.
//!
//! Layout is row-major everywhere: feature maps are `[height, width, channels]`
//! and probability maps carry background in component 0, foreground in
//! component 1. Every constructor validates its invariants and rejects bad
//! input rather than repairing it; the only repair point is [`clamp_prob`].

use serde::{Deserialize, Serialize};

use crate::error::{RepriError, Result};

/// Default probability clamp used inside logarithms.
pub const DEFAULT_EPS: f64 = 1e-10;

/// Tolerance on simplex sums.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Clamps a probability into `[eps, 1 - eps]` before it enters a logarithm.
#[inline]
pub fn clamp_prob(p: f64, eps: f64) -> f64 {
    p.max(eps).min(1.0 - eps)
}

/// Dense `height x width x channels` pixel embedding of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    channels: usize,
    values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(RepriError::invalid(
                "FeatureMap",
                format!("zero dimension in {height}x{width}x{channels}"),
            ));
        }
        let expected = height * width * channels;
        if values.len() != expected {
            return Err(RepriError::invalid(
                "FeatureMap",
                format!("expected {expected} values, got {}", values.len()),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(RepriError::invalid(
                "FeatureMap",
                format!("non-finite value at flat index {i}"),
            ));
        }
        Ok(Self {
            height,
            width,
            channels,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn num_pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Feature vector of pixel `j` in row-major pixel order.
    #[inline]
    pub fn pixel(&self, j: usize) -> &[f64] {
        &self.values[j * self.channels..(j + 1) * self.channels]
    }

    pub fn pixels(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.channels)
    }

    /// Returns a copy with every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.height,
            self.width,
            self.channels,
            self.values.iter().map(|v| v * factor).collect(),
        )
    }
}

/// Binary foreground mask at feature resolution (1 = foreground).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PixelMask {
    height: usize,
    width: usize,
    values: Vec<u8>,
}

impl PixelMask {
    pub fn new(height: usize, width: usize, values: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(RepriError::invalid(
                "PixelMask",
                format!("zero dimension in {height}x{width}"),
            ));
        }
        if values.len() != height * width {
            return Err(RepriError::invalid(
                "PixelMask",
                format!("expected {} values, got {}", height * width, values.len()),
            ));
        }
        if let Some(i) = values.iter().position(|&v| v > 1) {
            return Err(RepriError::invalid(
                "PixelMask",
                format!("entry {i} is {}, expected 0 or 1", values[i]),
            ));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn filled(height: usize, width: usize, value: bool) -> Result<Self> {
        Self::new(height, width, vec![value as u8; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_pixels(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    #[inline]
    pub fn is_fg(&self, j: usize) -> bool {
        self.values[j] == 1
    }

    pub fn fg_count(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1).count()
    }
}

/// Per-pixel background/foreground posterior.
///
/// Stored as the foreground component; background is `1 - fg`, so rows lie on
/// the simplex up to a single rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    height: usize,
    width: usize,
    fg: Vec<f64>,
}

impl ProbMap {
    pub fn from_fg(height: usize, width: usize, fg: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || fg.len() != height * width {
            return Err(RepriError::invalid(
                "ProbMap",
                format!("{} values for a {height}x{width} map", fg.len()),
            ));
        }
        if let Some(i) = fg.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(RepriError::invalid(
                "ProbMap",
                format!("foreground probability {} at pixel {i} outside [0,1]", fg[i]),
            ));
        }
        Ok(Self { height, width, fg })
    }

    /// Builds from interleaved `[bg, fg]` pairs, checking each row sums to 1.
    pub fn from_pairs(height: usize, width: usize, pairs: &[f64]) -> Result<Self> {
        if pairs.len() != 2 * height * width {
            return Err(RepriError::invalid(
                "ProbMap",
                format!("{} values for a {height}x{width}x2 map", pairs.len()),
            ));
        }
        for (j, row) in pairs.chunks_exact(2).enumerate() {
            if (row[0] + row[1] - 1.0).abs() > SIMPLEX_TOL || row[0] < 0.0 || row[0] > 1.0 {
                return Err(RepriError::invalid(
                    "ProbMap",
                    format!("pixel {j} row ({}, {}) is off the simplex", row[0], row[1]),
                ));
            }
        }
        Self::from_fg(height, width, pairs.chunks_exact(2).map(|r| r[1]).collect())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_pixels(&self) -> usize {
        self.fg.len()
    }

    #[inline]
    pub fn fg(&self, j: usize) -> f64 {
        self.fg[j]
    }

    #[inline]
    pub fn bg(&self, j: usize) -> f64 {
        1.0 - self.fg[j]
    }

    pub fn fg_values(&self) -> &[f64] {
        &self.fg
    }

    /// Interleaved `[bg, fg]` representation, `height x width x 2`.
    pub fn to_pairs(&self) -> Vec<f64> {
        self.fg.iter().flat_map(|&f| [1.0 - f, f]).collect()
    }
}

/// Background/foreground proportion on the 2-simplex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub bg: f64,
    pub fg: f64,
}

impl Proportion {
    pub fn new(bg: f64, fg: f64) -> Result<Self> {
        let ok = (0.0..=1.0).contains(&bg)
            && (0.0..=1.0).contains(&fg)
            && (bg + fg - 1.0).abs() <= SIMPLEX_TOL;
        if !ok {
            return Err(RepriError::invalid(
                "Proportion",
                format!("({bg}, {fg}) is not on the simplex"),
            ));
        }
        Ok(Self { bg, fg })
    }

    pub fn from_fg(fg: f64) -> Result<Self> {
        Self::new(1.0 - fg, fg)
    }
}

/// Cosine classifier parameters: foreground prototype, bias and temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams {
    w: Vec<f64>,
    b: f64,
    tau: f64,
}

impl ClassifierParams {
    pub fn new(w: Vec<f64>, b: f64, tau: f64) -> Result<Self> {
        if w.is_empty() || w.iter().any(|v| !v.is_finite()) || !b.is_finite() {
            return Err(RepriError::invalid(
                "ClassifierParams",
                "prototype and bias must be finite and non-empty",
            ));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(RepriError::invalid(
                "ClassifierParams",
                format!("temperature must be > 0, got {tau}"),
            ));
        }
        if norm(&w) == 0.0 {
            return Err(RepriError::ZeroVector("prototype"));
        }
        Ok(Self { w, b, tau })
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One few-shot episode: K labelled supports and one query.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskInstance {
    supports: Vec<(FeatureMap, PixelMask)>,
    query: FeatureMap,
    query_gt: Option<PixelMask>,
}

impl TaskInstance {
    pub fn new(
        supports: Vec<(FeatureMap, PixelMask)>,
        query: FeatureMap,
        query_gt: Option<PixelMask>,
    ) -> Result<Self> {
        if supports.is_empty() {
            return Err(RepriError::invalid("TaskInstance", "no support images"));
        }
        let (h, w, c) = (query.height(), query.width(), query.channels());
        for (k, (f, m)) in supports.iter().enumerate() {
            if (f.height(), f.width(), f.channels()) != (h, w, c) {
                return Err(RepriError::ShapeMismatch(format!(
                    "support {k} features {}x{}x{} vs query {h}x{w}x{c}",
                    f.height(),
                    f.width(),
                    f.channels()
                )));
            }
            if (m.height(), m.width()) != (h, w) {
                return Err(RepriError::ShapeMismatch(format!(
                    "support {k} mask {}x{} vs features {h}x{w}",
                    m.height(),
                    m.width()
                )));
            }
        }
        if let Some(gt) = &query_gt {
            if (gt.height(), gt.width()) != (h, w) {
                return Err(RepriError::ShapeMismatch(format!(
                    "query mask {}x{} vs features {h}x{w}",
                    gt.height(),
                    gt.width()
                )));
            }
        }
        if supports.iter().all(|(_, m)| m.fg_count() == 0) {
            return Err(RepriError::EmptyForeground);
        }
        Ok(Self {
            supports,
            query,
            query_gt,
        })
    }

    pub fn supports(&self) -> &[(FeatureMap, PixelMask)] {
        &self.supports
    }

    pub fn shots(&self) -> usize {
        self.supports.len()
    }

    pub fn query(&self) -> &FeatureMap {
        &self.query
    }

    pub fn query_gt(&self) -> Option<&PixelMask> {
        self.query_gt.as_ref()
    }

    pub fn channels(&self) -> usize {
        self.query.channels()
    }

    /// Same task with the query features replaced (shape must match).
    pub fn with_query(&self, query: FeatureMap) -> Result<Self> {
        Self::new(self.supports.clone(), query, self.query_gt.clone())
    }
}

/// How the proportion prior is set during inference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Prior from the model's own marginal, refreshed once at `t_pi`.
    Standard,
    /// Prior fixed to the ground-truth proportion.
    Oracle,
    /// Ground-truth foreground proportion scaled by `1 + delta`, held fixed.
    PerturbedOracle(f64),
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Standard => f.write_str("standard"),
            Mode::Oracle => f.write_str("oracle"),
            Mode::PerturbedOracle(d) => write!(f, "perturbed({d})"),
        }
    }
}

/// Which loss terms enter the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LossSelector {
    pub ce: bool,
    pub entropy: bool,
    pub kl: bool,
}

impl LossSelector {
    pub const CE: Self = Self {
        ce: true,
        entropy: false,
        kl: false,
    };
    pub const CE_H: Self = Self {
        ce: true,
        entropy: true,
        kl: false,
    };
    pub const FULL: Self = Self {
        ce: true,
        entropy: true,
        kl: true,
    };

    /// Parses `ce`, `h`, `kl` joined by `+`, or the alias `full`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "full" {
            return Ok(Self::FULL);
        }
        let mut sel = Self {
            ce: false,
            entropy: false,
            kl: false,
        };
        for term in s.split('+') {
            match term.trim() {
                "ce" => sel.ce = true,
                "h" | "ent" | "entropy" => sel.entropy = true,
                "kl" => sel.kl = true,
                other => {
                    return Err(RepriError::invalid(
                        "LossSelector",
                        format!("unknown loss term '{other}'"),
                    ))
                }
            }
        }
        if !(sel.ce || sel.entropy || sel.kl) {
            return Err(RepriError::invalid("LossSelector", "empty selection"));
        }
        Ok(sel)
    }

    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.ce {
            parts.push("ce");
        }
        if self.entropy {
            parts.push("h");
        }
        if self.kl {
            parts.push("kl");
        }
        parts.join("+")
    }
}

impl Default for LossSelector {
    fn default() -> Self {
        Self::FULL
    }
}

/// Inference hyperparameters. Defaults follow the published protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub iterations: usize,
    pub lr: f64,
    pub t_pi: usize,
    pub tau: f64,
    /// Entropy weight; `None` means `1/K`.
    pub lambda_h_base: Option<f64>,
    /// Initial KL weight; `None` means `1/K`.
    pub lambda_kl_base: Option<f64>,
    /// Added to the KL weight for `t >= t_pi`.
    pub lambda_kl_increment: f64,
    pub eps_clamp: f64,
    pub mode: Mode,
    pub loss_selector: LossSelector,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            iterations: 50,
            lr: 0.025,
            t_pi: 10,
            tau: 20.0,
            lambda_h_base: None,
            lambda_kl_base: None,
            lambda_kl_increment: 1.0,
            eps_clamp: DEFAULT_EPS,
            mode: Mode::Standard,
            loss_selector: LossSelector::FULL,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(RepriError::invalid("Hyperparams", reason));
        if self.iterations == 0 {
            return bad("iterations must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be > 0, got {}", self.lr));
        }
        if self.t_pi > self.iterations {
            return bad(format!(
                "t_pi ({}) exceeds iterations ({})",
                self.t_pi, self.iterations
            ));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be > 0, got {}", self.tau));
        }
        if !(self.eps_clamp > 0.0 && self.eps_clamp < 0.5) {
            return bad(format!("eps_clamp must lie in (0, 0.5), got {}", self.eps_clamp));
        }
        for (name, v) in [
            ("lambda_h_base", self.lambda_h_base),
            ("lambda_kl_base", self.lambda_kl_base),
        ] {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return bad(format!("{name} must be finite and >= 0, got {v}"));
                }
            }
        }
        if !self.lambda_kl_increment.is_finite() {
            return bad("lambda_kl_increment must be finite".into());
        }
        if let Mode::PerturbedOracle(d) = self.mode {
            if !(d > -1.0) {
                return Err(RepriError::InvalidDelta(d));
            }
        }
        Ok(())
    }

    pub fn lambda_h(&self, shots: usize) -> f64 {
        self.lambda_h_base.unwrap_or(1.0 / shots as f64)
    }

    pub fn lambda_kl(&self, shots: usize) -> f64 {
        self.lambda_kl_base.unwrap_or(1.0 / shots as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamp_prob_examples() {
        assert_eq!(clamp_prob(0.0, DEFAULT_EPS), 1e-10);
        assert_eq!(clamp_prob(0.5, DEFAULT_EPS), 0.5);
        assert_eq!(clamp_prob(1.0, DEFAULT_EPS), 1.0 - 1e-10);
    }

    #[test]
    fn feature_map_rejects_nan_and_zero_dims() {
        assert!(FeatureMap::new(1, 1, 2, vec![0.0, f64::NAN]).is_err());
        assert!(FeatureMap::new(0, 1, 1, vec![]).is_err());
        assert!(FeatureMap::new(1, 1, 2, vec![1.0]).is_err());
        let fm = FeatureMap::new(1, 2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(fm.pixel(1), &[3.0, 4.0]);
    }

    #[test]
    fn mask_rejects_non_binary() {
        assert!(PixelMask::new(1, 2, vec![0, 2]).is_err());
        assert_eq!(PixelMask::new(1, 3, vec![1, 0, 1]).unwrap().fg_count(), 2);
    }

    #[test]
    fn prob_map_simplex() {
        assert!(ProbMap::from_pairs(1, 1, &[0.3, 0.6]).is_err());
        let pm = ProbMap::from_pairs(1, 2, &[0.3, 0.7, 1.0, 0.0]).unwrap();
        assert_eq!(pm.fg(0), 0.7);
        assert!(ProbMap::from_fg(1, 1, vec![1.5]).is_err());
    }

    #[test]
    fn proportion_and_params_invariants() {
        assert!(Proportion::new(0.4, 0.5).is_err());
        assert!(Proportion::from_fg(0.25).is_ok());
        assert!(matches!(
            ClassifierParams::new(vec![0.0, 0.0], 0.0, 20.0),
            Err(RepriError::ZeroVector(_))
        ));
        assert!(ClassifierParams::new(vec![1.0], 0.0, 0.0).is_err());
    }

    #[test]
    fn task_requires_support_foreground() {
        let f = FeatureMap::new(1, 2, 1, vec![1.0, 1.0]).unwrap();
        let empty = PixelMask::filled(1, 2, false).unwrap();
        let err = TaskInstance::new(vec![(f.clone(), empty)], f.clone(), None).unwrap_err();
        assert!(matches!(err, RepriError::EmptyForeground));
        let wrong = PixelMask::filled(2, 1, true).unwrap();
        assert!(TaskInstance::new(vec![(f.clone(), wrong)], f, None).is_err());
    }

    #[test]
    fn hyperparam_defaults_and_validation() {
        let hp = Hyperparams::default();
        assert_eq!(
            (hp.iterations, hp.lr, hp.t_pi, hp.tau),
            (50, 0.025, 10, 20.0)
        );
        assert_eq!(hp.lambda_kl(4), 0.25);
        hp.validate().unwrap();
        let bad = Hyperparams {
            t_pi: 60,
            ..Hyperparams::default()
        };
        assert!(bad.validate().is_err());
        let bad = Hyperparams {
            mode: Mode::PerturbedOracle(-1.0),
            ..Hyperparams::default()
        };
        assert!(matches!(bad.validate(), Err(RepriError::InvalidDelta(_))));
    }

    #[test]
    fn selector_parse() {
        assert_eq!(LossSelector::parse("ce").unwrap(), LossSelector::CE);
        assert_eq!(LossSelector::parse("ce+h").unwrap(), LossSelector::CE_H);
        assert_eq!(LossSelector::parse("full").unwrap(), LossSelector::FULL);
        assert_eq!(LossSelector::parse("CE+H+KL").unwrap(), LossSelector::FULL);
        assert!(LossSelector::parse("ce+x").is_err());
        assert_eq!(LossSelector::FULL.label(), "ce+h+kl");
    }
}
