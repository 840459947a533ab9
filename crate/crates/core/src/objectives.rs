//! Convex Lipschitz instance objectives.
//!
//! Two families are supported:
//!
//! * generalized linear objectives `f(w; z) = loss(w . phi(x), y)` built from a
//!   [`ScalarLoss`], and
//! * the non-GLM adversarial objectives used by the lower-bound constructions
//!   (a linear objective `f(w; z) = L z w_1` and a nonsmooth max-of-coordinates
//!   objective), plus user supplied objectives through [`InstanceObjective`].
//!
//! Every subgradient returned here has Euclidean norm at most the objective's
//! Lipschitz constant. Kinks resolve to a fixed element of the subdifferential:
//! hinge at `y a = 1` and absolute at `a = y` return 0; the max term picks the
//! smallest maximizing index and contributes nothing when the max is `<= 0`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{check_dim, config, Error, Result};
use crate::vector::{axpy, dot, WeightVector};

/// One data point. GLM instances carry `features = phi(x)` and a label; the
/// scalar constructions only use `label` (their `z`).
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub features: Vec<f64>,
    pub label: f64,
}

impl Instance {
    pub fn glm(features: Vec<f64>, label: f64) -> Self {
        Instance { features, label }
    }

    /// A featureless instance holding only a scalar `z`.
    pub fn scalar(z: f64) -> Self {
        Instance {
            features: Vec::new(),
            label: z,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LossKind {
    /// `max(0, 1 - y a)`
    Hinge,
    /// `L a y`
    Linear,
    /// `L s a y` with `0 < s <= 1`
    ScaledLinear { factor: f64 },
    /// `L |a - y|`
    Absolute,
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "hinge" => Ok(LossKind::Hinge),
            "linear" => Ok(LossKind::Linear),
            "absolute" => Ok(LossKind::Absolute),
            other => {
                if let Some(rest) = other.strip_prefix("scaled-linear(") {
                    let inner = rest
                        .strip_suffix(')')
                        .ok_or_else(|| config(format!("malformed loss kind `{other}`")))?;
                    let factor = inner
                        .parse::<f64>()
                        .map_err(|_| config(format!("bad scale factor in `{other}`")))?;
                    return Ok(LossKind::ScaledLinear { factor });
                }
                Err(config(format!("unknown loss kind `{other}`")))
            }
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossKind::Hinge => write!(f, "hinge"),
            LossKind::Linear => write!(f, "linear"),
            LossKind::ScaledLinear { factor } => write!(f, "scaled-linear({factor})"),
            LossKind::Absolute => write!(f, "absolute"),
        }
    }
}

/// Scalar convex loss `loss(a, y)`, Lipschitz in `a`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarLoss {
    pub kind: LossKind,
    pub lipschitz: f64,
    /// Prediction clamp `b` for the clipped learner.
    pub clip_margin: Option<f64>,
    /// Bound `c` on `|loss(a, y)|` over `a` in `[-b, b]`.
    pub value_bound: Option<f64>,
}

impl ScalarLoss {
    pub fn new(kind: LossKind, lipschitz: f64) -> Result<Self> {
        let loss = ScalarLoss {
            kind,
            lipschitz,
            clip_margin: None,
            value_bound: None,
        };
        loss.validate()?;
        Ok(loss)
    }

    /// Hinge loss; 1-Lipschitz for labels in `[-1, 1]`.
    pub fn hinge() -> Self {
        ScalarLoss {
            kind: LossKind::Hinge,
            lipschitz: 1.0,
            clip_margin: None,
            value_bound: None,
        }
    }

    pub fn linear(lipschitz: f64) -> Result<Self> {
        Self::new(LossKind::Linear, lipschitz)
    }

    pub fn scaled_linear(lipschitz: f64, factor: f64) -> Result<Self> {
        Self::new(LossKind::ScaledLinear { factor }, lipschitz)
    }

    pub fn absolute(lipschitz: f64) -> Result<Self> {
        Self::new(LossKind::Absolute, lipschitz)
    }

    pub fn with_clip(mut self, b: f64, c: f64) -> Self {
        self.clip_margin = Some(b);
        self.value_bound = Some(c);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lipschitz > 0.0 && self.lipschitz.is_finite()) {
            return Err(config(format!(
                "lipschitz constant must be positive, got {}",
                self.lipschitz
            )));
        }
        if let LossKind::ScaledLinear { factor } = self.kind {
            if !(factor > 0.0 && factor <= 1.0) {
                return Err(config(format!(
                    "scaled-linear factor must lie in (0, 1], got {factor}"
                )));
            }
        }
        if let Some(b) = self.clip_margin {
            if b.is_nan() || b < 0.0 {
                return Err(config("clip margin must be >= 0"));
            }
        }
        if let Some(c) = self.value_bound {
            if c.is_nan() || c < 0.0 {
                return Err(config("value bound must be >= 0"));
            }
        }
        Ok(())
    }

    pub fn value(&self, a: f64, y: f64) -> f64 {
        let l = self.lipschitz;
        match self.kind {
            LossKind::Hinge => (1.0 - y * a).max(0.0),
            LossKind::Linear => l * a * y,
            LossKind::ScaledLinear { factor } => l * factor * a * y,
            LossKind::Absolute => l * (a - y).abs(),
        }
    }

    /// An element of the subdifferential in `a`.
    pub fn subgrad(&self, a: f64, y: f64) -> f64 {
        let l = self.lipschitz;
        match self.kind {
            LossKind::Hinge => {
                if y * a < 1.0 {
                    -y
                } else {
                    0.0
                }
            }
            LossKind::Linear => l * y,
            LossKind::ScaledLinear { factor } => l * factor * y,
            LossKind::Absolute => {
                if a > y {
                    l
                } else if a < y {
                    -l
                } else {
                    0.0
                }
            }
        }
    }
}

/// `loss(a, y)` after validating the loss.
pub fn loss_value(loss: &ScalarLoss, a: f64, y: f64) -> Result<f64> {
    loss.validate()?;
    Ok(loss.value(a, y))
}

/// Subgradient of `loss(., y)` at `a`.
pub fn loss_subgrad(loss: &ScalarLoss, a: f64, y: f64) -> f64 {
    loss.subgrad(a, y)
}

/// User-supplied convex, Lipschitz instance objective.
pub trait InstanceObjective: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn lipschitz(&self) -> f64;
    fn value(&self, w: &[f64], z: &Instance) -> f64;
    /// `out += weight * g` for some `g` in the subdifferential at `w`.
    fn add_subgrad(&self, w: &[f64], z: &Instance, weight: f64, out: &mut [f64]);
}

/// `f(w; z) = L z w_1`, embedded in `dim` dimensions by zero padding.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearObjective {
    pub lipschitz: f64,
    pub dim: usize,
}

/// `f(w; z) = -(gamma L / 2) z <w, 1> + (L / 2) max(max_i (w_i - eps_i), 0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NonsmoothObjective {
    pub lipschitz: f64,
    pub gamma: f64,
    pub epsilons: Vec<f64>,
}

impl NonsmoothObjective {
    /// Index of the active max term, or `None` when `max_i (w_i - eps_i) <= 0`.
    /// Ties go to the smallest index.
    pub fn active_index(&self, w: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, (wi, ei)) in w.iter().zip(&self.epsilons).enumerate() {
            let v = wi - ei;
            match best {
                Some((_, b)) if v <= b => {}
                _ => best = Some((i, v)),
            }
        }
        match best {
            Some((i, v)) if v > 0.0 => Some(i),
            _ => None,
        }
    }

    fn max_term(&self, w: &[f64]) -> f64 {
        w.iter()
            .zip(&self.epsilons)
            .map(|(wi, ei)| wi - ei)
            .fold(0.0, f64::max)
    }
}

/// Per-instance convex objective `f(w; z)`.
#[derive(Clone, Debug)]
pub enum ConvexObjective {
    Glm { loss: ScalarLoss, dim: usize },
    Linear(LinearObjective),
    Nonsmooth(NonsmoothObjective),
    Custom(Arc<dyn InstanceObjective>),
}

impl ConvexObjective {
    pub fn glm(loss: ScalarLoss, dim: usize) -> Self {
        ConvexObjective::Glm { loss, dim }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexObjective::Glm { dim, .. } => *dim,
            ConvexObjective::Linear(o) => o.dim,
            ConvexObjective::Nonsmooth(o) => o.epsilons.len(),
            ConvexObjective::Custom(o) => o.dim(),
        }
    }

    /// Lipschitz constant of `f(., z)` for every admissible `z`.
    pub fn lipschitz(&self) -> f64 {
        match self {
            ConvexObjective::Glm { loss, .. } => loss.lipschitz,
            ConvexObjective::Linear(o) => o.lipschitz,
            ConvexObjective::Nonsmooth(o) => o.lipschitz,
            ConvexObjective::Custom(o) => o.lipschitz(),
        }
    }

    pub(crate) fn check_instance(&self, z: &Instance) -> Result<()> {
        if let ConvexObjective::Glm { dim, .. } = self {
            check_dim(*dim, z.features.len())?;
        }
        Ok(())
    }

    /// Value without dimension checks.
    pub(crate) fn value_unchecked(&self, w: &[f64], z: &Instance) -> f64 {
        match self {
            ConvexObjective::Glm { loss, .. } => loss.value(dot(w, &z.features), z.label),
            ConvexObjective::Linear(o) => o.lipschitz * z.label * w[0],
            ConvexObjective::Nonsmooth(o) => {
                let s: f64 = w.iter().sum();
                -0.5 * o.gamma * o.lipschitz * z.label * s + 0.5 * o.lipschitz * o.max_term(w)
            }
            ConvexObjective::Custom(o) => o.value(w, z),
        }
    }

    /// `out += weight * subgrad` without dimension checks.
    pub(crate) fn add_subgrad_unchecked(
        &self,
        w: &[f64],
        z: &Instance,
        weight: f64,
        out: &mut [f64],
    ) {
        match self {
            ConvexObjective::Glm { loss, .. } => {
                let s = loss.subgrad(dot(w, &z.features), z.label);
                if s != 0.0 {
                    axpy(out, weight * s, &z.features);
                }
            }
            ConvexObjective::Linear(o) => out[0] += weight * o.lipschitz * z.label,
            ConvexObjective::Nonsmooth(o) => {
                let lin = -0.5 * o.gamma * o.lipschitz * z.label * weight;
                if lin != 0.0 {
                    out.iter_mut().for_each(|v| *v += lin);
                }
                if let Some(i) = o.active_index(w) {
                    out[i] += weight * 0.5 * o.lipschitz;
                }
            }
            ConvexObjective::Custom(o) => o.add_subgrad(w, z, weight, out),
        }
    }
}

/// `f(w; z)`.
pub fn instance_value(obj: &ConvexObjective, w: &[f64], z: &Instance) -> Result<f64> {
    check_dim(obj.dim(), w.len())?;
    obj.check_instance(z)?;
    Ok(obj.value_unchecked(w, z))
}

/// A subgradient of `f(., z)` at `w`.
pub fn instance_subgrad(obj: &ConvexObjective, w: &[f64], z: &Instance) -> Result<WeightVector> {
    check_dim(obj.dim(), w.len())?;
    obj.check_instance(z)?;
    let mut g = WeightVector::zeros(w.len());
    obj.add_subgrad_unchecked(w, z, 1.0, &mut g);
    Ok(g)
}
