//! Unprojected (sub)gradient descent on empirical and population risks.
//!
//! Both risks are finite weighted sums (see [`Measure`]), so the same update
//! `w_{t+1} = w_t - eta * g(w_t)` drives the sample trajectory `w^S_t` and the
//! population trajectory `w^D_t`. The only projection in this module lives in
//! [`constrained_erm_oracle`], which is a reference solver, not a learner.

use std::io::Write;

use crate::distributions::{FiniteDistribution, Measure, SampleSet};
use crate::error::{check_dim, config, Error, Result};
use crate::objectives::ConvexObjective;
use crate::vector::{project_ball, WeightVector};

/// How the output iterate is formed from `w_1, ..., w_T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Averaging {
    /// `(1/T) sum_{t=1}^T w_t`
    Full,
    /// Mean of the last `ceil(fraction * T)` iterates.
    Tail(f64),
    /// `w_T`
    Last,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GdConfig {
    pub eta: f64,
    pub steps: usize,
    pub averaging: Averaging,
    /// Starting point; the origin when `None`.
    pub w0: Option<WeightVector>,
}

impl GdConfig {
    pub fn new(eta: f64, steps: usize) -> Self {
        GdConfig {
            eta,
            steps,
            averaging: Averaging::Full,
            w0: None,
        }
    }

    /// `eta = 1 / (L sqrt(T))`.
    pub fn one_over_l_sqrt_t(lipschitz: f64, steps: usize) -> Self {
        Self::new(1.0 / (lipschitz * (steps as f64).sqrt()), steps)
    }

    pub fn with_averaging(mut self, averaging: Averaging) -> Self {
        self.averaging = averaging;
        self
    }

    pub fn with_start(mut self, w0: WeightVector) -> Self {
        self.w0 = Some(w0);
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(config(format!(
                "learning rate must be positive, got {}",
                self.eta
            )));
        }
        if let Averaging::Tail(f) = self.averaging {
            if !(f > 0.0 && f <= 1.0) {
                return Err(config(format!("tail fraction must lie in (0, 1], got {f}")));
            }
        }
        if let Some(w0) = &self.w0 {
            check_dim(dim, w0.dim())?;
        }
        Ok(())
    }

    fn start(&self, dim: usize) -> WeightVector {
        self.w0.clone().unwrap_or_else(|| WeightVector::zeros(dim))
    }
}

/// Which risk produced a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Empirical { n: usize, seed: u64, replicate: u64 },
    Population { atoms: usize },
}

/// Iterates `w_0, ..., w_T` of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub iterates: Vec<WeightVector>,
    pub config: GdConfig,
    pub source: Source,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.iterates.len() - 1
    }

    pub fn last(&self) -> &WeightVector {
        self.iterates.last().expect("trajectory holds w_0")
    }

    pub fn average(&self) -> WeightVector {
        average_iterate(self)
    }

    /// CSV with header `t,w_1..w_k,norm`; only the first `max_coords`
    /// coordinates are written when given.
    pub fn write_csv<W: Write>(
        &self,
        mut out: W,
        max_coords: Option<usize>,
    ) -> std::io::Result<()> {
        let d = self.iterates[0].dim();
        let k = max_coords.map_or(d, |m| m.min(d));
        let mut header = String::from("t");
        for i in 1..=k {
            header.push_str(&format!(",w_{i}"));
        }
        header.push_str(",norm");
        writeln!(out, "{header}")?;
        for (t, w) in self.iterates.iter().enumerate() {
            write!(out, "{t}")?;
            for v in &w[..k] {
                write!(out, ",{v}")?;
            }
            writeln!(out, ",{}", w.norm())?;
        }
        Ok(())
    }
}

fn tail_start(steps: usize, fraction: f64) -> usize {
    let len = ((fraction * steps as f64).ceil() as usize).clamp(1, steps);
    steps - len + 1
}

/// Output iterate under the trajectory's averaging scheme. A zero-step
/// trajectory returns `w_0`.
pub fn average_iterate(traj: &Trajectory) -> WeightVector {
    let steps = traj.steps();
    if steps == 0 {
        return traj.iterates[0].clone();
    }
    let first = match traj.config.averaging {
        Averaging::Full => 1,
        Averaging::Tail(f) => tail_start(steps, f),
        Averaging::Last => steps,
    };
    let mut acc = WeightVector::zeros(traj.iterates[0].dim());
    for w in &traj.iterates[first..] {
        acc.axpy(1.0, w);
    }
    acc.scaled(1.0 / (steps - first + 1) as f64)
}

/// Runs GD on an arbitrary weighted measure.
pub fn gd_run_measure(
    obj: &ConvexObjective,
    measure: &Measure,
    cfg: &GdConfig,
    source: Source,
) -> Result<Trajectory> {
    let d = obj.dim();
    cfg.validate(d)?;
    measure.check(obj)?;
    let mut w = cfg.start(d);
    let mut g = vec![0.0; d];
    let mut iterates = Vec::with_capacity(cfg.steps + 1);
    iterates.push(w.clone());
    for step in 1..=cfg.steps {
        measure.subgrad_into(obj, &w, &mut g);
        w.axpy(-cfg.eta, &g);
        if !w.is_finite() {
            return Err(Error::NumericFault { step });
        }
        iterates.push(w.clone());
    }
    Ok(Trajectory {
        iterates,
        config: cfg.clone(),
        source,
    })
}

/// GD on the empirical risk `F_S`.
pub fn gd_run_empirical(
    obj: &ConvexObjective,
    s: &SampleSet,
    cfg: &GdConfig,
) -> Result<Trajectory> {
    let source = Source::Empirical {
        n: s.len(),
        seed: s.seed,
        replicate: s.replicate_index,
    };
    gd_run_measure(obj, &s.measure(), cfg, source)
}

/// GD on the population risk `F_D`, with exact gradients.
pub fn gd_run_population(
    obj: &ConvexObjective,
    dist: &FiniteDistribution,
    cfg: &GdConfig,
) -> Result<Trajectory> {
    let source = Source::Population {
        atoms: dist.atoms().len(),
    };
    gd_run_measure(obj, &dist.measure(), cfg, source)
}

/// Summary of a run that does not keep its iterates.
#[derive(Clone, Debug, PartialEq)]
pub struct LeanRun {
    pub last: WeightVector,
    /// Output iterate under the configured averaging.
    pub output: WeightVector,
    /// `||w_t||` for `t = 0..=T`.
    pub norms: Vec<f64>,
    /// Largest `||w_{t+1} - w_t||`.
    pub max_step: f64,
}

/// GD keeping only a running average and per-step norms, for very long runs.
pub fn gd_run_lean(obj: &ConvexObjective, measure: &Measure, cfg: &GdConfig) -> Result<LeanRun> {
    let d = obj.dim();
    cfg.validate(d)?;
    measure.check(obj)?;
    let steps = cfg.steps;
    let first = match cfg.averaging {
        Averaging::Full => 1,
        Averaging::Tail(f) if steps > 0 => tail_start(steps, f),
        Averaging::Last => steps.max(1),
        Averaging::Tail(_) => 1,
    };
    let mut w = cfg.start(d);
    let mut acc = WeightVector::zeros(d);
    let mut g = vec![0.0; d];
    let mut norms = Vec::with_capacity(steps + 1);
    norms.push(w.norm());
    let mut max_step: f64 = 0.0;
    for step in 1..=steps {
        measure.subgrad_into(obj, &w, &mut g);
        w.axpy(-cfg.eta, &g);
        if !w.is_finite() {
            return Err(Error::NumericFault { step });
        }
        max_step = max_step.max(cfg.eta * crate::vector::norm(&g));
        norms.push(w.norm());
        if step >= first {
            acc.axpy(1.0, &w);
        }
    }
    let output = if steps == 0 {
        w.clone()
    } else {
        acc.scaled(1.0 / (steps - first + 1) as f64)
    };
    Ok(LeanRun {
        last: w,
        output,
        norms,
        max_step,
    })
}

/// Result of [`constrained_erm_oracle`].
#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub minimizer: WeightVector,
    /// `F(minimizer)`; always an attained value, hence `>=` the true minimum.
    pub value: f64,
    /// Guaranteed bound on `value - min_{||w|| <= B} F(w)`.
    pub tolerance: f64,
}

/// Minimizes a weighted measure over the ball `||w|| <= radius` by projected
/// subgradient descent with steps `radius / (L sqrt(k))`.
///
/// Returns the better of the uniformly averaged iterate and the best visited
/// iterate. Both obey the averaged-iterate guarantee `3 L B / sqrt(K)`.
pub fn constrained_min_measure(
    obj: &ConvexObjective,
    measure: &Measure,
    radius: f64,
    budget: usize,
) -> Result<OracleResult> {
    if !(radius > 0.0) {
        return Err(config(format!(
            "ball radius must be positive, got {radius}"
        )));
    }
    if budget == 0 {
        return Err(config("oracle budget must be positive"));
    }
    measure.check(obj)?;
    let d = obj.dim();
    let l = obj.lipschitz();
    let mut w = WeightVector::zeros(d);
    let mut g = vec![0.0; d];
    let mut acc = WeightVector::zeros(d);
    let mut best = w.clone();
    let mut best_value = measure.risk_unchecked(obj, &w);
    for k in 1..=budget {
        measure.subgrad_into(obj, &w, &mut g);
        let step = radius / (l * (k as f64).sqrt());
        w.axpy(-step, &g);
        project_ball(&mut w, radius);
        acc.axpy(1.0, &w);
        let v = measure.risk_unchecked(obj, &w);
        if v < best_value {
            best_value = v;
            best.copy_from_slice(&w);
        }
    }
    let avg = acc.scaled(1.0 / budget as f64);
    let avg_value = measure.risk_unchecked(obj, &avg);
    let (minimizer, value) = if avg_value <= best_value {
        (avg, avg_value)
    } else {
        (best, best_value)
    };
    Ok(OracleResult {
        minimizer,
        value,
        tolerance: 3.0 * l * radius / (budget as f64).sqrt(),
    })
}

/// Default step budget of the reference solver.
pub const ORACLE_BUDGET: usize = 100_000;

/// Constrained ERM reference `min_{||w|| <= B} F_S(w)`.
pub fn constrained_erm_oracle(
    obj: &ConvexObjective,
    s: &SampleSet,
    radius: f64,
    budget: usize,
) -> Result<OracleResult> {
    if budget < 10_000 {
        return Err(config(format!(
            "oracle budget must be >= 10^4, got {budget}"
        )));
    }
    constrained_min_measure(obj, &s.measure(), radius, budget)
}

/// Right-hand side of the averaged-GD guarantee `eta L^2 + B^2 / (eta T)`.
pub fn optimization_bound(eta: f64, lipschitz: f64, radius: f64, steps: usize) -> f64 {
    eta * lipschitz * lipschitz + radius * radius / (eta * steps as f64)
}
