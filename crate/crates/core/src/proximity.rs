//! Distances between sample-driven GD and the population trajectory `w^D_t`.
//!
//! The reference sequence is always the exact population run, computed once
//! per experiment. Bound evaluators take the iterate index `k` of the engine;
//! the closed forms are stated for iterate `t + 1`, so `k = t + 1` and both
//! bounds are zero at `k = 0` (where every trajectory sits at `w_0`).

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use crate::distributions::{replicate_rng, FiniteDistribution, SampleSet};
use crate::error::{config, Error, Result};
use crate::gd_engine::{
    average_iterate, constrained_erm_oracle, gd_run_empirical, gd_run_population, GdConfig,
    Trajectory,
};
use crate::objectives::ConvexObjective;
use crate::stats::{mean_se, quantile};

/// `||a_t - b_t||` for every step, step 0 first.
pub fn trajectory_distance(a: &Trajectory, b: &Trajectory) -> Result<Vec<f64>> {
    if a.iterates.len() != b.iterates.len() {
        return Err(Error::LengthMismatch {
            left: a.iterates.len(),
            right: b.iterates.len(),
        });
    }
    let mut out = Vec::with_capacity(a.iterates.len());
    for (x, y) in a.iterates.iter().zip(&b.iterates) {
        if x.dim() != y.dim() {
            return Err(Error::DimensionMismatch {
                expected: x.dim(),
                got: y.dim(),
            });
        }
        out.push(x.distance(y));
    }
    Ok(out)
}

/// In-expectation bound `4 eta L (t+1)/sqrt(n) + 4 eta L sqrt(t+1)` on
/// `E ||w^S_{t+1} - w^D_{t+1}||`.
pub fn proximity_bound_expectation(eta: f64, lipschitz: f64, t: usize, n: usize) -> f64 {
    let s = t as f64 + 1.0;
    4.0 * eta * lipschitz * s / (n as f64).sqrt() + 4.0 * eta * lipschitz * s.sqrt()
}

/// High-probability bound on `||w^S_{t+1} - w^D_{t+1}||`, uniform over a
/// horizon of `horizon` steps:
/// `6 eta L (t+1)/sqrt(n) sqrt(log(horizon/delta)) + 4 eta L sqrt(t+1)`.
pub fn proximity_bound_highprob(
    eta: f64,
    lipschitz: f64,
    t: usize,
    horizon: usize,
    n: usize,
    delta: f64,
) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let s = t as f64 + 1.0;
    let log_term = (horizon.max(1) as f64 / delta).ln().max(0.0);
    Ok(
        6.0 * eta * lipschitz * s / (n as f64).sqrt() * log_term.sqrt()
            + 4.0 * eta * lipschitz * s.sqrt(),
    )
}

/// Bound on iterate `k` of the engine, zero at `k = 0`.
pub fn expectation_bound_at(eta: f64, lipschitz: f64, k: usize, n: usize) -> f64 {
    if k == 0 {
        0.0
    } else {
        proximity_bound_expectation(eta, lipschitz, k - 1, n)
    }
}

/// High-probability bound on iterate `k` of a `horizon`-step run, zero at `k = 0`.
pub fn highprob_bound_at(
    eta: f64,
    lipschitz: f64,
    k: usize,
    horizon: usize,
    n: usize,
    delta: f64,
) -> Result<f64> {
    if k == 0 {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Domain(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        return Ok(0.0);
    }
    proximity_bound_highprob(eta, lipschitz, k - 1, horizon, n, delta)
}

/// One replicate: distances to the population trajectory and the bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct ProximityReport {
    pub replicate: u64,
    pub per_t_distance: Vec<f64>,
    pub bound_expectation: Vec<f64>,
    pub bound_highprob: Vec<f64>,
    pub delta: f64,
    pub exceeded_highprob: Vec<bool>,
}

impl ProximityReport {
    pub fn exceeded(&self) -> bool {
        self.exceeded_highprob.iter().any(|&e| e)
    }
}

/// Aggregate over replicates.
#[derive(Clone, Debug, PartialEq)]
pub struct ProximitySummary {
    pub n: usize,
    pub delta: f64,
    pub reports: Vec<ProximityReport>,
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
    pub median: Vec<f64>,
    pub q90: Vec<f64>,
    pub max: Vec<f64>,
    pub bound_expectation: Vec<f64>,
    pub bound_highprob: Vec<f64>,
    /// Fraction of replicates whose trajectory exceeds the high-probability bound at some step.
    pub exceed_fraction: f64,
}

impl ProximitySummary {
    pub fn replicates(&self) -> usize {
        self.reports.len()
    }

    /// Steps where the mean exceeds the expectation bound by more than `z` standard errors.
    pub fn expectation_violations(&self, z: f64) -> Vec<usize> {
        (0..self.mean.len())
            .filter(|&t| self.mean[t] > self.bound_expectation[t] + z * self.std_err[t])
            .collect()
    }

    /// Fraction of steps `t >= 1` whose mean lies below half the expectation bound.
    pub fn fraction_below_half_bound(&self) -> f64 {
        let steps = self.mean.len() - 1;
        if steps == 0 {
            return 1.0;
        }
        let hits = (1..=steps)
            .filter(|&t| self.mean[t] <= 0.5 * self.bound_expectation[t])
            .count();
        hits as f64 / steps as f64
    }

    /// `exceed_fraction <= delta + 2 sqrt(delta / replicates)`.
    pub fn highprob_holds(&self) -> bool {
        self.exceed_fraction <= self.delta + 2.0 * (self.delta / self.replicates() as f64).sqrt()
    }

    pub fn max_distance(&self) -> f64 {
        self.max.iter().copied().fold(0.0, f64::max)
    }

    /// Per-replicate rows: `replicate,t,distance,bound_exp,bound_hp,exceeded`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "replicate,t,distance,bound_exp,bound_hp,exceeded")?;
        for r in &self.reports {
            for t in 0..r.per_t_distance.len() {
                writeln!(
                    out,
                    "{},{},{:.12e},{:.12e},{:.12e},{}",
                    r.replicate,
                    t,
                    r.per_t_distance[t],
                    r.bound_expectation[t],
                    r.bound_highprob[t],
                    u8::from(r.exceeded_highprob[t])
                )?;
            }
        }
        Ok(())
    }

    /// Per-step summary: `t,mean,std_err,median,q90,max,bound_exp,bound_hp`.
    pub fn write_summary_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,mean,std_err,median,q90,max,bound_exp,bound_hp")?;
        for t in 0..self.mean.len() {
            writeln!(
                out,
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                t,
                self.mean[t],
                self.std_err[t],
                self.median[t],
                self.q90[t],
                self.max[t],
                self.bound_expectation[t],
                self.bound_highprob[t]
            )?;
        }
        Ok(())
    }
}

fn column(rows: &[Vec<f64>], t: usize) -> Vec<f64> {
    rows.iter().map(|r| r[t]).collect()
}

/// Draws `replicates` samples of size `n`, runs GD on each and compares with
/// the population run under the same configuration.
pub fn proximity_experiment(
    obj: &ConvexObjective,
    dist: &FiniteDistribution,
    cfg: &GdConfig,
    n: usize,
    replicates: usize,
    seed: u64,
    delta: f64,
) -> Result<ProximitySummary> {
    if n == 0 || replicates == 0 {
        return Err(config("n and replicates must be positive"));
    }
    let l = obj.lipschitz();
    let steps = cfg.steps;
    let bound_exp: Vec<f64> = (0..=steps)
        .map(|k| expectation_bound_at(cfg.eta, l, k, n))
        .collect();
    let bound_hp: Vec<f64> = (0..=steps)
        .map(|k| highprob_bound_at(cfg.eta, l, k, steps, n, delta))
        .collect::<Result<_>>()?;
    let reference = gd_run_population(obj, dist, cfg)?;
    let reports: Vec<ProximityReport> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| -> Result<ProximityReport> {
            let s = crate::distributions::sample(dist, n, seed, r)?;
            let traj = gd_run_empirical(obj, &s, cfg)?;
            let d = trajectory_distance(&traj, &reference)?;
            let exceeded = d.iter().zip(&bound_hp).map(|(x, b)| x > b).collect();
            Ok(ProximityReport {
                replicate: r,
                per_t_distance: d,
                bound_expectation: bound_exp.clone(),
                bound_highprob: bound_hp.clone(),
                delta,
                exceeded_highprob: exceeded,
            })
        })
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<f64>> = reports.iter().map(|r| r.per_t_distance.clone()).collect();
    let mut mean = Vec::with_capacity(steps + 1);
    let mut se = Vec::with_capacity(steps + 1);
    let mut median = Vec::with_capacity(steps + 1);
    let mut q90 = Vec::with_capacity(steps + 1);
    let mut max = Vec::with_capacity(steps + 1);
    for t in 0..=steps {
        let col = column(&rows, t);
        let (m, s) = mean_se(&col);
        mean.push(m);
        se.push(s);
        median.push(quantile(&col, 0.5));
        q90.push(quantile(&col, 0.9));
        max.push(col.iter().copied().fold(0.0, f64::max));
    }
    let exceed = reports.iter().filter(|r| r.exceeded()).count();
    Ok(ProximitySummary {
        n,
        delta,
        exceed_fraction: exceed as f64 / replicates as f64,
        reports,
        mean,
        std_err: se,
        median,
        q90,
        max,
        bound_expectation: bound_exp,
        bound_highprob: bound_hp,
    })
}

/// Uniform-stability bound `4 eta L (sqrt(t) + t/n)` on iterate `t`.
pub fn stability_bound(eta: f64, lipschitz: f64, t: usize, n: usize) -> f64 {
    let tf = t as f64;
    4.0 * eta * lipschitz * (tf.sqrt() + tf / n as f64)
}

/// Per-step `||w^S_t - w^{S'}_t||` for an explicit pair of samples.
pub fn stability_distance(
    obj: &ConvexObjective,
    s: &SampleSet,
    sp: &SampleSet,
    cfg: &GdConfig,
) -> Result<Vec<f64>> {
    let a = gd_run_empirical(obj, s, cfg)?;
    let b = gd_run_empirical(obj, sp, cfg)?;
    trajectory_distance(&a, &b)
}

/// Neighbouring-sample experiment contrasted with proximity to `w^D_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    pub n: usize,
    pub replicates: usize,
    /// Mean over replicates of `||w^S_t - w^{S'}_t||`.
    pub per_t_distance: Vec<f64>,
    /// `4 eta L (sqrt(t) + t/n)`.
    pub uniform_bound: Vec<f64>,
    /// Mean over replicates of `||w^S_t - w^D_t||`.
    pub per_t_proximity: Vec<f64>,
    /// Replicate-steps where `d(S, S') > d(S, D) + d(S', D)`.
    pub triangle_violations: usize,
}

impl StabilityReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,stability,uniform_bound,proximity")?;
        for t in 0..self.per_t_distance.len() {
            writeln!(
                out,
                "{},{:.12e},{:.12e},{:.12e}",
                t, self.per_t_distance[t], self.uniform_bound[t], self.per_t_proximity[t]
            )?;
        }
        Ok(())
    }
}

/// Each replicate draws `S`, replaces one uniformly chosen example by a fresh
/// draw to form `S'`, and runs GD on both.
pub fn stability_experiment(
    obj: &ConvexObjective,
    dist: &FiniteDistribution,
    cfg: &GdConfig,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<StabilityReport> {
    if n < 2 {
        return Err(config("stability experiment needs n >= 2"));
    }
    if replicates == 0 {
        return Err(config("replicates must be positive"));
    }
    let reference = gd_run_population(obj, dist, cfg)?;
    let per_rep: Vec<(Vec<f64>, Vec<f64>, usize)> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| -> Result<(Vec<f64>, Vec<f64>, usize)> {
            let mut rng = replicate_rng(seed, r);
            let mut idx = dist.draw_indices(&mut rng, n);
            let s = SampleSet::from_indices(dist, idx.clone(), seed, r);
            let pos = rng.gen_range(0..n);
            idx[pos] = dist.draw_indices(&mut rng, 1)[0];
            let sp = SampleSet::from_indices(dist, idx, seed, r);
            let a = gd_run_empirical(obj, &s, cfg)?;
            let b = gd_run_empirical(obj, &sp, cfg)?;
            let dab = trajectory_distance(&a, &b)?;
            let dad = trajectory_distance(&a, &reference)?;
            let dbd = trajectory_distance(&b, &reference)?;
            let bad = (0..dab.len())
                .filter(|&t| dab[t] > dad[t] + dbd[t] + 1e-12 * (1.0 + dad[t] + dbd[t]))
                .count();
            Ok((dab, dad, bad))
        })
        .collect::<Result<_>>()?;
    let stab: Vec<Vec<f64>> = per_rep.iter().map(|p| p.0.clone()).collect();
    let prox: Vec<Vec<f64>> = per_rep.iter().map(|p| p.1.clone()).collect();
    let l = obj.lipschitz();
    Ok(StabilityReport {
        n,
        replicates,
        per_t_distance: (0..=cfg.steps)
            .map(|t| mean_se(&column(&stab, t)).0)
            .collect(),
        uniform_bound: (0..=cfg.steps)
            .map(|t| stability_bound(cfg.eta, l, t, n))
            .collect(),
        per_t_proximity: (0..=cfg.steps)
            .map(|t| mean_se(&column(&prox, t)).0)
            .collect(),
        triangle_violations: per_rep.iter().map(|p| p.2).sum(),
    })
}

/// Monte-Carlo estimates of the two distribution-dependent guarantee terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GtildeTerms {
    /// `E[F_S(w_bar^S) - min_{||w|| <= B} F_S(w)]` with its standard error.
    pub erm_gap: (f64, f64),
    /// `E[||w_bar^S - w_bar^D|| L / sqrt(n)]` with its standard error.
    pub proximity_term: (f64, f64),
    /// Oracle tolerance on each inner minimum.
    pub oracle_tolerance: f64,
}

impl GtildeTerms {
    pub fn value(&self) -> f64 {
        self.erm_gap.0.max(self.proximity_term.0)
    }
}

/// `radius` is the constraint set of the inner minimum; `budget` is the
/// reference solver's step count.
#[allow(clippy::too_many_arguments)]
pub fn gtilde_terms(
    obj: &ConvexObjective,
    dist: &FiniteDistribution,
    cfg: &GdConfig,
    n: usize,
    replicates: usize,
    seed: u64,
    radius: f64,
    budget: usize,
) -> Result<GtildeTerms> {
    if n == 0 || replicates == 0 {
        return Err(config("n and replicates must be positive"));
    }
    let l = obj.lipschitz();
    let wd = average_iterate(&gd_run_population(obj, dist, cfg)?);
    let rows: Vec<(f64, f64, f64)> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| -> Result<(f64, f64, f64)> {
            let s = crate::distributions::sample(dist, n, seed, r)?;
            let ws = average_iterate(&gd_run_empirical(obj, &s, cfg)?);
            let measure = s.measure();
            let oracle = constrained_erm_oracle(obj, &s, radius, budget)?;
            let gap = measure.risk(obj, &ws)? - oracle.value;
            Ok((
                gap,
                ws.distance(&wd) * l / (n as f64).sqrt(),
                oracle.tolerance,
            ))
        })
        .collect::<Result<_>>()?;
    let gaps: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let prox: Vec<f64> = rows.iter().map(|r| r.1).collect();
    Ok(GtildeTerms {
        erm_gap: mean_se(&gaps),
        proximity_term: mean_se(&prox),
        oracle_tolerance: rows[0].2,
    })
}
