//! Excess risk, Rademacher estimates for (shifted) balls, prediction clipping
//! and the high-probability experiment for the clipped average iterate.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use crate::distributions::{
    replicate_rng, sample, stream_seed, FiniteDistribution, Measure, SampleSet,
};
use crate::error::{config, Result};
use crate::gd_engine::{
    average_iterate, constrained_min_measure, gd_run_empirical, gd_run_population, GdConfig,
};
use crate::objectives::{ConvexObjective, ScalarLoss};
use crate::stats::{mean_se, quantile};
use crate::vector::{norm, project_ball, WeightVector};

/// `{w : ||w - center|| <= radius}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftedBall {
    pub center: WeightVector,
    pub radius: f64,
}

impl ShiftedBall {
    pub fn new(center: WeightVector, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) {
            return Err(config(format!("ball radius must be >= 0, got {radius}")));
        }
        Ok(ShiftedBall { center, radius })
    }

    pub fn contains(&self, w: &[f64]) -> bool {
        self.center.distance(w) <= self.radius * (1.0 + 1e-12)
    }

    /// Euclidean projection onto the ball.
    pub fn project(&self, w: &[f64]) -> WeightVector {
        let mut v: Vec<f64> = w
            .iter()
            .zip(self.center.iter())
            .map(|(a, c)| a - c)
            .collect();
        project_ball(&mut v, self.radius);
        for (x, c) in v.iter_mut().zip(self.center.iter()) {
            *x += c;
        }
        WeightVector::from_vec(v)
    }
}

/// Prediction clamp to `[-b, b]`; `c` bounds the loss on that interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClipSpec {
    pub b: f64,
    pub c: f64,
}

impl ClipSpec {
    pub fn new(b: f64, c: f64) -> Result<Self> {
        if !(b > 0.0 && c > 0.0) {
            return Err(config(format!(
                "clip needs b > 0 and c > 0, got b={b}, c={c}"
            )));
        }
        Ok(ClipSpec { b, c })
    }
}

pub fn clip(a: f64, spec: &ClipSpec) -> f64 {
    a.clamp(-spec.b, spec.b)
}

/// Checks on a dense grid of predictions that the loss is bounded by `c` on
/// `[-b, b]` and that clipping never increases it, for every label in `labels`.
pub fn check_loss_assumption(loss: &ScalarLoss, spec: &ClipSpec, labels: &[f64]) -> Result<()> {
    const POINTS: usize = 2001;
    for &y in labels {
        for i in 0..POINTS {
            let a = -4.0 * spec.b + 8.0 * spec.b * i as f64 / (POINTS - 1) as f64;
            let v = loss.value(a, y);
            let vc = loss.value(clip(a, spec), y);
            if a.abs() <= spec.b && v.abs() > spec.c + 1e-12 {
                return Err(config(format!(
                    "|loss({a}, {y})| = {} exceeds c = {}",
                    v.abs(),
                    spec.c
                )));
            }
            if vc > v + 1e-12 {
                return Err(config(format!(
                    "clipping increases the loss at a={a}, y={y}"
                )));
            }
        }
    }
    Ok(())
}

/// `F_D(w) - min_{||w|| <= B} F_D`, with the solver tolerance attached.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Excess {
    pub value: f64,
    pub tolerance: f64,
}

/// The constrained minimum is taken on the distribution's own measure, so the
/// reference solver works on exact population weights.
pub fn excess_population_risk(
    dist: &FiniteDistribution,
    obj: &ConvexObjective,
    w: &[f64],
    radius: f64,
    budget: usize,
) -> Result<Excess> {
    let m = dist.measure();
    let oracle = constrained_min_measure(obj, &m, radius, budget)?;
    Ok(Excess {
        value: m.risk(obj, w)? - oracle.value,
        tolerance: oracle.tolerance,
    })
}

fn features_of(s: &SampleSet) -> Vec<&[f64]> {
    s.instances.iter().map(|z| z.features.as_slice()).collect()
}

fn sigma_signs(seed: u64, draw: u64, n: usize) -> Vec<f64> {
    let mut rng = replicate_rng(seed, draw);
    (0..n)
        .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

/// `(1/n) || sum_i sigma_i phi(x_i) ||` for one sign vector.
fn linear_sup(feats: &[&[f64]], sigma: &[f64]) -> f64 {
    let d = feats.first().map_or(0, |f| f.len());
    let mut acc = vec![0.0; d];
    for (f, s) in feats.iter().zip(sigma) {
        for (a, x) in acc.iter_mut().zip(f.iter()) {
            *a += s * x;
        }
    }
    norm(&acc) / feats.len() as f64
}

/// Monte-Carlo empirical Rademacher complexity of `{x -> v . phi(x) : ||v|| <= K}`,
/// using `sup_v sum_i sigma_i v . phi(x_i) = K || sum_i sigma_i phi(x_i) ||`.
pub fn rademacher_linear(
    s: &SampleSet,
    radius: f64,
    m_sigma: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if m_sigma < 100 {
        return Err(config(format!("need >= 100 sign draws, got {m_sigma}")));
    }
    if !(radius >= 0.0) {
        return Err(config("radius must be >= 0"));
    }
    let feats = features_of(s);
    let n = feats.len();
    let vals: Vec<f64> = (0..m_sigma as u64)
        .into_par_iter()
        .map(|j| radius * linear_sup(&feats, &sigma_signs(seed, j, n)))
        .collect();
    Ok(mean_se(&vals))
}

/// Rademacher estimates for the loss class over a shifted ball.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RademacherGlm {
    /// `L` times the linear-class estimate; an upper bound by contraction and
    /// independent of the ball's center.
    pub contraction: (f64, f64),
    /// Maximum over a fixed finite candidate set inside the ball; a lower bound.
    pub direct_lower: (f64, f64),
}

/// Fixed candidates: the center, `center +- K e_i`, and `center + K v_j` for
/// `extra` unit directions drawn from a stream tied to `seed`.
fn candidate_set(ball: &ShiftedBall, seed: u64, extra: usize) -> Vec<WeightVector> {
    let d = ball.center.dim();
    let mut out = vec![ball.center.clone()];
    for i in 0..d {
        for s in [-1.0, 1.0] {
            let mut w = ball.center.clone();
            w[i] += s * ball.radius;
            out.push(w);
        }
    }
    let mut rng = replicate_rng(stream_seed(seed, u64::MAX), 0);
    for _ in 0..extra {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nv = norm(&v);
        if nv > 0.0 {
            let mut w = ball.center.clone();
            w.axpy(ball.radius / nv, &v);
            out.push(w);
        }
    }
    out
}

pub fn rademacher_glm_ball(
    s: &SampleSet,
    loss: &ScalarLoss,
    ball: &ShiftedBall,
    m_sigma: usize,
    seed: u64,
) -> Result<RademacherGlm> {
    loss.validate()?;
    let (lin, lin_se) = rademacher_linear(s, ball.radius, m_sigma, seed)?;
    let feats = features_of(s);
    let n = feats.len();
    for f in &feats {
        crate::error::check_dim(ball.center.dim(), f.len())?;
    }
    let cands = candidate_set(ball, seed, 32);
    let losses: Vec<Vec<f64>> = cands
        .iter()
        .map(|w| {
            s.instances
                .iter()
                .map(|z| loss.value(w.dot(&z.features), z.label))
                .collect()
        })
        .collect();
    let direct: Vec<f64> = (0..m_sigma as u64)
        .into_par_iter()
        .map(|j| {
            let sigma = sigma_signs(seed, j, n);
            losses
                .iter()
                .map(|row| row.iter().zip(&sigma).map(|(l, s)| l * s).sum::<f64>() / n as f64)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    Ok(RademacherGlm {
        contraction: (loss.lipschitz * lin, loss.lipschitz * lin_se),
        direct_lower: mean_se(&direct),
    })
}

/// Clipped risk `sum_j p_j loss(clip(w . x_j), y_j)` of a GLM.
pub fn clipped_risk(measure: &Measure, loss: &ScalarLoss, spec: &ClipSpec, w: &[f64]) -> f64 {
    let vals: Vec<f64> = measure
        .atoms
        .iter()
        .zip(&measure.weights)
        .map(|(z, p)| p * loss.value(clip(crate::vector::dot(w, &z.features), spec), z.label))
        .collect();
    crate::stats::pairwise_sum(&vals)
}

/// Radii at which the comparator infimum is evaluated.
pub const COMPARATOR_RADII: [f64; 11] = [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 3.0, 4.0, 8.0];

/// One comparator candidate for the high-probability bound.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparator {
    pub radius: f64,
    pub point: WeightVector,
    pub risk: f64,
}

/// Population minimizers over the balls in [`COMPARATOR_RADII`].
pub fn comparators(
    obj: &ConvexObjective,
    dist: &FiniteDistribution,
    budget: usize,
) -> Result<Vec<Comparator>> {
    let m = dist.measure();
    COMPARATOR_RADII
        .par_iter()
        .map(|&r| -> Result<Comparator> {
            if r == 0.0 {
                let w = WeightVector::zeros(obj.dim());
                return Ok(Comparator {
                    radius: 0.0,
                    risk: m.risk(obj, &w)?,
                    point: w,
                });
            }
            let o = constrained_min_measure(obj, &m, r, budget)?;
            Ok(Comparator {
                radius: r,
                point: o.minimizer,
                risk: o.value,
            })
        })
        .collect()
}

/// Evaluated high-probability bound on `F_D(g(w_bar^S)) - F_D*`:
///
/// `inf_w [F_D(w) - F_D* + ||w||^2/(eta T) + (||w|| L + c) sqrt(2 log(2/delta)/n)]`
/// `+ 12 eta L^2 T/n sqrt(log(4T/delta)) + 8 eta L^2 sqrt(T/n) + 2 eta L^2 + c sqrt(2 log(8/delta)/n)`
///
/// with the infimum restricted to `cands` (so the value is an upper bound on
/// the exact expression).
pub fn hp_bound(
    cands: &[Comparator],
    best_risk: f64,
    lipschitz: f64,
    c: f64,
    eta: f64,
    steps: usize,
    n: usize,
    delta: f64,
) -> f64 {
    let nf = n as f64;
    let tf = steps as f64;
    let l2 = lipschitz * lipschitz;
    let comp = cands
        .iter()
        .map(|k| {
            let r = k.point.norm();
            k.risk - best_risk
                + r * r / (eta * tf)
                + (r * lipschitz + c) * (2.0 * (2.0 / delta).ln() / nf).sqrt()
        })
        .fold(f64::INFINITY, f64::min);
    comp + 12.0 * eta * l2 * tf / nf * (4.0 * tf / delta).ln().sqrt()
        + 8.0 * eta * l2 * (tf / nf).sqrt()
        + 2.0 * eta * l2
        + c * (2.0 * (8.0 / delta).ln() / nf).sqrt()
}

/// One row of the quantile table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HpRow {
    pub delta: f64,
    /// Empirical `(1 - delta)`-quantile of the clipped excess risk.
    pub quantile: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HpReport {
    pub n: usize,
    /// Per replicate: `(clipped excess, unclipped excess)`.
    pub excess: Vec<(f64, f64)>,
    pub rows: Vec<HpRow>,
    /// Best attained population risk over the comparator balls; excess is measured against it.
    pub best_risk: f64,
}

impl HpReport {
    pub fn all_below_bound(&self) -> bool {
        self.rows.iter().all(|r| r.quantile <= r.bound)
    }

    pub fn write_replicates_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n,replicate,clipped_excess,unclipped_excess")?;
        for (r, (a, b)) in self.excess.iter().enumerate() {
            writeln!(out, "{},{},{:.12e},{:.12e}", self.n, r, a, b)?;
        }
        Ok(())
    }

    pub fn write_quantiles_csv<W: Write>(&self, mut out: W, header: bool) -> std::io::Result<()> {
        if header {
            writeln!(out, "n,delta,quantile,bound")?;
        }
        for row in &self.rows {
            writeln!(
                out,
                "{},{},{:.12e},{:.12e}",
                self.n, row.delta, row.quantile, row.bound
            )?;
        }
        Ok(())
    }
}

/// Clipped high-probability experiment for a GLM objective.
#[allow(clippy::too_many_arguments)]
pub fn hp_experiment(
    dist: &FiniteDistribution,
    obj: &ConvexObjective,
    spec: &ClipSpec,
    n: usize,
    cfg: &GdConfig,
    replicates: usize,
    seed: u64,
    deltas: &[f64],
    budget: usize,
) -> Result<HpReport> {
    let ConvexObjective::Glm { loss, .. } = obj else {
        return Err(config("clipped experiment needs a GLM objective"));
    };
    let labels: Vec<f64> = dist.atoms().iter().map(|z| z.label).collect();
    check_loss_assumption(loss, spec, &labels)?;
    if n == 0 || replicates == 0 || cfg.steps == 0 {
        return Err(config("n, T and replicates must be positive"));
    }
    for &d in deltas {
        if !(d > 0.0 && d < 1.0) {
            return Err(config(format!("delta must lie in (0, 1), got {d}")));
        }
    }
    let m = dist.measure();
    let cands = comparators(obj, dist, budget)?;
    let best = cands.iter().map(|k| k.risk).fold(f64::INFINITY, f64::min);
    let excess: Vec<(f64, f64)> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| -> Result<(f64, f64)> {
            let s = sample(dist, n, seed, r)?;
            let w = average_iterate(&gd_run_empirical(obj, &s, cfg)?);
            Ok((
                clipped_risk(&m, loss, spec, &w) - best,
                m.risk(obj, &w)? - best,
            ))
        })
        .collect::<Result<_>>()?;
    let clipped: Vec<f64> = excess.iter().map(|e| e.0).collect();
    let rows = deltas
        .iter()
        .map(|&d| HpRow {
            delta: d,
            quantile: quantile(&clipped, 1.0 - d),
            bound: hp_bound(
                &cands,
                best,
                loss.lipschitz,
                spec.c,
                cfg.eta,
                cfg.steps,
                n,
                d,
            ),
        })
        .collect();
    Ok(HpReport {
        n,
        excess,
        rows,
        best_risk: best,
    })
}

/// Mean excess population risk at one sample size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExcessRateRow {
    pub n: usize,
    pub eta: f64,
    pub steps: usize,
    pub mean: f64,
    pub std_err: f64,
    pub tolerance: f64,
}

/// For each `n`: `eta = 1/(L sqrt(n))`, `T = n`, and the mean over replicates
/// of `F_D(w_bar^S) - min_{||w|| <= B} F_D`.
pub fn excess_rate_experiment(
    dist: &FiniteDistribution,
    obj: &ConvexObjective,
    n_list: &[usize],
    replicates: usize,
    seed: u64,
    radius: f64,
    budget: usize,
) -> Result<Vec<ExcessRateRow>> {
    if n_list.is_empty() || replicates == 0 {
        return Err(config("need a non-empty n list and replicates >= 1"));
    }
    let m = dist.measure();
    let oracle = constrained_min_measure(obj, &m, radius, budget)?;
    let l = obj.lipschitz();
    n_list
        .iter()
        .map(|&n| -> Result<ExcessRateRow> {
            if n == 0 {
                return Err(config("n must be positive"));
            }
            let cfg = GdConfig::new(1.0 / (l * (n as f64).sqrt()), n);
            let vals: Vec<f64> = (0..replicates as u64)
                .into_par_iter()
                .map(|r| -> Result<f64> {
                    let s = sample(dist, n, stream_seed(seed, n as u64), r)?;
                    let w = average_iterate(&gd_run_empirical(obj, &s, &cfg)?);
                    Ok(m.risk(obj, &w)? - oracle.value)
                })
                .collect::<Result<_>>()?;
            let (mean, se) = mean_se(&vals);
            Ok(ExcessRateRow {
                n,
                eta: cfg.eta,
                steps: n,
                mean,
                std_err: se,
                tolerance: oracle.tolerance,
            })
        })
        .collect()
}

/// Uniform-convergence check on a ball around the population output.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapBand {
    /// Mean and standard error of `F_D(w) - F_S(w)` at the projected output.
    pub gap: (f64, f64),
    /// `2 L K / sqrt(n)`.
    pub bound: f64,
    /// Fraction of replicates whose output already lay inside the ball.
    pub inside: f64,
}

impl GapBand {
    pub fn holds(&self) -> bool {
        self.gap.0 <= self.bound + 2.0 * self.gap.1
    }
}

/// Projects `w_bar^S` onto `{||w - w_bar^D|| <= K}` and measures its generalization gap.
pub fn gap_band_experiment(
    obj: &ConvexObjective,
    dist: &FiniteDistribution,
    cfg: &GdConfig,
    n: usize,
    replicates: usize,
    seed: u64,
    radius: f64,
) -> Result<GapBand> {
    if n == 0 || replicates == 0 {
        return Err(config("n and replicates must be positive"));
    }
    let ball = ShiftedBall::new(average_iterate(&gd_run_population(obj, dist, cfg)?), radius)?;
    let m = dist.measure();
    let rows: Vec<(f64, bool)> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| -> Result<(f64, bool)> {
            let s = sample(dist, n, seed, r)?;
            let w = average_iterate(&gd_run_empirical(obj, &s, cfg)?);
            let inside = ball.contains(&w);
            let p = ball.project(&w);
            Ok((m.risk(obj, &p)? - s.measure().risk(obj, &p)?, inside))
        })
        .collect::<Result<_>>()?;
    let gaps: Vec<f64> = rows.iter().map(|r| r.0).collect();
    Ok(GapBand {
        gap: mean_se(&gaps),
        bound: 2.0 * obj.lipschitz() * radius / (n as f64).sqrt(),
        inside: rows.iter().filter(|r| r.1).count() as f64 / replicates as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::Instance;
    use crate::presets::{hinge_distribution, hinge_objective, single_atom, HINGE_MIN_RISK};

    #[test]
    fn clip_examples() {
        let spec = ClipSpec::new(1.0, 2.0).unwrap();
        assert_eq!(clip(0.5, &spec), 0.5);
        assert_eq!(clip(2.0, &spec), 1.0);
        assert_eq!(clip(-7.0, &spec), -1.0);
        assert!(ClipSpec::new(0.0, 1.0).is_err());
        check_loss_assumption(&ScalarLoss::hinge(), &spec, &[-1.0, 1.0]).unwrap();
        // a fractional label breaks it: loss(2, 0.3) = 0.4 < loss(1, 0.3) = 0.7
        assert!(check_loss_assumption(&ScalarLoss::hinge(), &spec, &[0.3]).is_err());
        // absolute loss with a loss bound that is too small
        let abs = ScalarLoss::absolute(1.0).unwrap();
        assert!(check_loss_assumption(&abs, &ClipSpec::new(1.0, 0.5).unwrap(), &[1.0]).is_err());
    }

    #[test]
    fn excess_examples() {
        let obj = ConvexObjective::Linear(crate::objectives::LinearObjective {
            lipschitz: 2.0,
            dim: 1,
        });
        let dist = FiniteDistribution::single(Instance::scalar(1.0));
        let e = excess_population_risk(&dist, &obj, &[0.0], 1.0, 10_000).unwrap();
        assert!((e.value - 2.0).abs() <= e.tolerance);
        let e = excess_population_risk(
            &hinge_distribution(),
            &hinge_objective(),
            &[0.0; 3],
            2.0,
            10_000,
        )
        .unwrap();
        assert!(e.value >= -e.tolerance);
    }

    #[test]
    fn hinge_oracle_reaches_the_minimum() {
        let m = hinge_distribution().measure();
        let o = constrained_min_measure(&hinge_objective(), &m, 2.0, 100_000).unwrap();
        assert!(o.value - HINGE_MIN_RISK < 1e-4, "{}", o.value);
    }

    #[test]
    fn rademacher_linear_examples() {
        let one = SampleSet::from_instances(vec![Instance::glm(vec![0.6, 0.8], 1.0)]).unwrap();
        let (v, se) = rademacher_linear(&one, 1.0, 100, 3).unwrap();
        assert!((v - 1.0).abs() < 1e-12 && se < 1e-12);
        assert_eq!(rademacher_linear(&one, 0.0, 100, 3).unwrap().0, 0.0);
        assert!(rademacher_linear(&one, 1.0, 99, 3).is_err());
        let n = 64;
        let unit = SampleSet::from_instances(
            (0..n)
                .map(|i| Instance::glm(vec![(i as f64).cos(), (i as f64).sin()], 1.0))
                .collect(),
        )
        .unwrap();
        let m = 1000;
        let (v, _) = rademacher_linear(&unit, 1.0, m, 5).unwrap();
        assert!(v <= 1.0 / (n as f64).sqrt() * (1.0 + 3.0 / (m as f64).sqrt()));
        let (v2, _) = rademacher_linear(&unit, 2.0, m, 5).unwrap();
        assert!((v2 - 2.0 * v).abs() < 1e-12);
    }

    #[test]
    fn rademacher_glm_ball_properties() {
        let s = sample(&hinge_distribution(), 50, 4, 0).unwrap();
        let origin = ShiftedBall::new(WeightVector::zeros(3), 1.0).unwrap();
        let shifted = ShiftedBall::new(WeightVector::from_vec(vec![0.3, -2.0, 1.0]), 1.0).unwrap();
        let a = rademacher_glm_ball(&s, &ScalarLoss::hinge(), &origin, 400, 8).unwrap();
        let b = rademacher_glm_ball(&s, &ScalarLoss::hinge(), &shifted, 400, 8).unwrap();
        assert_eq!(a.contraction, b.contraction);
        assert_eq!(a.contraction, rademacher_linear(&s, 1.0, 400, 8).unwrap());
        assert!(a.direct_lower.0 <= a.contraction.0 + 3.0 * (a.direct_lower.1 + a.contraction.1));
    }

    #[test]
    fn shifted_ball_projection() {
        let ball = ShiftedBall::new(WeightVector::from_vec(vec![1.0, 1.0]), 0.5).unwrap();
        let p = ball.project(&[3.0, 1.0]);
        assert!((p[0] - 1.5).abs() < 1e-12 && (p[1] - 1.0).abs() < 1e-12);
        assert_eq!(ball.project(&[1.2, 1.1]).as_slice(), &[1.2, 1.1]);
    }

    #[test]
    fn hp_single_atom_is_optimization_only() {
        let (obj, dist) = single_atom();
        let spec = ClipSpec::new(1.0, 1.0).unwrap();
        let cfg = GdConfig::new(0.05, 50);
        let r = hp_experiment(&dist, &obj, &spec, 16, &cfg, 20, 1, &[0.1, 0.01], 10_000).unwrap();
        for row in &r.rows {
            assert!(row.quantile <= cfg.eta + 1e-9, "{}", row.quantile);
        }
        let again =
            hp_experiment(&dist, &obj, &spec, 16, &cfg, 20, 1, &[0.1, 0.01], 10_000).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn gap_band_on_hinge() {
        let cfg = GdConfig::one_over_l_sqrt_t(1.0, 128);
        let g = gap_band_experiment(
            &hinge_objective(),
            &hinge_distribution(),
            &cfg,
            128,
            100,
            2,
            0.5,
        )
        .unwrap();
        assert!(g.holds(), "{g:?}");
    }
}
